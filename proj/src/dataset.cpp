#include "shad3s/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include "shad3s/random.hpp"

namespace shad3s {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& name) {
  for (auto s : {Split::train, Split::val, Split::test})
    if (to_string(s) == name) return s;
  throw FormatError("unknown split '" + name + "'");
}

namespace {

void check_spec(const SubsetSpec& spec) {
  if (spec.k < 1 || spec.k > kMaxSolids) throw RangeError("subset k must lie in [1, 6]");
  if (spec.n_scenes < 0 || spec.n_poses < 1) throw RangeError("scene and pose counts must be positive");
  if (spec.resolution < 8) throw RangeError("resolution too small");
}

std::uint64_t scene_seed(const SubsetSpec& spec, int scene_index) {
  return derive_seed(spec.seed, {static_cast<std::uint64_t>(spec.k), static_cast<std::uint64_t>(scene_index)});
}

std::string scene_id_for(int k, int scene_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "k%d-s%05d", k, scene_index);
  return buf;
}

std::string point_path(int k, int scene_index, int pose) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "k%d/scene%05d/pose%02d", k, scene_index, pose);
  return buf;
}

struct SceneDraw {
  LightSpec light;
  std::size_t family = 0;
};

SceneDraw draw_scene_conditions(std::uint64_t seed, std::size_t families) {
  Rng rng = make_rng(derive_seed(seed, {0x119}));
  SceneDraw d;
  const double az = uniform(rng, 0.0, 360.0);
  const double el = uniform(rng, 20.0, 70.0);
  d.light = LightSpec::from_angles(az, el);
  d.family = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(families) - 1));
  return d;
}

json light_json(const LightSpec& l) {
  return {{"azimuth", l.azimuth_deg()},
          {"elevation", l.elevation_deg()},
          {"direction", {l.direction.x(), l.direction.y(), l.direction.z()}}};
}

json row_json(const DataPointMeta& m) {
  return {{"path", m.path},
          {"k", m.k},
          {"scene_index", m.scene_index},
          {"scene_id", m.scene_id},
          {"pose", m.pose},
          {"split", to_string(m.split)},
          {"light", light_json(m.light)},
          {"camera",
           {{"azimuth", m.camera.azimuth_deg},
            {"elevation", m.camera.elevation_deg},
            {"distance", m.camera.distance},
            {"fov", m.camera.fov_deg},
            {"target", {m.camera.target.x(), m.camera.target.y(), m.camera.target.z()}}}},
          {"tam_family_id", m.tam_family_id},
          {"seeds", {{"base", m.base_seed}, {"scene", m.scene_seed}, {"pose", m.pose_seed}}},
          {"flags", {{"background_hatch", m.flags.background_hatch}, {"no_shadows", m.flags.no_shadows}}},
          {"resolution", m.resolution},
          {"leaf_count", m.leaf_count},
          {"digest", m.digest}};
}

DataPointMeta row_from_json(const json& j) {
  DataPointMeta m;
  m.path = j.at("path").get<std::string>();
  m.k = j.at("k").get<int>();
  m.scene_index = j.at("scene_index").get<int>();
  m.scene_id = j.at("scene_id").get<std::string>();
  m.pose = j.at("pose").get<int>();
  m.split = split_from_string(j.at("split").get<std::string>());
  const auto& d = j.at("light").at("direction");
  m.light.direction = Vec3(d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<double>());
  const auto& c = j.at("camera");
  m.camera.azimuth_deg = c.at("azimuth").get<double>();
  m.camera.elevation_deg = c.at("elevation").get<double>();
  m.camera.distance = c.at("distance").get<double>();
  m.camera.fov_deg = c.at("fov").get<double>();
  const auto& t = c.at("target");
  m.camera.target = Vec3(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
  m.tam_family_id = j.at("tam_family_id").get<std::string>();
  m.base_seed = j.at("seeds").at("base").get<std::uint64_t>();
  m.scene_seed = j.at("seeds").at("scene").get<std::uint64_t>();
  m.pose_seed = j.at("seeds").at("pose").get<std::uint64_t>();
  m.flags.background_hatch = j.at("flags").at("background_hatch").get<bool>();
  m.flags.no_shadows = j.at("flags").at("no_shadows").get<bool>();
  m.resolution = j.at("resolution").get<int>();
  m.leaf_count = j.value("leaf_count", 0);
  m.digest = j.value("digest", std::string());
  return m;
}

}  // namespace

CsgScene subset_scene(const SubsetSpec& spec, int scene_index) {
  check_spec(spec);
  return sample_scene(scene_seed(spec, scene_index), spec.k);
}

DataPoint render_point(const CsgScene& scene, const CameraPose& pose, const LightSpec& light, const TamFamily& family,
                       std::uint64_t crop_seed, const DatasetFlags& flags, int resolution) {
  RenderConfig config;
  config.width = resolution;
  config.height = resolution;
  DataPoint point;
  point.crops = crop(family, crop_seed, std::min(resolution, family.resolution()));
  point.planes = render_planes(scene, pose, light, point.crops, PlaneOptions{flags.background_hatch, flags.no_shadows},
                               config);
  auto& m = point.meta;
  m.light = light;
  m.camera = pose;
  m.tam_family_id = family.id;
  m.flags = flags;
  m.resolution = resolution;
  m.leaf_count = scene.empty() ? 0 : scene.leaf_count();
  return point;
}

DataPoint generate_point(const SubsetSpec& spec, int scene_index, int pose_index, const TamCatalog& catalog) {
  check_spec(spec);
  if (catalog.size() == 0) throw FormatError("empty TAM catalog");
  const std::uint64_t sseed = scene_seed(spec, scene_index);
  const CsgScene scene = sample_scene(sseed, spec.k);
  const SceneDraw conditions = draw_scene_conditions(sseed, catalog.size());
  const TamFamily& family = catalog.at(conditions.family);

  const std::uint64_t pseed = derive_seed(sseed, {0x905e, static_cast<std::uint64_t>(pose_index)});
  Rng rng = make_rng(pseed);
  // Azimuth stratified over 64 sectors, elevation uniform.
  const int sector = spec.n_poses >= kAzimuthSectors
                         ? pose_index % kAzimuthSectors
                         : static_cast<int>((static_cast<long>(pose_index) * kAzimuthSectors) / spec.n_poses);
  const double azimuth = (sector + uniform(rng, 0.0, 1.0)) * 360.0 / kAzimuthSectors;
  const double elevation = uniform(rng, 10.0, 70.0);
  const CameraPose pose = CameraPose::framing(scene, azimuth, elevation);

  DataPoint point = render_point(scene, pose, conditions.light, family, pseed, spec.flags, spec.resolution);

  auto& m = point.meta;
  m.path = point_path(spec.k, scene_index, pose_index);
  m.k = spec.k;
  m.scene_index = scene_index;
  m.scene_id = scene_id_for(spec.k, scene_index);
  m.pose = pose_index;
  m.split = split_for_scene(m.scene_id);
  m.base_seed = spec.seed;
  m.scene_seed = sseed;
  m.pose_seed = pseed;
  return point;
}

EncodedPoint encode_point(const DataPoint& point) {
  const auto& p = point.planes;
  EncodedPoint out;
  out.files = {
      {"cnt.png", encode_png(contour_image(p.cnt))}, {"ill.png", encode_png(p.ill)},
      {"hi.png", encode_png(mask_to_image(p.hi))},    {"mid.png", encode_png(mask_to_image(p.mid))},
      {"sha.png", encode_png(mask_to_image(p.sha))},  {"shw.png", encode_png(mask_to_image(p.shw))},
      {"sk.png", encode_png(p.sk)},                   {"dif.png", encode_png(p.dif)},
  };
  for (int k = 0; k < 4; ++k)
    out.files.emplace_back("t" + std::to_string(k + 1) + ".png", encode_png(point.crops.tones[static_cast<std::size_t>(k)]));
  std::vector<std::uint8_t> all;
  for (const auto& [name, bytes] : out.files) {
    all.insert(all.end(), name.begin(), name.end());
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  out.digest = sha256_hex(all);
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

std::string Manifest::to_jsonl() const {
  std::string out;
  for (const auto& row : rows) out += row_json(row).dump() + "\n";
  return out;
}

Manifest Manifest::from_jsonl(const std::string& text) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      m.rows.push_back(row_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return m;
}

Manifest Manifest::load(const fs::path& root) {
  const auto bytes = read_file(root / "manifest.jsonl");
  return from_jsonl(std::string(bytes.begin(), bytes.end()));
}

void Manifest::save(const fs::path& root) const {
  fs::create_directories(root);
  write_text(root / "manifest.jsonl", to_jsonl());
}

std::string Manifest::content_hash() const { return sha256_hex(to_jsonl()); }

Manifest build_subset(const SubsetSpec& spec, const TamCatalog& catalog, const fs::path& root, int jobs) {
  check_spec(spec);
  jobs = std::max(1, jobs);
  std::vector<std::vector<DataPointMeta>> per_scene(static_cast<std::size_t>(spec.n_scenes));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(spec.n_scenes));
  std::atomic<int> next{0};

  auto worker = [&] {
    for (int s = next++; s < spec.n_scenes; s = next++) {
      try {
        for (int p = 0; p < spec.n_poses; ++p) {
          DataPoint point = generate_point(spec, s, p, catalog);
          const EncodedPoint encoded = encode_point(point);
          point.meta.digest = encoded.digest;
          const fs::path dir = root / point.meta.path;
          fs::create_directories(dir);
          for (const auto& [name, bytes] : encoded.files) write_file(dir / name, bytes);
          write_text(dir / "meta.json", row_json(point.meta).dump(2) + "\n");
          per_scene[static_cast<std::size_t>(s)].push_back(point.meta);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(s)] = std::current_exception();
      }
    }
  };

  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  Manifest manifest;
  std::exception_ptr first_error;
  for (std::size_t s = 0; s < per_scene.size(); ++s) {
    if (errors[s] && !first_error) first_error = errors[s];
    for (auto& row : per_scene[s]) manifest.rows.push_back(std::move(row));
  }
  if (first_error) {
    write_text(root / "manifest.partial.jsonl", manifest.to_jsonl());
    std::rethrow_exception(first_error);
  }
  return manifest;
}

Split split_for_scene(const std::string& scene_id, const std::array<double, 3>& ratios) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9 || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0)
    throw RangeError("split ratios must be non-negative and sum to 1");
  const double u = hash_unit("split:" + scene_id);
  if (u < ratios[0]) return Split::train;
  if (u < ratios[0] + ratios[1]) return Split::val;
  return Split::test;
}

Manifest split_assign(Manifest manifest, const std::array<double, 3>& ratios) {
  for (auto& row : manifest.rows) row.split = split_for_scene(row.scene_id, ratios);
  return manifest;
}

StoredPoint load_point(const fs::path& root, const DataPointMeta& row) {
  const fs::path dir = root / row.path;
  StoredPoint p;
  p.cnt = read_png(dir / "cnt.png");
  p.ill = read_png(dir / "ill.png");
  p.hi = read_png(dir / "hi.png");
  p.mid = read_png(dir / "mid.png");
  p.sha = read_png(dir / "sha.png");
  p.shw = read_png(dir / "shw.png");
  p.sk = read_png(dir / "sk.png");
  p.dif = read_png(dir / "dif.png");
  for (int k = 0; k < 4; ++k) p.tones[static_cast<std::size_t>(k)] = read_png(dir / ("t" + std::to_string(k + 1) + ".png"));
  return p;
}

}  // namespace shad3s
