#include "shad3s/checkpoint.hpp"

#include <json.hpp>

#include "shad3s/error.hpp"

namespace shad3s {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json wiring(const BundleSpec& s) {
  auto gen = [](const GeneratorSpec& g) { return json{{"in", g.in_channels}, {"out", g.out_channels}}; };
  auto disc = [](const DiscriminatorSpec& d) { return json{{"in", d.in_channels}}; };
  if (s.kind == ModelKind::direct)
    return {{"generator", gen(s.direct_generator())}, {"discriminator", disc(s.direct_discriminator())}};
  return {{"mask_generator", gen(s.mask_generator())},
          {"sketch_generator", gen(s.sketch_generator())},
          {"mask_discriminator", disc(s.mask_discriminator())},
          {"sketch_discriminator", disc(s.sketch_discriminator())}};
}

json spec_json(const BundleSpec& s) {
  return {{"kind", to_string(s.kind)},
          {"variant", to_string(s.variant)},
          {"base_width", s.base_width},
          {"max_width", s.max_width},
          {"depth", s.depth},
          {"disc_base_width", s.disc_base_width},
          {"resolution", s.resolution}};
}

BundleSpec spec_from(const json& j) {
  BundleSpec s;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "direct") s.kind = ModelKind::direct;
  else if (kind == "split") s.kind = ModelKind::split;
  else throw FormatError("unknown model kind '" + kind + "'");
  s.variant = generator_variant_from_string(j.at("variant").get<std::string>());
  s.base_width = j.at("base_width").get<int>();
  s.max_width = j.at("max_width").get<int>();
  s.depth = j.at("depth").get<int>();
  s.disc_base_width = j.at("disc_base_width").get<int>();
  s.resolution = j.at("resolution").get<int>();
  return s;
}

std::vector<std::pair<std::string, torch::nn::Module*>> members(ModelBundle& b) {
  std::vector<std::pair<std::string, torch::nn::Module*>> out;
  if (b.direct) out.emplace_back("generator", b.direct.get());
  if (b.direct_disc) out.emplace_back("discriminator", b.direct_disc.get());
  if (b.mask_gen) out.emplace_back("mask_generator", b.mask_gen.get());
  if (b.sketch_gen) out.emplace_back("sketch_generator", b.sketch_gen.get());
  if (b.mask_disc) out.emplace_back("mask_discriminator", b.mask_disc.get());
  if (b.sketch_disc) out.emplace_back("sketch_discriminator", b.sketch_disc.get());
  return out;
}

json read_meta(torch::serialize::InputArchive& archive, const fs::path& path) {
  c10::IValue value;
  if (!archive.try_read("shad3s_meta", value) || !value.isString())
    throw FormatError(path.string() + " is not a shad3s checkpoint");
  json meta;
  try {
    meta = json::parse(value.toStringRef());
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": corrupt checkpoint metadata");
  }
  const int version = meta.value("version", 0);
  if (version != kCheckpointVersion)
    throw FormatError(path.string() + ": checkpoint version " + std::to_string(version) + " is not supported");
  return meta;
}

torch::serialize::InputArchive open_archive(const fs::path& path) {
  if (!fs::exists(path)) throw NotFoundError("checkpoint not found: " + path.string());
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error&) {
    throw FormatError(path.string() + " is not a readable checkpoint archive");
  }
  return archive;
}

}  // namespace

std::string spec_to_json(const BundleSpec& spec) { return spec_json(spec).dump(); }

BundleSpec spec_from_json(const std::string& text) {
  try {
    return spec_from(json::parse(text));
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad model spec: ") + e.what());
  }
}

void save_checkpoint(ModelBundle& bundle, const fs::path& path, int epoch, const std::string& note) {
  const json meta{{"version", kCheckpointVersion},
                  {"spec", spec_json(bundle.spec())},
                  {"wiring", wiring(bundle.spec())},
                  {"epoch", epoch},
                  {"note", note}};
  torch::serialize::OutputArchive archive;
  archive.write("shad3s_meta", c10::IValue(meta.dump()));
  for (auto& [name, module] : members(bundle)) {
    torch::serialize::OutputArchive sub;
    module->save(sub);
    archive.write(name, sub);
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  archive.save_to(path.string());
}

CheckpointInfo read_checkpoint_info(const fs::path& path) {
  auto archive = open_archive(path);
  const json meta = read_meta(archive, path);
  CheckpointInfo info;
  info.spec = spec_from(meta.at("spec"));
  info.epoch = meta.value("epoch", 0);
  info.note = meta.value("note", std::string());
  if (meta.at("wiring") != wiring(info.spec))
    throw FormatError(path.string() + ": recorded channel wiring does not match its model spec");
  return info;
}

ModelBundle load_checkpoint(const fs::path& path) {
  auto archive = open_archive(path);
  const json meta = read_meta(archive, path);
  const BundleSpec spec = spec_from(meta.at("spec"));
  if (meta.at("wiring") != wiring(spec))
    throw FormatError(path.string() + ": recorded channel wiring does not match its model spec");
  ModelBundle bundle(spec);
  for (auto& [name, module] : members(bundle)) {
    torch::serialize::InputArchive sub;
    if (!archive.try_read(name, sub)) throw FormatError(path.string() + ": missing weights for " + name);
    try {
      module->load(sub);
    } catch (const c10::Error& e) {
      throw FormatError(path.string() + ": weights for " + name + " do not fit the recorded architecture");
    }
  }
  bundle.eval();
  return bundle;
}

ModelBundle load_checkpoint(const fs::path& path, const BundleSpec& expected) {
  const auto info = read_checkpoint_info(path);
  if (!(info.spec == expected))
    throw FormatError(path.string() + " holds a " + spec_to_json(info.spec) + " model, expected " +
                      spec_to_json(expected));
  return load_checkpoint(path);
}

}  // namespace shad3s
