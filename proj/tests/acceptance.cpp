// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits non-zero if any
// fails. An optional argument restricts the run to criteria whose name contains it.
#include <json.hpp>
#include <sys/wait.h>
#include <torch/torch.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include "oracles.hpp"
#include "shad3s/checkpoint.hpp"
#include "shad3s/classifier.hpp"
#include "shad3s/dataset.hpp"
#include "shad3s/inference.hpp"
#include "shad3s/metrics.hpp"
#include "shad3s/render.hpp"
#include "shad3s/service.hpp"
#include "shad3s/tam.hpp"
#include "shad3s/training.hpp"

// After Eigen: resolv.h defines _res.
#include <httplib.h>

using namespace shad3s;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and budgets.
constexpr double kDatagenBudgetS = 120.0;
constexpr double kShadowAgreement = 0.999;
constexpr double kSilhouetteHausdorffPx = 1.5;
constexpr double kSsimTol = 1e-6;
constexpr double kPsnrOffset = 48.1308;
constexpr double kPsnrTol = 1e-3;
constexpr double kIsOneHotTol = 1e-3;
constexpr double kIsUniformTol = 1e-6;
constexpr double kLossTol = 1e-6;
constexpr double kGradRtol = 1e-3;
constexpr double kGradAtol = 1e-8;
constexpr std::int64_t kMinParams = 10'000'000;
constexpr std::int64_t kMaxParams = 14'000'000;
constexpr double kToyL1Ratio = 0.6;
constexpr double kDAccLow = 0.55;
constexpr double kDAccHigh = 0.95;
constexpr double kToyBudgetS = 1800.0;

// Toy training set-up.
constexpr int kToyRes = 64;
constexpr int kToyEpochs = 20;
constexpr int kToyScenes = 64;  // x 4 poses = 256 points
constexpr int kToyHeldOutScenes = 8;
constexpr int kToyWidth = 32;

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("shad3s_accept_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

const TamCatalog& catalog() {
  static const TamCatalog c = TamCatalog::builtin(1024);
  return c;
}

std::vector<DataPoint> render_subset(int k, int scenes, int poses, std::uint64_t seed, int res) {
  SubsetSpec spec{k, scenes, poses, seed, {}, res};
  std::vector<DataPoint> out;
  for (int s = 0; s < scenes; ++s)
    for (int p = 0; p < poses; ++p) out.push_back(generate_point(spec, s, p, catalog()));
  return out;
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(SHAD3S_BIN) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome dataset_determinism() {
  std::vector<std::string> hashes;
  double slowest = 0;
  for (const char* name : {"a", "b"}) {
    const auto dir = scratch(std::string("datagen_") + name);
    const auto t0 = Clock::now();
    if (run_cli("datagen --max-solids 3 --scenes 4 --poses 4 --seed 11 --out " + dir.string()) != 0)
      return {false, "datagen exited with an error"};
    slowest = std::max(slowest, seconds_since(t0));
    hashes.push_back(Manifest::load(dir).content_hash());
  }
  return {hashes[0] == hashes[1] && slowest < kDatagenBudgetS,
          "hash " + hashes[0].substr(0, 12) + (hashes[0] == hashes[1] ? " twice" : " vs " + hashes[1].substr(0, 12)) +
              ", slowest run " + fmt(slowest, 3) + " s"};
}

Outcome mask_partition() {
  const auto pts = render_subset(3, 16, 4, 5, 256);
  std::size_t bad = 0, total = 0;
  for (const auto& p : pts) {
    const auto& r = p.planes;
    for (std::size_t i = 0; i < r.coverage.size(); ++i) {
      ++total;
      const int parts = r.hi[i] + r.mid[i] + r.sha[i];
      if (parts != (r.coverage[i] ? 1 : 0)) ++bad;
    }
  }
  return {bad == 0 && pts.size() == 64, std::to_string(pts.size()) + " points, " + std::to_string(bad) + " of " +
                                            std::to_string(total) + " pixels violate the partition"};
}

Outcome shadow_oracle() {
  RenderConfig rc;
  rc.width = rc.height = 64;
  std::size_t agree = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto scene = sample_scene(1000 + seed, 1 + static_cast<int>(seed % 6));
    const auto pose = CameraPose::framing(scene, 18.0 * static_cast<double>(seed), 25 + static_cast<double>(seed));
    const auto light = LightSpec::from_angles(47.0 * static_cast<double>(seed), 30 + 2.0 * static_cast<double>(seed));
    const auto shw = render_shadow_mask(scene, pose, light, rc);
    const oracle::TestCamera cam(pose, 64, 64);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        const Vec3 d = cam.ray(x, y);
        bool expected = false;
        if (d.y() < 0) {
          const double tg = -cam.eye.y() / d.y();
          if (!oracle::first_entry(scene, cam.eye, d, 0.0, tg, 0.004)) {
            const Vec3 g = cam.eye + tg * d;
            expected = oracle::first_entry(scene, g, light.direction, 0.0, 12.0, 0.004).has_value();
          }
        }
        ++total;
        agree += expected == static_cast<bool>(shw(x, y));
      }
  }
  const double frac = static_cast<double>(agree) / static_cast<double>(total);
  return {frac >= kShadowAgreement, "agreement " + fmt(100 * frac, 6) + "% over 20 scenes"};
}

Outcome sphere_silhouette() {
  Transform t;
  const CsgScene scene{CsgNode::leaf(Primitive::sphere(1.0), t)};
  const auto pose = CameraPose::framing(scene, 0, 30);
  const auto d = render_diffuse(scene, pose, LightSpec::from_angles(0, 45));
  const auto cnt = extract_contours(d.depth, d.normals, d.coverage, d.depth_extent);
  const double radius = std::tan(std::asin(1.0 / pose.distance)) / std::tan(0.5 * pose.fov_deg * oracle::kDeg) * 128.0;
  const double c = 127.5;
  // Directed distances both ways.
  double worst = 0;
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x < 256; ++x)
      if (cnt(x, y)) worst = std::max(worst, std::abs(std::hypot(x - c, y - c) - radius));
  for (int i = 0; i < 1440; ++i) {
    const double a = i * std::numbers::pi / 720.0;
    const double px = c + radius * std::cos(a), py = c + radius * std::sin(a);
    double best = 1e9;
    for (int y = static_cast<int>(py) - 4; y <= static_cast<int>(py) + 4; ++y)
      for (int x = static_cast<int>(px) - 4; x <= static_cast<int>(px) + 4; ++x)
        if (cnt.contains(x, y) && cnt(x, y)) best = std::min(best, std::hypot(x - px, y - py));
    worst = std::max(worst, best);
  }
  return {count_set(cnt) > 0 && worst <= kSilhouetteHausdorffPx, "Hausdorff " + fmt(worst, 3) + " px"};
}

Outcome tam_nesting() {
  double worst = 0;
  bool all = catalog().size() == 6;
  for (const auto& f : catalog().families()) {
    const auto r = validate_tam(f, 0.0);
    all = all && r.accepted;
    worst = std::max(worst, r.violation_fraction);
  }
  return {all && worst == 0.0, std::to_string(catalog().size()) + " families, worst violation " + fmt(worst)};
}

Outcome metric_identities() {
  Gray8 x(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int i = 0; i < 64; ++i) x(i, y) = static_cast<std::uint8_t>((i * 7 + y * 13) % 250);
  Gray8 shifted = x;
  for (auto& v : shifted.pixels()) v = static_cast<std::uint8_t>(v + 1);
  const double s = ssim(x, x);
  const double p = psnr(x, shifted);
  std::vector<std::vector<double>> onehot;
  for (int i = 0; i < 400; ++i) {
    std::vector<double> v(4, 0.0);
    v[static_cast<std::size_t>(i % 4)] = 1.0;
    onehot.push_back(v);
  }
  std::vector<std::vector<double>> uniform(400, std::vector<double>(4, 0.25));
  const double is1 = inception_score(onehot, 1).mean;
  const double is2 = inception_score(uniform, 10).mean;
  const bool ok = std::abs(s - 1) <= kSsimTol && std::abs(p - kPsnrOffset) <= kPsnrTol &&
                  std::abs(is1 - 4) <= kIsOneHotTol && std::abs(is2 - 1) <= kIsUniformTol;
  return {ok, "SSIM " + fmt(s, 10) + ", PSNR " + fmt(p, 8) + " dB, IS one-hot " + fmt(is1, 8) + ", IS uniform " +
                  fmt(is2, 8)};
}

Outcome loss_identities() {
  const auto s = torch::rand({2, 1, 64, 64}, torch::kFloat64);
  const auto m = torch::rand({2, 4, 64, 64}, torch::kFloat64);
  const auto half = torch::full({2, 1, 30, 30}, 0.5, torch::kFloat64);
  const double l1 = l1_distance(s, s).item<double>();
  const double direct = discriminator_objective(half, half).item<double>();
  const double split = split_losses(m, m, s, s, half, half, half, half).objective.item<double>();
  const bool ok = l1 == 0.0 && std::abs(direct - 2 * std::log(0.5)) <= kLossTol &&
                  std::abs(split - 4 * std::log(0.5)) <= kLossTol;
  return {ok, "L1 " + fmt(l1) + ", direct " + fmt(direct, 10) + ", split " + fmt(split, 10)};
}

Outcome gradient_check() {
  int checked = 0, bad = 0;
  double worst = 0;
  for (const std::string name : {"dm", "sp", "se"}) {
    torch::manual_seed(31);
    auto spec = BundleSpec::for_model(name);
    spec.base_width = 4;
    spec.max_width = 8;
    spec.depth = 2;
    spec.disc_base_width = 4;
    spec.resolution = 8;
    ModelBundle b(spec);
    // Deterministic miniature: no dropout, one strided discriminator layer for 8 x 8 maps.
    for (auto* g : {&b.direct, &b.mask_gen, &b.sketch_gen})
      if (*g) {
        auto gs = (*g)->spec();
        gs.dropout_p = 0;
        *g = Generator(gs);
      }
    for (auto* d : {&b.direct_disc, &b.mask_disc, &b.sketch_disc})
      if (*d) {
        auto ds = (*d)->spec();
        ds.n_strided = 1;
        *d = Discriminator(ds);
      }
    b.to(torch::kFloat64);
    b.train(true);
    TrainingSet batch{torch::rand({2, 1, 8, 8}), torch::rand({2, 1, 8, 8}), torch::rand({2, 4, 8, 8}),
                      torch::rand({2, 4, 8, 8}).gt(0.5).to(torch::kFloat32), torch::rand({2, 1, 8, 8}), {1, 1}};
    batch = batch.to(torch::kFloat64);
    auto loss = [&] { return generator_loss(b, batch, generate(b, batch), 0.01).total; };
    auto params = b.generator_parameters();
    loss().backward();
    torch::NoGradGuard no_grad;
    for (auto& p : params) {
      const auto g = p.grad().clone().view(-1);
      auto flat = p.view(-1);
      for (std::int64_t i = 0; i < flat.numel(); ++i) {
        const double orig = flat[i].item<double>();
        flat[i] = orig + 1e-6;
        const double up = loss().item<double>();
        flat[i] = orig - 1e-6;
        const double down = loss().item<double>();
        flat[i] = orig;
        const double numeric = (up - down) / 2e-6, analytic = g[i].item<double>();
        const double err = std::abs(numeric - analytic);
        const double scale = std::max(std::abs(numeric), std::abs(analytic));
        if (err > kGradRtol * scale + kGradAtol) ++bad;
        if (scale > 1e-6) worst = std::max(worst, err / scale);
        ++checked;
      }
    }
  }
  return {bad == 0, std::to_string(checked) + " coordinates over dm/sp/se, " + std::to_string(bad) +
                        " outside rtol, worst relative error " + fmt(worst, 3)};
}

Outcome parameter_counts() {
  const auto base = BundleSpec::for_model("dm").direct_generator();
  auto se = base;
  se.variant = GeneratorVariant::unet_se;
  const auto nb = parameter_count(*Generator(base));
  const auto ns = parameter_count(*Generator(se));
  // SE gates after every encoder stage and every decoder stage but the output one.
  std::int64_t gates = 0;
  auto gate = [](std::int64_t c) {
    const std::int64_t h = std::max<std::int64_t>(1, c / 16);
    return 2 * c * h + h + c;
  };
  for (int i = 0; i < base.depth; ++i) gates += gate(base.width(i));
  for (int j = 1; j < base.depth; ++j) gates += gate(base.width(j - 1));
  return {nb >= kMinParams && nb <= kMaxParams && ns - nb == gates,
          "unet " + std::to_string(nb) + ", unet_se " + std::to_string(ns) + " = unet + " + std::to_string(ns - nb) +
              " (SE blocks " + std::to_string(gates) + ")"};
}

struct ToyData {
  TrainingSet train, held_out;
};

const ToyData& toy_data() {
  static const ToyData d = [] {
    ToyData t;
    t.train = TrainingSet::from_points(render_subset(2, kToyScenes, 4, 101, kToyRes));
    t.held_out = TrainingSet::from_points(render_subset(2, kToyHeldOutScenes, 4, 202, kToyRes));
    return t;
  }();
  return d;
}

BundleSpec toy_spec(const std::string& name) {
  auto s = BundleSpec::for_model(name);
  s.base_width = kToyWidth;
  s.disc_base_width = kToyWidth;
  s.depth = 6;
  s.resolution = kToyRes;
  return s;
}

fs::path toy_checkpoint;

struct ToyRun {
  FitResult fit;
  double seconds = 0;
  bool diverged = false;
  std::string error;
};

ToyRun toy_train(const std::string& name, int epochs, const fs::path& out) {
  torch::manual_seed(7);
  ModelBundle b(toy_spec(name));
  TrainConfig c;
  c.epochs = epochs;
  c.seed = 7;
  Trainer t(b, c);
  ToyRun r;
  const auto t0 = Clock::now();
  try {
    r.fit = t.fit(toy_data().train, toy_data().held_out, out, [&](const EpochStats& e) {
      std::cerr << "  " << name << " epoch " << e.epoch << " d_loss " << fmt(e.d_loss) << " g_adv " << fmt(e.g_adv)
                << " g_l1 " << fmt(e.g_l1) << " d_acc " << fmt(e.d_accuracy) << " val_l1 " << fmt(e.val_l1) << "\n";
      if (!std::isfinite(e.d_loss) || !std::isfinite(e.val_l1)) throw DivergenceError("non-finite epoch statistics");
    });
  } catch (const DivergenceError& e) {
    r.diverged = true;
    r.error = e.what();
  }
  r.seconds = seconds_since(t0);
  save_checkpoint(b, out / (name + ".bin"), epochs);
  return r;
}

Outcome toy_training() {
  const auto dir = scratch("toy");
  const auto dm = toy_train("dm", kToyEpochs, dir);
  toy_checkpoint = dir / "dm.bin";
  if (dm.diverged) return {false, "dm diverged: " + dm.error};
  const double first = dm.fit.initial_val_l1, last = dm.fit.epochs.back().val_l1;
  bool acc_ok = true;
  std::string accs;
  for (std::size_t e = dm.fit.epochs.size() - 5; e < dm.fit.epochs.size(); ++e) {
    const double a = dm.fit.epochs[e].d_accuracy;
    acc_ok = acc_ok && a > kDAccLow && a < kDAccHigh;
    accs += (accs.empty() ? "" : "/") + fmt(a, 3);
  }
  std::string split_note;
  bool split_ok = true;
  for (const std::string name : {"sp", "se"}) {
    const auto r = toy_train(name, kToyEpochs, dir);
    const double l0 = r.fit.initial_val_l1, l1 = r.fit.epochs.empty() ? l0 : r.fit.epochs.back().val_l1;
    const bool ok = !r.diverged && std::isfinite(l1) && l1 < l0;
    split_ok = split_ok && ok;
    split_note += ", " + name + (ok ? " stable" : " FAILED") + " (val L1 " + fmt(l0, 3) + " -> " + fmt(l1, 3) + ", " +
                  fmt(r.seconds, 3) + " s)";
  }
  const bool l1_ok = last <= kToyL1Ratio * first;
  const bool time_ok = dm.seconds <= kToyBudgetS;
  return {l1_ok && acc_ok && time_ok && split_ok,
          "dm held-out L1 " + fmt(first, 3) + " -> " + fmt(last, 3) + " (ratio " + fmt(last / first, 3) +
              "), D accuracy last 5 epochs " + accs + ", " + fmt(dm.seconds, 4) + " s" + split_note};
}

Outcome inception_trend() {
  // Default classifier: predicts the primitive count (1..6) from 64 x 64 sketches.
  std::vector<torch::Tensor> xs, ys;
  for (int k = 1; k <= 6; ++k) {
    const auto points = render_subset(k, 64, 4, 300 + static_cast<std::uint64_t>(k), 64);
    std::vector<std::int64_t> leaves;
    for (const auto& p : points) leaves.push_back(p.meta.leaf_count - 1);
    xs.push_back(TrainingSet::from_points(points).sketch);
    ys.push_back(torch::tensor(leaves));
  }
  ClassifierConfig cc;
  cc.seed = 5;
  torch::manual_seed(5);
  auto clf = train_classifier(torch::cat(xs), torch::cat(ys), cc);
  const auto fn = as_classifier(clf);
  std::vector<double> scores;
  for (int k = 1; k <= 3; ++k) {
    std::vector<Image> sketches;
    for (const auto& p : render_subset(k, 64, 4, 900 + static_cast<std::uint64_t>(k), 64)) sketches.push_back(p.planes.sk);
    scores.push_back(inception_score(sketches, fn, 10).mean);
  }
  return {scores[0] <= scores[1] && scores[1] <= scores[2],
          "IS k=1,2,3: " + fmt(scores[0]) + ", " + fmt(scores[1]) + ", " + fmt(scores[2])};
}

Outcome service_determinism() {
  if (toy_checkpoint.empty() || !fs::exists(toy_checkpoint)) {
    const auto dir = scratch("service");
    torch::manual_seed(3);
    ModelBundle b(toy_spec("dm"));
    toy_checkpoint = dir / "dm.bin";
    save_checkpoint(b, toy_checkpoint);
  }
  ServiceConfig config;
  config.checkpoints = {toy_checkpoint};
  config.port = 0;
  Service service(config);
  const int port = service.bind();
  std::thread server([&] { service.listen(); });
  service.wait_until_ready();
  httplib::Client client("127.0.0.1", port);

  const auto cnt = render_subset(2, 1, 1, 77, 256).front().planes.cnt;
  const auto bytes = encode_png(contour_image(cnt));
  const std::string contour(bytes.begin(), bytes.end());
  const nlohmann::json params{{"azimuth", 70}, {"elevation", 35}, {"texture", catalog().at(3).id}};
  httplib::MultipartFormDataItems items{{"contour", contour, "c.png", "image/png"},
                                        {"params", params.dump(), "", "application/json"}};
  auto a = client.Post("/v1/complete", items);
  auto b = client.Post("/v1/complete", items);
  auto h = client.Get("/v1/illumination?azimuth=70&elevation=35");
  service.stop();
  server.join();
  if (!a || !b || !h) return {false, "request failed"};
  const auto hint = encode_png(render_gnomon_hint(LightSpec::from_angles(70, 35), 256, 256));
  const bool same = a->status == 200 && a->body == b->body;
  const bool hint_same = h->status == 200 && h->body == std::string(hint.begin(), hint.end());
  return {same && hint_same, std::string("completion ") + (same ? "byte-identical" : "differs") + " (" +
                                 std::to_string(a->body.size()) + " bytes), hint " +
                                 (hint_same ? "equals renderer output" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string only = argc > 1 ? argv[1] : "";
  torch::set_num_threads(static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"dataset-determinism", dataset_determinism},
      {"mask-partition", mask_partition},
      {"shadow-oracle", shadow_oracle},
      {"sphere-silhouette", sphere_silhouette},
      {"tam-nesting", tam_nesting},
      {"metric-identities", metric_identities},
      {"loss-identities", loss_identities},
      {"gradient-check", gradient_check},
      {"parameter-count", parameter_counts},
      {"toy-training", toy_training},
      {"inception-trend", inception_trend},
      {"service-determinism", service_determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && name.find(only) == std::string::npos) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << fmt(seconds_since(t0), 3) << " s]"
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
