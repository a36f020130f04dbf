// Command-line entry point: dataset generation, textures, training, evaluation and serving.
#include <CLI11.hpp>
#include <json.hpp>
#include <torch/torch.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "shad3s/checkpoint.hpp"
#include "shad3s/classifier.hpp"
#include "shad3s/dataset.hpp"
#include "shad3s/error.hpp"
#include "shad3s/inference.hpp"
#include "shad3s/metrics.hpp"
#include "shad3s/progressive.hpp"
#include "shad3s/service.hpp"
#include "shad3s/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace shad3s;

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

TamCatalog open_catalog(const std::string& dir, int resolution) {
  return dir.empty() ? TamCatalog::builtin(resolution) : TamCatalog::load(dir);
}

// Everything needed to rerun a command.
struct RunRecord {
  std::string command;
  json config = json::object();
  json seeds = json::object();
  json outputs = json::array();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void emit(const std::optional<fs::path>& path) const {
    const json doc{{"command", command},
                   {"config", config},
                   {"seeds", seeds},
                   {"version", SHAD3S_VERSION},
                   {"outputs", outputs},
                   {"wall_time_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
    if (path)
      write_text(*path, doc.dump(2) + "\n");
    else
      std::cerr << doc.dump() << "\n";
  }
};

// Resolved options in the config file format, plus the same as JSON.
void record_config(const CLI::App& app, RunRecord& run) {
  const auto text = app.config_to_str(true, false);
  std::istringstream in(text);
  for (const auto& item : CLI::ConfigINI().from_config(in)) {
    if (item.name == "++" || item.name == "--" || item.name == "config" || item.name == "run-manifest") continue;
    auto key = item.fullname();
    auto prefix = run.command + ".";
    std::replace(prefix.begin(), prefix.end(), ' ', '.');
    if (!key.starts_with(prefix)) continue;
    run.config[key] = item.inputs.size() == 1 ? json(item.inputs[0]) : json(item.inputs);
  }
}

struct DatagenArgs {
  int max_solids = 1, scenes = 16, poses = 64, jobs = 1, resolution = 256, tam_resolution = 1024;
  std::uint64_t seed = 0;
  std::string out, tam;
  bool background_hatch = false, no_shadows = false, all_subsets = false;
};

int run_datagen(const DatagenArgs& a, RunRecord& run) {
  const auto catalog = open_catalog(a.tam, a.tam_resolution);
  Manifest all;
  const int first = a.all_subsets ? 1 : a.max_solids;
  for (int k = first; k <= a.max_solids; ++k) {
    SubsetSpec spec{k, a.scenes, a.poses, a.seed, {a.background_hatch, a.no_shadows}, a.resolution};
    auto subset = build_subset(spec, catalog, a.out, a.jobs);
    for (auto& row : subset.rows) all.rows.push_back(std::move(row));
    std::cerr << "k=" << k << ": " << subset.rows.size() << " points\n";
  }
  all = split_assign(std::move(all));
  all.save(a.out);
  run.seeds["base"] = a.seed;
  run.outputs.push_back((fs::path(a.out) / "manifest.jsonl").string());
  std::cout << "manifest_hash=" << all.content_hash() << " points=" << all.rows.size() << "\n";
  return 0;
}

struct TrainArgs {
  std::string model = "dm", data, out = "runs/train", init;
  int epochs = 20, batch = 4, base_width = 64, max_width = 208, depth = 0, disc_width = 64, limit = 0;
  double lr = 2e-4, adv_weight = 0.01;
  std::uint64_t seed = 0;
  bool teacher_forcing = false;
};

std::vector<DataPointMeta> rows_of(const Manifest& m, Split split, int limit) {
  std::vector<DataPointMeta> rows;
  for (const auto& r : m.rows)
    if (r.split == split && (limit <= 0 || static_cast<int>(rows.size()) < limit)) rows.push_back(r);
  return rows;
}

int default_depth(int resolution) {
  int d = 0;
  while ((resolution >> (d + 1)) >= 1 && (resolution % (1 << (d + 1))) == 0 && d < 8) ++d;
  return d;
}

int run_train(const TrainArgs& a, RunRecord& run) {
  const auto manifest = Manifest::load(a.data);
  if (manifest.rows.empty()) throw FormatError("dataset has no points");
  auto train_rows = rows_of(manifest, Split::train, a.limit);
  auto val_rows = rows_of(manifest, Split::val, a.limit);
  if (train_rows.empty()) throw FormatError("dataset has no training points");
  if (val_rows.empty()) val_rows.assign(train_rows.begin(), train_rows.begin() + std::min<std::size_t>(train_rows.size(), 16));

  auto spec = BundleSpec::for_model(a.model);
  spec.resolution = manifest.rows.front().resolution;
  spec.base_width = a.base_width;
  spec.max_width = a.max_width;
  spec.disc_base_width = a.disc_width;
  spec.depth = a.depth > 0 ? a.depth : default_depth(spec.resolution);

  torch::manual_seed(a.seed);
  ModelBundle bundle = a.init.empty() ? ModelBundle(spec) : load_checkpoint(a.init, spec);
  TrainConfig config;
  config.adv_weight = a.adv_weight;
  config.lr = a.lr;
  config.batch_size = a.batch;
  config.epochs = a.epochs;
  config.teacher_forcing = a.teacher_forcing;
  config.seed = a.seed;
  config.validate();

  const auto train = TrainingSet::load(a.data, train_rows);
  const auto val = TrainingSet::load(a.data, val_rows);
  Trainer trainer(bundle, config);
  const auto result = trainer.fit(train, val, fs::path(a.out), [](const EpochStats& e) {
    std::cerr << "epoch " << e.epoch << " d_loss=" << e.d_loss << " g_adv=" << e.g_adv << " g_l1=" << e.g_l1
              << " d_acc=" << e.d_accuracy << " val_l1=" << e.val_l1 << "\n";
  });
  const auto final_path = fs::path(a.out) / (spec.model_name() + ".bin");
  save_checkpoint(bundle, final_path, a.epochs, config.to_json());
  run.seeds["train"] = a.seed;
  run.outputs = {final_path.string(), (fs::path(a.out) / "metrics.jsonl").string()};
  std::cout << "initial_val_l1=" << result.initial_val_l1
            << " final_val_l1=" << (result.epochs.empty() ? result.initial_val_l1 : result.epochs.back().val_l1) << "\n";
  return 0;
}

struct EvalArgs {
  std::string ckpt, data, out = "runs/eval", classifier, split = "test", progressive, tam;
  std::vector<std::string> metrics{"psnr", "ssim", "is"};
  int limit = 0, rows = 4, cols = 4, is_splits = 10, tam_resolution = 1024;
  std::uint64_t seed = 0;
};

int run_eval(const EvalArgs& a, RunRecord& run) {
  torch::manual_seed(a.seed);
  auto bundle = load_checkpoint(a.ckpt);
  bundle.eval();
  fs::create_directories(a.out);
  run.seeds["eval"] = a.seed;

  if (!a.progressive.empty()) {
    const auto catalog = open_catalog(a.tam, a.tam_resolution);
    const auto mode = progressive_mode_from_string(a.progressive);
    const auto res = progressive_eval(bundle, catalog, mode, a.rows, a.cols, a.seed);
    const auto path = fs::path(a.out) / ("progressive_" + a.progressive + ".png");
    write_bytes(path, encode_png(res.grid));
    run.outputs.push_back(path.string());
    double mean = 0;
    for (double v : res.l1) mean += v / static_cast<double>(res.l1.size());
    std::cout << "progressive=" << a.progressive << " mean_l1=" << mean << "\n";
    if (a.data.empty()) return 0;
  }
  if (a.data.empty()) throw CLI::ValidationError("--data", "required unless --progressive is given");

  const auto manifest = Manifest::load(a.data);
  const auto rows = rows_of(manifest, split_from_string(a.split), a.limit);
  if (rows.empty()) throw FormatError("no points in split '" + a.split + "'");
  const auto set = TrainingSet::load(a.data, rows);

  MetricsReport report;
  std::vector<Image> outputs;
  double elapsed = 0;
  {
    torch::NoGradGuard no_grad;
    for (std::int64_t i = 0; i < set.size(); ++i) {
      const auto one = set.slice(i, i + 1);
      const auto t0 = std::chrono::steady_clock::now();
      const auto y = bundle.complete(one.contour, one.hint, one.tones);
      elapsed += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      outputs.push_back(tensor_to_image(y));
    }
  }
  report.n_samples = outputs.size();
  report.inference_time_ms = elapsed / static_cast<double>(outputs.size());
  auto wants = [&](const std::string& m) { return std::find(a.metrics.begin(), a.metrics.end(), m) != a.metrics.end(); };
  if (wants("psnr") || wants("ssim")) {
    double p = 0, s = 0;
    std::size_t finite = 0;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      const auto truth = to_gray8(tensor_to_image(set.sketch[static_cast<std::int64_t>(i)].unsqueeze(0)));
      const auto pred = to_gray8(outputs[i]);
      if (wants("psnr")) {
        const double v = psnr(truth, pred);
        if (std::isfinite(v)) {
          p += v;
          ++finite;
        }
      }
      if (wants("ssim")) s += ssim(truth, pred);
    }
    report.psnr = finite ? p / static_cast<double>(finite) : std::numeric_limits<double>::infinity();
    report.ssim = s / static_cast<double>(outputs.size());
  }
  if (wants("is")) {
    SketchClassifier clf{nullptr};
    if (!a.classifier.empty()) {
      clf = load_classifier(a.classifier);
    } else {
      // No classifier supplied: fit the default one on the ground-truth training sketches.
      const auto rows = rows_of(manifest, Split::train, 0);
      const auto train = TrainingSet::load(a.data, rows);
      std::vector<std::int64_t> leaves;
      for (const auto& r : rows) leaves.push_back(std::clamp(r.leaf_count, 1, 6) - 1);
      const auto labels = torch::tensor(leaves);
      ClassifierConfig cc;
      cc.seed = a.seed;
      clf = train_classifier(torch::nn::functional::interpolate(
                                 train.sketch, torch::nn::functional::InterpolateFuncOptions()
                                                   .size(std::vector<std::int64_t>{cc.resolution, cc.resolution})
                                                   .mode(torch::kArea)),
                             labels, cc);
      const auto path = fs::path(a.out) / "classifier.bin";
      save_classifier(clf, path);
      run.outputs.push_back(path.string());
    }
    const auto is = inception_score(outputs, as_classifier(clf), std::min<int>(a.is_splits, static_cast<int>(outputs.size())));
    report.inception_score = is.mean;
    report.inception_std = is.std;
  }
  const auto path = fs::path(a.out) / "report.json";
  write_text(path, report.to_json() + "\n");
  run.outputs.push_back(path.string());
  std::cout << report.to_json() << "\n";
  return 0;
}

std::function<void()> g_stop;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Procedural hatching dataset, models and completion service"};
  app.set_version_flag("--version", std::string(SHAD3S_VERSION));
  app.require_subcommand(1);
  std::string manifest_path;
  app.add_option("--run-manifest", manifest_path, "Where to write the run manifest (default: next to the outputs)");

  app.set_config("--config", "", "key = value file, keys prefixed by command (train.epochs = 5); flags win");
  app.option_defaults()->always_capture_default();
  auto with_config = [](CLI::App* sub) {
    sub->fallthrough();
    return sub;
  };

  RunRecord run;
  std::optional<fs::path> default_manifest;
  std::function<int()> action;

  DatagenArgs dg;
  auto* datagen = with_config(app.add_subcommand("datagen", "Render a procedural dataset"));
  datagen->add_option("--max-solids,-k", dg.max_solids, "Max solids per scene (subset k)")->check(CLI::Range(1, 6));
  datagen->add_option("--scenes", dg.scenes, "Scenes per subset")->check(CLI::PositiveNumber);
  datagen->add_option("--poses", dg.poses, "Poses per scene")->check(CLI::PositiveNumber);
  datagen->add_option("--seed", dg.seed, "Base seed");
  datagen->add_option("--out", dg.out, "Output directory")->required();
  datagen->add_option("--jobs,-j", dg.jobs, "Worker threads")->check(CLI::PositiveNumber);
  datagen->add_option("--resolution", dg.resolution, "Image side")->check(CLI::Range(16, 2048));
  datagen->add_option("--tam", dg.tam, "Texture catalog directory (default: builtin)");
  datagen->add_option("--tam-resolution", dg.tam_resolution, "Builtin texture side");
  datagen->add_flag("--background-hatch", dg.background_hatch, "Hatch the ground plane");
  datagen->add_flag("--no-shadows", dg.no_shadows, "Disable cast shadows");
  datagen->add_flag("--all-subsets", dg.all_subsets, "Render every subset 1..k");
  datagen->callback([&] {
    default_manifest = fs::path(dg.out) / "run_manifest.json";
    action = [&] { return run_datagen(dg, run); };
  });

  auto* tam = with_config(app.add_subcommand("tam", "Tonal art maps"));
  tam->require_subcommand(1);
  std::string tam_dir;
  int tam_res = 1024;
  auto* synth = with_config(tam->add_subcommand("synth", "Write the builtin texture catalog"));
  synth->add_option("--out", tam_dir, "Output directory")->required();
  synth->add_option("--resolution", tam_res, "Texture side")->check(CLI::Range(64, 4096));
  synth->callback([&] {
    default_manifest = fs::path(tam_dir) / "run_manifest.json";
    action = [&] {
      const auto catalog = TamCatalog::builtin(tam_res);
      catalog.save(tam_dir);
      for (const auto& f : catalog.families()) run.seeds[f.id] = f.seed;
      run.outputs.push_back(tam_dir);
      std::cout << catalog.size() << " families written\n";
      return 0;
    };
  });
  auto* validate = with_config(tam->add_subcommand("validate", "Check nesting and tone ordering"));
  validate->add_option("--dir", tam_dir, "Catalog directory (default: builtin)");
  validate->add_option("--resolution", tam_res, "Builtin texture side");
  validate->callback([&] {
    action = [&] {
      const auto catalog = open_catalog(tam_dir, tam_res);
      bool ok = true;
      for (const auto& f : catalog.families()) {
        const auto report = validate_tam(f);
        ok = ok && report.accepted;
        std::cout << f.id << (report.accepted ? " ok" : " FAIL " + report.reason)
                  << " violation=" << report.violation_fraction << " coverage=";
        for (double c : report.coverage) std::cout << c << " ";
        std::cout << "\n";
      }
      return ok ? 0 : 1;
    };
  });

  TrainArgs tr;
  auto* train = with_config(app.add_subcommand("train", "Train a model"));
  train->add_option("--model", tr.model, "dm, sp or se")->check(CLI::IsMember({"dm", "sp", "se"}));
  train->add_option("--data", tr.data, "Dataset directory")->required();
  train->add_option("--out", tr.out, "Run directory");
  train->add_option("--init", tr.init, "Resume from a checkpoint");
  train->add_option("--epochs", tr.epochs)->check(CLI::PositiveNumber);
  train->add_option("--batch", tr.batch)->check(CLI::PositiveNumber);
  train->add_option("--lr", tr.lr);
  train->add_option("--adv-weight", tr.adv_weight, "Weight of the adversarial term");
  train->add_option("--base-width", tr.base_width)->check(CLI::PositiveNumber);
  train->add_option("--max-width", tr.max_width)->check(CLI::PositiveNumber);
  train->add_option("--disc-width", tr.disc_width)->check(CLI::PositiveNumber);
  train->add_option("--depth", tr.depth, "U-Net depth (default: from resolution, at most 8)");
  train->add_option("--limit", tr.limit, "Use at most this many points per split");
  train->add_option("--seed", tr.seed);
  train->add_flag("--teacher-forcing", tr.teacher_forcing, "Split models: feed the second stage true masks");
  train->callback([&] {
    default_manifest = fs::path(tr.out) / "run_manifest.json";
    action = [&] { return run_train(tr, run); };
  });

  EvalArgs ev;
  auto* eval = with_config(app.add_subcommand("eval", "Evaluate a checkpoint"));
  eval->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
  eval->add_option("--data", ev.data, "Dataset directory");
  eval->add_option("--metrics", ev.metrics, "psnr, ssim, is")->delimiter(',')->check(CLI::IsMember({"psnr", "ssim", "is"}));
  eval->add_option("--out", ev.out, "Report directory");
  eval->add_option("--split", ev.split)->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--limit", ev.limit);
  eval->add_option("--classifier", ev.classifier, "Classifier weights for the inception score");
  eval->add_option("--is-splits", ev.is_splits)->check(CLI::PositiveNumber);
  eval->add_option("--progressive", ev.progressive, "pose, pose+lit, pose+lit+shap, txr or all")
      ->check(CLI::IsMember({"pose", "pose+lit", "pose+lit+shap", "txr", "all"}));
  eval->add_option("--rows", ev.rows)->check(CLI::PositiveNumber);
  eval->add_option("--cols", ev.cols)->check(CLI::PositiveNumber);
  eval->add_option("--tam", ev.tam);
  eval->add_option("--seed", ev.seed);
  eval->callback([&] {
    default_manifest = fs::path(ev.out) / "run_manifest.json";
    action = [&] { return run_eval(ev, run); };
  });

  std::vector<std::string> serve_ckpts;
  std::string serve_host = "127.0.0.1", serve_tam;
  int serve_port = -1;
  auto* serve = with_config(app.add_subcommand("serve", "Run the HTTP service"));
  serve->add_option("--ckpt", serve_ckpts, "Checkpoint(s); default: every *.bin in SHAD3S_CKPT_DIR");
  serve->add_option("--port", serve_port, "Port (default: SHAD3S_PORT or 8080)")->check(CLI::Range(0, 65535));
  serve->add_option("--host", serve_host);
  serve->add_option("--tam", serve_tam, "Texture catalog directory");
  serve->callback([&] {
    action = [&] {
      auto config = ServiceConfig::from_env();
      if (!serve_ckpts.empty()) config.checkpoints.assign(serve_ckpts.begin(), serve_ckpts.end());
      if (serve_port >= 0) config.port = serve_port;
      config.host = serve_host;
      if (!serve_tam.empty()) config.tam_dir = serve_tam;
      if (config.checkpoints.empty()) throw NotFoundError("no checkpoints: pass --ckpt or set SHAD3S_CKPT_DIR");
      Service service(config);
      const int port = service.bind();
      run.config["port"] = port;
      run.emit(manifest_path.empty() ? std::nullopt : std::optional<fs::path>(manifest_path));
      g_stop = [&] { service.stop(); };
      std::signal(SIGINT, [](int) { g_stop(); });
      std::signal(SIGTERM, [](int) { g_stop(); });
      std::cerr << "listening on " << config.host << ":" << port << "\n";
      service.listen();
      return 0;
    };
  });

  std::string c_contour, c_ckpt, c_texture, c_out, c_tam;
  double c_az = 45, c_el = 30;
  std::optional<std::uint64_t> c_seed;
  auto* complete = with_config(app.add_subcommand("complete", "Complete one contour drawing"));
  complete->add_option("--contour", c_contour, "Contour PNG, dark ink on light paper")->required();
  complete->add_option("--ckpt", c_ckpt, "Checkpoint")->required();
  complete->add_option("--azimuth", c_az, "Light azimuth, degrees, viewer-relative");
  complete->add_option("--elevation", c_el, "Light elevation, degrees");
  complete->add_option("--texture", c_texture, "Texture family id (default: first)");
  complete->add_option("--seed", c_seed, "Texture crop seed");
  complete->add_option("--tam", c_tam, "Texture catalog directory");
  complete->add_option("--out", c_out, "Output PNG")->required();
  complete->callback([&] {
    default_manifest = fs::path(c_out + ".run.json");
    action = [&] {
      const auto catalog = open_catalog(c_tam, 1024);
      CompletionEngine engine(load_checkpoint(c_ckpt), catalog);
      CompletionRequest req;
      req.contour = decode_png(read_bytes(c_contour));
      req.azimuth = c_az;
      req.elevation = c_el;
      req.tam_family_id = c_texture.empty() ? catalog.at(0).id : c_texture;
      req.seed = c_seed;
      catalog.find(req.tam_family_id);
      const auto result = engine.complete(req);
      write_bytes(c_out, encode_png(result.sketch));
      run.seeds["crop"] = result.seed;
      run.outputs.push_back(c_out);
      std::cout << "seed=" << result.seed << " elapsed_ms=" << result.elapsed_ms;
      if (result.low_confidence) std::cout << " low_confidence=\"" << result.note << "\"";
      std::cout << "\n";
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  for (const auto* sub : app.get_subcommands()) {
    run.command = sub->get_name();
    for (const auto* leaf : sub->get_subcommands()) run.command += " " + leaf->get_name();
  }
  record_config(app, run);
  try {
    const int code = action();
    if (run.command != "serve") {
      std::optional<fs::path> where = manifest_path.empty() ? default_manifest : std::optional<fs::path>(manifest_path);
      run.emit(where);
    }
    return code;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
