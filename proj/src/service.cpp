#include "shad3s/service.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>

#include "shad3s/checkpoint.hpp"
#include "shad3s/error.hpp"
#include "shad3s/inference.hpp"

namespace shad3s {

namespace fs = std::filesystem;
using nlohmann::json;

ServiceConfig ServiceConfig::from_env() {
  ServiceConfig c;
  if (const char* dir = std::getenv("SHAD3S_CKPT_DIR")) {
    if (!fs::is_directory(dir)) throw NotFoundError(std::string("SHAD3S_CKPT_DIR is not a directory: ") + dir);
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".bin") c.checkpoints.push_back(e.path());
    std::sort(c.checkpoints.begin(), c.checkpoints.end());
  }
  if (const char* port = std::getenv("SHAD3S_PORT")) {
    try {
      c.port = std::stoi(port);
    } catch (const std::exception&) {
      throw RangeError(std::string("SHAD3S_PORT is not a port number: ") + port);
    }
  }
  return c;
}

struct Service::Impl {
  ServiceConfig config;
  TamCatalog catalog;
  std::map<std::string, std::unique_ptr<CompletionEngine>> engines;
  std::string textures_json;
  httplib::Server server;

  explicit Impl(const ServiceConfig& c) : config(c) {
    catalog = c.tam_dir ? TamCatalog::load(*c.tam_dir) : TamCatalog::builtin(c.tam_resolution);
    for (const auto& path : c.checkpoints) {
      const auto id = path.stem().string();
      if (engines.contains(id)) throw FormatError("duplicate model id '" + id + "'");
      engines.emplace(id, std::make_unique<CompletionEngine>(load_checkpoint(path), catalog));
    }
    textures_json = build_textures().dump();
    routes();
  }

  json build_textures() const {
    json list = json::array();
    for (const auto& f : catalog.families()) {
      json thumbs = json::array(), coverage = json::array();
      for (const auto& tone : f.tones) {
        coverage.push_back(ink_coverage(tone));
        // Top-left 128 px tile shown at 64 px.
        Image tile(128, 128);
        for (int y = 0; y < 128; ++y)
          for (int x = 0; x < 128; ++x) tile(x, y) = tone(x % tone.width(), y % tone.height());
        thumbs.push_back("data:image/png;base64," + base64_encode(encode_png(resize_keep_ink(tile, 64, 64))));
      }
      list.push_back({{"id", f.id},
                      {"style", to_string(f.style)},
                      {"angle_deg", f.angle_deg},
                      {"resolution", f.resolution()},
                      {"coverage", coverage},
                      {"thumbnails", thumbs}});
    }
    return list;
  }

  static void fail(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", message}}.dump(), "application/json");
  }

  static void png(httplib::Response& res, const Image& image) {
    const auto bytes = encode_png(image);
    res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
  }

  static double number_param(const httplib::Request& req, const std::string& key) {
    if (!req.has_param(key)) throw FormatError("missing query parameter '" + key + "'");
    const auto text = req.get_param_value(key);
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != text.size() || !std::isfinite(v)) throw FormatError("query parameter '" + key + "' is not a number");
    return v;
  }

  void complete(const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data() || !req.has_file("contour"))
      return fail(res, 400, "expected multipart form data with a 'contour' PNG part");
    json params = json::object();
    if (req.has_file("params")) {
      try {
        params = json::parse(req.get_file_value("params").content);
      } catch (const json::exception&) {
        return fail(res, 400, "'params' is not valid JSON");
      }
      if (!params.is_object()) return fail(res, 400, "'params' must be a JSON object");
    }
    CompletionRequest request;
    std::string model_id;
    try {
      request.azimuth = params.value("azimuth", 45.0);
      request.elevation = params.value("elevation", 30.0);
      request.tam_family_id = params.value("texture", params.value("tam_family_id", catalog.at(0).id));
      model_id = params.value("model", engines.empty() ? std::string() : engines.begin()->first);
      if (params.contains("seed")) request.seed = params.at("seed").get<std::uint64_t>();
    } catch (const json::exception&) {
      return fail(res, 400, "'params' fields have the wrong types");
    }
    const auto engine = engines.find(model_id);
    if (engine == engines.end()) return fail(res, 404, "unknown model '" + model_id + "'");
    if (!catalog.contains(request.tam_family_id))
      return fail(res, 404, "unknown texture family '" + request.tam_family_id + "'");
    const auto& part = req.get_file_value("contour").content;
    try {
      request.contour = decode_png(std::span(reinterpret_cast<const std::uint8_t*>(part.data()), part.size()));
    } catch (const FormatError& e) {
      return fail(res, 400, std::string("contour is not a readable PNG: ") + e.what());
    }
    try {
      const auto result = engine->second->complete(request);
      res.set_header("X-Shad3s-Meta", json{{"model", model_id},
                                           {"texture", request.tam_family_id},
                                           {"seed", result.seed},
                                           {"low_confidence", result.low_confidence},
                                           {"note", result.note},
                                           {"elapsed_ms", result.elapsed_ms}}
                                          .dump());
      png(res, result.sketch);
    } catch (const RangeError& e) {
      fail(res, 400, e.what());
    }
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}, {"Access-Control-Expose-Headers", "X-Shad3s-Meta"}});
    server.Post("/v1/complete", [this](const httplib::Request& req, httplib::Response& res) { complete(req, res); });
    server.Get("/v1/illumination", [](const httplib::Request& req, httplib::Response& res) {
      try {
        const double az = number_param(req, "azimuth");
        const double el = number_param(req, "elevation");
        const int size = req.has_param("size") ? static_cast<int>(number_param(req, "size")) : 256;
        if (size < 16 || size > 1024) return fail(res, 400, "size must lie in [16, 1024]");
        png(res, illumination_hint(az, el, size));
      } catch (const FormatError& e) {
        fail(res, 400, e.what());
      } catch (const RangeError& e) {
        fail(res, 400, e.what());
      }
    });
    server.Get("/v1/textures", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(textures_json, "application/json");
    });
    server.Get("/v1/models", [this](const httplib::Request&, httplib::Response& res) {
      json list = json::array();
      for (const auto& [id, engine] : engines)
        list.push_back({{"id", id},
                        {"name", engine->spec().model_name()},
                        {"kind", to_string(engine->spec().kind)},
                        {"variant", to_string(engine->spec().variant)},
                        {"resolution", engine->resolution()}});
      res.set_content(list.dump(), "application/json");
    });
    server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(json{{"status", "ok"}, {"models", engines.size()}, {"version", SHAD3S_VERSION}}.dump(),
                      "application/json");
    });
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const NotFoundError& e) {
        fail(res, 404, e.what());
      } catch (const std::exception& e) {
        fail(res, 500, e.what());
      }
    });
  }
};

Service::Service(const ServiceConfig& config) : impl_(std::make_unique<Impl>(config)) {}
Service::~Service() { stop(); }

int Service::bind() {
  auto& s = impl_->server;
  if (impl_->config.port == 0) return s.bind_to_any_port(impl_->config.host);
  if (!s.bind_to_port(impl_->config.host, impl_->config.port))
    throw std::runtime_error("cannot bind " + impl_->config.host + ":" + std::to_string(impl_->config.port));
  return impl_->config.port;
}

bool Service::listen() { return impl_->server.listen_after_bind(); }
void Service::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}
void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

std::vector<std::string> Service::model_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, e] : impl_->engines) ids.push_back(id);
  return ids;
}

const TamCatalog& Service::catalog() const { return impl_->catalog; }

}  // namespace shad3s
