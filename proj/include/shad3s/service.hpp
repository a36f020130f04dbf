#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "shad3s/tam.hpp"

namespace shad3s {

struct ServiceConfig {
  /// Each checkpoint is served under its file stem as model id.
  std::vector<std::filesystem::path> checkpoints;
  std::optional<std::filesystem::path> tam_dir;  // builtin catalog when absent
  int tam_resolution = 1024;
  std::string host = "127.0.0.1";
  int port = 8080;

  /// Reads SHAD3S_CKPT_DIR (every *.bin inside) and SHAD3S_PORT.
  static ServiceConfig from_env();
};

/// HTTP front end:
///   POST /v1/complete        multipart "contour" (PNG) + "params" (JSON) -> PNG, metadata in X-Shad3s-Meta
///   GET  /v1/illumination    ?azimuth=&elevation=[&size=] -> PNG
///   GET  /v1/textures        catalog with tone thumbnails
///   GET  /v1/models          loaded models
///   GET  /healthz
class Service {
 public:
  explicit Service(const ServiceConfig& config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds config.host:config.port, or any free port when port is 0. Returns the port.
  int bind();
  /// Blocks serving until stop().
  bool listen();
  void stop();
  void wait_until_ready() const;

  std::vector<std::string> model_ids() const;
  const TamCatalog& catalog() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace shad3s
