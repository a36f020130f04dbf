#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>

#include "shad3s/models.hpp"
#include "shad3s/tam.hpp"

namespace shad3s {

struct CompletionRequest {
  Image contour;  // any size; ink dark on light paper
  double azimuth = 45.0;    // light, relative to the viewer
  double elevation = 30.0;
  std::string tam_family_id;
  std::optional<std::uint64_t> seed;  // texture-crop seed; derived from the request when absent
};

struct CompletionResult {
  Image sketch;  // at the contour's original size
  bool low_confidence = false;
  std::string note;
  std::uint64_t seed = 0;
  double elapsed_ms = 0.0;
};

/// Hint for a viewer-relative light. Throws RangeError at or below the horizon.
Image illumination_hint(double azimuth, double elevation, int size = 256);

/// Stateless completion over one loaded model. complete() may be called from several threads;
/// forwards are serialised.
class CompletionEngine {
 public:
  CompletionEngine(ModelBundle bundle, const TamCatalog& catalog);

  CompletionResult complete(const CompletionRequest& request);
  /// Seed used when the request carries none: a hash of the binarised contour and parameters.
  std::uint64_t request_seed(const Image& binarised, const CompletionRequest& request) const;

  int resolution() const { return bundle_.spec().resolution; }
  const BundleSpec& spec() const { return bundle_.spec(); }

 private:
  ModelBundle bundle_;
  const TamCatalog& catalog_;
  std::mutex mutex_;
};

}  // namespace shad3s
