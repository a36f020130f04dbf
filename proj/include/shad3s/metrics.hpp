#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "shad3s/image.hpp"

namespace shad3s {

using Gray8 = Plane<std::uint8_t>;

Gray8 to_gray8(const Image& image);

/// 10 log10(peak^2 / MSE); +infinity when the images are identical.
double psnr(const Gray8& x, const Gray8& y, double peak = 255.0);

struct SsimOptions {
  int window = 8;
  double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  double c2 = (0.03 * 255.0) * (0.03 * 255.0);
};

/// Mean SSIM over all window positions (stride 1, uniform weights, population moments).
double ssim(const Gray8& x, const Gray8& y, const SsimOptions& options = {});

struct InceptionScore {
  double mean = 0.0;
  double std = 0.0;
};

/// exp(E_x KL(p(y|x) || p(y))) per contiguous split, averaged over splits.
InceptionScore inception_score(const std::vector<std::vector<double>>& class_probabilities, int splits = 10);

using Classifier = std::function<std::vector<double>(const Image&)>;

InceptionScore inception_score(const std::vector<Image>& samples, const Classifier& classifier, int splits = 10);

struct MetricsReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double inception_score = 0.0;
  double inception_std = 0.0;
  double inference_time_ms = 0.0;
  std::size_t n_samples = 0;

  std::string to_json() const;
};

}  // namespace shad3s
