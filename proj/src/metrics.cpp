#include "shad3s/metrics.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>

namespace shad3s {

Gray8 to_gray8(const Image& image) {
  Gray8 out(image.width(), image.height());
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = to_byte(image[i]);
  return out;
}

double psnr(const Gray8& x, const Gray8& y, double peak) {
  if (!x.same_shape(y)) throw FormatError("psnr inputs differ in size");
  if (x.empty()) throw FormatError("psnr of empty images");
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / (sse / static_cast<double>(x.size())));
}

double ssim(const Gray8& x, const Gray8& y, const SsimOptions& options) {
  if (!x.same_shape(y)) throw FormatError("ssim inputs differ in size");
  const int win = options.window;
  if (x.width() < win || x.height() < win) throw RangeError("image smaller than the ssim window");

  // Summed-area tables of x, y, x^2, y^2, xy.
  const int w = x.width();
  const int h = x.height();
  const std::size_t stride = static_cast<std::size_t>(w) + 1;
  std::vector<double> sx(stride * (h + 1)), sy(sx.size()), sxx(sx.size()), syy(sx.size()), sxy(sx.size());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double a = x(c, r);
      const double b = y(c, r);
      const std::size_t i = (r + 1) * stride + (c + 1);
      const std::size_t up = r * stride + (c + 1);
      const std::size_t left = (r + 1) * stride + c;
      const std::size_t diag = r * stride + c;
      sx[i] = a + sx[up] + sx[left] - sx[diag];
      sy[i] = b + sy[up] + sy[left] - sy[diag];
      sxx[i] = a * a + sxx[up] + sxx[left] - sxx[diag];
      syy[i] = b * b + syy[up] + syy[left] - syy[diag];
      sxy[i] = a * b + sxy[up] + sxy[left] - sxy[diag];
    }
  }
  auto box = [&](const std::vector<double>& s, int r, int c) {
    return s[(r + win) * stride + (c + win)] - s[r * stride + (c + win)] - s[(r + win) * stride + c] + s[r * stride + c];
  };

  const double n = static_cast<double>(win) * win;
  double total = 0.0;
  std::size_t count = 0;
  for (int r = 0; r + win <= h; ++r) {
    for (int c = 0; c + win <= w; ++c) {
      const double mx = box(sx, r, c) / n;
      const double my = box(sy, r, c) / n;
      const double vx = std::max(0.0, box(sxx, r, c) / n - mx * mx);
      const double vy = std::max(0.0, box(syy, r, c) / n - my * my);
      const double cov = box(sxy, r, c) / n - mx * my;
      total += ((2 * mx * my + options.c1) * (2 * cov + options.c2)) /
               ((mx * mx + my * my + options.c1) * (vx + vy + options.c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

InceptionScore inception_score(const std::vector<std::vector<double>>& probs, int splits) {
  if (probs.empty()) throw RangeError("inception score of an empty sample set");
  if (splits < 1) throw RangeError("splits must be positive");
  const std::size_t classes = probs.front().size();
  for (const auto& p : probs)
    if (p.size() != classes || classes == 0) throw FormatError("class probability vectors differ in length");

  const std::size_t n = probs.size();
  const std::size_t parts = std::min<std::size_t>(static_cast<std::size_t>(splits), n);
  std::vector<double> scores;
  for (std::size_t s = 0; s < parts; ++s) {
    const std::size_t begin = s * n / parts;
    const std::size_t end = (s + 1) * n / parts;
    std::vector<double> marginal(classes, 0.0);
    for (std::size_t i = begin; i < end; ++i)
      for (std::size_t c = 0; c < classes; ++c) marginal[c] += probs[i][c];
    for (auto& m : marginal) m /= static_cast<double>(end - begin);
    double kl_sum = 0.0;
    for (std::size_t i = begin; i < end; ++i)
      for (std::size_t c = 0; c < classes; ++c) {
        const double p = probs[i][c];
        if (p > 0.0) kl_sum += p * (std::log(p) - std::log(marginal[c]));
      }
    scores.push_back(std::exp(kl_sum / static_cast<double>(end - begin)));
  }
  InceptionScore out;
  for (double v : scores) out.mean += v;
  out.mean /= static_cast<double>(scores.size());
  for (double v : scores) out.std += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(out.std / static_cast<double>(scores.size()));
  return out;
}

InceptionScore inception_score(const std::vector<Image>& samples, const Classifier& classifier, int splits) {
  std::vector<std::vector<double>> probs;
  probs.reserve(samples.size());
  for (const auto& s : samples) probs.push_back(classifier(s));
  return inception_score(probs, splits);
}

std::string MetricsReport::to_json() const {
  nlohmann::json j{{"psnr", std::isinf(psnr) ? nlohmann::json("inf") : nlohmann::json(psnr)},
                   {"ssim", ssim},
                   {"inception_score", inception_score},
                   {"inception_std", inception_std},
                   {"inference_time_ms", inference_time_ms},
                   {"n_samples", n_samples}};
  return j.dump(2);
}

}  // namespace shad3s
