#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

#include "shad3s/tam.hpp"

using namespace shad3s;

namespace {

std::size_t violations(const Image& darker, const Image& lighter) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < darker.size(); ++i) n += (lighter[i] < 0.5f) && !(darker[i] < 0.5f);
  return n;
}

// Separable box blur, repeated; wraps around like the tiles do.
Image blur(const Image& src, int radius, int passes) {
  Image a = src;
  const int w = a.width(), h = a.height();
  for (int p = 0; p < passes; ++p) {
    Image b(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float s = 0;
        for (int d = -radius; d <= radius; ++d) s += a((x + d + w) % w, y);
        b(x, y) = s / (2 * radius + 1);
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float s = 0;
        for (int d = -radius; d <= radius; ++d) s += b(x, (y + d + h) % h);
        a(x, y) = s / (2 * radius + 1);
      }
  }
  return a;
}

// Dominant stroke direction in degrees [0, 180), image coordinates with y down, from a
// magnitude-weighted histogram of Sobel gradient orientations rotated by 90 degrees.
// Blurring first keeps pixel staircases from pulling the peak towards the axes.
double dominant_stroke_angle(const Image& raw) {
  const Image img = blur(raw, 2, 3);
  std::vector<double> hist(180, 0.0);
  for (int y = 1; y + 1 < img.height(); ++y)
    for (int x = 1; x + 1 < img.width(); ++x) {
      const double gx = (img(x + 1, y - 1) + 2 * img(x + 1, y) + img(x + 1, y + 1)) -
                        (img(x - 1, y - 1) + 2 * img(x - 1, y) + img(x - 1, y + 1));
      const double gy = (img(x - 1, y + 1) + 2 * img(x, y + 1) + img(x + 1, y + 1)) -
                        (img(x - 1, y - 1) + 2 * img(x, y - 1) + img(x + 1, y - 1));
      const double mag = std::hypot(gx, gy);
      if (mag == 0) continue;
      double a = std::atan2(gy, gx) * 180.0 / std::numbers::pi + 90.0;
      a = std::fmod(std::fmod(a, 180.0) + 180.0, 180.0);
      hist[static_cast<std::size_t>(a) % 180] += mag;
    }
  // Smooth circularly over +-3 degrees before taking the peak.
  std::size_t best = 0;
  double best_v = -1;
  for (std::size_t i = 0; i < 180; ++i) {
    double v = 0;
    for (int d = -3; d <= 3; ++d) v += hist[(i + 180 + d) % 180];
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  return best + 0.5;
}

double angle_gap(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 180.0);
  return std::min(d, 180.0 - d);
}

}  // namespace

TEST(SynthesizeTam, NestedWithZeroViolations) {
  for (auto style : {TamStyle::parallel, TamStyle::cross, TamStyle::stipple}) {
    TamSynthConfig config;
    config.resolution = 512;
    const auto tam = synthesize_tam(17, style, config);
    for (int k = 0; k < 3; ++k) EXPECT_EQ(violations(tam.tones[k], tam.tones[k + 1]), 0u) << to_string(style);
    EXPECT_GT(ink_coverage(tam.tones[0]), ink_coverage(tam.tones[3]));
    const auto report = validate_tam(tam);
    EXPECT_TRUE(report.accepted) << report.reason;
    EXPECT_EQ(report.violation_fraction, 0.0);
  }
}

TEST(SynthesizeTam, DeterministicInSeed) {
  TamSynthConfig config;
  config.resolution = 256;
  const auto a = synthesize_tam(5, TamStyle::cross, config);
  const auto b = synthesize_tam(5, TamStyle::cross, config);
  const auto c = synthesize_tam(6, TamStyle::cross, config);
  for (int k = 0; k < 4; ++k) EXPECT_EQ(a.tones[k], b.tones[k]);
  EXPECT_NE(a.tones[0], c.tones[0]);
}

TEST(SynthesizeTam, ParallelStrokesFollowConfiguredAngle) {
  for (double angle : {0.0, 30.0, 75.0, 120.0, 160.0}) {
    TamSynthConfig config;
    config.resolution = 512;
    config.angle_deg = angle;
    const auto tam = synthesize_tam(9, TamStyle::parallel, config);
    for (int k = 0; k < 4; ++k)
      EXPECT_LE(angle_gap(dominant_stroke_angle(tam.tones[k]), angle), 5.0) << angle << " tone " << k + 1;
  }
}

TEST(Crop, SameSeedSameWindowAcrossTones) {
  TamSynthConfig config;
  config.resolution = 512;
  const auto tam = synthesize_tam(3, TamStyle::stipple, config);
  const auto a = crop(tam, 42, 128);
  const auto b = crop(tam, 42, 128);
  const auto [ox, oy] = crop_origin(42, 512, 128);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(a.tones[k], b.tones[k]);
    EXPECT_EQ(a.tones[k](7, 9), tam.tones[k](ox + 7, oy + 9));
  }
  for (int k = 0; k < 3; ++k) EXPECT_EQ(violations(a.tones[k], a.tones[k + 1]), 0u);
  EXPECT_THROW(crop(tam, 1, 513), RangeError);
  EXPECT_THROW(crop(tam, 1, 0), RangeError);
}

TEST(Crop, WindowUniformOverPositions) {
  // 256 from 1024 leaves 769 positions per axis.
  constexpr int kPositions = 769;
  constexpr int kSamples = 400000;
  std::vector<int> xs(kPositions, 0), ys(kPositions, 0);
  std::array<std::array<int, 8>, 8> cells{};
  for (int s = 0; s < kSamples; ++s) {
    const auto [x, y] = crop_origin(static_cast<std::uint64_t>(s), 1024, 256);
    ASSERT_GE(x, 0);
    ASSERT_LT(x, kPositions);
    ASSERT_GE(y, 0);
    ASSERT_LT(y, kPositions);
    ++xs[x];
    ++ys[y];
    ++cells[x * 8 / kPositions][y * 8 / kPositions];
  }
  const double e = static_cast<double>(kSamples) / kPositions;
  double chi_x = 0, chi_y = 0;
  for (int i = 0; i < kPositions; ++i) {
    chi_x += (xs[i] - e) * (xs[i] - e) / e;
    chi_y += (ys[i] - e) * (ys[i] - e) / e;
  }
  // 768 degrees of freedom: 99.9th percentile is about 899.
  EXPECT_LT(chi_x, 899.0);
  EXPECT_LT(chi_y, 899.0);
  // Coarse joint cells with their exact expected counts.
  std::array<int, 8> width{};
  for (int i = 0; i < kPositions; ++i) ++width[i * 8 / kPositions];
  double chi_joint = 0;
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b) {
      const double ex = static_cast<double>(kSamples) * width[a] * width[b] / (double(kPositions) * kPositions);
      chi_joint += (cells[a][b] - ex) * (cells[a][b] - ex) / ex;
    }
  // 63 degrees of freedom.
  EXPECT_LT(chi_joint, 103.4);
}

TEST(ValidateTam, ReversedOrderRejected) {
  TamSynthConfig config;
  config.resolution = 256;
  const auto tam = synthesize_tam(2, TamStyle::parallel, config);
  std::vector<Image> reversed(tam.tones.rbegin(), tam.tones.rend());
  const auto report = validate_tam(reversed);
  EXPECT_FALSE(report.accepted);
  EXPECT_FALSE(report.monotone);
}

TEST(ValidateTam, OnePercentFlippedPixelsRejected) {
  TamSynthConfig config;
  config.resolution = 256;
  const auto tam = synthesize_tam(2, TamStyle::cross, config);
  std::vector<Image> tones(tam.tones.begin(), tam.tones.end());
  // Ink 1% of all pixels in tone 2 where tone 1 is blank.
  const std::size_t target = tones[1].size() / 100;
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < tones[1].size() && flipped < target; i += 7)
    if (tones[0][i] >= 0.5f && tones[1][i] >= 0.5f) {
      tones[1][i] = 0.0f;
      ++flipped;
    }
  ASSERT_EQ(flipped, target);
  const auto report = validate_tam(tones);
  EXPECT_NEAR(report.violation_fraction, 0.01, 1e-3);
  EXPECT_FALSE(report.accepted);

  // Below the threshold the same construction passes.
  std::vector<Image> mild(tam.tones.begin(), tam.tones.end());
  for (std::size_t i = 0, n = 0; i < mild[1].size() && n < target / 4; i += 7)
    if (mild[0][i] >= 0.5f && mild[1][i] >= 0.5f) {
      mild[1][i] = 0.0f;
      ++n;
    }
  EXPECT_TRUE(validate_tam(mild).accepted);
}

TEST(ValidateTam, MismatchedSizesAreFormatErrors) {
  std::vector<Image> tones{Image(8, 8, 0.f), Image(8, 8, 0.5f), Image(8, 8, 1.f), Image(4, 4, 1.f)};
  EXPECT_THROW(validate_tam(tones), FormatError);
  EXPECT_THROW(validate_tam(std::span<const Image>(tones.data(), 3)), FormatError);
}

TEST(TamCatalog, ShipsSixValidFamilies) {
  const auto catalog = TamCatalog::builtin(1024);
  ASSERT_EQ(catalog.size(), 6u);
  for (const auto& f : catalog.families()) {
    EXPECT_EQ(f.resolution(), 1024);
    const auto report = validate_tam(f);
    EXPECT_TRUE(report.accepted) << f.id << ": " << report.reason;
  }
  EXPECT_THROW(catalog.find("watercolour"), NotFoundError);
}

TEST(TamCatalog, SaveLoadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "shad3s_tam_roundtrip";
  std::filesystem::remove_all(dir);
  const auto catalog = TamCatalog::builtin(128);
  catalog.save(dir);
  const auto back = TamCatalog::load(dir);
  ASSERT_EQ(back.size(), catalog.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back.at(i).id, catalog.at(i).id);
    EXPECT_EQ(back.at(i).style, catalog.at(i).style);
    for (int k = 0; k < 4; ++k) EXPECT_EQ(to_bytes(back.at(i).tones[k]), to_bytes(catalog.at(i).tones[k]));
  }
  // A broken family on disk is refused.
  write_png(dir / "cross-45" / "tone4.png", Image(128, 128, 0.0f));
  EXPECT_THROW(TamCatalog::load(dir), FormatError);
  std::filesystem::remove_all(dir);
}
