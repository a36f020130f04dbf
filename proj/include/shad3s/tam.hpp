#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shad3s/image.hpp"
#include "shad3s/render.hpp"

namespace shad3s {

enum class TamStyle { parallel, cross, stipple };

std::string to_string(TamStyle style);
TamStyle tam_style_from_string(const std::string& name);

struct TamSynthConfig {
  int resolution = 1024;
  double angle_deg = 45.0;  // stroke direction in image coordinates, y down
  // Ink coverage aimed for by tone 4 (lightest) .. tone 1 (darkest).
  std::array<double, 4> coverage_lightest_first{0.10, 0.22, 0.38, 0.58};
  double stroke_half_width = 1.0;
  double dot_radius = 1.6;
};

/// Tonal art map: four tones, darkest first. Every ink pixel of tone k+1 is also ink in tone k.
struct TamFamily {
  std::string id;
  TamStyle style = TamStyle::parallel;
  std::uint64_t seed = 0;
  double angle_deg = 0.0;
  std::array<Image, 4> tones;

  int resolution() const { return tones[0].width(); }
};

/// Builds the lightest tone first and adds strokes for each darker tone.
TamFamily synthesize_tam(std::uint64_t seed, TamStyle style, const TamSynthConfig& config = {});

/// Top-left corner of the crop window, uniform over the (res - size + 1)^2 positions.
std::array<int, 2> crop_origin(std::uint64_t seed, int resolution, int size);

/// Same window cut from all four tones. Throws RangeError when size exceeds the texture.
ToneCrops crop(const TamFamily& tam, std::uint64_t seed, int size);

struct TamReport {
  /// Largest per-pair fraction of pixels inked in tone k+1 but not in tone k.
  double violation_fraction = 0.0;
  std::array<double, 4> coverage{};
  bool monotone = false;
  bool accepted = false;
  std::string reason;
};

inline constexpr double kMaxNestingViolation = 0.005;
inline constexpr float kInkThreshold = 0.5f;

/// Checks nesting and strictly decreasing coverage. Throws FormatError unless given
/// four equally sized images.
TamReport validate_tam(std::span<const Image> tones, double max_violation = kMaxNestingViolation);
TamReport validate_tam(const TamFamily& tam, double max_violation = kMaxNestingViolation);

/// Fraction of pixels darker than the ink threshold.
double ink_coverage(const Image& image);

/// Immutable set of families, ordered by id. On disk: <dir>/<id>/tone{1..4}.png + meta.json.
class TamCatalog {
 public:
  TamCatalog() = default;
  explicit TamCatalog(std::vector<TamFamily> families);

  /// The six shipped procedural families.
  static TamCatalog builtin(int resolution = 1024);
  /// Loads and validates every family directory; throws FormatError on an invalid family.
  static TamCatalog load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;

  const std::vector<TamFamily>& families() const noexcept { return families_; }
  std::size_t size() const noexcept { return families_.size(); }
  const TamFamily& at(std::size_t i) const { return families_.at(i); }
  /// Throws NotFoundError for unknown ids.
  const TamFamily& find(const std::string& id) const;
  bool contains(const std::string& id) const;

 private:
  std::vector<TamFamily> families_;
};

}  // namespace shad3s
