#include "shad3s/tam.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "shad3s/random.hpp"

namespace shad3s {

std::string to_string(TamStyle style) {
  switch (style) {
    case TamStyle::parallel: return "parallel";
    case TamStyle::cross: return "cross";
    case TamStyle::stipple: return "stipple";
  }
  return "?";
}

TamStyle tam_style_from_string(const std::string& name) {
  for (auto s : {TamStyle::parallel, TamStyle::cross, TamStyle::stipple})
    if (to_string(s) == name) return s;
  throw RangeError("unknown TAM style '" + name + "'");
}

namespace {

/// Binary ink canvas with toroidal wrap so that tiles repeat seamlessly.
class InkCanvas {
 public:
  explicit InkCanvas(int size) : size_(size), ink_(static_cast<std::size_t>(size) * size, 0) {}

  double coverage() const { return static_cast<double>(inked_) / static_cast<double>(ink_.size()); }

  void disc(double cx, double cy, double radius) {
    const int r = static_cast<int>(std::ceil(radius));
    const int ix = static_cast<int>(std::floor(cx));
    const int iy = static_cast<int>(std::floor(cy));
    for (int dy = -r - 1; dy <= r + 1; ++dy)
      for (int dx = -r - 1; dx <= r + 1; ++dx) {
        const double px = ix + dx + 0.5 - cx;
        const double py = iy + dy + 0.5 - cy;
        if (px * px + py * py <= radius * radius) set(ix + dx, iy + dy);
      }
  }

  void stroke(double x0, double y0, double angle_rad, double length, double half_width) {
    const double ux = std::cos(angle_rad);
    const double uy = std::sin(angle_rad);
    for (double s = 0.0; s <= length; s += 0.5) disc(x0 + s * ux, y0 + s * uy, half_width);
  }

  Image image() const {
    Image out(size_, size_, 1.0f);
    for (std::size_t i = 0; i < ink_.size(); ++i)
      if (ink_[i]) out[i] = 0.0f;
    return out;
  }

 private:
  void set(int x, int y) {
    x = ((x % size_) + size_) % size_;
    y = ((y % size_) + size_) % size_;
    auto& v = ink_[static_cast<std::size_t>(y) * size_ + x];
    if (!v) {
      v = 1;
      ++inked_;
    }
  }

  int size_;
  std::vector<std::uint8_t> ink_;
  std::size_t inked_ = 0;
};

}  // namespace

TamFamily synthesize_tam(std::uint64_t seed, TamStyle style, const TamSynthConfig& config) {
  if (config.resolution < 8) throw RangeError("TAM resolution too small");
  TamFamily tam;
  tam.style = style;
  tam.seed = seed;
  tam.angle_deg = config.angle_deg;
  tam.id = to_string(style) + "-" + std::to_string(seed);

  Rng rng = make_rng(derive_seed(seed, {static_cast<std::uint64_t>(style)}));
  InkCanvas canvas(config.resolution);
  const double size = config.resolution;
  const double base = config.angle_deg * std::numbers::pi / 180.0;
  constexpr double kJitter = 1.5 * std::numbers::pi / 180.0;

  // Lightest tone (index 3) first; each darker tone keeps every earlier stroke.
  for (int tone = 3; tone >= 0; --tone) {
    const double target = config.coverage_lightest_first[static_cast<std::size_t>(3 - tone)];
    while (canvas.coverage() < target) {
      const double x = uniform(rng, 0.0, size);
      const double y = uniform(rng, 0.0, size);
      switch (style) {
        case TamStyle::parallel:
          canvas.stroke(x, y, base + uniform(rng, -kJitter, kJitter), uniform(rng, 60.0, 220.0),
                        config.stroke_half_width);
          break;
        case TamStyle::cross: {
          // The two darkest tones add the crossing direction.
          const bool crossing = tone <= 1 && uniform(rng, 0.0, 1.0) < 0.6;
          const double angle = base + (crossing ? 0.5 * std::numbers::pi : 0.0);
          canvas.stroke(x, y, angle + uniform(rng, -kJitter, kJitter), uniform(rng, 60.0, 220.0),
                        config.stroke_half_width);
          break;
        }
        case TamStyle::stipple:
          canvas.disc(x, y, config.dot_radius * uniform(rng, 0.8, 1.25));
          break;
      }
    }
    tam.tones[static_cast<std::size_t>(tone)] = canvas.image();
  }
  return tam;
}

std::array<int, 2> crop_origin(std::uint64_t seed, int resolution, int size) {
  if (size < 1 || size > resolution) throw RangeError("crop size must lie in [1, texture resolution]");
  Rng rng = make_rng(derive_seed(seed, {0x7a11}));
  const int ox = uniform_int(rng, 0, resolution - size);
  const int oy = uniform_int(rng, 0, resolution - size);
  return {ox, oy};
}

ToneCrops crop(const TamFamily& tam, std::uint64_t seed, int size) {
  const auto [ox, oy] = crop_origin(seed, tam.resolution(), size);
  ToneCrops out;
  for (std::size_t k = 0; k < 4; ++k) {
    Image c(size, size);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) c(x, y) = tam.tones[k](ox + x, oy + y);
    out.tones[k] = std::move(c);
  }
  return out;
}

double ink_coverage(const Image& image) {
  if (image.empty()) return 0.0;
  const auto ink = std::count_if(image.pixels().begin(), image.pixels().end(), [](float v) { return v < kInkThreshold; });
  return static_cast<double>(ink) / static_cast<double>(image.size());
}

TamReport validate_tam(std::span<const Image> tones, double max_violation) {
  if (tones.size() != 4) throw FormatError("a TAM has exactly four tones");
  for (const auto& t : tones)
    if (t.empty() || !t.same_shape(tones[0])) throw FormatError("TAM tones must be non-empty and equally sized");

  TamReport report;
  for (std::size_t k = 0; k < 4; ++k) report.coverage[k] = ink_coverage(tones[k]);
  for (std::size_t k = 0; k + 1 < 4; ++k) {
    std::size_t violations = 0;
    const auto& darker = tones[k];
    const auto& lighter = tones[k + 1];
    for (std::size_t i = 0; i < darker.size(); ++i)
      if (lighter[i] < kInkThreshold && !(darker[i] < kInkThreshold)) ++violations;
    report.violation_fraction =
        std::max(report.violation_fraction, static_cast<double>(violations) / static_cast<double>(darker.size()));
  }
  report.monotone = report.coverage[0] > report.coverage[1] && report.coverage[1] > report.coverage[2] &&
                    report.coverage[2] > report.coverage[3];
  const bool nested = report.violation_fraction <= max_violation;
  report.accepted = nested && report.monotone;
  if (!report.monotone) report.reason = "ink coverage does not strictly decrease from tone 1 to tone 4";
  else if (!nested) report.reason = "nesting violated on " + std::to_string(100.0 * report.violation_fraction) + "% of pixels";
  return report;
}

TamReport validate_tam(const TamFamily& tam, double max_violation) { return validate_tam(tam.tones, max_violation); }

// ---------------------------------------------------------------------------
// Catalog

TamCatalog::TamCatalog(std::vector<TamFamily> families) : families_(std::move(families)) {
  std::sort(families_.begin(), families_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < families_.size(); ++i)
    if (families_[i].id == families_[i - 1].id) throw FormatError("duplicate TAM family id " + families_[i].id);
}

TamCatalog TamCatalog::builtin(int resolution) {
  struct Entry {
    const char* id;
    TamStyle style;
    std::uint64_t seed;
    double angle;
    double dot_radius;
  };
  static constexpr Entry kEntries[] = {
      {"cross-45", TamStyle::cross, 3, 45.0, 1.6},          {"cross-150", TamStyle::cross, 4, 150.0, 1.6},
      {"parallel-30", TamStyle::parallel, 1, 30.0, 1.6},    {"parallel-120", TamStyle::parallel, 2, 120.0, 1.6},
      {"stipple-coarse", TamStyle::stipple, 6, 0.0, 2.6},   {"stipple-fine", TamStyle::stipple, 5, 0.0, 1.4},
  };
  std::vector<TamFamily> families;
  for (const auto& e : kEntries) {
    TamSynthConfig config;
    config.resolution = resolution;
    config.angle_deg = e.angle;
    config.dot_radius = e.dot_radius;
    TamFamily f = synthesize_tam(e.seed, e.style, config);
    f.id = e.id;
    families.push_back(std::move(f));
  }
  return TamCatalog(std::move(families));
}

TamCatalog TamCatalog::load(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw NotFoundError("TAM catalog directory not found: " + dir.string());
  std::vector<TamFamily> families;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    TamFamily f;
    f.id = entry.path().filename().string();
    for (int k = 0; k < 4; ++k)
      f.tones[static_cast<std::size_t>(k)] = read_png(entry.path() / ("tone" + std::to_string(k + 1) + ".png"));
    if (fs::exists(entry.path() / "meta.json")) {
      std::ifstream in(entry.path() / "meta.json");
      const auto meta = nlohmann::json::parse(in);
      f.style = tam_style_from_string(meta.value("style", std::string("parallel")));
      f.seed = meta.value("seed", std::uint64_t{0});
      f.angle_deg = meta.value("angle_deg", 0.0);
    }
    const auto report = validate_tam(f);
    if (!report.accepted) throw FormatError("TAM family " + f.id + " rejected: " + report.reason);
    families.push_back(std::move(f));
  }
  return TamCatalog(std::move(families));
}

void TamCatalog::save(const std::filesystem::path& dir) const {
  for (const auto& f : families_) {
    const auto fdir = dir / f.id;
    std::filesystem::create_directories(fdir);
    for (int k = 0; k < 4; ++k)
      write_png(fdir / ("tone" + std::to_string(k + 1) + ".png"), f.tones[static_cast<std::size_t>(k)]);
    nlohmann::json meta{{"id", f.id},
                        {"style", to_string(f.style)},
                        {"seed", f.seed},
                        {"angle_deg", f.angle_deg},
                        {"resolution", f.resolution()},
                        {"license", "CC0-1.0 (procedurally generated)"}};
    write_text(fdir / "meta.json", meta.dump(2) + "\n");
  }
}

const TamFamily& TamCatalog::find(const std::string& id) const {
  for (const auto& f : families_)
    if (f.id == id) return f;
  throw NotFoundError("unknown texture family '" + id + "'");
}

bool TamCatalog::contains(const std::string& id) const {
  return std::any_of(families_.begin(), families_.end(), [&](const auto& f) { return f.id == id; });
}

}  // namespace shad3s
