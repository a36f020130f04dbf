#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "shad3s/error.hpp"

namespace shad3s {

/// Row-major single-channel raster. Registered planes of a data point all share one size.
template <typename T>
class Plane {
 public:
  using value_type = T;

  Plane() = default;
  Plane(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {
    if (width < 0 || height < 0) throw RangeError("negative plane size");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  const T& operator()(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::span<T> pixels() noexcept { return data_; }
  std::span<const T> pixels() const noexcept { return data_; }

  bool same_shape(const auto& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Grayscale intensities in [0,1]; 0 is black ink, 1 is white paper.
using Image = Plane<float>;
/// Binary mask, 0 or 1.
using Mask = Plane<std::uint8_t>;

std::size_t count_set(const Mask& mask);

/// Mask rendered as an image: set pixels white, others black.
Image mask_to_image(const Mask& mask);
/// Pixels strictly brighter than `threshold` become set.
Mask binarize(const Image& image, float threshold = 0.5f);

/// 8-bit quantization used for every PNG plane: round(v * 255) with clamping.
std::uint8_t to_byte(float v);
std::vector<std::uint8_t> to_bytes(const Image& image);
Image from_bytes(std::span<const std::uint8_t> bytes, int width, int height);

/// Nearest-neighbour resampling to an arbitrary size.
Image resize_nearest(const Image& image, int width, int height);

/// Shrinks by taking the darkest source pixel under each target pixel, so thin ink strokes
/// survive; enlarges like resize_nearest.
Image resize_keep_ink(const Image& image, int width, int height);

/// Pads to a square of side max(w, h) with white, image centred.
struct Letterbox {
  Image square;
  int offset_x = 0;
  int offset_y = 0;
};
Letterbox letterbox(const Image& image, float fill = 1.0f);

/// 8-bit grayscale PNG codec. Decoding accepts any PNG colour type and converts to luminance.
std::vector<std::uint8_t> encode_png(const Image& image);
Image decode_png(std::span<const std::uint8_t> bytes);
void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

std::string base64_encode(std::span<const std::uint8_t> bytes);

}  // namespace shad3s
