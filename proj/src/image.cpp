#include "shad3s/image.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace shad3s {

std::size_t count_set(const Mask& mask) {
  return static_cast<std::size_t>(std::count_if(mask.pixels().begin(), mask.pixels().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

Image mask_to_image(const Mask& mask) {
  Image out(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? 1.0f : 0.0f;
  return out;
}

Mask binarize(const Image& image, float threshold) {
  Mask out(image.width(), image.height());
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = image[i] > threshold ? 1 : 0;
  return out;
}

std::uint8_t to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

std::vector<std::uint8_t> to_bytes(const Image& image) {
  std::vector<std::uint8_t> out(image.size());
  std::transform(image.pixels().begin(), image.pixels().end(), out.begin(), to_byte);
  return out;
}

Image from_bytes(std::span<const std::uint8_t> bytes, int width, int height) {
  if (bytes.size() != static_cast<std::size_t>(width) * height)
    throw FormatError("byte count does not match image size");
  Image out(width, height);
  for (std::size_t i = 0; i < bytes.size(); ++i) out[i] = static_cast<float>(bytes[i]) / 255.0f;
  return out;
}

Image resize_nearest(const Image& image, int width, int height) {
  if (image.empty()) throw FormatError("cannot resize an empty image");
  Image out(width, height);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(image.height() - 1, static_cast<int>((static_cast<long>(y) * image.height()) / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(image.width() - 1, static_cast<int>((static_cast<long>(x) * image.width()) / width));
      out(x, y) = image(sx, sy);
    }
  }
  return out;
}

Image resize_keep_ink(const Image& image, int width, int height) {
  if (image.empty()) throw FormatError("cannot resize an empty image");
  if (width >= image.width() && height >= image.height()) return resize_nearest(image, width, height);
  Image out(width, height, 1.0f);
  for (int y = 0; y < image.height(); ++y) {
    const int ty = std::min(height - 1, static_cast<int>((static_cast<long>(y) * height) / image.height()));
    for (int x = 0; x < image.width(); ++x) {
      const int tx = std::min(width - 1, static_cast<int>((static_cast<long>(x) * width) / image.width()));
      out(tx, ty) = std::min(out(tx, ty), image(x, y));
    }
  }
  return out;
}

Letterbox letterbox(const Image& image, float fill) {
  const int side = std::max(image.width(), image.height());
  Letterbox lb{Image(side, side, fill), (side - image.width()) / 2, (side - image.height()) / 2};
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) lb.square(lb.offset_x + x, lb.offset_y + y) = image(x, y);
  return lb;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  // EVP_EncodeBlock also writes a terminating NUL.
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  if (image.empty()) throw FormatError("cannot encode an empty image");
  const auto bytes = to_bytes(image);
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width());
  png.height = static_cast<png_uint_32>(image.height());
  png.format = PNG_FORMAT_GRAY;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, bytes.data(), 0, nullptr))
    throw FormatError(std::string("png size query failed: ") + png.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, bytes.data(), 0, nullptr))
    throw FormatError(std::string("png encode failed: ") + png.message);
  out.resize(size);
  return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()))
    throw FormatError(std::string("not a readable PNG: ") + png.message);
  png.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png));
  png_color white{255, 255, 255};
  // Transparent pixels composite over white paper.
  if (!png_image_finish_read(&png, &white, buffer.data(), 0, nullptr)) {
    png_image_free(&png);
    throw FormatError(std::string("png decode failed: ") + png.message);
  }
  return from_bytes(buffer, static_cast<int>(png.width), static_cast<int>(png.height));
}

void write_png(const std::filesystem::path& path, const Image& image) { write_file(path, encode_png(image)); }

Image read_png(const std::filesystem::path& path) { return decode_png(read_file(path)); }

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace shad3s
