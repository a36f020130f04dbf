#include "shad3s/random.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace shad3s {

namespace {

std::array<std::uint8_t, 32> sha256(const void* data, std::size_t size) {
  std::array<std::uint8_t, 32> digest{};
  unsigned int len = 0;
  if (!EVP_Digest(data, size, digest.data(), &len, EVP_sha256(), nullptr) || len != digest.size())
    throw std::runtime_error("sha256 failed");
  return digest;
}

std::string to_hex(const std::array<std::uint8_t, 32>& digest) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (auto b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
  }
  return out;
}

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) { return to_hex(sha256(bytes.data(), bytes.size())); }

std::string sha256_hex(std::string_view text) { return to_hex(sha256(text.data(), text.size())); }

std::uint64_t hash64(std::string_view text) {
  const auto d = sha256(text.data(), text.size());
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | d[i];
  return v;
}

double hash_unit(std::string_view text) { return static_cast<double>(hash64(text) >> 11) * 0x1.0p-53; }

}  // namespace shad3s
