#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace specprobe {

// FNV-1a 64-bit. Not cryptographic; used to pin payload bytes and configs so
// any single-byte corruption or config drift is detected.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xCBF29CE484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x00000100000001B3ULL;
  }
  return h;
}

inline std::string to_hex16(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[std::size_t(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

inline std::string digest_hex(std::string_view bytes) {
  return "fnv1a64:" + to_hex16(fnv1a64(bytes.data(), bytes.size()));
}

}  // namespace specprobe
