#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <string>

namespace cgscore {

// FNV-1a, 64-bit. Used to fingerprint datasets and input files.
inline std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::string to_hex(std::uint64_t value) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace cgscore
