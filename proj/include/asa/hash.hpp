#pragma once

#include <cstdint>
#include <cstdio>
#include <string>

namespace asa {

// FNV-1a 64-bit, used for config hashes and checkpoint checksums.
inline std::uint64_t fnv1a64(const void* data, std::size_t size,
                             std::uint64_t h = 14695981039346656037ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(s.data(), s.size());
}

inline std::string to_hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace asa
