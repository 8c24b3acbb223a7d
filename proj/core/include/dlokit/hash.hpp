#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace dlokit {

// FNV-1a, used for config/corpus fingerprints. Stable across platforms for
// the same byte stream, so only feed it explicitly serialized bytes (not
// raw structs with padding).
constexpr uint64_t kFnvOffset = 14695981039346656037ull;

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t seed = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t seed = kFnvOffset) {
  return fnv1a64(s.data(), s.size(), seed);
}

}  // namespace dlokit
