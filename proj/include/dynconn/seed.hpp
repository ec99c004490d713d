#pragma once

#include <cstdint>
#include <string_view>

namespace dynconn {

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed, a stage name and an
/// index. Stable across platforms and runs.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view stage,
                                    std::uint64_t index = 0) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : stage) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return mix64(mix64(master ^ h) + index);
}

}  // namespace dynconn
