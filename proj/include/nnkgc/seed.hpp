#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace nnkgc {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Derives an independent stream seed from the root seed and a label plus
// optional integer coordinates (epoch, sample index, ...). Adding a new label
// never perturbs the streams of existing labels.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                                    std::initializer_list<std::uint64_t> coords = {}) noexcept {
  std::uint64_t h = mix64(root ^ fnv1a(label));
  for (std::uint64_t c : coords) h = mix64(h ^ mix64(c + 0x51ed270b27a3c3f1ULL));
  return h;
}

inline Rng make_rng(std::uint64_t root, std::string_view label,
                    std::initializer_list<std::uint64_t> coords = {}) {
  return Rng(derive_seed(root, label, coords));
}

}  // namespace nnkgc
