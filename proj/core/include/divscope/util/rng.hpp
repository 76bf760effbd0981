#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace divscope::util {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from a root seed. Stage and run ids get
// their own streams so scheduling never changes what a consumer draws.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  std::uint64_t s = root ^ (0x9e3779b97f4a7c15ull * (stream + 1));
  std::uint64_t a = splitmix64(s);
  std::uint64_t b = splitmix64(s);
  return a ^ (b << 1) ^ (b >> 3);
}

// Small self-contained engine; output is identical on every platform, which
// keeps seeded results reproducible independent of the standard library.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  result_type operator()() { return splitmix64(state_); }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~0ull; }

 private:
  std::uint64_t state_;
};

// Unbiased bounded draw (Lemire's method).
template <typename Engine>
std::uint64_t uniform_below(Engine& eng, std::uint64_t bound) {
  if (bound == 0) return 0;
  while (true) {
    std::uint64_t x = eng();
#if defined(__SIZEOF_INT128__)
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < bound) {
      std::uint64_t t = -bound % bound;
      if (lo < t) continue;
    }
    return static_cast<std::uint64_t>(m >> 64);
#else
    return x % bound;
#endif
  }
}

template <typename Engine>
double uniform_unit(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Box-Muller; avoids implementation-defined std::normal_distribution output.
template <typename Engine>
double standard_normal(Engine& eng) {
  double u1 = 0.0;
  do {
    u1 = uniform_unit(eng);
  } while (u1 <= 0.0);
  double u2 = uniform_unit(eng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

// First k elements of a seeded partial Fisher-Yates shuffle of [0, n).
template <typename Engine>
std::vector<std::size_t> sample_without_replacement(Engine& eng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (k > n) k = n;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(uniform_below(eng, n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace divscope::util
