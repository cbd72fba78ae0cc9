#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace leangcn {

namespace detail {

// Finalizer from splitmix64. Bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

}  // namespace detail

// Derive a child seed from a parent seed and up to three stream labels.
// Used to key independent substreams (per point, per layer, per pass) so
// draws are a pure function of their labels, never of call order elsewhere.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a = 0,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = detail::mix64(seed + detail::kGolden);
  h = detail::mix64(h ^ (a + detail::kGolden));
  h = detail::mix64(h ^ (b + detail::kGolden));
  h = detail::mix64(h ^ (c + detail::kGolden));
  return h;
}

// Counter-based generator: output i is mix64(key + i * golden). Cheap to
// construct, so a fresh keyed stream per (point, layer) is the normal idiom.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t a = 0,
                      std::uint64_t b = 0, std::uint64_t c = 0)
      : key_(derive_seed(seed, a, b, c)) {}

  std::uint64_t next_u64() {
    ++counter_;
    return detail::mix64(key_ + counter_ * detail::kGolden);
  }

  // Uniform on [0, 1), 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe as a log() argument.
  double next_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller, one deviate per two uniforms.
  double next_normal() {
    const double u1 = next_open();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n) by 128-bit multiply-shift.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("next_below: empty range");
    using u128 = unsigned __int128;
    return static_cast<std::uint64_t>(
        (static_cast<u128>(next_u64()) * static_cast<u128>(n)) >> 64);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// k distinct values from [0, window), partial Fisher-Yates, returned in the
// order drawn.
inline std::vector<std::int32_t> sample_without_replacement(CounterRng& rng,
                                                            std::int32_t window,
                                                            std::int32_t k) {
  if (k < 0 || window < k)
    throw std::invalid_argument(
        "sample_without_replacement: need 0 <= k <= window");
  std::vector<std::int32_t> scratch(static_cast<std::size_t>(window));
  for (std::int32_t i = 0; i < window; ++i)
    scratch[static_cast<std::size_t>(i)] = i;
  for (std::int32_t i = 0; i < k; ++i) {
    const auto j = static_cast<std::int32_t>(
        i + static_cast<std::int32_t>(
                rng.next_below(static_cast<std::uint64_t>(window - i))));
    std::swap(scratch[static_cast<std::size_t>(i)],
              scratch[static_cast<std::size_t>(j)]);
  }
  scratch.resize(static_cast<std::size_t>(k));
  return scratch;
}

}  // namespace leangcn
