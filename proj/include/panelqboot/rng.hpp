#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "panelqboot/errors.hpp"

namespace panelqboot {

namespace detail {

// SplitMix64 finalizer; stateless avalanche step used for key derivation.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

// Derives a child stream key from a master seed and up to three stream
// coordinates (purpose tag, replicate index, ...). Distinct coordinates
// yield statistically unrelated streams, so parallel consumers can draw
// independently of scheduling order.
inline std::uint64_t derive_stream(std::uint64_t master, std::uint64_t s0,
                                   std::uint64_t s1 = 0,
                                   std::uint64_t s2 = 0) {
  std::uint64_t h = detail::mix64(master + 0x9E3779B97F4A7C15ull);
  h = detail::mix64(h ^ ((s0 + 1) * 0xD1B54A32D192ED03ull));
  h = detail::mix64(h ^ ((s1 + 1) * 0x8CB92BA72F3D8DD7ull));
  h = detail::mix64(h ^ ((s2 + 1) * 0xEB44ACCAB455D165ull));
  return h;
}

// Seeded random stream with samplers that are deterministic given the key,
// independent of platform or standard-library version. All variates are
// generated from explicit inverse/transform constructions on top of a
// Mersenne Twister so that frozen-seed test values stay valid.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key) {
    std::uint64_t h = key;
    std::uint32_t words[8];
    for (auto& w : words) {
      h = detail::mix64(h + 0x9E3779B97F4A7C15ull);
      w = static_cast<std::uint32_t>(h >> 16);
    }
    std::seed_seq seq(words, words + 8);
    eng_.seed(seq);
  }

  RngStream(std::uint64_t master, std::uint64_t s0, std::uint64_t s1 = 0,
            std::uint64_t s2 = 0)
      : RngStream(derive_stream(master, s0, s1, s2)) {}

  std::uint64_t key() const noexcept { return key_; }

  // Uniform on the open interval (0, 1).
  double uniform01() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the second variate of each pair is
  // cached, so draw order is well-defined.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Exp(1).
  double exponential() { return -std::log(uniform01()); }

  double chi_squared(int df) {
    if (df < 1) fail(errc::invalid_argument, "chi_squared: df must be >= 1");
    double s = 0.0;
    for (int i = 0; i < df; ++i) {
      const double z = normal();
      s += z * z;
    }
    return s;
  }

  // Student t with 3 degrees of freedom (variance 3).
  double student_t3() { return normal() / std::sqrt(chi_squared(3) / 3.0); }

  // Uniform integer on [lo, hi], inclusive; rejection keeps it unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) fail(errc::invalid_argument, "uniform_int: empty range");
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(eng_());  // full range
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % range);
  }

 private:
  std::mt19937_64 eng_;
  std::uint64_t key_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace panelqboot
