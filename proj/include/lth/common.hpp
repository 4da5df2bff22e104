#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lth {

// Error taxonomy. The CLI maps these onto exit codes: user/config/format
// errors -> 1, numeric failures -> 2, missing prerequisite artifacts -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct ArgumentError : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct StateError : Error {
  using Error::Error;
};
struct DependencyError : Error {
  using Error::Error;
};

// ----------------------------------------------------------------------
// Deterministic RNG.
//
// splitmix64 core with hand-rolled uniform/normal mappings so that every
// stream is bit-reproducible regardless of platform or standard library.
// std::uniform_real_distribution and friends are implementation-defined
// and must not be used anywhere in this codebase.
// ----------------------------------------------------------------------
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller. First uniform is drawn from (0, 1]
  // so the log never sees zero.
  double normal() {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Uniform integer in [0, n). Rejection sampling keeps it exactly uniform.
  uint64_t below(uint64_t n) {
    if (n == 0) throw ArgumentError("Rng::below: n must be positive");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Derives an independent child seed from a base seed and a role tag.
inline uint64_t mix_seed(uint64_t base, std::string_view tag, uint64_t salt = 0) {
  Rng r(base ^ fnv1a64(tag) ^ (salt * 0x9E3779B97F4A7C15ull + salt));
  r.next_u64();
  return r.next_u64();
}

std::string hex64(uint64_t v);

}  // namespace lth
