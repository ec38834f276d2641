#ifndef HARDMETRIC_RNG_HPP_
#define HARDMETRIC_RNG_HPP_

#include <cstdint>
#include <random>
#include <string>

namespace hm {

/// Deterministic random source. Wraps std::mt19937_64 and derives all
/// variates from raw engine words with fixed, portable arithmetic, so a
/// seed pins the entire stream across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next() { return eng_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Unbiased uniform integer in [0, n); n >= 1.
  uint64_t bounded(uint64_t n);

  /// Standard normal via Box-Muller (one variate per call, two words).
  double gaussian();

  /// Engine state as text; load_state restores it exactly.
  std::string save_state() const;
  void load_state(const std::string& s);

  bool operator==(const Rng& o) const { return eng_ == o.eng_; }

  /// splitmix64 finalizer; used to derive independent stream seeds.
  static uint64_t mix(uint64_t x);
  static uint64_t derive(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0,
                         uint64_t d = 0);

 private:
  std::mt19937_64 eng_;
};

}  // namespace hm

#endif  // HARDMETRIC_RNG_HPP_
