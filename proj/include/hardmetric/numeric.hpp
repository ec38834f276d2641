#ifndef HARDMETRIC_NUMERIC_HPP_
#define HARDMETRIC_NUMERIC_HPP_

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace hm {

/// Exactly rounded running sum of doubles (Shewchuk partials, as in
/// Python's math.fsum). The result is the correctly rounded value of the
/// exact real sum, hence independent of the order terms are added in.
class ExactSum {
 public:
  void add(double x);
  double total() const;
  void reset() { partials_.clear(); }

 private:
  std::vector<double> partials_;
};

/// Exactly rounded sum of a range.
double exact_sum(const double* begin, const double* end);

/// Round to the nearest double representable as a decimal with 9
/// significant digits. Idempotent; the %.9g text of the result parses
/// back to it bit for bit.
double quantize9(double v);

/// %.9g rendering of a double (C locale).
std::string format_g9(double v);

/// 17-significant-digit rendering; round-trips any finite double.
std::string format_g17(double v);

/// FNV-1a 64-bit digest of a byte range.
uint64_t fnv1a64(const void* data, size_t n, uint64_t seed = 0xcbf29ce484222325ull);

/// Digest of a file's contents as "fnv1a64:<hex>". Throws IoError.
std::string digest_file(const std::string& path);

inline bool all_finite(const double* p, size_t n) {
  for (size_t i = 0; i < n; ++i)
    if (!std::isfinite(p[i])) return false;
  return true;
}

}  // namespace hm

#endif  // HARDMETRIC_NUMERIC_HPP_
