#ifndef HARDMETRIC_MAT_HPP_
#define HARDMETRIC_MAT_HPP_

#include <cstddef>
#include <vector>

namespace hm {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

  void fill(double v) { data.assign(data.size(), v); }

  bool operator==(const Mat& o) const {
    return rows == o.rows && cols == o.cols && data == o.data;
  }
};

}  // namespace hm

#endif  // HARDMETRIC_MAT_HPP_
