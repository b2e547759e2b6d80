#include "xmusim/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace xmusim {

void Matrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_) throw std::invalid_argument("Matrix::append_row: width mismatch");
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

void Matrix::fill(double value) {
  for (double& v : data_) v = value;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Matrix affine_rows(const Matrix& x, const Matrix& w, std::span<const double> b) {
  if (x.cols() != w.cols() || b.size() != w.rows()) {
    throw std::invalid_argument("affine_rows: shape mismatch");
  }
  Matrix out(x.rows(), w.rows());
  for (std::size_t n = 0; n < x.rows(); ++n) {
    auto xr = x.row(n);
    auto orow = out.row(n);
    for (std::size_t o = 0; o < w.rows(); ++o) orow[o] = b[o] + dot(w.row(o), xr);
  }
  return out;
}

}  // namespace xmusim
