#include "ggsd/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "ggsd/error.hpp"

namespace ggsd {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

FeatureMatrix l2_normalize_rows(const FeatureMatrix& m, double eps) {
  if (!(eps > 0.0)) throw_usage("l2_normalize_rows: eps must be positive");
  FeatureMatrix out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double n = norm(row);
    if (n > eps)
      for (double& v : row) v /= n;
  }
  return out;
}

std::vector<double> cosine_rows(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw_data("cosine_rows: shape mismatch");
  std::vector<double> out(a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double na = norm(a.row(r));
    const double nb = norm(b.row(r));
    if (na == 0.0 || nb == 0.0) throw_data("cosine_rows: zero-norm row " + std::to_string(r));
    out[r] = std::clamp(dot(a.row(r), b.row(r)) / (na * nb), -1.0, 1.0);
  }
  return out;
}

}  // namespace ggsd
