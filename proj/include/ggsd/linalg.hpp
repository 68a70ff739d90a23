#pragma once

#include <span>
#include <vector>

#include "ggsd/types.hpp"

namespace ggsd {

inline constexpr double kNormEps = 1e-12;

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

/// Rows with norm > eps scaled to unit length; other rows returned unchanged.
FeatureMatrix l2_normalize_rows(const FeatureMatrix& m, double eps = kNormEps);

/// Per-row cosine similarity. Throws on shape mismatch or a zero-norm row.
std::vector<double> cosine_rows(const FeatureMatrix& a, const FeatureMatrix& b);

}  // namespace ggsd
