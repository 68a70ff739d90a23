#pragma once

#include <array>
#include <span>
#include <vector>

#include "ggsd/types.hpp"

namespace ggsd {

/// PCA of a point's k-nearest neighborhood.
struct LocalShape {
  Vec3 normal{0.0, 0.0, 1.0};
  std::array<double, 3> eigenvalues{0.0, 0.0, 0.0};  // descending
  double mean_neighbor_distance = 0.0;
  bool degenerate = false;  // all neighbors coincident
};

/// Orients a normal toward +z, breaking ties toward +y and then +x.
Vec3 orient_normal(Vec3 n);

std::vector<LocalShape> local_shapes(std::span<const Vec3> positions, std::size_t k);

/// sRGB in [0,1] to CIELAB (D65 white).
Vec3 rgb_to_lab(const Vec3& rgb);

inline Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double dist2(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

}  // namespace ggsd
