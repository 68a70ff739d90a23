#include "ggsd/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "ggsd/kdtree.hpp"
#include "ggsd/parallel.hpp"

namespace ggsd {

Vec3 orient_normal(Vec3 n) {
  constexpr double kTie = 1e-9;
  const int axis = std::fabs(n[2]) > kTie ? 2 : std::fabs(n[1]) > kTie ? 1 : 0;
  if (n[axis] < 0)
    for (double& v : n) v = -v;
  return n;
}

std::vector<LocalShape> local_shapes(std::span<const Vec3> positions, std::size_t k) {
  const KdTree tree(positions);
  std::vector<LocalShape> out(positions.size());
  parallel_for(positions.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto nn = tree.knn(positions[i], k);
      LocalShape& s = out[i];
      double dsum = 0.0;
      bool coincident = true;
      Eigen::Vector3d mean = Eigen::Vector3d::Zero();
      for (const auto& [d2, j] : nn) {
        mean += Eigen::Vector3d(positions[j][0], positions[j][1], positions[j][2]);
        dsum += std::sqrt(d2);
        if (positions[j] != positions[nn.front().second]) coincident = false;
      }
      s.mean_neighbor_distance = nn.size() > 1 ? dsum / static_cast<double>(nn.size() - 1) : 0.0;
      if (coincident || nn.size() < 3) {
        s.degenerate = true;
        continue;
      }
      mean /= static_cast<double>(nn.size());
      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (const auto& [d2, j] : nn) {
        const Eigen::Vector3d d = Eigen::Vector3d(positions[j][0], positions[j][1], positions[j][2]) - mean;
        cov += d * d.transpose();
      }
      cov /= static_cast<double>(nn.size());
      const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
      const auto& ev = eig.eigenvalues();  // ascending
      s.eigenvalues = {std::max(ev[2], 0.0), std::max(ev[1], 0.0), std::max(ev[0], 0.0)};
      const Eigen::Vector3d n = eig.eigenvectors().col(0).normalized();
      s.normal = orient_normal({n[0], n[1], n[2]});
    }
  }, 64);
  return out;
}

Vec3 rgb_to_lab(const Vec3& rgb) {
  auto linear = [](double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); };
  const double r = linear(rgb[0]), g = linear(rgb[1]), b = linear(rgb[2]);
  const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
  const double y = (0.2126729 * r + 0.7151522 * g + 0.0721750 * b) / 1.00000;
  const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
  auto f = [](double t) {
    constexpr double kDelta = 6.0 / 29.0;
    return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3 * kDelta * kDelta) + 4.0 / 29.0;
  };
  const double fx = f(x), fy = f(y), fz = f(z);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

}  // namespace ggsd
