#include "ggsd/projection.hpp"

#include <algorithm>
#include <cmath>

#include "ggsd/error.hpp"
#include "ggsd/geometry.hpp"
#include "ggsd/linalg.hpp"
#include "ggsd/parallel.hpp"

namespace ggsd {

Vec3 CameraView::to_camera(const Vec3& x) const {
  const auto& t = world_to_cam;
  return {t[0] * x[0] + t[1] * x[1] + t[2] * x[2] + t[3], t[4] * x[0] + t[5] * x[1] + t[6] * x[2] + t[7],
          t[8] * x[0] + t[9] * x[1] + t[10] * x[2] + t[11]};
}

Vec3 CameraView::to_world(const Vec3& c) const {
  const auto& t = world_to_cam;
  const Vec3 d{c[0] - t[3], c[1] - t[7], c[2] - t[11]};
  return {t[0] * d[0] + t[4] * d[1] + t[8] * d[2], t[1] * d[0] + t[5] * d[1] + t[9] * d[2],
          t[2] * d[0] + t[6] * d[1] + t[10] * d[2]};
}

Vec3 CameraView::center() const { return to_world({0, 0, 0}); }

void CameraView::validate() const {
  if (!(fx > 0 && fy > 0)) throw_data("camera view: fx and fy must be positive");
  if (width <= 0 || height <= 0) throw_data("camera view: non-positive image size");
  const std::size_t npix = static_cast<std::size_t>(width) * height;
  if (depth.size() != npix) throw_data("camera view: depth map size does not match width x height");
  if (pixel_features.rows() != npix) throw_data("camera view: pixel feature rows do not match width x height");
  const auto& t = world_to_cam;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += t[4 * a + k] * t[4 * b + k];
      if (std::fabs(s - (a == b ? 1.0 : 0.0)) > 1e-6) throw_data("camera view: rotation block is not orthonormal");
    }
  if (t[12] != 0 || t[13] != 0 || t[14] != 0 || t[15] != 1) throw_data("camera view: extrinsic last row must be 0 0 0 1");
}

std::array<double, 16> look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  Vec3 z = sub(target, eye);
  const double zl = std::sqrt(dot3(z, z));
  for (double& v : z) v /= zl;
  Vec3 x = cross(z, up);  // right; image y points down
  const double xl = std::sqrt(dot3(x, x));
  if (xl < 1e-12) throw_usage("look_at: view direction parallel to up");
  for (double& v : x) v /= xl;
  const Vec3 y = cross(z, x);
  return {x[0], x[1], x[2], -dot3(x, eye), y[0], y[1], y[2], -dot3(y, eye),
          z[0], z[1], z[2], -dot3(z, eye), 0,    0,    0,    1};
}

Vec3 project_continuous(const Vec3& x, const CameraView& view) {
  const Vec3 c = view.to_camera(x);
  return {view.fx * c[0] / c[2] + view.cx, view.fy * c[1] / c[2] + view.cy, c[2]};
}

Vec3 back_project(double u, double v, double depth, const CameraView& view) {
  return view.to_world({(u - view.cx) / view.fx * depth, (v - view.cy) / view.fy * depth, depth});
}

std::optional<PixelHit> project_point(const Vec3& x, const CameraView& view) {
  const Vec3 c = view.to_camera(x);
  if (!(c[2] > 0)) return std::nullopt;
  const double u = std::floor(view.fx * c[0] / c[2] + view.cx + 0.5);
  const double v = std::floor(view.fy * c[1] / c[2] + view.cy + 0.5);
  if (!(u >= 0 && u < view.width && v >= 0 && v < view.height)) return std::nullopt;
  return PixelHit{static_cast<int>(u), static_cast<int>(v), c[2]};
}

bool occlusion_test(double cam_depth, double pixel_depth, double sigma_factor) {
  if (!(pixel_depth > 0) || !std::isfinite(pixel_depth)) return false;
  return std::fabs(cam_depth - pixel_depth) < sigma_factor * pixel_depth;
}

std::size_t FusedFeatures::covered_count() const {
  return static_cast<std::size_t>(std::count(covered.begin(), covered.end(), true));
}

FusedFeatures fuse_views(const PointCloud& cloud, std::span<const CameraView> views, double sigma_factor,
                         bool occlusion_enabled) {
  if (sigma_factor < 0) throw_usage("fuse_views: sigma_factor must be >= 0");
  const std::size_t c = views.empty() ? 1 : views.front().feature_dim();
  for (const auto& v : views) {
    if (v.feature_dim() != c) throw_data("fuse_views: views disagree on feature dimension");
    v.validate();
  }
  const std::size_t m = cloud.size();
  FusedFeatures out;
  out.features = FeatureMatrix(m, c);
  out.view_count.assign(m, 0);
  out.covered.assign(m, false);

  parallel_for(m, [&](std::size_t begin, std::size_t end) {
    std::vector<std::span<const double>> contrib;
    for (std::size_t i = begin; i < end; ++i) {
      contrib.clear();
      for (const auto& view : views) {
        const auto hit = project_point(cloud.positions[i], view);
        if (!hit) continue;
        const std::size_t pix = view.pixel_index(hit->u, hit->v);
        if (occlusion_enabled && !occlusion_test(hit->depth, view.depth[pix], sigma_factor)) continue;
        contrib.push_back(view.pixel_features.row(pix));
      }
      if (contrib.empty()) continue;
      std::sort(contrib.begin(), contrib.end(), [](auto a, auto b) {
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
      });
      auto row = out.features.row(i);
      for (const auto& f : contrib)
        for (std::size_t k = 0; k < c; ++k) row[k] += f[k];
      const double n = static_cast<double>(contrib.size());
      for (double& v : row) v /= n;
      const double len = norm(row);
      if (len > kNormEps)
        for (double& v : row) v /= len;
      out.view_count[i] = static_cast<int>(contrib.size());
      out.covered[i] = true;
    }
  });
  return out;
}

}  // namespace ggsd
