#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "ggsd/types.hpp"

namespace ggsd {

/// Pinhole camera with a depth map and per-pixel teacher features.
struct CameraView {
  double fx = 1, fy = 1, cx = 0, cy = 0;
  std::array<double, 16> world_to_cam{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};  // row-major
  int width = 0, height = 0;
  std::vector<double> depth;     // height x width, row-major; <= 0 or NaN is invalid
  FeatureMatrix pixel_features;  // (height * width) x C

  std::size_t pixel_index(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
  std::size_t feature_dim() const { return pixel_features.cols(); }
  Vec3 to_camera(const Vec3& x) const;
  Vec3 to_world(const Vec3& x_cam) const;
  /// Camera center in world coordinates.
  Vec3 center() const;
  void validate() const;
};

/// Rigid world-to-camera transform for a camera at `eye` looking at `target`
/// (camera axes: x right, y down, z forward).
std::array<double, 16> look_at(const Vec3& eye, const Vec3& target, const Vec3& up = {0, 0, 1});

struct PixelHit {
  int u = 0, v = 0;
  double depth = 0;  // camera-frame z
};

/// Nearest-pixel projection; empty when behind the camera or outside the image.
std::optional<PixelHit> project_point(const Vec3& x, const CameraView& view);

/// Continuous image coordinates (u, v, depth) before rounding; no bounds check.
Vec3 project_continuous(const Vec3& x, const CameraView& view);
Vec3 back_project(double u, double v, double depth, const CameraView& view);

/// Valid pixel depth and |cam_depth - pixel_depth| < sigma_factor * pixel_depth.
bool occlusion_test(double cam_depth, double pixel_depth, double sigma_factor);

struct FusedFeatures {
  FeatureMatrix features;  // M x C, unit rows; zero rows where uncovered
  std::vector<int> view_count;
  std::vector<bool> covered;

  std::size_t covered_count() const;
};

/// Mean of the visible pixel features over all views, then row-normalized.
/// Contributions are summed in a canonical order, so the result does not
/// depend on the order of `views`.
FusedFeatures fuse_views(const PointCloud& cloud, std::span<const CameraView> views, double sigma_factor,
                         bool occlusion_enabled);

}  // namespace ggsd
