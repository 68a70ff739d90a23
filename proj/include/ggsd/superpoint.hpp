#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "ggsd/config.hpp"
#include "ggsd/rng.hpp"
#include "ggsd/types.hpp"

namespace ggsd {

struct VccsParams {
  double voxel_size = 0.02;
  double seed_spacing = 0.50;
  double w_c = 0.2;
  double w_s = 0.4;
  double w_n = 1.0;
  int max_iters = 5;
  int normal_k = 16;

  static VccsParams from_config(const Config& cfg);
  void validate() const;
};

struct RansacParams {
  double plane_dist = 0.2;
  double cluster_dist = 0.2;
  int iters = 256;
  std::size_t min_inliers = 3;

  static RansacParams from_config(const Config& cfg);
  void validate() const;
};

using VoxelKey = std::array<std::int64_t, 3>;

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept;
};

/// Occupied voxels in ascending key order plus per-voxel attribute means.
struct VoxelMap {
  double voxel_size = 0.0;
  std::vector<VoxelKey> keys;
  std::vector<int> point_voxel;  // voxel index of every point
  std::vector<std::size_t> counts;
  std::vector<Vec3> centroids;
  std::vector<Vec3> colors;   // mean RGB
  std::vector<Vec3> normals;  // normalized mean normal; empty when no normals were given
  std::unordered_map<VoxelKey, int, VoxelKeyHash> index;

  std::size_t size() const noexcept { return keys.size(); }
  /// Voxel index for a key, or -1.
  int find(const VoxelKey& key) const;
};

VoxelKey voxel_key(const Vec3& p, double voxel_size);

VoxelMap voxelize(const PointCloud& cloud, double voxel_size, const std::vector<Vec3>* point_normals = nullptr);

struct NormalEstimate {
  std::vector<Vec3> normals;
  std::vector<bool> degenerate;
  bool any_degenerate = false;
};

/// Least-variance direction of each k-NN neighborhood, oriented toward +z
/// (ties toward +y, then +x). Coincident neighborhoods get (0,0,1) and a flag.
NormalEstimate estimate_normals(const PointCloud& cloud, std::size_t k);

/// Attributes compared by the VCCS distance. Color is CIELAB.
struct VoxelAttrs {
  Vec3 lab;
  Vec3 position;
  Vec3 normal;
};

/// sqrt(w_c Dc^2 + w_s Ds^2 / (3 r_seed^2) + w_n Dn^2) with Dc the Lab distance
/// divided by 100, Ds the spatial distance and Dn = 1 - |n_a . n_b|.
double vccs_distance(const VoxelAttrs& a, const VoxelAttrs& b, const VccsParams& p, double r_seed);

Superpointing vccs_superpoints(const PointCloud& cloud, const VccsParams& p);

struct PlaneFit {
  std::array<double, 4> plane{0.0, 0.0, 1.0, 0.0};  // n.x + d = 0, |n| = 1
  std::vector<bool> inliers;
  std::size_t inlier_count = 0;
};

PlaneFit ransac_plane(const PointCloud& cloud, const RansacParams& p, Rng& rng);

/// Connected components of the subset under |x_i - x_j| < cluster_dist.
/// Returns one id per point (-1 outside the subset); ids are numbered by the
/// lowest point index in each component.
std::vector<int> euclidean_cluster(const PointCloud& cloud, const std::vector<bool>& subset, double cluster_dist);

/// Largest RANSAC plane becomes superpoint 0; the rest is split by Euclidean clustering.
Superpointing outdoor_superpoints(const PointCloud& cloud, const RansacParams& p, Rng& rng);

/// Mean over labeled superpoints of the majority-label fraction (labels < 0 ignored).
double superpoint_purity(const Superpointing& sp, const std::vector<int>& labels);

}  // namespace ggsd
