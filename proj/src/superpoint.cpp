#include "ggsd/superpoint.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <tuple>

#include "ggsd/error.hpp"
#include "ggsd/geometry.hpp"

namespace ggsd {

VccsParams VccsParams::from_config(const Config& cfg) {
  VccsParams p;
  p.voxel_size = cfg.get_double("voxel_size");
  p.seed_spacing = cfg.get_double("seed_spacing");
  p.w_c = cfg.get_double("vccs_wc");
  p.w_s = cfg.get_double("vccs_ws");
  p.w_n = cfg.get_double("vccs_wn");
  p.max_iters = static_cast<int>(cfg.get_int("vccs_max_iters"));
  p.normal_k = static_cast<int>(cfg.get_int("normal_k"));
  return p;
}

void VccsParams::validate() const {
  if (!(voxel_size > 0)) throw_usage("voxel_size must be positive");
  if (!(seed_spacing >= voxel_size)) throw_usage("seed_spacing must be >= voxel_size");
  if (w_c < 0 || w_s < 0 || w_n < 0 || (w_c == 0 && w_s == 0 && w_n == 0))
    throw_usage("VCCS weights must be non-negative and not all zero");
  if (max_iters < 1) throw_usage("vccs_max_iters must be >= 1");
  if (normal_k < 3) throw_usage("normal_k must be >= 3");
}

RansacParams RansacParams::from_config(const Config& cfg) {
  RansacParams p;
  p.plane_dist = cfg.get_double("ransac_plane_dist");
  p.cluster_dist = cfg.get_double("ransac_cluster_dist");
  p.iters = static_cast<int>(cfg.get_int("ransac_iters"));
  p.min_inliers = static_cast<std::size_t>(cfg.get_int("ransac_min_inliers"));
  return p;
}

void RansacParams::validate() const {
  if (!(plane_dist > 0)) throw_usage("ransac_plane_dist must be positive");
  if (!(cluster_dist > 0)) throw_usage("ransac_cluster_dist must be positive");
  if (iters < 1) throw_usage("ransac_iters must be >= 1");
}

std::size_t VoxelKeyHash::operator()(const VoxelKey& k) const noexcept {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (auto v : k) {
    h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

int VoxelMap::find(const VoxelKey& key) const {
  const auto it = index.find(key);
  return it == index.end() ? -1 : it->second;
}

VoxelKey voxel_key(const Vec3& p, double voxel_size) {
  return {static_cast<std::int64_t>(std::floor(p[0] / voxel_size)),
          static_cast<std::int64_t>(std::floor(p[1] / voxel_size)),
          static_cast<std::int64_t>(std::floor(p[2] / voxel_size))};
}

VoxelMap voxelize(const PointCloud& cloud, double voxel_size, const std::vector<Vec3>* point_normals) {
  if (!(voxel_size > 0)) throw_usage("voxelize: voxel_size must be positive");
  VoxelMap vm;
  vm.voxel_size = voxel_size;
  const std::size_t m = cloud.size();
  std::vector<VoxelKey> pkeys(m);
  for (std::size_t i = 0; i < m; ++i) pkeys[i] = voxel_key(cloud.positions[i], voxel_size);
  vm.keys = pkeys;
  std::sort(vm.keys.begin(), vm.keys.end());
  vm.keys.erase(std::unique(vm.keys.begin(), vm.keys.end()), vm.keys.end());
  vm.index.reserve(vm.keys.size() * 2);
  for (std::size_t v = 0; v < vm.keys.size(); ++v) vm.index.emplace(vm.keys[v], static_cast<int>(v));

  const std::size_t n = vm.keys.size();
  vm.counts.assign(n, 0);
  vm.centroids.assign(n, {0, 0, 0});
  vm.colors.assign(n, {0, 0, 0});
  if (point_normals) vm.normals.assign(n, {0, 0, 0});
  vm.point_voxel.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const int v = vm.index.at(pkeys[i]);
    vm.point_voxel[i] = v;
    ++vm.counts[v];
    for (int k = 0; k < 3; ++k) {
      vm.centroids[v][k] += cloud.positions[i][k];
      vm.colors[v][k] += cloud.colors[i][k];
      if (point_normals) vm.normals[v][k] += (*point_normals)[i][k];
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    const double c = static_cast<double>(vm.counts[v]);
    for (int k = 0; k < 3; ++k) {
      vm.centroids[v][k] /= c;
      vm.colors[v][k] /= c;
    }
    if (point_normals) {
      const double len = std::sqrt(dot3(vm.normals[v], vm.normals[v]));
      vm.normals[v] = len > 1e-12 ? Vec3{vm.normals[v][0] / len, vm.normals[v][1] / len, vm.normals[v][2] / len}
                                  : Vec3{0, 0, 1};
    }
  }
  return vm;
}

NormalEstimate estimate_normals(const PointCloud& cloud, std::size_t k) {
  if (k < 3) throw_usage("estimate_normals: k must be >= 3");
  if (cloud.size() < k) throw_usage("estimate_normals: fewer points than k");
  const auto shapes = local_shapes(cloud.positions, k);
  NormalEstimate out;
  out.normals.resize(shapes.size());
  out.degenerate.resize(shapes.size());
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    out.normals[i] = shapes[i].normal;
    out.degenerate[i] = shapes[i].degenerate;
    out.any_degenerate = out.any_degenerate || shapes[i].degenerate;
  }
  return out;
}

double vccs_distance(const VoxelAttrs& a, const VoxelAttrs& b, const VccsParams& p, double r_seed) {
  const double dc2 = dist2(a.lab, b.lab) / (100.0 * 100.0);
  const double ds2 = dist2(a.position, b.position);
  const double dn = 1.0 - std::fabs(dot3(a.normal, b.normal));
  return std::sqrt(p.w_c * dc2 + p.w_s * ds2 / (3.0 * r_seed * r_seed) + p.w_n * dn * dn);
}

namespace {

struct Seed {
  VoxelAttrs center;
  int root = -1;
  Vec3 initial{0, 0, 0};
};

/// Multi-source best-first expansion. A voxel joins the first seed that pops it,
/// i.e. the seed with the smallest distance among those adjacent to it, and
/// only through a neighbor that seed already owns.
void grow(const std::vector<Seed>& seeds, std::span<const int> seed_ids, const std::vector<VoxelAttrs>& attrs,
          const std::vector<std::vector<int>>& adjacency, const VccsParams& p, double radius, std::vector<int>& owner) {
  using Item = std::tuple<double, int, int>;  // distance, voxel, seed
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (int s : seed_ids) heap.emplace(0.0, seeds[s].root, s);
  const double r2 = radius * radius;
  while (!heap.empty()) {
    const auto [d, v, s] = heap.top();
    heap.pop();
    if (owner[v] != -1) continue;
    owner[v] = s;
    for (int u : adjacency[v]) {
      if (owner[u] != -1) continue;
      if (dist2(attrs[u].position, seeds[s].center.position) > r2) continue;
      heap.emplace(vccs_distance(attrs[u], seeds[s].center, p, p.seed_spacing), u, s);
    }
  }
}

void recenter(std::vector<Seed>& seeds, const std::vector<VoxelAttrs>& attrs, const std::vector<int>& owner) {
  const std::size_t ns = seeds.size();
  std::vector<VoxelAttrs> sum(ns, VoxelAttrs{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}});
  std::vector<std::size_t> count(ns, 0);
  for (std::size_t v = 0; v < owner.size(); ++v) {
    const int s = owner[v];
    if (s < 0) continue;
    ++count[s];
    for (int k = 0; k < 3; ++k) {
      sum[s].lab[k] += attrs[v].lab[k];
      sum[s].position[k] += attrs[v].position[k];
      sum[s].normal[k] += attrs[v].normal[k];
    }
  }
  for (std::size_t s = 0; s < ns; ++s) {
    if (count[s] == 0) {
      seeds[s].root = -1;
      continue;
    }
    const double c = static_cast<double>(count[s]);
    for (int k = 0; k < 3; ++k) {
      seeds[s].center.lab[k] = sum[s].lab[k] / c;
      seeds[s].center.position[k] = sum[s].position[k] / c;
    }
    const double len = std::sqrt(dot3(sum[s].normal, sum[s].normal));
    seeds[s].center.normal = len > 1e-12 ? Vec3{sum[s].normal[0] / len, sum[s].normal[1] / len, sum[s].normal[2] / len}
                                         : Vec3{0, 0, 1};
    seeds[s].root = -1;
  }
  // New root: owned voxel nearest the recomputed center (ties to lower voxel id).
  std::vector<double> best(ns, std::numeric_limits<double>::infinity());
  for (std::size_t v = 0; v < owner.size(); ++v) {
    const int s = owner[v];
    if (s < 0) continue;
    const double d = dist2(attrs[v].position, seeds[s].center.position);
    if (d < best[s]) {
      best[s] = d;
      seeds[s].root = static_cast<int>(v);
    }
  }
}

}  // namespace

Superpointing vccs_superpoints(const PointCloud& cloud, const VccsParams& p) {
  p.validate();
  if (cloud.size() == 0) throw_data("vccs_superpoints: empty cloud");

  std::vector<Vec3> point_normals(cloud.size(), Vec3{0, 0, 1});
  if (cloud.size() >= 3) {
    point_normals = estimate_normals(cloud, std::min<std::size_t>(p.normal_k, cloud.size())).normals;
  }
  const VoxelMap vm = voxelize(cloud, p.voxel_size, &point_normals);
  const std::size_t nv = vm.size();

  std::vector<VoxelAttrs> attrs(nv);
  for (std::size_t v = 0; v < nv; ++v) attrs[v] = {rgb_to_lab(vm.colors[v]), vm.centroids[v], vm.normals[v]};

  std::vector<std::vector<int>> adjacency(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    const auto& key = vm.keys[v];
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          if (dx == 0 && dy == 0 && dz == 0) continue;
          const int u = vm.find({key[0] + dx, key[1] + dy, key[2] + dz});
          if (u >= 0) adjacency[v].push_back(u);
        }
    std::sort(adjacency[v].begin(), adjacency[v].end());
  }

  // Seeds: per seed-grid cell, the occupied voxel closest to the cell center.
  std::map<VoxelKey, std::pair<double, int>> cells;
  for (std::size_t v = 0; v < nv; ++v) {
    const VoxelKey cell = voxel_key(vm.centroids[v], p.seed_spacing);
    const Vec3 center{(cell[0] + 0.5) * p.seed_spacing, (cell[1] + 0.5) * p.seed_spacing,
                      (cell[2] + 0.5) * p.seed_spacing};
    const double d = dist2(vm.centroids[v], center);
    auto [it, inserted] = cells.emplace(cell, std::make_pair(d, static_cast<int>(v)));
    if (!inserted && d < it->second.first) it->second = {d, static_cast<int>(v)};
  }
  std::vector<Seed> seeds;
  for (const auto& [cell, best] : cells) {
    if (best.first > p.seed_spacing * p.seed_spacing) continue;
    seeds.push_back({attrs[best.second], best.second, vm.centroids[best.second]});
  }

  const double radius = 2.0 * p.seed_spacing;
  std::vector<int> owner(nv, -1);
  std::vector<int> active(seeds.size());
  std::iota(active.begin(), active.end(), 0);
  for (int iter = 0; iter < p.max_iters; ++iter) {
    std::fill(owner.begin(), owner.end(), -1);
    grow(seeds, active, attrs, adjacency, p, radius, owner);
    if (iter + 1 == p.max_iters) break;
    recenter(seeds, attrs, owner);
    std::erase_if(active, [&](int s) { return seeds[s].root < 0; });
  }

  // Voxels out of reach of every seed start new superpoints of their own.
  for (std::size_t v = 0; v < nv; ++v) {
    if (owner[v] != -1) continue;
    const int s = static_cast<int>(seeds.size());
    seeds.push_back({attrs[v], static_cast<int>(v), vm.centroids[v]});
    const int ids[1] = {s};
    grow(seeds, ids, attrs, adjacency, p, radius, owner);
  }

  // Compact ids in seed order, dropping seeds that ended up empty.
  std::vector<int> remap(seeds.size(), -1);
  std::vector<char> used(seeds.size(), 0);
  for (int s : owner) used[s] = 1;
  Superpointing sp;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    if (!used[s]) continue;
    remap[s] = sp.num_superpoints++;
    sp.seeds.push_back(seeds[s].initial);
  }
  sp.assignment.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) sp.assignment[i] = remap[owner[vm.point_voxel[i]]];
  return sp;
}

PlaneFit ransac_plane(const PointCloud& cloud, const RansacParams& p, Rng& rng) {
  p.validate();
  const std::size_t m = cloud.size();
  if (m < 3) throw_data("ransac_plane: need at least 3 points");
  const auto& x = cloud.positions;

  PlaneFit best;
  bool found = false;
  for (int it = 0; it < p.iters; ++it) {
    const std::size_t i = rng.below(m);
    std::size_t j = rng.below(m - 1);
    if (j >= i) ++j;
    std::size_t k = rng.below(m - 2);
    for (std::size_t lo : {std::min(i, j), std::max(i, j)})
      if (k >= lo) ++k;
    const Vec3 a = sub(x[j], x[i]), b = sub(x[k], x[i]);
    Vec3 n = cross(a, b);
    const double n2 = dot3(n, n);
    if (!(n2 > 1e-20 * dot3(a, a) * dot3(b, b)) || n2 == 0.0) continue;
    const double len = std::sqrt(n2);
    for (double& v : n) v /= len;
    n = orient_normal(n);
    const double d = -dot3(n, x[i]);
    std::size_t count = 0;
    for (std::size_t q = 0; q < m; ++q)
      if (std::fabs(dot3(n, x[q]) + d) < p.plane_dist) ++count;
    if (!found || count > best.inlier_count) {
      found = true;
      best.plane = {n[0], n[1], n[2], d};
      best.inlier_count = count;
    }
  }
  if (!found) throw_data("ransac_plane: every sample was collinear");
  const Vec3 n{best.plane[0], best.plane[1], best.plane[2]};
  best.inliers.resize(m);
  for (std::size_t q = 0; q < m; ++q) best.inliers[q] = std::fabs(dot3(n, x[q]) + best.plane[3]) < p.plane_dist;
  return best;
}

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

std::vector<int> euclidean_cluster(const PointCloud& cloud, const std::vector<bool>& subset, double cluster_dist) {
  if (!(cluster_dist > 0)) throw_usage("euclidean_cluster: cluster_dist must be positive");
  if (subset.size() != cloud.size()) throw_data("euclidean_cluster: mask size mismatch");
  const std::size_t m = cloud.size();
  std::unordered_map<VoxelKey, std::vector<std::size_t>, VoxelKeyHash> grid;
  for (std::size_t i = 0; i < m; ++i)
    if (subset[i]) grid[voxel_key(cloud.positions[i], cluster_dist)].push_back(i);

  const double r2 = cluster_dist * cluster_dist;
  UnionFind uf(m);
  for (const auto& [key, pts] : grid) {
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          const VoxelKey nk{key[0] + dx, key[1] + dy, key[2] + dz};
          if (nk < key) continue;  // each cell pair once
          const auto it = grid.find(nk);
          if (it == grid.end()) continue;
          const bool same = nk == key;
          for (std::size_t a = 0; a < pts.size(); ++a) {
            for (std::size_t b = same ? a + 1 : 0; b < it->second.size(); ++b) {
              const std::size_t i = pts[a], j = it->second[b];
              if (dist2(cloud.positions[i], cloud.positions[j]) < r2) uf.unite(i, j);
            }
          }
        }
  }
  std::vector<int> ids(m, -1);
  std::vector<int> root_id(m, -1);
  int next = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!subset[i]) continue;
    const std::size_t r = uf.find(i);
    if (root_id[r] < 0) root_id[r] = next++;
    ids[i] = root_id[r];
  }
  return ids;
}

Superpointing outdoor_superpoints(const PointCloud& cloud, const RansacParams& p, Rng& rng) {
  const PlaneFit fit = ransac_plane(cloud, p, rng);
  const std::size_t m = cloud.size();
  const bool use_plane = fit.inlier_count >= std::max<std::size_t>(p.min_inliers, 1);
  Superpointing sp;
  sp.assignment.assign(m, -1);
  std::vector<bool> rest(m, true);
  if (use_plane) {
    sp.num_superpoints = 1;
    for (std::size_t i = 0; i < m; ++i) {
      if (fit.inliers[i]) {
        sp.assignment[i] = 0;
        rest[i] = false;
      }
    }
  }
  if (std::any_of(rest.begin(), rest.end(), [](bool b) { return b; })) {
    const auto ids = euclidean_cluster(cloud, rest, p.cluster_dist);
    int max_id = -1;
    for (std::size_t i = 0; i < m; ++i) {
      if (ids[i] < 0) continue;
      sp.assignment[i] = sp.num_superpoints + ids[i];
      max_id = std::max(max_id, ids[i]);
    }
    sp.num_superpoints += max_id + 1;
  }
  return sp;
}

double superpoint_purity(const Superpointing& sp, const std::vector<int>& labels) {
  if (labels.size() != sp.assignment.size()) throw_data("superpoint_purity: size mismatch");
  std::vector<std::map<int, std::size_t>> hist(static_cast<std::size_t>(sp.num_superpoints));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0) ++hist[sp.assignment[i]][labels[i]];
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& h : hist) {
    std::size_t total = 0, top = 0;
    for (const auto& [l, c] : h) {
      total += c;
      top = std::max(top, c);
    }
    if (total == 0) continue;
    sum += static_cast<double>(top) / static_cast<double>(total);
    ++n;
  }
  return n == 0 ? 1.0 : sum / static_cast<double>(n);
}

}  // namespace ggsd
