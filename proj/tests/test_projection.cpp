#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "ggsd/geometry.hpp"
#include "ggsd/linalg.hpp"
#include "ggsd/projection.hpp"
#include "ggsd/synth.hpp"
#include "support.hpp"

using namespace ggsd;
using testing::error_kind;

namespace {

CameraView identity_view(int w, int h, double f, double cx, double cy, std::size_t dim = 2) {
  CameraView v;
  v.fx = v.fy = f;
  v.cx = cx;
  v.cy = cy;
  v.width = w;
  v.height = h;
  v.depth.assign(static_cast<std::size_t>(w) * h, 0.0);
  v.pixel_features = FeatureMatrix(static_cast<std::size_t>(w) * h, dim);
  return v;
}

/// Random rigid pose: rotation from a random unit quaternion plus a translation.
std::array<double, 16> random_pose(Rng& rng) {
  double q[4];
  double n = 0;
  for (double& x : q) {
    x = rng.normal();
    n += x * x;
  }
  n = std::sqrt(n);
  for (double& x : q) x /= n;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),     rng.uniform(-1, 1),
          2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),     rng.uniform(-1, 1),
          2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y), rng.uniform(-1, 1),
          0,                       0,                       0,                       1};
}

/// Homogeneous evaluation K [R|t] x with an explicit 3x4 product.
std::array<double, 3> homogeneous(const CameraView& v, const Vec3& x) {
  const double K[3][3] = {{v.fx, 0, v.cx}, {0, v.fy, v.cy}, {0, 0, 1}};
  double cam[3];
  for (int r = 0; r < 3; ++r)
    cam[r] = v.world_to_cam[4 * r] * x[0] + v.world_to_cam[4 * r + 1] * x[1] + v.world_to_cam[4 * r + 2] * x[2] +
             v.world_to_cam[4 * r + 3];
  double h[3];
  for (int r = 0; r < 3; ++r) h[r] = K[r][0] * cam[0] + K[r][1] * cam[1] + K[r][2] * cam[2];
  return {h[0] / h[2], h[1] / h[2], cam[2]};
}

PointCloud cloud_of(const std::vector<Vec3>& pts) {
  PointCloud c;
  c.positions = pts;
  c.colors.assign(pts.size(), {0.5, 0.5, 0.5});
  return c;
}

}  // namespace

TEST_CASE("project_point: documented examples") {
  const CameraView v = identity_view(100, 100, 100, 50, 50);
  const auto hit = project_point({0, 0, 2}, v);
  REQUIRE(hit);
  CHECK(hit->u == 50);
  CHECK(hit->v == 50);
  CHECK(hit->depth == 2.0);
  CHECK_FALSE(project_point({0, 0, -1}, v));
  CHECK_FALSE(project_point({0, 0, 0}, v));
  CHECK_FALSE(project_point({2, 0, 1}, v));       // u = 250
  CHECK_FALSE(project_point({-0.51, 0, 1}, v));   // u = -1
  const auto edge = project_point({0.494, 0.494, 1}, v);  // 99.4 rounds to 99
  REQUIRE(edge);
  CHECK(edge->u == 99);
  CHECK_FALSE(project_point({0.496, 0, 1}, v));  // 99.6 rounds to 100
}

TEST_CASE("project_point: matches homogeneous matrix evaluation") {
  Rng rng(7);
  int hits = 0;
  for (int t = 0; t < 2000; ++t) {
    CameraView v = identity_view(80, 60, rng.uniform(30, 120), rng.uniform(30, 50), rng.uniform(20, 40));
    v.fy = v.fx * rng.uniform(0.8, 1.2);
    v.world_to_cam = random_pose(rng);
    const Vec3 x{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    const auto ref = homogeneous(v, x);
    const Vec3 cont = project_continuous(x, v);
    if (ref[2] > 0) {
      CHECK(std::abs(cont[0] - ref[0]) < 1e-9 * std::max(1.0, std::abs(ref[0])));
      CHECK(std::abs(cont[1] - ref[1]) < 1e-9 * std::max(1.0, std::abs(ref[1])));
    }
    CHECK(std::abs(cont[2] - ref[2]) < 1e-9);
    const auto hit = project_point(x, v);
    const double u = std::floor(ref[0] + 0.5), w = std::floor(ref[1] + 0.5);
    const bool inside = ref[2] > 0 && u >= 0 && u < v.width && w >= 0 && w < v.height;
    CHECK(static_cast<bool>(hit) == inside);
    if (hit && inside) {
      ++hits;
      CHECK(hit->u == static_cast<int>(u));
      CHECK(hit->v == static_cast<int>(w));
    }
  }
  CHECK(hits > 50);
}

TEST_CASE("back_project inverts projection") {
  Rng rng(9);
  for (int t = 0; t < 500; ++t) {
    CameraView v = identity_view(64, 48, rng.uniform(30, 90), 31.5, 23.5);
    v.world_to_cam = random_pose(rng);
    const Vec3 x{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    const Vec3 c = project_continuous(x, v);
    if (!(c[2] > 0.05)) continue;
    const Vec3 back = back_project(c[0], c[1], c[2], v);
    CHECK(std::sqrt(dist2(back, x)) < 1e-6);
    const Vec3 round = v.to_world(v.to_camera(x));
    CHECK(std::sqrt(dist2(round, x)) < 1e-9);
  }
}

TEST_CASE("look_at: orthonormal and aims at the target") {
  Rng rng(13);
  for (int t = 0; t < 100; ++t) {
    const Vec3 eye{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0, 2)};
    const Vec3 target{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-1, 0)};
    CameraView v = identity_view(10, 10, 10, 4.5, 4.5);
    v.world_to_cam = look_at(eye, target);
    CHECK_NOTHROW(v.validate());
    const Vec3 c = v.to_camera(target);
    CHECK(std::abs(c[0]) < 1e-9);
    CHECK(std::abs(c[1]) < 1e-9);
    CHECK(c[2] == doctest::Approx(std::sqrt(dist2(eye, target))));
    CHECK(std::sqrt(dist2(v.center(), eye)) < 1e-9);
    // Image y points down: a point above the target lands at smaller v.
    const Vec3 above = v.to_camera({target[0], target[1], target[2] + 0.1});
    CHECK(above[1] < 0);
  }
  CHECK(error_kind([] { look_at({0, 0, 0}, {0, 0, 1}); }) == ErrorKind::Usage);
}

TEST_CASE("CameraView::validate rejects malformed views") {
  CameraView v = identity_view(4, 3, 10, 1.5, 1);
  CHECK_NOTHROW(v.validate());
  CameraView bad = v;
  bad.fx = 0;
  CHECK(error_kind([&] { bad.validate(); }) == ErrorKind::Data);
  bad = v;
  bad.depth.pop_back();
  CHECK_THROWS(bad.validate());
  bad = v;
  bad.world_to_cam[0] = 2;
  CHECK_THROWS(bad.validate());
  bad = v;
  bad.world_to_cam[12] = 1;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("occlusion_test: documented examples") {
  CHECK_FALSE(occlusion_test(2.0, 1.0, 0.2));
  CHECK(occlusion_test(1.05, 1.0, 0.2));
  CHECK_FALSE(occlusion_test(1.0, std::numeric_limits<double>::quiet_NaN(), 0.2));
  CHECK_FALSE(occlusion_test(1.0, 0.0, 0.2));
  CHECK_FALSE(occlusion_test(1.0, -1.0, 0.2));
  CHECK_FALSE(occlusion_test(1.0, std::numeric_limits<double>::infinity(), 0.2));
  CHECK_FALSE(occlusion_test(1.5, 1.0, 0.5));  // boundary is exclusive
  CHECK(occlusion_test(0.85, 1.0, 0.2));
  CHECK_FALSE(occlusion_test(1.0, 1.0, 0.0));
}

TEST_CASE("fuse_views: constant feature, single view") {
  CameraView v = identity_view(20, 20, 20, 9.5, 9.5, 3);
  for (std::size_t p = 0; p < v.depth.size(); ++p) {
    v.depth[p] = 2.0;
    auto row = v.pixel_features.row(p);
    row[0] = 3;
    row[1] = 4;
    row[2] = 0;
  }
  Rng rng(15);
  std::vector<Vec3> pts;
  for (int i = 0; i < 200; ++i) pts.push_back({rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9), 2.0});
  const FusedFeatures f = fuse_views(cloud_of(pts), std::vector<CameraView>{v}, 0.2, true);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(f.covered[i]);
    CHECK(f.view_count[i] == 1);
    CHECK(f.features(i, 0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(f.features(i, 1) == doctest::Approx(0.8).epsilon(1e-15));
  }
  CHECK(f.covered_count() == pts.size());
}

TEST_CASE("fuse_views: two views average then normalize") {
  CameraView a = identity_view(10, 10, 10, 4.5, 4.5, 2), b = a;
  for (std::size_t p = 0; p < a.depth.size(); ++p) {
    a.depth[p] = b.depth[p] = 1.0;
    a.pixel_features(p, 0) = 1.0;
    b.pixel_features(p, 0) = 1.0;
    b.pixel_features(p, 1) = 2.0;
  }
  const PointCloud c = cloud_of({{0, 0, 1}, {0.2, -0.1, 1}});
  const FusedFeatures f = fuse_views(c, std::vector<CameraView>{a, b}, 0.2, true);
  const double n = std::sqrt(1.0 + 1.0);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(f.view_count[i] == 2);
    CHECK(f.features(i, 0) == doctest::Approx(1.0 / n));
    CHECK(f.features(i, 1) == doctest::Approx(1.0 / n));
  }
}

TEST_CASE("fuse_views: occluded, invalid and out-of-frame points stay uncovered") {
  CameraView v = identity_view(10, 10, 10, 4.5, 4.5, 2);
  for (std::size_t p = 0; p < v.depth.size(); ++p) {
    v.depth[p] = 1.0;
    v.pixel_features(p, 1) = 1.0;
  }
  v.depth[v.pixel_index(4, 4)] = std::numeric_limits<double>::quiet_NaN();
  // (0.3,0,1) -> pixel (7,4) in front, (0,0,1) -> invalid depth, (0.3,0,3) -> occluded, (5,0,1) -> outside.
  const PointCloud c = cloud_of({{0.3, 0, 1}, {-0.05, -0.05, 1}, {0.9, 0, 3}, {5, 0, 1}});
  const FusedFeatures f = fuse_views(c, std::vector<CameraView>{v}, 0.2, true);
  CHECK(f.covered == std::vector<bool>{true, false, false, false});
  for (std::size_t i = 1; i < 4; ++i) {
    CHECK(f.view_count[i] == 0);
    CHECK(f.features(i, 0) == 0.0);
    CHECK(f.features(i, 1) == 0.0);
  }
  // Without the occlusion test the far point takes the pixel feature, but the invalid pixel does too.
  const FusedFeatures g = fuse_views(c, std::vector<CameraView>{v}, 0.2, false);
  CHECK(g.covered == std::vector<bool>{true, true, true, false});
}

TEST_CASE("fuse_views: argument errors") {
  CameraView a = identity_view(4, 4, 4, 1.5, 1.5, 2), b = identity_view(4, 4, 4, 1.5, 1.5, 3);
  const PointCloud c = cloud_of({{0, 0, 1}});
  CHECK(error_kind([&] { fuse_views(c, std::vector<CameraView>{a, b}, 0.2, true); }) == ErrorKind::Data);
  CHECK(error_kind([&] { fuse_views(c, std::vector<CameraView>{a}, -0.1, true); }) == ErrorKind::Usage);
  const FusedFeatures none = fuse_views(c, std::vector<CameraView>{}, 0.2, true);
  CHECK(none.covered_count() == 0);
}

TEST_CASE("fuse_views: view permutation, coverage monotonicity, pixel-lookup equivalence") {
  const Benchmark bm = make_benchmark(BenchmarkKind::Tiny, 3);
  const SynthBundle& scene = bm.train.front();
  const auto& views = scene.views;
  const FusedFeatures base = fuse_views(scene.cloud, views, 0.2, true);
  CHECK(base.covered_count() > scene.cloud.size() / 2);

  Rng rng(21);
  for (int t = 0; t < 5; ++t) {
    std::vector<CameraView> perm = views;
    rng.shuffle(perm);
    const FusedFeatures p = fuse_views(scene.cloud, perm, 0.2, true);
    CHECK(p.features == base.features);
    CHECK(p.view_count == base.view_count);
  }

  std::vector<CameraView> subset;
  std::vector<bool> prev(scene.cloud.size(), false);
  for (const auto& v : views) {
    subset.push_back(v);
    const FusedFeatures f = fuse_views(scene.cloud, subset, 0.2, true);
    for (std::size_t i = 0; i < prev.size(); ++i) {
      if (prev[i]) CHECK(f.covered[i]);
      CHECK(f.covered[i] == (f.view_count[i] > 0));
    }
    prev = f.covered;
  }

  const CameraView& v0 = views.front();
  const FusedFeatures single = fuse_views(scene.cloud, std::vector<CameraView>{v0}, 0.2, false);
  for (std::size_t i = 0; i < scene.cloud.size(); ++i) {
    const auto hit = project_point(scene.cloud.positions[i], v0);
    REQUIRE(single.covered[i] == static_cast<bool>(hit));
    if (!hit) continue;
    const auto px = v0.pixel_features.row(v0.pixel_index(hit->u, hit->v));
    double n = 0;
    for (double x : px) n += x * x;
    n = std::sqrt(n);
    for (std::size_t k = 0; k < px.size(); ++k)
      if (n > 0) CHECK(single.features(i, k) == px[k] / n);
  }
}

TEST_CASE("fuse_views: occluder scenes match ray casting") {
  Rng rng(25);
  for (int t = 0; t < 3; ++t) {
    const OccluderScene sc = gen_occluder_scene(rng, 2000);
    const FusedFeatures f = fuse_views(sc.cloud, std::vector<CameraView>{sc.view}, 0.2, true);
    const Vec3 eye = sc.view.center();
    std::size_t occluded = 0;
    for (std::size_t i = 0; i < sc.cloud.size(); ++i) {
      const Vec3& p = sc.cloud.positions[i];
      bool blocked = false;
      const double zr = sc.rect_min[2];
      if (p[2] > zr + 1e-9) {
        const double s = (zr - eye[2]) / (p[2] - eye[2]);
        const double x = eye[0] + s * (p[0] - eye[0]), y = eye[1] + s * (p[1] - eye[1]);
        blocked = x >= sc.rect_min[0] && x <= sc.rect_max[0] && y >= sc.rect_min[1] && y <= sc.rect_max[1];
      }
      occluded += blocked;
      CHECK(f.covered[i] == !blocked);
      if (f.covered[i]) CHECK(f.features(i, static_cast<std::size_t>((*sc.cloud.labels)[i])) == 1.0);
    }
    CHECK(occluded > 0);
  }
}
