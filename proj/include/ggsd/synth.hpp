#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ggsd/projection.hpp"
#include "ggsd/rng.hpp"
#include "ggsd/types.hpp"

namespace ggsd {

enum class ShapeKind { Box, PlanePatch, Cylinder };

/// One sampled surface. Local frame: x/y horizontal, z up, rotated by `yaw`
/// about the vertical axis through `center`.
///   Box:        full extents `size`; the bottom face is not sampled.
///   PlanePatch: exactly one zero extent; the patch spans the other two axes.
///   Cylinder:   diameter size[0], height size[2]; side and top cap.
struct SynthObject {
  ShapeKind shape = ShapeKind::Box;
  Vec3 center{0, 0, 0};
  Vec3 size{1, 1, 1};
  double yaw = 0.0;
  int class_id = 0;
  Vec3 color{0.5, 0.5, 0.5};
  /// Points of this object that fall inside an object of a higher layer are
  /// dropped (floor under furniture, wall behind a door).
  int layer = 0;

  double area() const;
  /// True when `p` lies within `margin` of the object's solid (boxes,
  /// cylinders) or thin slab (patches).
  bool contains(const Vec3& p, double margin) const;
};

struct SynthSceneSpec {
  std::string name = "scene";
  Vec3 room{4.0, 4.0, 2.5};  // extents; the room spans [0, room]
  std::vector<SynthObject> objects;
  double points_per_m2 = 100.0;
  double position_noise = 0.0;
  double color_noise = 0.0;
  std::uint64_t seed = 0;

  void validate(std::size_t num_classes) const;
};

/// Per-view systematic confusion: pixels of class `from` render as `to` in view `view`.
struct ViewBias {
  int view = 0;
  int from = 0;
  int to = 0;
};

struct TeacherNoiseModel {
  double flip_prob = 0.0;       // per pixel, to a uniformly chosen other class
  double feature_jitter = 0.0;  // Gaussian sigma per embedding component
  std::vector<ViewBias> view_bias;
  std::vector<double> lighting_drift;  // per-view scale on the embedding before jitter (empty = 1)

  void validate() const;
  static TeacherNoiseModel none() { return {}; }
};

struct SynthBundle {
  PointCloud cloud;
  std::vector<CameraView> views;
  TextBank bank;
  SynthSceneSpec spec;
};

/// Surface samples of every object with ground-truth labels. Positions are
/// rounded to float precision and colors to 8-bit steps so PLY round-trips
/// are exact.
PointCloud gen_scene(const SynthSceneSpec& spec);

/// L orthonormal rows of dimension C from the QR factorization of a Gaussian matrix.
TextBank gen_bank(const std::vector<std::string>& class_names, std::size_t dim, Rng& rng);

/// Z-buffer render with a 3x3 splat. Each covered pixel takes the depth and
/// class of its nearest point; its feature is the class embedding passed
/// through the noise model and normalized. Background pixels have depth 0 and
/// zero features. `cameras` provides intrinsics and poses.
std::vector<CameraView> render_views(const PointCloud& cloud, const std::vector<CameraView>& cameras,
                                     const TeacherNoiseModel& noise, const TextBank& bank, Rng& rng);

enum class BenchmarkKind { Tiny, Standard };

BenchmarkKind parse_benchmark(const std::string& name);
std::string benchmark_name(BenchmarkKind kind);

struct Benchmark {
  BenchmarkKind kind = BenchmarkKind::Tiny;
  std::uint64_t seed = 0;
  TextBank bank;
  TeacherNoiseModel noise;  // base model; each scene draws its own bias view and drifts
  std::vector<SynthBundle> train;
  std::vector<SynthBundle> test;
};

std::vector<std::string> benchmark_classes(BenchmarkKind kind);
TeacherNoiseModel default_noise(BenchmarkKind kind);

/// Rooms with furniture and wall fixtures. `noise` overrides the default
/// teacher noise (pass TeacherNoiseModel::none() for a perfect teacher).
Benchmark make_benchmark(BenchmarkKind kind, std::uint64_t seed,
                         const std::optional<TeacherNoiseModel>& noise = std::nullopt);

/// A back plane facing a camera with a floating rectangle in between.
struct OccluderScene {
  PointCloud cloud;  // labels: 0 = back plane, 1 = occluder
  CameraView view;   // rendered depth; features are the two bank rows
  Vec3 rect_min;     // occluder rectangle, axis-aligned at z = rect_min[2]
  Vec3 rect_max;
};

/// Back-plane points whose projection falls within `band_px` pixels of the
/// occluder silhouette or the image border are not generated.
OccluderScene gen_occluder_scene(Rng& rng, std::size_t max_points = 5000, double band_px = 2.5);

}  // namespace ggsd
