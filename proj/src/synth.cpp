#include "ggsd/synth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ggsd/error.hpp"
#include "ggsd/geometry.hpp"
#include "ggsd/linalg.hpp"
#include "ggsd/parallel.hpp"

namespace ggsd {

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 rotate_z(const Vec3& v, double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]};
}

Vec3 to_local(const SynthObject& o, const Vec3& p) { return rotate_z(sub(p, o.center), -o.yaw); }
Vec3 to_world(const SynthObject& o, const Vec3& l) {
  const Vec3 r = rotate_z(l, o.yaw);
  return {r[0] + o.center[0], r[1] + o.center[1], r[2] + o.center[2]};
}

int zero_axis(const Vec3& size) {
  int axis = -1;
  for (int a = 0; a < 3; ++a)
    if (size[a] == 0.0) {
      if (axis >= 0) return -2;
      axis = a;
    }
  return axis;
}

// The volatile keeps GCC 11 at -O3 from folding the round trip away inside vectorized loops.
double quantize_float(double x) {
  volatile float f = static_cast<float>(x);
  return static_cast<double>(f);
}
double quantize_u8(double c) { return std::round(std::clamp(c, 0.0, 1.0) * 255.0) / 255.0; }

/// One local-frame surface sample of `o`.
Vec3 sample_surface(const SynthObject& o, Rng& rng) {
  const double sx = o.size[0], sy = o.size[1], sz = o.size[2];
  switch (o.shape) {
    case ShapeKind::PlanePatch: {
      Vec3 l{0, 0, 0};
      for (int a = 0; a < 3; ++a) l[a] = o.size[a] == 0.0 ? 0.0 : rng.uniform(-0.5, 0.5) * o.size[a];
      return l;
    }
    case ShapeKind::Box: {
      const double top = sx * sy, xz = sx * sz, yz = sy * sz;
      const double r = rng.uniform() * (top + 2 * xz + 2 * yz);
      const double a = rng.uniform(-0.5, 0.5), b = rng.uniform(-0.5, 0.5);
      if (r < top) return {a * sx, b * sy, 0.5 * sz};
      if (r < top + xz) return {a * sx, -0.5 * sy, b * sz};
      if (r < top + 2 * xz) return {a * sx, 0.5 * sy, b * sz};
      if (r < top + 2 * xz + yz) return {-0.5 * sx, a * sy, b * sz};
      return {0.5 * sx, a * sy, b * sz};
    }
    case ShapeKind::Cylinder: {
      const double rad = 0.5 * sx;
      const double side = 2 * kPi * rad * sz, cap = kPi * rad * rad;
      const double r = rng.uniform() * (side + cap);
      const double theta = rng.uniform(0.0, 2 * kPi);
      if (r < side) return {rad * std::cos(theta), rad * std::sin(theta), rng.uniform(-0.5, 0.5) * sz};
      const double rr = rad * std::sqrt(rng.uniform());
      return {rr * std::cos(theta), rr * std::sin(theta), 0.5 * sz};
    }
  }
  return {0, 0, 0};
}

}  // namespace

double SynthObject::area() const {
  const double sx = size[0], sy = size[1], sz = size[2];
  switch (shape) {
    case ShapeKind::Box:
      return sx * sy + 2 * sx * sz + 2 * sy * sz;
    case ShapeKind::PlanePatch: {
      double a = 1.0;
      for (double s : size)
        if (s != 0.0) a *= s;
      return zero_axis(size) >= 0 ? a : 0.0;
    }
    case ShapeKind::Cylinder:
      return kPi * sx * sz + kPi * 0.25 * sx * sx;
  }
  return 0.0;
}

bool SynthObject::contains(const Vec3& p, double margin) const {
  const Vec3 l = to_local(*this, p);
  switch (shape) {
    case ShapeKind::Box:
      return std::abs(l[0]) <= 0.5 * size[0] + margin && std::abs(l[1]) <= 0.5 * size[1] + margin &&
             std::abs(l[2]) <= 0.5 * size[2] + margin;
    case ShapeKind::PlanePatch: {
      const int z = zero_axis(size);
      for (int a = 0; a < 3; ++a) {
        const double lim = a == z ? 0.05 : 0.5 * size[a];
        if (std::abs(l[a]) > lim) return false;
      }
      return true;
    }
    case ShapeKind::Cylinder:
      return std::hypot(l[0], l[1]) <= 0.5 * size[0] + margin && std::abs(l[2]) <= 0.5 * size[2] + margin;
  }
  return false;
}

void SynthSceneSpec::validate(std::size_t num_classes) const {
  if (!(points_per_m2 > 0)) throw_data("synth: density must be positive");
  if (!(position_noise >= 0) || !(color_noise >= 0)) throw_data("synth: noise must be non-negative");
  for (double r : room)
    if (!(r > 0)) throw_data("synth: room extents must be positive");
  constexpr double tol = 0.05;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& o = objects[i];
    if (o.class_id < 0 || static_cast<std::size_t>(o.class_id) >= num_classes)
      throw_data("synth: object " + std::to_string(i) + " has class " + std::to_string(o.class_id) +
                 " outside the bank");
    if (!(o.area() > 0)) throw_data("synth: object " + std::to_string(i) + " has zero area");
    if (o.shape == ShapeKind::PlanePatch && zero_axis(o.size) < 0)
      throw_data("synth: plane patch " + std::to_string(i) + " needs exactly one zero extent");
    const double reach = 0.5 * std::hypot(o.size[0], o.size[1]);
    for (int a = 0; a < 2; ++a)
      if (o.center[a] + reach < -tol || o.center[a] - reach > room[a] + tol)
        throw_data("synth: object " + std::to_string(i) + " lies outside the room");
    if (o.center[2] - 0.5 * o.size[2] < -tol || o.center[2] + 0.5 * o.size[2] > room[2] + tol)
      throw_data("synth: object " + std::to_string(i) + " lies outside the room");
  }
}

PointCloud gen_scene(const SynthSceneSpec& spec) {
  const int max_class = [&] {
    int m = 0;
    for (const auto& o : spec.objects) m = std::max(m, o.class_id);
    return m;
  }();
  spec.validate(static_cast<std::size_t>(max_class) + 1);
  Rng rng(spec.seed);
  PointCloud cloud;
  cloud.scene_id = spec.name;
  cloud.labels.emplace();
  for (std::size_t oi = 0; oi < spec.objects.size(); ++oi) {
    const auto& o = spec.objects[oi];
    Rng orng = rng.derive(oi);
    const auto n = static_cast<std::size_t>(std::llround(o.area() * spec.points_per_m2));
    for (std::size_t k = 0; k < n; ++k) {
      Vec3 p = to_world(o, sample_surface(o, orng));
      for (double& x : p) x += spec.position_noise * orng.normal();
      Vec3 c = o.color;
      for (double& x : c) x = quantize_u8(x + spec.color_noise * orng.normal());
      bool hidden = false;
      for (const auto& other : spec.objects)
        if (other.layer > o.layer && other.contains(p, 0.03)) {
          hidden = true;
          break;
        }
      if (hidden) continue;
      for (double& x : p) x = quantize_float(x);
      cloud.positions.push_back(p);
      cloud.colors.push_back(c);
      cloud.labels->push_back(o.class_id);
    }
  }
  return cloud;
}

TextBank gen_bank(const std::vector<std::string>& class_names, std::size_t dim, Rng& rng) {
  const std::size_t l = class_names.size();
  if (l == 0) throw_usage("gen_bank: no classes");
  if (dim < l) throw_usage("gen_bank: dimension " + std::to_string(dim) + " is below the class count " +
                           std::to_string(l));
  Eigen::MatrixXd g(dim, l);
  for (std::size_t c = 0; c < l; ++c)
    for (std::size_t r = 0; r < dim; ++r) g(r, c) = rng.normal();
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() * Eigen::MatrixXd::Identity(dim, l);
  TextBank bank;
  bank.class_names = class_names;
  bank.embeddings = FeatureMatrix(l, dim);
  for (std::size_t c = 0; c < l; ++c)
    for (std::size_t r = 0; r < dim; ++r) bank.embeddings(c, r) = q(r, c);
  return bank;
}

void TeacherNoiseModel::validate() const {
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw_usage("noise: flip_prob must lie in [0, 1]");
  if (!(feature_jitter >= 0.0)) throw_usage("noise: feature_jitter must be non-negative");
  for (double d : lighting_drift)
    if (!(d > 0.0)) throw_usage("noise: lighting drift must be positive");
}

std::vector<CameraView> render_views(const PointCloud& cloud, const std::vector<CameraView>& cameras,
                                     const TeacherNoiseModel& noise, const TextBank& bank, Rng& rng) {
  noise.validate();
  if (!cloud.labels) throw_data("render_views: the cloud has no labels");
  const std::size_t nclass = bank.size();
  const std::size_t dim = bank.dim();
  std::vector<CameraView> out(cameras.size());
  parallel_for(
      cameras.size(),
      [&](std::size_t vb, std::size_t ve) {
        for (std::size_t vi = vb; vi < ve; ++vi) {
          CameraView v = cameras[vi];
          const std::size_t npx = static_cast<std::size_t>(v.width) * v.height;
          v.depth.assign(npx, 0.0);
          v.pixel_features = FeatureMatrix(npx, dim);
          v.validate();
          std::vector<int> winner(npx, -1);
          for (std::size_t i = 0; i < cloud.size(); ++i) {
            const auto hit = project_point(cloud.positions[i], v);
            if (!hit) continue;
            for (int dv = -1; dv <= 1; ++dv)
              for (int du = -1; du <= 1; ++du) {
                const int u = hit->u + du, w = hit->v + dv;
                if (u < 0 || w < 0 || u >= v.width || w >= v.height) continue;
                const std::size_t px = v.pixel_index(u, w);
                if (winner[px] < 0 || hit->depth < v.depth[px]) {
                  v.depth[px] = hit->depth;
                  winner[px] = static_cast<int>(i);
                }
              }
          }
          const double drift = vi < noise.lighting_drift.size() ? noise.lighting_drift[vi] : 1.0;
          Rng prng = rng.derive(vi);
          for (std::size_t px = 0; px < npx; ++px) {
            if (winner[px] < 0) continue;
            int cls = (*cloud.labels)[static_cast<std::size_t>(winner[px])];
            if (cls < 0 || static_cast<std::size_t>(cls) >= nclass)
              throw_data("render_views: point label outside the bank");
            for (const auto& b : noise.view_bias)
              if (b.view == static_cast<int>(vi) && b.from == cls) cls = b.to;
            if (nclass > 1 && prng.uniform() < noise.flip_prob) {
              const int other = static_cast<int>(prng.below(nclass - 1));
              cls = other >= cls ? other + 1 : other;
            }
            auto row = v.pixel_features.row(px);
            const auto e = bank.embeddings.row(static_cast<std::size_t>(cls));
            for (std::size_t c = 0; c < dim; ++c)
              row[c] = drift * e[c] + (noise.feature_jitter > 0 ? noise.feature_jitter * prng.normal() : 0.0);
            const double n = norm(row);
            if (n > kNormEps)
              for (double& x : row) x /= n;
          }
          out[vi] = std::move(v);
        }
      },
      1);
  return out;
}

BenchmarkKind parse_benchmark(const std::string& name) {
  if (name == "tiny") return BenchmarkKind::Tiny;
  if (name == "standard") return BenchmarkKind::Standard;
  throw_usage("unknown benchmark '" + name + "' (expected tiny or standard)");
}

std::string benchmark_name(BenchmarkKind kind) { return kind == BenchmarkKind::Tiny ? "tiny" : "standard"; }

std::vector<std::string> benchmark_classes(BenchmarkKind kind) {
  if (kind == BenchmarkKind::Tiny) return {"wall", "floor", "cabinet", "chair", "table", "door"};
  return {"wall", "floor", "cabinet", "bed", "chair", "sofa", "table", "door", "window", "bookshelf", "picture", "desk"};
}

TeacherNoiseModel default_noise(BenchmarkKind kind) {
  TeacherNoiseModel n;
  n.flip_prob = 0.2;
  n.feature_jitter = 0.1;
  // chair -> table (tiny) and table -> desk (standard); the view is drawn per scene.
  if (kind == BenchmarkKind::Tiny)
    n.view_bias = {{0, 3, 4}};
  else
    n.view_bias = {{0, 6, 11}};
  return n;
}

namespace {

constexpr double kObjectColorJitter = 0.04;
constexpr double kPointColorNoise = 0.05;

struct ClassColor {
  std::string name;
  Vec3 rgb;
};

const std::vector<ClassColor>& class_colors() {
  static const std::vector<ClassColor> colors = {
      {"wall", {0.85, 0.84, 0.80}},      {"floor", {0.55, 0.47, 0.38}},   {"cabinet", {0.60, 0.40, 0.22}},
      {"bed", {0.75, 0.76, 0.86}},       {"chair", {0.30, 0.22, 0.18}},   {"sofa", {0.46, 0.32, 0.55}},
      {"table", {0.72, 0.58, 0.34}},     {"door", {0.80, 0.66, 0.52}},    {"window", {0.62, 0.80, 0.95}},
      {"bookshelf", {0.42, 0.30, 0.30}}, {"picture", {0.85, 0.36, 0.30}}, {"desk", {0.50, 0.56, 0.44}},
  };
  return colors;
}

/// Builds one room: shell, wall fixtures, furniture.
class RoomBuilder {
 public:
  RoomBuilder(const std::vector<std::string>& classes, Rng& rng) : classes_(classes), rng_(rng) {}

  int cls(const std::string& name) const {
    const auto it = std::find(classes_.begin(), classes_.end(), name);
    return static_cast<int>(it - classes_.begin());
  }

  Vec3 color_of(const std::string& name) {
    Vec3 c{0.5, 0.5, 0.5};
    for (const auto& cc : class_colors())
      if (cc.name == name) c = cc.rgb;
    for (double& x : c) x = std::clamp(x + kObjectColorJitter * rng_.normal(), 0.0, 1.0);
    return c;
  }

  void shell(SynthSceneSpec& s) {
    const double sx = s.room[0], sy = s.room[1], h = s.room[2];
    walls_.assign(4, {});
    const Vec3 wall_color = color_of("wall");
    s.objects.push_back({ShapeKind::PlanePatch, {sx / 2, sy / 2, 0}, {sx, sy, 0}, 0, cls("floor"), color_of("floor"), 0});
    s.objects.push_back({ShapeKind::PlanePatch, {sx / 2, 0, h / 2}, {sx, 0, h}, 0, cls("wall"), wall_color, 0});
    s.objects.push_back({ShapeKind::PlanePatch, {sx, sy / 2, h / 2}, {0, sy, h}, 0, cls("wall"), wall_color, 0});
    s.objects.push_back({ShapeKind::PlanePatch, {sx / 2, sy, h / 2}, {sx, 0, h}, 0, cls("wall"), wall_color, 0});
    s.objects.push_back({ShapeKind::PlanePatch, {0, sy / 2, h / 2}, {0, sy, h}, 0, cls("wall"), wall_color, 0});
  }

  /// Reserves `width` of wall `w`; returns the along-wall center or nothing.
  std::optional<double> reserve(const SynthSceneSpec& s, int w, double width) {
    const double len = (w % 2 == 0) ? s.room[0] : s.room[1];
    if (width > len - 0.4) return std::nullopt;
    for (int attempt = 0; attempt < 40; ++attempt) {
      const double t = rng_.uniform(0.2 + width / 2, len - 0.2 - width / 2);
      bool clash = false;
      for (const auto& [a, b] : walls_[w])
        if (t - width / 2 < b + 0.15 && t + width / 2 > a - 0.15) clash = true;
      if (!clash) {
        walls_[w].push_back({t - width / 2, t + width / 2});
        return t;
      }
    }
    return std::nullopt;
  }

  /// Frame of wall `w` at along-wall coordinate `t`: origin on the wall, yaw
  /// so local +x runs along the wall and local +y points into the room.
  static std::pair<Vec3, double> wall_frame(const SynthSceneSpec& s, int w, double t) {
    const double sx = s.room[0], sy = s.room[1];
    switch (w) {
      case 0: return {{t, 0, 0}, 0.0};
      case 1: return {{sx, t, 0}, kPi / 2};
      case 2: return {{sx - t, sy, 0}, kPi};
      default: return {{0, sy - t, 0}, -kPi / 2};
    }
  }

  /// Adds parts given in a local frame (origin at floor level).
  static void place(SynthSceneSpec& s, const Vec3& origin, double yaw, const std::vector<SynthObject>& parts) {
    for (SynthObject o : parts) {
      const Vec3 r = rotate_z(o.center, yaw);
      o.center = {origin[0] + r[0], origin[1] + r[1], origin[2] + r[2]};
      o.yaw += yaw;
      s.objects.push_back(o);
    }
  }

  bool fixture(SynthSceneSpec& s, const std::string& name, double width, double height, double z_center) {
    const int w = static_cast<int>(rng_.below(4));
    const auto t = reserve(s, w, width);
    if (!t) return false;
    const auto [origin, yaw] = wall_frame(s, w, *t);
    place(s, origin, yaw,
          {{ShapeKind::PlanePatch, {0, 0.012, z_center}, {width, 0, height}, 0, cls(name), color_of(name), 2}});
    return true;
  }

  bool footprint_free(const Vec3& c, double hx, double hy) const {
    for (const auto& f : footprints_)
      if (std::abs(c[0] - f[0]) < hx + f[2] + 0.15 && std::abs(c[1] - f[1]) < hy + f[3] + 0.15) return false;
    return true;
  }

  /// Object against a wall; parts are given with local y in [0, depth].
  bool against_wall(SynthSceneSpec& s, double width, double depth, const std::vector<SynthObject>& parts) {
    for (int attempt = 0; attempt < 8; ++attempt) {
      const int w = static_cast<int>(rng_.below(4));
      const double len = (w % 2 == 0) ? s.room[0] : s.room[1];
      if (width > len - 0.4) continue;
      const double t = rng_.uniform(0.2 + width / 2, len - 0.2 - width / 2);
      const auto [origin, yaw] = wall_frame(s, w, t);
      const Vec3 off = rotate_z({0, 0.02 + depth / 2, 0}, yaw);
      const Vec3 c{origin[0] + off[0], origin[1] + off[1], 0};
      const bool along_x = w % 2 == 0;
      const double hx = (along_x ? width : depth) / 2, hy = (along_x ? depth : width) / 2;
      if (!footprint_free(c, hx, hy)) continue;
      bool clash = false;
      for (const auto& [a, b] : walls_[w])
        if (t - width / 2 < b + 0.1 && t + width / 2 > a - 0.1) clash = true;
      if (clash) continue;
      walls_[w].push_back({t - width / 2, t + width / 2});
      footprints_.push_back({c[0], c[1], hx, hy});
      place(s, {origin[0] + rotate_z({0, 0.02, 0}, yaw)[0], origin[1] + rotate_z({0, 0.02, 0}, yaw)[1], 0}, yaw,
            parts);
      return true;
    }
    return false;
  }

  /// Free-standing object; parts are centered on the local origin.
  bool free_standing(SynthSceneSpec& s, double width, double depth, const std::vector<SynthObject>& parts) {
    for (int attempt = 0; attempt < 40; ++attempt) {
      const double yaw = rng_.below(2) == 0 ? 0.0 : kPi / 2;
      const double hx = (yaw == 0.0 ? width : depth) / 2, hy = (yaw == 0.0 ? depth : width) / 2;
      if (s.room[0] < 2 * hx + 0.8 || s.room[1] < 2 * hy + 0.8) return false;
      const Vec3 c{rng_.uniform(0.4 + hx, s.room[0] - 0.4 - hx), rng_.uniform(0.4 + hy, s.room[1] - 0.4 - hy), 0};
      if (!footprint_free(c, hx, hy)) continue;
      footprints_.push_back({c[0], c[1], hx, hy});
      place(s, c, yaw + (rng_.below(2) == 0 ? 0.0 : kPi), parts);
      return true;
    }
    return false;
  }

  SynthObject box(const std::string& name, const Vec3& center, const Vec3& size, const Vec3& color) {
    return {ShapeKind::Box, center, size, 0, cls(name), color, 1};
  }

  void cabinet(SynthSceneSpec& s) {
    const double w = rng_.uniform(0.6, 1.0), d = rng_.uniform(0.45, 0.6), h = rng_.uniform(0.8, 1.1);
    against_wall(s, w, d, {box("cabinet", {0, d / 2, h / 2}, {w, d, h}, color_of("cabinet"))});
  }
  void bookshelf(SynthSceneSpec& s) {
    const double w = rng_.uniform(0.8, 1.0), d = 0.35, h = rng_.uniform(1.7, 1.9);
    against_wall(s, w, d, {box("bookshelf", {0, d / 2, h / 2}, {w, d, h}, color_of("bookshelf"))});
  }
  void bed(SynthSceneSpec& s) {
    const double w = rng_.uniform(1.3, 1.6), d = 2.0;
    const Vec3 c = color_of("bed");
    against_wall(s, w, d, {box("bed", {0, d / 2, 0.25}, {w, d, 0.5}, c), box("bed", {0, 0.03, 0.7}, {w, 0.06, 0.4}, c)});
  }
  void sofa(SynthSceneSpec& s) {
    const double w = rng_.uniform(1.8, 2.2), d = 0.85;
    const Vec3 c = color_of("sofa");
    against_wall(s, w, d, {box("sofa", {0, d / 2, 0.21}, {w, d, 0.42}, c), box("sofa", {0, 0.1, 0.62}, {w, 0.2, 0.4}, c)});
  }
  void desk(SynthSceneSpec& s) {
    const double w = rng_.uniform(1.2, 1.4), d = 0.6;
    const Vec3 c = color_of("desk");
    against_wall(s, w, d,
                 {box("desk", {0, d / 2, 0.74}, {w, d, 0.04}, c), box("desk", {-w / 2 + 0.02, d / 2, 0.36}, {0.04, d, 0.72}, c),
                  box("desk", {w / 2 - 0.02, d / 2, 0.36}, {0.04, d, 0.72}, c)});
  }
  void table(SynthSceneSpec& s) {
    const double w = rng_.uniform(1.0, 1.5), d = rng_.uniform(0.7, 0.9);
    const Vec3 c = color_of("table");
    free_standing(s, w, d,
                  {box("table", {0, 0, 0.725}, {w, d, 0.05}, c),
                   {ShapeKind::Cylinder, {0, 0, 0.35}, {0.16, 0.16, 0.7}, 0, cls("table"), c, 1}});
  }
  void chair(SynthSceneSpec& s) {
    const Vec3 c = color_of("chair");
    free_standing(s, 0.45, 0.45,
                  {box("chair", {0, 0, 0.225}, {0.45, 0.45, 0.45}, c), box("chair", {0, 0.195, 0.675}, {0.45, 0.06, 0.45}, c)});
  }

 private:
  const std::vector<std::string>& classes_;
  Rng& rng_;
  std::vector<std::vector<std::pair<double, double>>> walls_;
  std::vector<std::array<double, 4>> footprints_;  // cx, cy, half x, half y
};

SynthSceneSpec room_spec(BenchmarkKind kind, const std::vector<std::string>& classes, std::size_t index, Rng rng) {
  SynthSceneSpec s;
  s.name = benchmark_name(kind) + "_" + (index < 10 ? "0" : "") + std::to_string(index);
  s.seed = rng.derive("points").seed();
  s.position_noise = 0.004;
  s.color_noise = kPointColorNoise;
  RoomBuilder b(classes, rng);
  double target_points;
  if (kind == BenchmarkKind::Tiny) {
    s.room = {rng.uniform(3.0, 3.5), rng.uniform(3.0, 3.5), 2.2};
    b.shell(s);
    b.fixture(s, "door", 0.9, 2.0, 1.0);
    b.cabinet(s);
    b.table(s);
    b.chair(s);
    b.chair(s);
    target_points = 3000;
  } else {
    s.room = {rng.uniform(4.0, 6.0), rng.uniform(3.5, 5.0), 2.5};
    b.shell(s);
    b.fixture(s, "door", 0.9, 2.0, 1.0);
    const int windows = 1 + static_cast<int>(rng.below(2));
    for (int k = 0; k < windows; ++k) b.fixture(s, "window", rng.uniform(1.0, 1.4), rng.uniform(1.0, 1.2), 1.5);
    const int pictures = 1 + static_cast<int>(rng.below(2));
    for (int k = 0; k < pictures; ++k) b.fixture(s, "picture", rng.uniform(0.5, 0.8), rng.uniform(0.4, 0.6), 1.6);
    if (rng.uniform() < 0.6) b.bed(s);
    if (rng.uniform() < 0.6) b.sofa(s);
    b.bookshelf(s);
    b.cabinet(s);
    if (rng.uniform() < 0.5) b.cabinet(s);
    b.desk(s);
    b.table(s);
    const int chairs = 2 + static_cast<int>(rng.below(3));
    for (int k = 0; k < chairs; ++k) b.chair(s);
    target_points = 23500;
  }
  double area = 0;
  for (const auto& o : s.objects) area += o.area();
  s.points_per_m2 = target_points / area;
  return s;
}

std::vector<CameraView> room_cameras(BenchmarkKind kind, const SynthSceneSpec& s, Rng& rng) {
  const bool tiny = kind == BenchmarkKind::Tiny;
  const double sx = s.room[0], sy = s.room[1], inset = 0.3;
  std::vector<std::pair<double, double>> spots = {{inset, inset}, {sx - inset, inset}, {sx - inset, sy - inset}, {inset, sy - inset}};
  if (!tiny) {
    spots.insert(spots.end(), {{sx / 2, inset}, {sx - inset, sy / 2}, {sx / 2, sy - inset}, {inset, sy / 2}});
  }
  std::vector<CameraView> cams;
  for (const auto& [x, y] : spots) {
    CameraView v;
    v.width = tiny ? 64 : 96;
    v.height = tiny ? 48 : 72;
    v.fx = v.fy = tiny ? 40.0 : 60.0;
    v.cx = (v.width - 1) / 2.0;
    v.cy = (v.height - 1) / 2.0;
    const Vec3 eye{x, y, rng.uniform(1.5, std::min(2.1, s.room[2] - 0.1))};
    const Vec3 target{sx / 2 + rng.uniform(-0.3, 0.3), sy / 2 + rng.uniform(-0.3, 0.3), rng.uniform(0.4, 0.8)};
    v.world_to_cam = look_at(eye, target);
    cams.push_back(std::move(v));
  }
  return cams;
}

}  // namespace

Benchmark make_benchmark(BenchmarkKind kind, std::uint64_t seed, const std::optional<TeacherNoiseModel>& noise) {
  Benchmark bm;
  bm.kind = kind;
  bm.seed = seed;
  bm.noise = noise ? *noise : default_noise(kind);
  bm.noise.validate();
  const Rng root = Rng(seed).derive("synth");
  Rng bank_rng = root.derive("bank");
  const auto classes = benchmark_classes(kind);
  bm.bank = gen_bank(classes, 16, bank_rng);
  const std::size_t n_scenes = kind == BenchmarkKind::Tiny ? 4 : 16;
  const std::size_t n_train = kind == BenchmarkKind::Tiny ? 3 : 12;
  std::vector<SynthBundle> bundles(n_scenes);
  parallel_for(
      n_scenes,
      [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
          Rng srng = root.derive("scene").derive(i);
          SynthBundle& out = bundles[i];
          out.spec = room_spec(kind, classes, i, srng.derive("layout"));
          out.cloud = gen_scene(out.spec);
          out.bank = bm.bank;
          Rng cam_rng = srng.derive("cameras");
          const auto cams = room_cameras(kind, out.spec, cam_rng);
          TeacherNoiseModel scene_noise = bm.noise;
          Rng noise_rng = srng.derive("noise");
          const int bias_view = static_cast<int>(noise_rng.below(cams.size()));
          for (auto& vb : scene_noise.view_bias) vb.view = bias_view;
          if (scene_noise.lighting_drift.empty() && (bm.noise.flip_prob > 0 || bm.noise.feature_jitter > 0))
            for (std::size_t k = 0; k < cams.size(); ++k) scene_noise.lighting_drift.push_back(noise_rng.uniform(0.7, 1.0));
          Rng render_rng = srng.derive("render");
          out.views = render_views(out.cloud, cams, scene_noise, bm.bank, render_rng);
        }
      },
      1);
  for (std::size_t i = 0; i < n_scenes; ++i) (i < n_train ? bm.train : bm.test).push_back(std::move(bundles[i]));
  return bm;
}

OccluderScene gen_occluder_scene(Rng& rng, std::size_t max_points, double band_px) {
  OccluderScene sc;
  CameraView& v = sc.view;
  v.width = 64;
  v.height = 48;
  v.fx = v.fy = 50.0;
  v.cx = 31.5;
  v.cy = 23.5;
  const Vec3 eye{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  v.world_to_cam = {1, 0, 0, -eye[0], 0, 1, 0, -eye[1], 0, 0, 1, -eye[2], 0, 0, 0, 1};
  const double zb = rng.uniform(4.0, 6.0), zo = rng.uniform(1.5, 2.5);

  // Occluder silhouette in pixels, then back to the world at depth zo.
  const double w_px = rng.uniform(10, 24), h_px = rng.uniform(8, 18);
  const double u0 = rng.uniform(8, v.width - 8 - w_px), v0 = rng.uniform(6, v.height - 6 - h_px);
  const auto world_at = [&](double u, double vv, double z) {
    return Vec3{(u - v.cx) * z / v.fx + eye[0], (vv - v.cy) * z / v.fy + eye[1], z + eye[2]};
  };
  const Vec3 a = world_at(u0, v0, zo), b = world_at(u0 + w_px, v0 + h_px, zo);
  sc.rect_min = {quantize_float(a[0]), quantize_float(a[1]), quantize_float(a[2])};
  sc.rect_max = {quantize_float(b[0]), quantize_float(b[1]), quantize_float(a[2])};

  sc.cloud.scene_id = "occluder";
  sc.cloud.labels.emplace();
  const auto push = [&](const Vec3& p, int label) {
    sc.cloud.positions.push_back(p);
    sc.cloud.colors.push_back(label == 0 ? Vec3{0.8, 0.8, 0.8} : Vec3{0.2, 0.3, 0.7});
    sc.cloud.labels->push_back(label);
  };
  // Occluder: a regular grid at 1.25 px spacing so the splats leave no holes.
  const int gx = static_cast<int>(std::ceil(w_px / 1.25)), gy = static_cast<int>(std::ceil(h_px / 1.25));
  for (int j = 0; j <= gy; ++j)
    for (int i = 0; i <= gx; ++i) {
      const double x = sc.rect_min[0] + (sc.rect_max[0] - sc.rect_min[0]) * i / gx;
      const double y = sc.rect_min[1] + (sc.rect_max[1] - sc.rect_min[1]) * j / gy;
      push({quantize_float(x), quantize_float(y), sc.rect_min[2]}, 1);
    }
  // Back plane: uniform samples at one depth, clear of the silhouette and border bands.
  const double zplane = quantize_float(zb + eye[2]);
  std::size_t attempts = 0;
  while (sc.cloud.size() < max_points && attempts < 20 * max_points) {
    ++attempts;
    const double u = rng.uniform(0, v.width), vv = rng.uniform(0, v.height);
    const Vec3 p = world_at(u, vv, zplane - eye[2]);
    const Vec3 q{quantize_float(p[0]), quantize_float(p[1]), zplane};
    const Vec3 uvz = project_continuous(q, v);
    if (uvz[0] < band_px || uvz[1] < band_px || uvz[0] > v.width - 1 - band_px || uvz[1] > v.height - 1 - band_px)
      continue;
    const double du = std::max({u0 - uvz[0], 0.0, uvz[0] - (u0 + w_px)});
    const double dv = std::max({v0 - uvz[1], 0.0, uvz[1] - (v0 + h_px)});
    const bool inside = du == 0 && dv == 0;
    const double edge = inside ? std::min({uvz[0] - u0, u0 + w_px - uvz[0], uvz[1] - v0, v0 + h_px - uvz[1]})
                               : std::hypot(du, dv);
    if (edge < band_px) continue;
    push(q, 0);
  }
  TextBank bank;
  bank.class_names = {"back", "occluder"};
  bank.embeddings = FeatureMatrix::from_rows({{1, 0}, {0, 1}});
  Rng render_rng = rng.derive("render");
  v = render_views(sc.cloud, {v}, TeacherNoiseModel::none(), bank, render_rng).front();
  return sc;
}

}  // namespace ggsd
