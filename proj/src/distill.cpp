#include "ggsd/distill.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "ggsd/error.hpp"
#include "ggsd/linalg.hpp"

namespace ggsd {

SuperpointMeans superpoint_mean(const FeatureMatrix& features, const Superpointing& sp, const std::vector<bool>& mask) {
  if (sp.assignment.size() != features.rows() || mask.size() != features.rows())
    throw_data("superpoint_mean: shape mismatch");
  const std::size_t n = static_cast<std::size_t>(sp.num_superpoints);
  const std::size_t c = features.cols();
  SuperpointMeans out{FeatureMatrix(n, c), std::vector<std::size_t>(n, 0)};
  for (std::size_t i = 0; i < features.rows(); ++i) {
    if (!mask[i]) continue;
    const std::size_t s = static_cast<std::size_t>(sp.assignment[i]);
    ++out.counts[s];
    auto dst = out.means.row(s);
    const auto src = features.row(i);
    for (std::size_t k = 0; k < c; ++k) dst[k] += src[k];
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (out.counts[s] == 0) continue;
    const double q = static_cast<double>(out.counts[s]);
    for (double& v : out.means.row(s)) v /= q;
  }
  return out;
}

namespace {

void check_shapes(const FeatureMatrix& a, const FeatureMatrix& b, std::size_t mask_size, const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || mask_size != a.rows())
    throw_data(std::string(who) + ": shape mismatch");
}

/// Adds scale * d(1 - cos(a, b))/da to `grad` and returns 1 - cos(a, b).
/// Returns 1 with no gradient when either side is zero.
double cosine_distance_grad(std::span<const double> a, std::span<const double> b, double scale,
                            std::span<double> grad) {
  const double na = norm(a), nb = norm(b);
  if (na <= kNormEps || nb <= kNormEps) return 1.0;
  const double c = dot(a, b) / (na * nb);
  for (std::size_t k = 0; k < a.size(); ++k) grad[k] -= scale * (b[k] / (na * nb) - c * a[k] / (na * na));
  return 1.0 - c;
}

}  // namespace

LossResult loss_pixel_point(const FeatureMatrix& f3d, const FeatureMatrix& f2d, const std::vector<bool>& mask) {
  check_shapes(f3d, f2d, mask.size(), "loss_pixel_point");
  LossResult out{0.0, FeatureMatrix(f3d.rows(), f3d.cols())};
  const std::size_t n = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  if (n == 0) return out;
  const double scale = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < f3d.rows(); ++i) {
    if (!mask[i]) continue;
    sum += cosine_distance_grad(f3d.row(i), f2d.row(i), scale, out.grad.row(i));
  }
  out.value = sum * scale;
  return out;
}

LossResult loss_superpoint(const FeatureMatrix& f3d, const FeatureMatrix& f2d, const Superpointing& sp,
                           const std::vector<bool>& mask) {
  check_shapes(f3d, f2d, mask.size(), "loss_superpoint");
  const SuperpointMeans m3 = superpoint_mean(f3d, sp, mask);
  const SuperpointMeans m2 = superpoint_mean(f2d, sp, mask);
  const std::size_t nsp = m3.counts.size();
  const std::size_t c = f3d.cols();

  std::vector<char> used(nsp, 0);
  std::size_t k_used = 0;
  for (std::size_t s = 0; s < nsp; ++s) {
    if (m3.counts[s] == 0 || norm(m3.means.row(s)) <= kNormEps || norm(m2.means.row(s)) <= kNormEps) continue;
    used[s] = 1;
    ++k_used;
  }
  LossResult out{0.0, FeatureMatrix(f3d.rows(), c)};
  if (k_used == 0) return out;

  // Gradient with respect to each superpoint's 3D mean, shared by its members.
  FeatureMatrix dmean(nsp, c);
  double sum = 0.0;
  const double scale = 1.0 / static_cast<double>(k_used);
  for (std::size_t s = 0; s < nsp; ++s) {
    if (!used[s]) continue;
    sum += cosine_distance_grad(m3.means.row(s), m2.means.row(s), scale, dmean.row(s));
  }
  for (std::size_t i = 0; i < f3d.rows(); ++i) {
    if (!mask[i]) continue;
    const std::size_t s = static_cast<std::size_t>(sp.assignment[i]);
    if (!used[s]) continue;
    const double q = static_cast<double>(m3.counts[s]);
    auto g = out.grad.row(i);
    const auto d = dmean.row(s);
    for (std::size_t k = 0; k < c; ++k) g[k] = d[k] / q;
  }
  out.value = sum * scale;
  return out;
}

Stage1Loss loss_stage1(const FeatureMatrix& f3d, const FeatureMatrix& f2d, const Superpointing& sp,
                       const std::vector<bool>& mask, bool use_superpoints) {
  LossResult p = loss_pixel_point(f3d, f2d, mask);
  Stage1Loss out;
  out.l_p = p.value;
  out.grad = std::move(p.grad);
  if (use_superpoints) {
    const LossResult s = loss_superpoint(f3d, f2d, sp, mask);
    out.l_sp = s.value;
    auto& g = out.grad.data();
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += s.grad.data()[k];
  }
  out.l_d = out.l_p + out.l_sp;
  return out;
}

// ---------------------------------------------------------------------------
// training

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

std::string TrainReport::to_csv() const {
  std::string out = stage == 1 ? "epoch,L_p,L_sp,L_d,miou,macc\n" : "epoch,L_d,L_sd,total,raw_acc,voted_acc,miou,macc\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch);
    if (stage == 1) {
      out += "," + fmt(e.l_p) + "," + fmt(e.l_sp) + "," + fmt(e.l_d);
    } else {
      out += "," + fmt(e.l_d) + "," + fmt(e.l_sd) + "," + fmt(e.total);
      out += "," + (e.raw_acc >= 0 ? fmt(e.raw_acc) : std::string()) + "," +
             (e.voted_acc >= 0 ? fmt(e.voted_acc) : std::string());
    }
    if (e.eval)
      out += "," + fmt(e.eval->miou) + "," + fmt(e.eval->macc);
    else
      out += ",,";
    out += "\n";
  }
  return out;
}

std::vector<Batch> epoch_batches(const std::vector<TrainScene>& scenes, std::size_t points_per_step, Rng& rng) {
  std::vector<std::size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<Batch> out;
  for (std::size_t s : order) {
    const std::size_t m = scenes[s].descriptors.rows();
    if (points_per_step == 0 || points_per_step >= m) {
      out.push_back({&scenes[s], {}});
      continue;
    }
    const auto groups = scenes[s].sp.members();
    std::vector<std::size_t> sp_order(groups.size());
    std::iota(sp_order.begin(), sp_order.end(), 0);
    rng.shuffle(sp_order);
    Batch batch{&scenes[s], {}};
    for (std::size_t g : sp_order) {
      batch.rows.insert(batch.rows.end(), groups[g].begin(), groups[g].end());
      if (batch.rows.size() >= points_per_step) {
        std::sort(batch.rows.begin(), batch.rows.end());
        out.push_back(std::move(batch));
        batch = Batch{&scenes[s], {}};
      }
    }
    if (!batch.rows.empty()) {
      std::sort(batch.rows.begin(), batch.rows.end());
      out.push_back(std::move(batch));
    }
  }
  return out;
}

FeatureMatrix gather_rows(const FeatureMatrix& m, const std::vector<std::size_t>& rows) {
  if (rows.empty()) return m;
  FeatureMatrix out(rows.size(), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = m.row(rows[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

double scheduled_lr(const Config& cfg, double base, int epoch, int epochs) {
  const std::string& kind = cfg.get_string("lr_schedule");
  if (kind == "constant") return base;
  if (kind == "cosine") return base * 0.5 * (1.0 + std::cos(std::numbers::pi * (epoch - 1) / std::max(1, epochs)));
  throw_usage("lr_schedule must be constant or cosine, got '" + kind + "'");
}

TrainReport train_stage1(const std::vector<TrainScene>& scenes, TrainState& state, const Config& cfg,
                         const Evaluator& evaluator) {
  if (scenes.empty()) throw_usage("train_stage1: no scenes");
  const std::size_t c = state.encoder.output_dim();
  for (const auto& s : scenes)
    if (s.fused.cols() != c)
      throw_data("train_stage1: scene '" + s.name + "' has teacher dim " + std::to_string(s.fused.cols()) +
                 ", encoder outputs " + std::to_string(c));

  const int epochs = static_cast<int>(cfg.get_int("epochs_stage1"));
  const bool use_sp = cfg.get_bool("sp_loss");
  const auto pps = static_cast<std::size_t>(std::max(0L, cfg.get_int("points_per_step")));
  const auto per_step = static_cast<std::size_t>(std::max(1L, cfg.get_int("scenes_per_step")));
  const long eval_every = cfg.get_int("eval_every");

  TrainReport report;
  report.stage = 1;
  const double base_lr = state.adam.lr;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    state.adam.lr = scheduled_lr(cfg, base_lr, epoch, epochs);
    const auto batches = epoch_batches(scenes, pps, state.rng);
    EpochRecord rec;
    rec.epoch = epoch;
    GradBuffer acc;
    std::size_t pending = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const TrainScene& sc = *batches[b].scene;
      const auto& rows = batches[b].rows;
      const FeatureMatrix desc = gather_rows(sc.descriptors, rows);
      const FeatureMatrix f2d = gather_rows(sc.fused, rows);
      std::vector<bool> mask = sc.mask;
      Superpointing sp = sc.sp;
      if (!rows.empty()) {
        mask.assign(rows.size(), false);
        sp.assignment.resize(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
          mask[r] = sc.mask[rows[r]];
          sp.assignment[r] = sc.sp.assignment[rows[r]];
        }
      }
      const ForwardCache cache = forward_cached(state.encoder, desc);
      const Stage1Loss loss = loss_stage1(cache.output, f2d, sp, mask, use_sp);
      if (!std::isfinite(loss.l_d))
        throw_numeric("stage 1: non-finite loss in epoch " + std::to_string(epoch) + " on scene '" + sc.name + "'");
      rec.l_p += loss.l_p;
      rec.l_sp += loss.l_sp;
      rec.l_d += loss.l_d;

      GradBuffer g = backward(state.encoder, cache, loss.grad);
      if (pending == 0) {
        acc = std::move(g);
      } else {
        for (std::size_t k = 0; k < acc.params.size(); ++k) acc.params[k] += g.params[k];
      }
      if (++pending == per_step || b + 1 == batches.size()) {
        if (pending > 1)
          for (double& v : acc.params) v /= static_cast<double>(pending);
        adam_step(state.encoder, acc, state.adam);
        pending = 0;
      }
    }
    const double nb = static_cast<double>(batches.size());
    rec.l_p /= nb;
    rec.l_sp /= nb;
    rec.l_d /= nb;
    rec.total = rec.l_d;
    if (evaluator && (epoch == epochs || (eval_every > 0 && epoch % eval_every == 0))) rec.eval = evaluator(state.encoder);
    report.epochs.push_back(rec);
  }
  state.adam.lr = base_lr;
  return report;
}

}  // namespace ggsd
