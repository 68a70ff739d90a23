#include "ggsd/selfdistill.hpp"

#include <cmath>
#include <map>

#include "ggsd/error.hpp"
#include "ggsd/linalg.hpp"
#include "ggsd/parallel.hpp"

namespace ggsd {

std::vector<int> assign_pseudo_labels(const FeatureMatrix& teacher, const TextBank& bank) {
  if (teacher.cols() != bank.dim()) throw_data("assign_pseudo_labels: feature/bank dimension mismatch");
  const std::size_t l = bank.size();
  std::vector<int> out(teacher.rows(), -1);
  parallel_for(teacher.rows(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto f = teacher.row(i);
      if (norm(f) <= kNormEps) continue;
      int best = 0;
      double best_score = dot(f, bank.embeddings.row(0));
      for (std::size_t c = 1; c < l; ++c) {
        const double s = dot(f, bank.embeddings.row(c));
        if (s > best_score) {
          best_score = s;
          best = static_cast<int>(c);
        }
      }
      out[i] = best;
    }
  });
  return out;
}

PseudoLabels superpoint_vote(const std::vector<int>& raw, const Superpointing& sp) {
  if (raw.size() != sp.assignment.size()) throw_data("superpoint_vote: size mismatch");
  const std::size_t n = static_cast<std::size_t>(sp.num_superpoints);
  std::vector<std::map<int, std::size_t>> hist(n);
  std::vector<std::size_t> valid(n, 0);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] < -1) throw_data("superpoint_vote: label below the sentinel");
    if (raw[i] < 0) continue;
    ++hist[sp.assignment[i]][raw[i]];
    ++valid[sp.assignment[i]];
  }
  PseudoLabels out;
  out.raw = raw;
  out.vote_fraction.assign(n, 1.0);
  std::vector<int> winner(n, -1);
  for (std::size_t s = 0; s < n; ++s) {
    std::size_t top = 0;
    for (const auto& [label, count] : hist[s]) {  // ascending label: strict > keeps the lowest on ties
      if (count > top) {
        top = count;
        winner[s] = label;
      }
    }
    if (valid[s] > 0) out.vote_fraction[s] = static_cast<double>(top) / static_cast<double>(valid[s]);
  }
  out.voted.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out.voted[i] = winner[sp.assignment[i]];
  return out;
}

LossResult loss_contrastive(const FeatureMatrix& f3d, const std::vector<int>& targets, const TextBank& bank,
                            double tau) {
  if (!(tau > 0)) throw_usage("loss_contrastive: tau must be positive");
  if (targets.size() != f3d.rows()) throw_data("loss_contrastive: target count mismatch");
  if (f3d.cols() != bank.dim()) throw_data("loss_contrastive: feature/bank dimension mismatch");
  const std::size_t l = bank.size();
  const std::size_t c = f3d.cols();
  LossResult out{0.0, FeatureMatrix(f3d.rows(), c)};
  std::size_t n = 0;
  for (int t : targets) {
    if (t >= static_cast<int>(l)) throw_data("loss_contrastive: target id out of range");
    if (t >= 0) ++n;
  }
  if (n == 0) return out;
  const double scale = 1.0 / static_cast<double>(n);

  std::vector<double> per_row(f3d.rows(), 0.0);
  parallel_for(f3d.rows(), [&](std::size_t b, std::size_t e) {
    std::vector<double> logits(l);
    for (std::size_t i = b; i < e; ++i) {
      const int t = targets[i];
      if (t < 0) continue;
      const auto f = f3d.row(i);
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < l; ++k) {
        logits[k] = dot(f, bank.embeddings.row(k)) / tau;
        mx = std::max(mx, logits[k]);
      }
      double z = 0.0;
      for (std::size_t k = 0; k < l; ++k) z += std::exp(logits[k] - mx);
      per_row[i] = mx + std::log(z) - logits[static_cast<std::size_t>(t)];
      auto g = out.grad.row(i);
      for (std::size_t k = 0; k < l; ++k) {
        const double w = (std::exp(logits[k] - mx) / z - (k == static_cast<std::size_t>(t) ? 1.0 : 0.0)) * scale / tau;
        const auto emb = bank.embeddings.row(k);
        for (std::size_t d = 0; d < c; ++d) g[d] += w * emb[d];
      }
    }
  });
  double sum = 0.0;
  for (double v : per_row) sum += v;
  out.value = sum * scale;
  return out;
}

std::pair<double, double> vote_gain(const std::vector<int>& raw, const std::vector<int>& voted,
                                    const std::vector<int>& gt) {
  if (raw.size() != voted.size() || raw.size() != gt.size()) throw_data("vote_gain: size mismatch");
  std::size_t n = 0, raw_ok = 0, voted_ok = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (voted[i] < 0 || gt[i] < 0) continue;
    ++n;
    raw_ok += raw[i] == gt[i];
    voted_ok += voted[i] == gt[i];
  }
  if (n == 0) return {0.0, 0.0};
  return {static_cast<double>(raw_ok) / static_cast<double>(n), static_cast<double>(voted_ok) / static_cast<double>(n)};
}

TrainReport train_stage2(const std::vector<TrainScene>& scenes, TrainState& state, const TextBank& bank,
                         const Config& cfg, const Evaluator& evaluator, PointEncoder* teacher_out) {
  if (scenes.empty()) throw_usage("train_stage2: no scenes");
  const std::size_t c = state.encoder.output_dim();
  if (bank.dim() != c) throw_data("train_stage2: bank dimension does not match the encoder output");
  for (const auto& s : scenes)
    if (s.fused.cols() != c) throw_data("train_stage2: scene '" + s.name + "' has the wrong teacher dimension");

  const int epochs = static_cast<int>(cfg.get_int("epochs_stage2"));
  const bool use_sp = cfg.get_bool("sp_loss");
  const bool vote = cfg.get_bool("vote");
  const double tau = cfg.get_double("tau");
  const double lambda = cfg.get_double("lambda_sd");
  const double momentum = cfg.get_double("ema_momentum");
  const long ema_every = std::max(1L, cfg.get_int("ema_every"));
  const auto pps = static_cast<std::size_t>(std::max(0L, cfg.get_int("points_per_step")));
  const auto per_step = static_cast<std::size_t>(std::max(1L, cfg.get_int("scenes_per_step")));
  const long eval_every = cfg.get_int("eval_every");
  if (!(tau > 0)) throw_usage("tau must be positive");
  if (!(momentum >= 0 && momentum <= 1)) throw_usage("ema_momentum must lie in [0, 1]");

  // Unit-norm bank rows make the dot product in pseudo-labeling and the loss a cosine.
  TextBank nbank = bank;
  nbank.embeddings = l2_normalize_rows(bank.embeddings);

  PointEncoder teacher = state.encoder;
  TrainReport report;
  report.stage = 2;
  long steps = 0;
  const double base_lr = state.adam.lr;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    state.adam.lr = scheduled_lr(cfg, base_lr, epoch, epochs);
    const auto batches = epoch_batches(scenes, pps, state.rng);
    EpochRecord rec;
    rec.epoch = epoch;
    double raw_sum = 0, voted_sum = 0;
    std::size_t acc_visits = 0;
    const TrainScene* labeled_scene = nullptr;
    std::vector<int> scene_targets;
    GradBuffer acc;
    std::size_t pending = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const TrainScene& sc = *batches[b].scene;
      const auto& rows = batches[b].rows;

      if (lambda != 0.0 && labeled_scene != &sc) {
        // Teacher labels for the whole scene, voted over complete superpoints.
        const FeatureMatrix tf = forward(teacher, sc.descriptors);
        const std::vector<int> raw = assign_pseudo_labels(tf, nbank);
        if (vote) {
          PseudoLabels pl = superpoint_vote(raw, sc.sp);
          scene_targets = std::move(pl.voted);
        } else {
          scene_targets = raw;
        }
        if (!sc.labels.empty()) {
          const auto [ra, va] = vote_gain(raw, scene_targets, sc.labels);
          raw_sum += ra;
          voted_sum += va;
          ++acc_visits;
        }
        labeled_scene = &sc;
      }

      const FeatureMatrix desc = gather_rows(sc.descriptors, rows);
      const FeatureMatrix f2d = gather_rows(sc.fused, rows);
      std::vector<bool> mask = sc.mask;
      Superpointing sp = sc.sp;
      std::vector<int> targets;
      if (lambda != 0.0) targets = scene_targets;
      if (!rows.empty()) {
        mask.assign(rows.size(), false);
        sp.assignment.resize(rows.size());
        if (lambda != 0.0) targets.resize(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
          mask[r] = sc.mask[rows[r]];
          sp.assignment[r] = sc.sp.assignment[rows[r]];
          if (lambda != 0.0) targets[r] = scene_targets[rows[r]];
        }
      }

      const ForwardCache cache = forward_cached(state.encoder, desc);
      Stage1Loss ld = loss_stage1(cache.output, f2d, sp, mask, use_sp);
      double lsd = 0.0;
      if (lambda != 0.0) {
        const LossResult sd = loss_contrastive(cache.output, targets, nbank, tau);
        lsd = sd.value;
        auto& g = ld.grad.data();
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += lambda * sd.grad.data()[k];
      }
      const double total = ld.l_d + lambda * lsd;
      if (!std::isfinite(total))
        throw_numeric("stage 2: non-finite loss in epoch " + std::to_string(epoch) + " on scene '" + sc.name + "'");
      rec.l_p += ld.l_p;
      rec.l_sp += ld.l_sp;
      rec.l_d += ld.l_d;
      rec.l_sd += lsd;
      rec.total += total;

      GradBuffer g = backward(state.encoder, cache, ld.grad);
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
        if (++steps % ema_every == 0) ema_update(teacher, state.encoder, momentum);
      }
    }
    const double nb = static_cast<double>(batches.size());
    rec.l_p /= nb;
    rec.l_sp /= nb;
    rec.l_d /= nb;
    rec.l_sd /= nb;
    rec.total /= nb;
    if (acc_visits > 0) {
      rec.raw_acc = raw_sum / static_cast<double>(acc_visits);
      rec.voted_acc = voted_sum / static_cast<double>(acc_visits);
    }
    if (evaluator && (epoch == epochs || (eval_every > 0 && epoch % eval_every == 0))) rec.eval = evaluator(state.encoder);
    report.epochs.push_back(rec);
  }
  state.adam.lr = base_lr;
  if (teacher_out) *teacher_out = teacher;
  return report;
}

}  // namespace ggsd
