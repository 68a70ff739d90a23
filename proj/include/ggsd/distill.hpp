#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ggsd/config.hpp"
#include "ggsd/encoder.hpp"
#include "ggsd/rng.hpp"
#include "ggsd/types.hpp"

namespace ggsd {

struct SuperpointMeans {
  FeatureMatrix means;              // N x C; zero rows where count == 0
  std::vector<std::size_t> counts;  // masked members per superpoint
};

SuperpointMeans superpoint_mean(const FeatureMatrix& features, const Superpointing& sp, const std::vector<bool>& mask);

/// Loss value and its gradient with respect to the (normalized) student rows.
struct LossResult {
  double value = 0.0;
  FeatureMatrix grad;
};

/// Mean over masked rows of 1 - cos(F3D_i, F2D_i).
LossResult loss_pixel_point(const FeatureMatrix& f3d, const FeatureMatrix& f2d, const std::vector<bool>& mask);

/// Mean over superpoints of 1 - cos(mean F3D, mean F2D). Superpoints with no
/// masked member, or whose mean collapses to zero on either side, are skipped.
LossResult loss_superpoint(const FeatureMatrix& f3d, const FeatureMatrix& f2d, const Superpointing& sp,
                           const std::vector<bool>& mask);

struct Stage1Loss {
  double l_p = 0.0;
  double l_sp = 0.0;
  double l_d = 0.0;
  FeatureMatrix grad;
};

/// L_d = L_p + L_sp; with use_superpoints = false only L_p is kept.
Stage1Loss loss_stage1(const FeatureMatrix& f3d, const FeatureMatrix& f2d, const Superpointing& sp,
                       const std::vector<bool>& mask, bool use_superpoints = true);

/// Everything the training loops need for one scene.
struct TrainScene {
  std::string name;
  FeatureMatrix descriptors;
  FeatureMatrix fused;  // teacher features, unit rows
  std::vector<bool> mask;
  Superpointing sp;
  std::vector<int> labels;  // ground truth for diagnostics (may be empty)
};

/// Mutable training state: student weights, optimizer, and the shuffle stream.
struct TrainState {
  PointEncoder encoder;
  AdamState adam;
  Rng rng{0};
};

struct EvalSnapshot {
  double miou = 0.0;
  double macc = 0.0;
};
using Evaluator = std::function<EvalSnapshot(const PointEncoder&)>;

struct EpochRecord {
  int epoch = 0;
  double l_p = 0.0;
  double l_sp = 0.0;
  double l_d = 0.0;
  double l_sd = 0.0;
  double total = 0.0;
  double raw_acc = -1.0;    // pseudo-label accuracy before voting (stage 2, when labels exist)
  double voted_acc = -1.0;  // after voting
  std::optional<EvalSnapshot> eval;
};

struct TrainReport {
  int stage = 1;
  std::vector<EpochRecord> epochs;

  /// CSV with columns epoch,L_p,L_sp,L_d,miou,macc (stage 1) or
  /// epoch,L_d,L_sd,total,raw_acc,voted_acc,miou,macc (stage 2).
  std::string to_csv() const;
};

/// One minibatch: a scene restricted to a subset of its points.
struct Batch {
  const TrainScene* scene = nullptr;
  std::vector<std::size_t> rows;  // empty = all rows
};

/// Splits every scene into batches of about `points_per_step` points (0 =
/// whole scene), consuming the Rng for scene order and shuffles. Batches are
/// unions of whole superpoints, so superpoint means inside a batch are exact.
std::vector<Batch> epoch_batches(const std::vector<TrainScene>& scenes, std::size_t points_per_step, Rng& rng);

/// Rows of `m` listed in `rows` (all of `m` when `rows` is empty).
FeatureMatrix gather_rows(const FeatureMatrix& m, const std::vector<std::size_t>& rows);

/// Learning rate for a 1-based epoch under `lr_schedule` (cosine decays to 0 at the end).
double scheduled_lr(const Config& cfg, double base, int epoch, int epochs);

TrainReport train_stage1(const std::vector<TrainScene>& scenes, TrainState& state, const Config& cfg,
                         const Evaluator& evaluator = {});

}  // namespace ggsd
