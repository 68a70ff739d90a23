#pragma once

#include <utility>
#include <vector>

#include "ggsd/distill.hpp"

namespace ggsd {

/// Per row, argmax over bank rows of the dot product (ties to the lowest id);
/// zero rows get the sentinel -1.
std::vector<int> assign_pseudo_labels(const FeatureMatrix& teacher_features, const TextBank& bank);

struct PseudoLabels {
  std::vector<int> raw;
  std::vector<int> voted;
  std::vector<double> vote_fraction;  // winning share per superpoint
};

/// Majority label per superpoint over non-sentinel members (ties to the
/// lowest id); all-sentinel superpoints keep the sentinel.
PseudoLabels superpoint_vote(const std::vector<int>& raw, const Superpointing& sp);

/// Softmax cross-entropy of F3D . bank / tau against `targets`, averaged over
/// rows with a non-negative target. Uses max-subtracted log-sum-exp.
LossResult loss_contrastive(const FeatureMatrix& f3d, const std::vector<int>& targets, const TextBank& bank,
                            double tau);

/// Accuracy of raw and voted labels against ground truth over points with
/// voted >= 0 and a ground-truth label.
std::pair<double, double> vote_gain(const std::vector<int>& raw, const std::vector<int>& voted,
                                    const std::vector<int>& gt);

/// Self-distillation: an EMA teacher labels the points, labels are voted per
/// superpoint, and the student minimizes L_d + lambda * L_sd. The teacher
/// starts as a copy of the incoming student.
TrainReport train_stage2(const std::vector<TrainScene>& scenes, TrainState& state, const TextBank& bank,
                         const Config& cfg, const Evaluator& evaluator = {}, PointEncoder* teacher_out = nullptr);

}  // namespace ggsd
