#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ggsd/config.hpp"
#include "ggsd/distill.hpp"
#include "ggsd/encoder.hpp"
#include "ggsd/projection.hpp"
#include "ggsd/synth.hpp"

namespace ggsd {

using Logger = std::function<void(const std::string&)>;

/// Defaults tuned for the synthetic benchmarks; explicit user settings are
/// applied on top.
Config benchmark_preset(BenchmarkKind kind);

DescriptorParams descriptor_params(const Config& cfg);

/// VCCS or RANSAC+clustering, chosen by `superpoint_method`.
Superpointing compute_superpoints(const PointCloud& cloud, const Config& cfg, Rng& rng);

/// Superpoints, fused teacher features and descriptors for one scene.
TrainScene prepare_scene(const PointCloud& cloud, const std::vector<CameraView>& views, const Config& cfg, Rng& rng);

/// [13, H, H, C] with Glorot initialization.
PointEncoder init_encoder(const Config& cfg, std::size_t out_dim, Rng& rng);

/// Student predictions scored on the covered points of every scene.
EvalSnapshot evaluate_student(const PointEncoder& enc, const std::vector<TrainScene>& scenes, const TextBank& bank);
/// Fused teacher features classified directly, on the same points.
EvalSnapshot evaluate_projection(const std::vector<TrainScene>& scenes, const TextBank& bank);

struct AblationRow {
  std::string method;
  double miou = 0.0;  // fractions in [0, 1]
  double macc = 0.0;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<TrainReport> reports;  // pixel-point, geometry-guided, self-distillation, full
  double purity = 0.0;               // mean superpoint purity over all scenes
  PointEncoder final_encoder;
};

extern const std::vector<std::string> kAblationMethods;

std::vector<TrainScene> prepare_bundles(const std::vector<SynthBundle>& bundles, const Config& cfg, Rng rng);

/// Teacher projection, stage 1 with and without the superpoint term, stage 2
/// without and with voting (both continuing the geometry-guided student).
AblationResult run_ablation(const Benchmark& bm, const Config& cfg, const Logger& log = {});

/// `method,mIoU,mAcc` with percentages to two decimals.
std::string ablation_csv(const std::vector<AblationRow>& rows);
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace ggsd
