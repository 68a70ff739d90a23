#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ggsd/config.hpp"
#include "ggsd/rng.hpp"
#include "ggsd/types.hpp"

namespace ggsd {

/// Width of the per-point input: position(3) color(3) normal(3)
/// linearity/planarity/sphericity(3) density(1).
inline constexpr std::size_t kDescriptorDim = 13;

struct DescriptorParams {
  std::size_t k = 16;
  double position_scale = 2.0;  // meters
  double pool_voxel = 0.0;      // > 0 averages descriptors per voxel
};

/// Parameter-free local geometry/color descriptors, invariant to translating the cloud.
FeatureMatrix compute_descriptors(const PointCloud& cloud, const DescriptorParams& p = {});

/// Fully connected point encoder: tanh between layers, linear last layer, then
/// zero-safe L2 normalization of every output row.
///
/// Parameters live in one flat vector. Layer l stores its weights input-major
/// (in x out) followed by its bias (out).
class PointEncoder {
 public:
  PointEncoder() = default;
  explicit PointEncoder(std::vector<std::size_t> layer_sizes);

  /// Glorot-uniform weights, zero biases.
  static PointEncoder glorot(std::vector<std::size_t> layer_sizes, Rng& rng);

  const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
  std::size_t num_layers() const noexcept { return sizes_.empty() ? 0 : sizes_.size() - 1; }
  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }

  std::vector<double>& params() noexcept { return params_; }
  const std::vector<double>& params() const noexcept { return params_; }

  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const { return offsets_[layer] + sizes_[layer] * sizes_[layer + 1]; }

  bool same_architecture(const PointEncoder& other) const { return sizes_ == other.sizes_; }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

/// Intermediate values kept for the backward pass.
struct ForwardCache {
  std::vector<FeatureMatrix> inputs;  // input to each layer
  FeatureMatrix pre_norm;             // last layer output before normalization
  FeatureMatrix output;               // unit rows (zero rows stay zero)
};

FeatureMatrix forward(const PointEncoder& enc, const FeatureMatrix& desc);
ForwardCache forward_cached(const PointEncoder& enc, const FeatureMatrix& desc);

struct GradBuffer {
  std::vector<double> params;  // same layout as PointEncoder::params()
  FeatureMatrix d_output;      // upstream dL/d(normalized output), kept for inspection
};

/// Exact reverse-mode gradient through normalization and all layers.
GradBuffer backward(const PointEncoder& enc, const ForwardCache& cache, const FeatureMatrix& d_output);

struct AdamState {
  long step = 0;
  std::vector<double> m, v;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_encoder(const PointEncoder& enc, const Config& cfg);
  static AdamState for_encoder(const PointEncoder& enc, double lr = 1e-4);
};

void adam_step(PointEncoder& enc, const GradBuffer& grads, AdamState& st);

/// teacher <- m * teacher + (1 - m) * student, elementwise. m = 1 freezes the teacher.
void ema_update(PointEncoder& teacher, const PointEncoder& student, double momentum);

/// Checkpoint: `path` holds the parameter blobs (and Adam moments) as
/// concatenated FTNS records, `path + ".json"` the manifest.
void save_checkpoint(const std::filesystem::path& path, const PointEncoder& enc, const AdamState& adam,
                     std::uint64_t config_hash, const std::string& note = {});
void load_checkpoint(const std::filesystem::path& path, PointEncoder& enc, AdamState& adam);

}  // namespace ggsd
