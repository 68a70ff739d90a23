#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ggsd/types.hpp"

namespace ggsd {

/// Argmax cosine similarity per row (ties to the lowest id). Zero rows map to
/// id 0; their indices are reported through `degenerate` when given.
std::vector<int> infer_labels(const FeatureMatrix& features, const TextBank& bank,
                              std::vector<std::size_t>* degenerate = nullptr);

/// Fine-grained names of an extended bank grouped under benchmark classes.
struct MultiNameMap {
  std::vector<std::string> benchmark_classes;
  std::vector<int> name_to_class;  // per extended-bank row

  /// JSON: {"classes": [{"name": str, "names": [str, ...]}, ...]}. Extended
  /// names are resolved against `extended_bank`.
  static MultiNameMap from_json(const std::string& text, const TextBank& extended_bank);
  static MultiNameMap load(const std::filesystem::path& path, const TextBank& extended_bank);
  /// Names in bank order: all fine names of every class, class by class.
  static std::vector<std::string> fine_names_from_json(const std::string& text);
};

std::vector<int> infer_multiname(const FeatureMatrix& features, const TextBank& extended_bank, const MultiNameMap& map);

struct ConfusionMatrix {
  std::size_t num_classes = 0;
  std::vector<std::uint64_t> counts;  // row = ground truth, column = prediction
  std::uint64_t ignored = 0;

  std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts[gt * num_classes + pred]; }
  std::uint64_t total() const;
  void merge(const ConfusionMatrix& other);
};

/// Ground truth -1 is ignored; other ids must lie in [0, L).
ConfusionMatrix confusion(const std::vector<int>& pred, const std::vector<int>& gt, std::size_t num_classes);

struct SegMetrics {
  double miou = 0.0;
  double macc = 0.0;
  std::vector<double> iou;
  std::vector<double> acc;
  std::vector<bool> iou_valid;  // class present in ground truth or prediction
  std::vector<bool> acc_valid;  // class present in ground truth
};

/// IoU_c = TP/(TP+FP+FN) averaged over classes present in gt or prediction;
/// Acc_c = TP/(TP+FN) averaged over classes present in gt.
SegMetrics miou_macc(const ConfusionMatrix& cm);

struct ClassPartition {
  std::vector<std::pair<std::string, std::vector<int>>> groups;

  void validate(std::size_t num_classes) const;
  /// JSON object group -> list of class names or ids, resolved against `bank`.
  static ClassPartition from_json(const std::string& text, const TextBank& bank);
  static ClassPartition load(const std::filesystem::path& path, const TextBank& bank);
};

struct GroupMetrics {
  std::string name;
  double miou = 0.0;
  double macc = 0.0;
};

std::vector<GroupMetrics> partition_report(const ConfusionMatrix& cm, const ClassPartition& partition);

}  // namespace ggsd
