#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ggsd {

using Vec3 = std::array<double, 3>;

/// Dense row-major matrix of per-point (or per-pixel, per-superpoint) embeddings.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static FeatureMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool all_finite() const;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// One scene: positions in meters, colors in [0,1], optional labels (-1 = unlabeled).
struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> colors;
  std::optional<std::vector<int>> labels;
  std::string scene_id;

  std::size_t size() const noexcept { return positions.size(); }
  bool has_labels() const noexcept { return labels.has_value(); }

  /// Throws a data error when an invariant is broken.
  void validate(int num_classes = -1) const;
};

/// Class names plus their embeddings (one row per class).
struct TextBank {
  std::vector<std::string> class_names;
  FeatureMatrix embeddings;
  std::string prompt_template = "a {} in a scene";

  std::size_t size() const noexcept { return class_names.size(); }
  std::size_t dim() const noexcept { return embeddings.cols(); }
  void validate() const;
  /// Prompt for class `l` with the template's `{}` substituted.
  std::string prompt(std::size_t l) const;
};

/// A partition of a scene's points.
struct Superpointing {
  std::vector<int> assignment;
  int num_superpoints = 0;
  std::vector<Vec3> seeds;

  /// Members of each superpoint, in ascending point order.
  std::vector<std::vector<std::size_t>> members() const;
  /// Throws if any point is unassigned or any id in [0,N) is empty.
  void validate() const;
};

}  // namespace ggsd
