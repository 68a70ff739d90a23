#include "ggsd/types.hpp"

#include <cmath>

#include "ggsd/error.hpp"

namespace ggsd {

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw_data("FeatureMatrix: data size " + std::to_string(data_.size()) + " != " +
               std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

FeatureMatrix FeatureMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  FeatureMatrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw_data("FeatureMatrix: ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

bool FeatureMatrix::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void PointCloud::validate(int num_classes) const {
  const std::size_t m = positions.size();
  if (m == 0) throw_data("point cloud '" + scene_id + "' is empty");
  if (colors.size() != m) throw_data("point cloud colors/positions size mismatch");
  for (std::size_t i = 0; i < m; ++i) {
    for (int k = 0; k < 3; ++k) {
      if (!std::isfinite(positions[i][k])) throw_data("non-finite position at row " + std::to_string(i));
      if (!(colors[i][k] >= 0.0 && colors[i][k] <= 1.0))
        throw_data("color out of [0,1] at row " + std::to_string(i));
    }
  }
  if (labels) {
    if (labels->size() != m) throw_data("point cloud labels/positions size mismatch");
    for (int l : *labels) {
      if (l < -1 || (num_classes >= 0 && l >= num_classes))
        throw_data("label " + std::to_string(l) + " out of range");
    }
  }
}

void TextBank::validate() const {
  if (class_names.size() != embeddings.rows())
    throw_data("text bank has " + std::to_string(class_names.size()) + " names but " +
               std::to_string(embeddings.rows()) + " embeddings");
  for (std::size_t l = 0; l < embeddings.rows(); ++l) {
    double s = 0.0;
    for (double v : embeddings.row(l)) s += v * v;
    if (!(s > 0.0)) throw_data("text bank embedding for '" + class_names[l] + "' has zero norm");
  }
}

std::string TextBank::prompt(std::size_t l) const {
  std::string out = prompt_template;
  const auto pos = out.find("{}");
  if (pos == std::string::npos) return out + " " + class_names.at(l);
  return out.replace(pos, 2, class_names.at(l));
}

std::vector<std::vector<std::size_t>> Superpointing::members() const {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(num_superpoints));
  for (std::size_t i = 0; i < assignment.size(); ++i) out[static_cast<std::size_t>(assignment[i])].push_back(i);
  return out;
}

void Superpointing::validate() const {
  if (num_superpoints < 1) throw_data("superpointing has no superpoints");
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_superpoints), 0);
  for (int a : assignment) {
    if (a < 0 || a >= num_superpoints) throw_data("superpoint id " + std::to_string(a) + " out of range");
    ++counts[static_cast<std::size_t>(a)];
  }
  for (std::size_t n = 0; n < counts.size(); ++n)
    if (counts[n] == 0) throw_data("superpoint " + std::to_string(n) + " is empty");
}

}  // namespace ggsd
