#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ggsd/types.hpp"

namespace ggsd {

/// Static 3-d tree for exact k-nearest-neighbor queries.
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points);

  /// The k nearest points (including a coincident query point itself), ordered
  /// by (squared distance, index).
  std::vector<std::pair<double, std::size_t>> knn(const Vec3& query, std::size_t k) const;

  std::size_t size() const noexcept { return points_.size(); }

 private:
  struct Node {
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    std::uint32_t left = 0, right = 0;
    std::uint32_t begin = 0, end = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> index_;
  std::vector<Node> nodes_;
};

}  // namespace ggsd
