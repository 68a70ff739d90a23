#include "ggsd/kdtree.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace ggsd {

namespace {
constexpr std::uint32_t kLeafSize = 12;
}

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  index_.resize(points_.size());
  std::iota(index_.begin(), index_.end(), 0u);
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  if (!points_.empty()) build(0, static_cast<std::uint32_t>(points_.size()));
}

std::uint32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({});
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[index_[begin]], hi = lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], points_[index_[i]][k]);
      hi[k] = std::max(hi[k], points_[index_[i]][k]);
    }
  }
  int axis = 0;
  for (int k = 1; k < 3; ++k)
    if (hi[k] - lo[k] > hi[axis] - lo[axis]) axis = k;
  if (hi[axis] == lo[axis]) return id;  // all coincident: keep as leaf

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(index_.begin() + begin, index_.begin() + mid, index_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return points_[a][axis] < points_[b][axis] ||
                            (points_[a][axis] == points_[b][axis] && a < b);
                   });
  const double split = points_[index_[mid]][axis];
  const std::uint32_t l = build(begin, mid);
  const std::uint32_t r = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = l;
  nodes_[id].right = r;
  return id;
}

std::vector<std::pair<double, std::size_t>> KdTree::knn(const Vec3& q, std::size_t k) const {
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item> heap;  // max-heap on (d2, index)
  k = std::min(k, points_.size());
  if (k == 0) return {};

  auto visit = [&](auto&& self, std::uint32_t id) -> void {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const std::size_t p = index_[i];
        const double dx = points_[p][0] - q[0], dy = points_[p][1] - q[1], dz = points_[p][2] - q[2];
        const Item item{dx * dx + dy * dy + dz * dz, p};
        if (heap.size() < k) {
          heap.push(item);
        } else if (item < heap.top()) {
          heap.pop();
          heap.push(item);
        }
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const std::uint32_t near = diff < 0 ? n.left : n.right;
    const std::uint32_t far = diff < 0 ? n.right : n.left;
    self(self, near);
    if (heap.size() < k || diff * diff <= heap.top().first) self(self, far);
  };
  visit(visit, 0);

  std::vector<Item> out(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = heap.top();
    heap.pop();
  }
  return out;
}

}  // namespace ggsd
