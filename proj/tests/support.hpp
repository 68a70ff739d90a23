#pragma once

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <unistd.h>

#include "ggsd/error.hpp"
#include "ggsd/rng.hpp"
#include "ggsd/types.hpp"

namespace testing {

using ggsd::FeatureMatrix;
using ggsd::PointCloud;
using ggsd::Rng;
using ggsd::Vec3;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() / ("ggsd_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline FeatureMatrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  FeatureMatrix m(r, c);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

inline FeatureMatrix random_unit_rows(std::size_t r, std::size_t c, Rng& rng) {
  FeatureMatrix m = random_matrix(r, c, rng);
  for (std::size_t i = 0; i < r; ++i) {
    double n = 0;
    for (double v : m.row(i)) n += v * v;
    n = std::sqrt(n);
    for (double& v : m.row(i)) v /= n;
  }
  return m;
}

inline PointCloud random_cloud(std::size_t n, Rng& rng, double extent = 1.0) {
  PointCloud c;
  c.scene_id = "random";
  for (std::size_t i = 0; i < n; ++i) {
    c.positions.push_back({rng.uniform(0, extent), rng.uniform(0, extent), rng.uniform(0, extent)});
    c.colors.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
  }
  return c;
}

inline std::vector<bool> random_mask(std::size_t n, double p_true, Rng& rng) {
  std::vector<bool> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = rng.uniform() < p_true;
  return m;
}

/// Naive union-find for brute-force component oracles.
struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

/// Relabels ids by first occurrence so two partitions can be compared.
inline std::vector<int> canonical(const std::vector<int>& ids) {
  std::map<int, int> remap;
  std::vector<int> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0) {
      out[i] = -1;
      continue;
    }
    auto it = remap.find(ids[i]);
    if (it == remap.end()) it = remap.emplace(ids[i], static_cast<int>(remap.size())).first;
    out[i] = it->second;
  }
  return out;
}

template <typename F>
ggsd::ErrorKind error_kind(F&& f) {
  try {
    f();
  } catch (const ggsd::Error& e) {
    return e.kind();
  }
  FAIL("expected a ggsd::Error");
  return ggsd::ErrorKind::Usage;
}

template <typename F>
std::string error_message(F&& f) {
  try {
    f();
  } catch (const ggsd::Error& e) {
    return e.what();
  }
  FAIL("expected a ggsd::Error");
  return {};
}

}  // namespace testing
