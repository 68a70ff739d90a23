#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ggsd/projection.hpp"
#include "ggsd/synth.hpp"
#include "ggsd/types.hpp"

namespace ggsd {

namespace fs = std::filesystem;

// Camera views: <dir>/<k>.json holds intrinsics and the pose and names the
// sibling <k>.depth.ftns (H x W) and <k>.feat.ftns ((H*W) x C).
void save_view(const CameraView& view, const fs::path& dir, const std::string& stem);
CameraView load_view(const fs::path& json_path);
void save_views(const std::vector<CameraView>& views, const fs::path& dir);
/// Every <k>.json in `dir`, ordered by k.
std::vector<CameraView> load_views(const fs::path& dir);

/// {"template": str, "classes": [str], "embeddings": "path.ftns"}; the
/// embeddings path is relative to the JSON file.
void save_bank(const TextBank& bank, const fs::path& json_path);
TextBank load_bank(const fs::path& json_path);

/// Rank-1 tensor [N, id_0, ..., id_{M-1}].
void save_superpoints(const Superpointing& sp, const fs::path& path);
Superpointing load_superpoints(const fs::path& path);

struct ManifestScene {
  std::string name;
  std::string split;  // "train" or "test"
  fs::path ply;
  fs::path views;
  std::optional<fs::path> superpoints;
  std::optional<fs::path> fused;
  std::optional<fs::path> mask;
  std::string hash;  // FNV-1a of the PLY bytes, hex
};

struct Manifest {
  std::string benchmark;
  std::uint64_t seed = 0;
  std::string config_hash;
  fs::path bank;
  std::vector<ManifestScene> scenes;

  std::vector<const ManifestScene*> split(const std::string& name) const;
  std::string to_json(const fs::path& base) const;
  /// Paths resolve relative to the manifest's directory; all must exist.
  static Manifest load(const fs::path& path);
  void save(const fs::path& path) const;
};

std::string hex64(std::uint64_t v);
std::string file_hash(const fs::path& path);

/// Writes scenes/<name>.ply, views/<name>/, bank.json, bank.ftns and
/// manifest.json under `out_dir`.
Manifest save_benchmark(const Benchmark& bm, const fs::path& out_dir);

}  // namespace ggsd
