#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ggsd/types.hpp"

namespace ggsd {

// ---------------------------------------------------------------------------
// FTNS tensor files
//
//   offset 0   "FTNS"
//   offset 4   u32 version (= 1)
//   offset 8   u8 dtype (= 1, float32)
//   offset 9   u8 rank
//   offset 10  zero padding up to offset 16
//   offset 16  rank x u64 dims
//   then       row-major float32 payload
//
// All integers and floats are little-endian.
// ---------------------------------------------------------------------------

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<float> data;

  std::uint64_t element_count() const;
};

std::vector<std::uint8_t> encode_ftns(const Tensor& t);
Tensor decode_ftns(std::span<const std::uint8_t> bytes);

Tensor read_ftns(const std::filesystem::path& path);
void write_ftns(const Tensor& t, const std::filesystem::path& path);

/// Rank-2 tensors load as R x C, rank-1 tensors as R x 1.
FeatureMatrix load_tensor(const std::filesystem::path& path);
/// Written as rank 2 (values rounded to float32).
void save_tensor(const FeatureMatrix& m, const std::filesystem::path& path);

Tensor to_tensor(const FeatureMatrix& m);
FeatureMatrix to_matrix(const Tensor& t);

/// Rank-1 integer vectors (labels, assignments) stored as float32.
void save_ids(std::span<const int> ids, const std::filesystem::path& path);
std::vector<int> load_ids(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// ASCII PLY
// ---------------------------------------------------------------------------

enum class ColorBy { Rgb, LabelPalette };

PointCloud parse_ply(const std::string& text, const std::string& scene_id = {});
std::string format_ply(const PointCloud& cloud, ColorBy color_by = ColorBy::Rgb);

PointCloud load_ply(const std::filesystem::path& path);
void save_ply(const PointCloud& cloud, const std::filesystem::path& path, ColorBy color_by = ColorBy::Rgb);

/// Deterministic label color: hue advances by the golden angle per class, -1 is gray.
std::array<std::uint8_t, 3> label_color(int label);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ggsd
