#include "ggsd/io.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "ggsd/error.hpp"

namespace ggsd {

namespace {

constexpr std::uint32_t kFtnsVersion = 1;
constexpr std::uint8_t kFloat32 = 1;
constexpr std::size_t kHeaderBytes = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

std::uint64_t Tensor::element_count() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::vector<std::uint8_t> encode_ftns(const Tensor& t) {
  if (t.dims.size() > 255) throw_data("FTNS: rank exceeds 255");
  if (t.element_count() != t.data.size()) throw_data("FTNS: dims do not match payload size");
  std::vector<std::uint8_t> out(kHeaderBytes, 0);
  out.reserve(kHeaderBytes + 8 * t.dims.size() + 4 * t.data.size());
  std::memcpy(out.data(), "FTNS", 4);
  for (int i = 0; i < 4; ++i) out[4 + i] = static_cast<std::uint8_t>(kFtnsVersion >> (8 * i));
  out[8] = kFloat32;
  out[9] = static_cast<std::uint8_t>(t.dims.size());
  for (auto d : t.dims) put_u64(out, d);
  for (float f : t.data) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  return out;
}

Tensor decode_ftns(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) throw_data("FTNS: truncated header");
  if (std::memcmp(bytes.data(), "FTNS", 4) != 0) throw_data("FTNS: bad magic");
  if (get_u32(bytes.data() + 4) != kFtnsVersion) throw_data("FTNS: unsupported version");
  if (bytes[8] != kFloat32) throw_data("FTNS: unsupported dtype " + std::to_string(bytes[8]));
  const std::size_t rank = bytes[9];
  if (bytes.size() < kHeaderBytes + 8 * rank) throw_data("FTNS: truncated dims");
  Tensor t;
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    const std::uint64_t d = get_u64(bytes.data() + kHeaderBytes + 8 * i);
    if (d != 0 && count > std::numeric_limits<std::uint64_t>::max() / 4 / d)
      throw_data("FTNS: dimension overflow");
    count *= d;
    t.dims.push_back(d);
  }
  const std::size_t offset = kHeaderBytes + 8 * rank;
  const std::uint64_t available = (bytes.size() - offset) / 4;
  if (count > available) throw_data("FTNS: truncated payload");
  if (count < available || (bytes.size() - offset) % 4 != 0) throw_data("FTNS: trailing bytes after payload");
  t.data.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t bits = get_u32(bytes.data() + offset + 4 * i);
    std::memcpy(&t.data[i], &bits, 4);
  }
  return t;
}

Tensor read_ftns(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_ftns(bytes);
  } catch (const Error& e) {
    throw_data(path.string() + ": " + e.what());
  }
}

void write_ftns(const Tensor& t, const std::filesystem::path& path) {
  const auto bytes = encode_ftns(t);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw_data("write failed: " + path.string());
}

Tensor to_tensor(const FeatureMatrix& m) {
  Tensor t;
  t.dims = {m.rows(), m.cols()};
  t.data.assign(m.data().begin(), m.data().end());
  return t;
}

FeatureMatrix to_matrix(const Tensor& t) {
  if (t.dims.size() == 1) {
    return FeatureMatrix(t.dims[0], 1, std::vector<double>(t.data.begin(), t.data.end()));
  }
  if (t.dims.size() == 2) {
    return FeatureMatrix(t.dims[0], t.dims[1], std::vector<double>(t.data.begin(), t.data.end()));
  }
  throw_data("FTNS: expected rank 1 or 2, got " + std::to_string(t.dims.size()));
}

FeatureMatrix load_tensor(const std::filesystem::path& path) { return to_matrix(read_ftns(path)); }

void save_tensor(const FeatureMatrix& m, const std::filesystem::path& path) { write_ftns(to_tensor(m), path); }

void save_ids(std::span<const int> ids, const std::filesystem::path& path) {
  Tensor t;
  t.dims = {ids.size()};
  t.data.assign(ids.begin(), ids.end());
  write_ftns(t, path);
}

std::vector<int> load_ids(const std::filesystem::path& path) {
  const Tensor t = read_ftns(path);
  if (t.dims.size() != 1 && !(t.dims.size() == 2 && t.dims[1] == 1))
    throw_data(path.string() + ": expected a rank-1 id vector");
  std::vector<int> out(t.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const float v = t.data[i];
    if (v != std::floor(v)) throw_data(path.string() + ": non-integer id");
    out[i] = static_cast<int>(v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// PLY

namespace {

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64, Unknown };

PlyType ply_type(const std::string& s) {
  if (s == "char" || s == "int8") return PlyType::Int8;
  if (s == "uchar" || s == "uint8") return PlyType::UInt8;
  if (s == "short" || s == "int16") return PlyType::Int16;
  if (s == "ushort" || s == "uint16") return PlyType::UInt16;
  if (s == "int" || s == "int32") return PlyType::Int32;
  if (s == "uint" || s == "uint32") return PlyType::UInt32;
  if (s == "float" || s == "float32") return PlyType::Float32;
  if (s == "double" || s == "float64") return PlyType::Float64;
  return PlyType::Unknown;
}

bool is_float(PlyType t) { return t == PlyType::Float32 || t == PlyType::Float64; }

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<std::pair<std::string, PlyType>> properties;
  bool has_list = false;
};

template <typename T>
T parse_number(std::string_view tok, std::size_t row) {
  T v{};
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw_data("PLY: bad value '" + std::string(tok) + "' in vertex row " + std::to_string(row));
  return v;
}

std::string format_float(float v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

PointCloud parse_ply(const std::string& text, const std::string& scene_id) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.substr(0, 3) != "ply") throw_data("PLY: missing 'ply' magic");

  std::vector<PlyElement> elements;
  bool ascii = false;
  bool ended = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw.empty() || kw == "comment" || kw == "obj_info") continue;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw_data("PLY: only ascii format is supported (got '" + fmt + "')");
      ascii = true;
    } else if (kw == "element") {
      PlyElement e;
      long long count = -1;
      ls >> e.name >> count;
      if (!ls || count < 0) throw_data("PLY: malformed element line '" + line + "'");
      e.count = static_cast<std::size_t>(count);
      elements.push_back(std::move(e));
    } else if (kw == "property") {
      if (elements.empty()) throw_data("PLY: property before any element");
      std::string type, name;
      ls >> type;
      if (type == "list") {
        elements.back().has_list = true;
        continue;
      }
      ls >> name;
      if (!ls) throw_data("PLY: malformed property line '" + line + "'");
      elements.back().properties.emplace_back(name, ply_type(type));
    } else if (kw == "end_header") {
      ended = true;
      break;
    } else {
      throw_data("PLY: unexpected header keyword '" + kw + "'");
    }
  }
  if (!ended) throw_data("PLY: missing end_header");
  if (!ascii) throw_data("PLY: missing format line");

  // Vertex rows are only reachable once preceding elements are skipped.
  std::size_t skip_rows = 0;
  const PlyElement* vertex = nullptr;
  for (const auto& e : elements) {
    if (e.name == "vertex") {
      vertex = &e;
      break;
    }
    skip_rows += e.count;
  }
  if (!vertex) throw_data("PLY: no vertex element");
  if (vertex->has_list) throw_data("PLY: list properties on vertex are not supported");

  int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1, il = -1;
  for (std::size_t p = 0; p < vertex->properties.size(); ++p) {
    const auto& [name, type] = vertex->properties[p];
    auto expect = [&](bool ok, const char* want) {
      if (!ok) throw_data("PLY: property '" + name + "' has unexpected type (want " + want + ")");
    };
    const int idx = static_cast<int>(p);
    if (name == "x" || name == "y" || name == "z") {
      expect(is_float(type), "float");
      (name == "x" ? ix : name == "y" ? iy : iz) = idx;
    } else if (name == "red" || name == "green" || name == "blue") {
      expect(type == PlyType::UInt8, "uchar");
      (name == "red" ? ir : name == "green" ? ig : ib) = idx;
    } else if (name == "label") {
      expect(type == PlyType::Int32, "int");
      il = idx;
    }
  }
  if (ix < 0 || iy < 0 || iz < 0) throw_data("PLY: vertex element lacks x, y, z");
  const bool has_rgb = ir >= 0 && ig >= 0 && ib >= 0;
  if ((ir >= 0 || ig >= 0 || ib >= 0) && !has_rgb) throw_data("PLY: partial color properties");

  PointCloud cloud;
  cloud.scene_id = scene_id;
  cloud.positions.reserve(vertex->count);
  cloud.colors.reserve(vertex->count);
  if (il >= 0) cloud.labels.emplace().reserve(vertex->count);

  for (std::size_t s = 0; s < skip_rows; ++s)
    if (!std::getline(in, line)) throw_data("PLY: element count mismatch before vertex data");

  const std::size_t nprop = vertex->properties.size();
  std::vector<std::string_view> toks;
  for (std::size_t row = 0; row < vertex->count; ++row) {
    do {
      if (!std::getline(in, line))
        throw_data("PLY: element count mismatch: header declares " + std::to_string(vertex->count) +
                   " vertices, found " + std::to_string(row));
      if (!line.empty() && line.back() == '\r') line.pop_back();
    } while (line.find_first_not_of(" \t") == std::string::npos);
    toks.clear();
    std::string_view sv(line);
    std::size_t pos = 0;
    while (pos < sv.size()) {
      const auto b = sv.find_first_not_of(" \t", pos);
      if (b == std::string_view::npos) break;
      const auto e = sv.find_first_of(" \t", b);
      toks.push_back(sv.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b));
      pos = e == std::string_view::npos ? sv.size() : e;
    }
    if (toks.size() != nprop)
      throw_data("PLY: vertex row " + std::to_string(row) + " has " + std::to_string(toks.size()) +
                 " values, expected " + std::to_string(nprop));
    const auto coord = [&](int idx) {
      // Parse at the declared precision so float files round-trip exactly.
      return vertex->properties[static_cast<std::size_t>(idx)].second == PlyType::Float32
                 ? static_cast<double>(parse_number<float>(toks[idx], row))
                 : parse_number<double>(toks[idx], row);
    };
    cloud.positions.push_back({coord(ix), coord(iy), coord(iz)});
    if (has_rgb) {
      Vec3 c;
      const int idx[3] = {ir, ig, ib};
      for (int k = 0; k < 3; ++k) {
        const int v = parse_number<int>(toks[idx[k]], row);
        if (v < 0 || v > 255) throw_data("PLY: color out of range in row " + std::to_string(row));
        c[k] = v / 255.0;
      }
      cloud.colors.push_back(c);
    } else {
      cloud.colors.push_back({0.0, 0.0, 0.0});
    }
    if (il >= 0) cloud.labels->push_back(parse_number<int>(toks[il], row));
  }
  if (!cloud.labels) cloud.labels = std::vector<int>(cloud.positions.size(), -1);
  return cloud;
}

std::array<std::uint8_t, 3> label_color(int label) {
  if (label < 0) return {128, 128, 128};
  constexpr double kGoldenAngle = 137.50776405003785;
  const double hue = std::fmod(label * kGoldenAngle, 360.0) / 60.0;
  const double s = 0.65, v = 0.95;
  const double c = v * s;
  const double x = c * (1.0 - std::fabs(std::fmod(hue, 2.0) - 1.0));
  const double m = v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hue)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  auto to8 = [&](double u) { return static_cast<std::uint8_t>(std::lround(255.0 * (u + m))); };
  return {to8(r), to8(g), to8(b)};
}

std::string format_ply(const PointCloud& cloud, ColorBy color_by) {
  if (color_by == ColorBy::LabelPalette && !cloud.labels)
    throw_usage("save_ply: label palette requested but the cloud has no labels");
  const bool write_labels = cloud.labels.has_value();
  std::string out;
  out += "ply\nformat ascii 1.0\n";
  if (!cloud.scene_id.empty()) out += "comment scene " + cloud.scene_id + "\n";
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  out += "property float x\nproperty float y\nproperty float z\n";
  out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (write_labels) out += "property int label\n";
  out += "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.positions[i];
    out += format_float(static_cast<float>(p[0])) + ' ' + format_float(static_cast<float>(p[1])) + ' ' +
           format_float(static_cast<float>(p[2]));
    std::array<int, 3> rgb;
    if (color_by == ColorBy::LabelPalette) {
      const auto c = label_color((*cloud.labels)[i]);
      rgb = {c[0], c[1], c[2]};
    } else {
      for (int k = 0; k < 3; ++k)
        rgb[k] = static_cast<int>(std::lround(255.0 * std::clamp(cloud.colors[i][k], 0.0, 1.0)));
    }
    out += ' ' + std::to_string(rgb[0]) + ' ' + std::to_string(rgb[1]) + ' ' + std::to_string(rgb[2]);
    if (write_labels) out += ' ' + std::to_string((*cloud.labels)[i]);
    out += '\n';
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write " + path.string());
  out << text;
  if (!out) throw_data("write failed: " + path.string());
}

PointCloud load_ply(const std::filesystem::path& path) {
  try {
    return parse_ply(read_text(path), path.stem().string());
  } catch (const Error& e) {
    throw_data(path.string() + ": " + e.what());
  }
}

void save_ply(const PointCloud& cloud, const std::filesystem::path& path, ColorBy color_by) {
  write_text(path, format_ply(cloud, color_by));
}

}  // namespace ggsd
