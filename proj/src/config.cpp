#include "ggsd/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ggsd/error.hpp"
#include "ggsd/rng.hpp"

namespace ggsd {

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = {
      // superpoints
      {"superpoint_method", "vccs", "superpoint generator: vccs | ransac"},
      {"voxel_size", "0.02", "VCCS voxel edge length (m)"},
      {"seed_spacing", "0.5", "VCCS seed grid spacing and seed radius (m)"},
      {"vccs_wc", "0.2", "VCCS color weight"},
      {"vccs_ws", "0.4", "VCCS spatial weight"},
      {"vccs_wn", "1.0", "VCCS normal weight"},
      {"vccs_max_iters", "5", "VCCS seed recentering rounds"},
      {"normal_k", "16", "neighbors for normal estimation"},
      {"ransac_plane_dist", "0.2", "RANSAC inlier distance (m)"},
      {"ransac_cluster_dist", "0.2", "Euclidean clustering distance (m)"},
      {"ransac_iters", "256", "RANSAC iterations"},
      {"ransac_min_inliers", "3", "minimum inliers for the plane superpoint"},
      // fusion
      {"sigma_factor", "0.2", "relative depth tolerance of the occlusion test"},
      {"occlusion", "true", "enable the depth occlusion test"},
      // encoder
      {"hidden", "64", "hidden width of the point encoder"},
      {"descriptor_k", "16", "neighbors for point descriptors"},
      {"descriptor_scale", "2.0", "position scale (m) for descriptors"},
      {"voxelize_inputs", "false", "average descriptors per voxel before encoding"},
      {"lr", "1e-4", "Adam learning rate"},
      {"lr_schedule", "constant", "Per-epoch learning-rate schedule: constant or cosine"},
      {"adam_beta1", "0.9", "Adam beta1"},
      {"adam_beta2", "0.999", "Adam beta2"},
      {"adam_eps", "1e-8", "Adam epsilon"},
      // schedule
      {"epochs_stage1", "70", "stage-1 (distillation) epochs"},
      {"epochs_stage2", "30", "stage-2 (self-distillation) epochs"},
      {"scenes_per_step", "1", "scenes accumulated per optimizer step"},
      {"points_per_step", "0", "points per optimizer step within a scene (0 = whole scene)"},
      {"sp_loss", "true", "include the superpoint consistency loss"},
      {"vote", "true", "superpoint voting of pseudo-labels"},
      {"tau", "0.01", "contrastive temperature"},
      {"lambda_sd", "1.0", "weight of the self-distillation loss"},
      {"ema_momentum", "0.999", "EMA teacher momentum"},
      {"ema_every", "1", "optimizer steps between EMA updates"},
      {"eval_every", "0", "epochs between evaluation snapshots (0 = last epoch only)"},
  };
  return schema;
}

namespace {

const ConfigKey* find_key(const std::string& key) {
  for (const auto& k : config_schema())
    if (k.key == key) return &k;
  return nullptr;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool is_number_text(const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  return !v.empty() && ec == std::errc() && ptr == v.data() + v.size();
}

bool is_bool_text(const std::string& v) {
  for (const char* t : {"true", "false", "1", "0", "on", "off", "yes", "no"})
    if (v == t) return true;
  return false;
}

}  // namespace

Config::Config() {
  for (const auto& k : config_schema()) values_[k.key] = k.default_value;
}

Config Config::parse(std::string_view text) {
  Config cfg;
  cfg.apply(text);
  return cfg;
}

void Config::apply(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw_usage("config line " + std::to_string(lineno) + ": expected 'key = value'");
    set(trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)));
  }
}

Config Config::load(const std::filesystem::path& path) {
  Config cfg;
  cfg.apply_file(path);
  return cfg;
}

void Config::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply(ss.str());
}

void Config::set(const std::string& key, const std::string& value) {
  const ConfigKey* k = find_key(key);
  if (!k) throw_usage("unknown config key '" + key + "'");
  // Keys are typed by their defaults: boolean, numeric, or free text.
  const std::string& d = k->default_value;
  if (d == "true" || d == "false") {
    if (!is_bool_text(value)) throw_usage("config key '" + key + "': '" + value + "' is not a boolean");
  } else if (is_number_text(d) && !is_number_text(value)) {
    throw_usage("config key '" + key + "': '" + value + "' is not a number");
  }
  values_[key] = value;
}

bool Config::is_default(const std::string& key) const {
  const ConfigKey* k = find_key(key);
  return k && values_.at(key) == k->default_value;
}

const std::string& Config::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw_usage("unknown config key '" + key + "'");
  return it->second;
}

double Config::get_double(const std::string& key) const {
  const std::string& v = get_string(key);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw_usage("config key '" + key + "': '" + v + "' is not a number");
  return out;
}

long Config::get_int(const std::string& key) const {
  const std::string& v = get_string(key);
  long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw_usage("config key '" + key + "': '" + v + "' is not an integer");
  return out;
}

bool Config::get_bool(const std::string& key) const {
  const std::string& v = get_string(key);
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw_usage("config key '" + key + "': '" + v + "' is not a boolean");
}

std::string Config::to_text() const {
  std::string out;
  for (const auto& k : config_schema()) out += k.key + " = " + values_.at(k.key) + "\n";
  return out;
}

std::uint64_t Config::hash() const { return fnv1a64(to_text()); }

}  // namespace ggsd
