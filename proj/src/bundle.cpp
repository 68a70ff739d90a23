#include "ggsd/bundle.hpp"

#include <algorithm>
#include <json.hpp>

#include "ggsd/error.hpp"
#include "ggsd/io.hpp"
#include "ggsd/rng.hpp"

namespace ggsd {

using nlohmann::json;

namespace {

json parse_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw_data(path.string() + ": " + e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path q(p);
  return q.is_absolute() ? q : base / q;
}

std::string relative_to(const fs::path& p, const fs::path& base) {
  return fs::relative(p, base).generic_string();
}

}  // namespace

void save_view(const CameraView& view, const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  json j;
  j["fx"] = view.fx;
  j["fy"] = view.fy;
  j["cx"] = view.cx;
  j["cy"] = view.cy;
  j["width"] = view.width;
  j["height"] = view.height;
  j["world_to_cam"] = view.world_to_cam;
  j["depth"] = stem + ".depth.ftns";
  j["features"] = stem + ".feat.ftns";
  FeatureMatrix depth(static_cast<std::size_t>(view.height), static_cast<std::size_t>(view.width), view.depth);
  save_tensor(depth, dir / (stem + ".depth.ftns"));
  save_tensor(view.pixel_features, dir / (stem + ".feat.ftns"));
  write_text(dir / (stem + ".json"), j.dump(2) + "\n");
}

CameraView load_view(const fs::path& json_path) {
  const json j = parse_json(json_path);
  CameraView v;
  try {
    v.fx = j.at("fx").get<double>();
    v.fy = j.at("fy").get<double>();
    v.cx = j.at("cx").get<double>();
    v.cy = j.at("cy").get<double>();
    v.width = j.at("width").get<int>();
    v.height = j.at("height").get<int>();
    v.world_to_cam = j.at("world_to_cam").get<std::array<double, 16>>();
    const fs::path base = json_path.parent_path();
    const FeatureMatrix depth = load_tensor(resolve(base, j.at("depth").get<std::string>()));
    if (depth.rows() != static_cast<std::size_t>(v.height) || depth.cols() != static_cast<std::size_t>(v.width))
      throw_data(json_path.string() + ": depth map shape does not match the image size");
    v.depth = depth.data();
    v.pixel_features = load_tensor(resolve(base, j.at("features").get<std::string>()));
  } catch (const json::exception& e) {
    throw_data(json_path.string() + ": " + e.what());
  }
  v.validate();
  return v;
}

void save_views(const std::vector<CameraView>& views, const fs::path& dir) {
  for (std::size_t k = 0; k < views.size(); ++k) save_view(views[k], dir, std::to_string(k));
}

std::vector<CameraView> load_views(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw_data("views directory not found: " + dir.string());
  std::vector<std::pair<long, fs::path>> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".json") continue;
    const std::string stem = e.path().stem().string();
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), ::isdigit)) continue;
    files.emplace_back(std::stol(stem), e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw_data("no views in " + dir.string());
  std::vector<CameraView> views;
  for (const auto& [k, p] : files) views.push_back(load_view(p));
  return views;
}

void save_bank(const TextBank& bank, const fs::path& json_path) {
  bank.validate();
  const fs::path emb = json_path.parent_path() / (json_path.stem().string() + ".ftns");
  if (!json_path.parent_path().empty()) fs::create_directories(json_path.parent_path());
  save_tensor(bank.embeddings, emb);
  json j;
  j["template"] = bank.prompt_template;
  j["classes"] = bank.class_names;
  j["embeddings"] = emb.filename().string();
  write_text(json_path, j.dump(2) + "\n");
}

TextBank load_bank(const fs::path& json_path) {
  const json j = parse_json(json_path);
  TextBank bank;
  try {
    bank.prompt_template = j.value("template", bank.prompt_template);
    bank.class_names = j.at("classes").get<std::vector<std::string>>();
    bank.embeddings = load_tensor(resolve(json_path.parent_path(), j.at("embeddings").get<std::string>()));
  } catch (const json::exception& e) {
    throw_data(json_path.string() + ": " + e.what());
  }
  bank.validate();
  return bank;
}

void save_superpoints(const Superpointing& sp, const fs::path& path) {
  std::vector<int> flat;
  flat.reserve(sp.assignment.size() + 1);
  flat.push_back(sp.num_superpoints);
  flat.insert(flat.end(), sp.assignment.begin(), sp.assignment.end());
  save_ids(flat, path);
}

Superpointing load_superpoints(const fs::path& path) {
  const std::vector<int> flat = load_ids(path);
  if (flat.empty()) throw_data(path.string() + ": empty superpoint file");
  Superpointing sp;
  sp.num_superpoints = flat[0];
  sp.assignment.assign(flat.begin() + 1, flat.end());
  sp.validate();
  return sp;
}

std::vector<const ManifestScene*> Manifest::split(const std::string& name) const {
  std::vector<const ManifestScene*> out;
  for (const auto& s : scenes)
    if (s.split == name) out.push_back(&s);
  return out;
}

std::string Manifest::to_json(const fs::path& base) const {
  json j;
  j["benchmark"] = benchmark;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["bank"] = relative_to(bank, base);
  j["scenes"] = json::array();
  for (const auto& s : scenes) {
    json e;
    e["name"] = s.name;
    e["split"] = s.split;
    e["ply"] = relative_to(s.ply, base);
    e["views"] = relative_to(s.views, base);
    if (s.superpoints) e["superpoints"] = relative_to(*s.superpoints, base);
    if (s.fused) e["fused"] = relative_to(*s.fused, base);
    if (s.mask) e["mask"] = relative_to(*s.mask, base);
    e["hash"] = s.hash;
    j["scenes"].push_back(e);
  }
  return j.dump(2) + "\n";
}

void Manifest::save(const fs::path& path) const { write_text(path, to_json(path.parent_path())); }

Manifest Manifest::load(const fs::path& path) {
  const json j = parse_json(path);
  const fs::path base = path.parent_path();
  Manifest m;
  const auto must_exist = [](const fs::path& p) {
    if (!fs::exists(p)) throw_data("manifest references a missing file: " + p.string());
    return p;
  };
  try {
    m.benchmark = j.value("benchmark", std::string{});
    m.seed = j.value("seed", std::uint64_t{0});
    m.config_hash = j.value("config_hash", std::string{});
    m.bank = must_exist(resolve(base, j.at("bank").get<std::string>()));
    for (const auto& e : j.at("scenes")) {
      ManifestScene s;
      s.name = e.at("name").get<std::string>();
      s.split = e.value("split", std::string("train"));
      s.ply = must_exist(resolve(base, e.at("ply").get<std::string>()));
      s.views = must_exist(resolve(base, e.at("views").get<std::string>()));
      for (auto [key, slot] : {std::pair{"superpoints", &s.superpoints}, {"fused", &s.fused}, {"mask", &s.mask}})
        if (e.contains(key)) *slot = must_exist(resolve(base, e.at(key).get<std::string>()));
      s.hash = e.value("hash", std::string{});
      m.scenes.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw_data(path.string() + ": " + e.what());
  }
  return m;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

std::string file_hash(const fs::path& path) { return hex64(fnv1a64(read_text(path))); }

Manifest save_benchmark(const Benchmark& bm, const fs::path& out_dir) {
  fs::create_directories(out_dir / "scenes");
  Manifest m;
  m.benchmark = benchmark_name(bm.kind);
  m.seed = bm.seed;
  m.bank = out_dir / "bank.json";
  save_bank(bm.bank, m.bank);
  const auto emit = [&](const SynthBundle& b, const std::string& split) {
    ManifestScene s;
    s.name = b.cloud.scene_id;
    s.split = split;
    s.ply = out_dir / "scenes" / (s.name + ".ply");
    s.views = out_dir / "views" / s.name;
    save_ply(b.cloud, s.ply);
    save_views(b.views, s.views);
    s.hash = file_hash(s.ply);
    m.scenes.push_back(std::move(s));
  };
  for (const auto& b : bm.train) emit(b, "train");
  for (const auto& b : bm.test) emit(b, "test");
  m.save(out_dir / "manifest.json");
  return m;
}

}  // namespace ggsd
