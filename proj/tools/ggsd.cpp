// ggsd command-line driver.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>

#include "ggsd/bundle.hpp"
#include "ggsd/error.hpp"
#include "ggsd/eval.hpp"
#include "ggsd/io.hpp"
#include "ggsd/parallel.hpp"
#include "ggsd/pipeline.hpp"
#include "ggsd/selfdistill.hpp"
#include "ggsd/superpoint.hpp"

namespace fs = std::filesystem;
using namespace ggsd;

namespace {

struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool quiet = false;
};

/// Flags named after config keys, one per schema entry.
class ConfigFlags {
 public:
  /// `aliases` maps a config key to extra flag names for this subcommand.
  void attach(CLI::App* sub, const std::map<std::string, std::string>& aliases = {}) {
    for (const auto& k : config_schema()) {
      std::string flag = "--" + k.key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      if (const auto it = aliases.find(k.key); it != aliases.end()) flag += "," + it->second;
      auto* opt = sub->add_option(flag, values_[sub][k.key], k.help)->default_str(k.default_value)->group("Config");
      options_[sub].emplace_back(k.key, opt);
    }
    std::string& preset = presets_[sub];
    preset = "auto";
    sub->add_option("--preset", preset, "Default set: auto, none, tiny or standard")
        ->default_str("auto")
        ->group("Config");
  }

  /// Preset, then the --config file, then explicit flags.
  Config build(CLI::App* sub, const Globals& g, std::optional<BenchmarkKind> implied) const {
    const std::string& preset = presets_.at(sub);
    Config cfg;
    if (preset == "tiny" || preset == "standard")
      cfg = benchmark_preset(parse_benchmark(preset));
    else if (preset == "auto" && implied)
      cfg = benchmark_preset(*implied);
    else if (preset != "auto" && preset != "none")
      throw_usage("--preset must be auto, none, tiny or standard");
    if (!g.config_path.empty()) cfg.apply_file(g.config_path);
    for (const auto& [key, opt] : options_.at(sub))
      if (opt->count() > 0) cfg.set(key, values_.at(sub).at(key));
    return cfg;
  }

 private:
  std::map<CLI::App*, std::map<std::string, std::string>> values_;
  std::map<CLI::App*, std::vector<std::pair<std::string, CLI::Option*>>> options_;
  std::map<CLI::App*, std::string> presets_;
};

void say(const Globals& g, const std::string& msg) {
  if (!g.quiet) std::cerr << msg << "\n";
}

std::optional<BenchmarkKind> kind_of(const std::string& name) {
  if (name == "tiny" || name == "standard") return parse_benchmark(name);
  return std::nullopt;
}

TrainScene load_train_scene(const ManifestScene& s, const Config& cfg, Rng rng) {
  const PointCloud cloud = load_ply(s.ply);
  TrainScene ts;
  ts.name = s.name;
  ts.sp = s.superpoints ? load_superpoints(*s.superpoints) : compute_superpoints(cloud, cfg, rng);
  if (ts.sp.assignment.size() != cloud.size()) throw_data("superpoints of '" + s.name + "' do not match the cloud");
  if (s.fused) {
    ts.fused = load_tensor(*s.fused);
    if (!s.mask) throw_data("manifest scene '" + s.name + "' lists fused features without a mask");
    const auto m = load_ids(*s.mask);
    ts.mask.assign(m.begin(), m.end());
  } else {
    FusedFeatures f = fuse_views(cloud, load_views(s.views), cfg.get_double("sigma_factor"), cfg.get_bool("occlusion"));
    ts.fused = std::move(f.features);
    ts.mask = std::move(f.covered);
  }
  if (ts.fused.rows() != cloud.size() || ts.mask.size() != cloud.size())
    throw_data("fused features of '" + s.name + "' do not match the cloud");
  ts.descriptors = compute_descriptors(cloud, descriptor_params(cfg));
  if (cloud.labels) ts.labels = *cloud.labels;
  return ts;
}

Config checkpoint_config(const fs::path& ckpt, const Config& fallback) {
  const fs::path meta = ckpt.string() + ".json";
  if (!fs::exists(meta)) throw_data("checkpoint manifest not found: " + meta.string());
  const auto j = nlohmann::json::parse(read_text(meta), nullptr, false);
  if (j.is_discarded()) throw_data("checkpoint manifest is not valid JSON: " + meta.string());
  if (!j.contains("note")) return fallback;
  return Config::parse(j.at("note").get<std::string>());
}

nlohmann::json metrics_json(const SegMetrics& m, const std::vector<std::string>& names) {
  nlohmann::json j;
  j["miou"] = m.miou;
  j["macc"] = m.macc;
  j["classes"] = nlohmann::json::array();
  for (std::size_t c = 0; c < names.size(); ++c) {
    nlohmann::json e;
    e["name"] = names[c];
    e["iou"] = m.iou_valid[c] ? nlohmann::json(m.iou[c]) : nlohmann::json(nullptr);
    e["acc"] = m.acc_valid[c] ? nlohmann::json(m.acc[c]) : nlohmann::json(nullptr);
    j["classes"].push_back(e);
  }
  return j;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage: return 2;
    case ErrorKind::Data: return 3;
    case ErrorKind::Numeric: return 4;
  }
  return 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometry-guided self-distillation for open-vocabulary 3D segmentation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "Config file (key = value lines)");
  app.add_option("--seed", g.seed, "Seed for every random stream")->default_val(0);
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores; 1 = bit-reproducible)")->default_val(0);
  app.add_flag("--quiet", g.quiet, "Suppress progress output");
  ConfigFlags flags;

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic benchmark");
  std::string synth_bench = "tiny", synth_out;
  bool zero_noise = false;
  synth->add_option("--benchmark", synth_bench, "tiny or standard")->default_val("tiny");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_flag("--zero-noise", zero_noise, "Render a perfect teacher");
  flags.attach(synth);

  // superpoints
  auto* sps = app.add_subcommand("superpoints", "Partition a scene into superpoints");
  std::string sp_scene, sp_out, sp_ply;
  sps->add_option("--scene,--input", sp_scene, "Scene PLY")->required();
  sps->add_option("--out", sp_out, "Superpoint file (.ftns)")->required();
  sps->add_option("--ply", sp_ply, "Also write a PLY colored by superpoint");
  flags.attach(sps, {{"superpoint_method", "--method"}, {"voxel_size", "--voxel"}});

  // fuse
  auto* fuse = app.add_subcommand("fuse", "Fuse per-view teacher features onto the points");
  std::string fu_scene, fu_views, fu_out, fu_mask;
  fuse->add_option("--scene", fu_scene, "Scene PLY")->required();
  fuse->add_option("--views", fu_views, "View bundle directory")->required();
  fuse->add_option("--out", fu_out, "Fused features (.ftns)")->required();
  fuse->add_option("--mask", fu_mask, "Coverage mask (.ftns); defaults to <out>.mask.ftns");
  flags.attach(fuse, {{"sigma_factor", "--sigma"}});

  // train
  auto* train = app.add_subcommand("train", "Train the point encoder (stage 1 or 2)");
  int tr_stage = 1;
  std::string tr_manifest, tr_init, tr_ckpt, tr_report;
  train->add_option("--stage", tr_stage, "1 = distillation, 2 = self-distillation")->check(CLI::IsMember({1, 2}))->default_val(1);
  train->add_option("--scenes,--manifest", tr_manifest, "Benchmark manifest.json")->required();
  train->add_option("--init", tr_init, "Checkpoint to start from (required for stage 2)");
  train->add_option("--checkpoint", tr_ckpt, "Output checkpoint")->required();
  train->add_option("--report", tr_report, "Per-epoch CSV report");
  flags.attach(train);

  // eval
  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  std::string ev_pred, ev_gt, ev_bank, ev_part, ev_multi, ev_out;
  eval->add_option("--pred", ev_pred, "Predicted ids (rank 1) or features (M x C)")->required();
  eval->add_option("--gt", ev_gt, "Labeled scene PLY")->required();
  eval->add_option("--bank", ev_bank, "Text bank JSON")->required();
  eval->add_option("--partition", ev_part, "Class groups JSON (e.g. Head/Common/Tail)");
  eval->add_option("--multiname", ev_multi, "Fine-name to class map JSON; --bank is then the extended bank");
  eval->add_option("--out", ev_out, "Metrics JSON")->required();

  // infer
  auto* infer = app.add_subcommand("infer", "Label a point cloud with a trained encoder");
  std::string in_ckpt, in_scene, in_bank, in_out, in_ply, in_feat;
  infer->add_option("--checkpoint", in_ckpt, "Encoder checkpoint")->required();
  infer->add_option("--scene", in_scene, "Scene PLY")->required();
  infer->add_option("--bank", in_bank, "Text bank JSON")->required();
  infer->add_option("--out", in_out, "Predicted ids (.ftns)")->required();
  infer->add_option("--ply", in_ply, "PLY colored by predicted label");
  infer->add_option("--features", in_feat, "Also write the point features (.ftns)");
  flags.attach(infer);

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Synthesize a benchmark and run the component ablation");
  std::string pl_bench = "tiny", pl_out = "ggsd_pipeline";
  pipe->add_option("--benchmark", pl_bench, "tiny or standard")->default_val("tiny");
  pipe->add_option("--out", pl_out, "Output directory")->default_val("ggsd_pipeline");
  flags.attach(pipe);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    set_num_threads(g.threads);
    const Rng root(g.seed);

    if (*synth) {
      const BenchmarkKind kind = parse_benchmark(synth_bench);
      const Config cfg = flags.build(synth, g, kind);
      const auto t0 = std::chrono::steady_clock::now();
      const Benchmark bm = make_benchmark(kind, g.seed, zero_noise ? std::optional(TeacherNoiseModel::none()) : std::nullopt);
      Manifest m = save_benchmark(bm, synth_out);
      m.config_hash = hex64(cfg.hash());
      m.save(fs::path(synth_out) / "manifest.json");
      write_text(fs::path(synth_out) / "config.txt", cfg.to_text());
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      say(g, "wrote " + std::to_string(m.scenes.size()) + " scenes to " + synth_out + " in " + std::to_string(secs) + " s");
    } else if (*sps) {
      const Config cfg = flags.build(sps, g, std::nullopt);
      const PointCloud cloud = load_ply(sp_scene);
      Rng rng = root.derive("superpoints");
      const Superpointing sp = compute_superpoints(cloud, cfg, rng);
      save_superpoints(sp, sp_out);
      const fs::path meta = fs::path(sp_out).replace_extension(".meta");
      write_text(meta, "# superpoints " + std::to_string(sp.num_superpoints) + " points " + std::to_string(cloud.size()) +
                           " seed " + std::to_string(g.seed) + "\n" + cfg.to_text());
      if (!sp_ply.empty()) {
        PointCloud colored = cloud;
        colored.labels = sp.assignment;
        save_ply(colored, sp_ply, ColorBy::LabelPalette);
      }
      std::string msg = std::to_string(sp.num_superpoints) + " superpoints";
      if (cloud.labels) msg += ", purity " + std::to_string(superpoint_purity(sp, *cloud.labels));
      say(g, msg);
    } else if (*fuse) {
      const Config cfg = flags.build(fuse, g, std::nullopt);
      const PointCloud cloud = load_ply(fu_scene);
      const FusedFeatures f = fuse_views(cloud, load_views(fu_views), cfg.get_double("sigma_factor"), cfg.get_bool("occlusion"));
      save_tensor(f.features, fu_out);
      std::vector<int> mask(f.covered.begin(), f.covered.end());
      save_ids(mask, fu_mask.empty() ? fs::path(fu_out + ".mask.ftns") : fs::path(fu_mask));
      say(g, std::to_string(f.covered_count()) + " of " + std::to_string(cloud.size()) + " points covered");
    } else if (*train) {
      const Manifest m = Manifest::load(tr_manifest);
      const Config cfg = flags.build(train, g, kind_of(m.benchmark));
      const TextBank bank = load_bank(m.bank);
      std::vector<TrainScene> scenes, test;
      const Rng prep = root.derive("prepare");
      for (const auto* s : m.split("train")) scenes.push_back(load_train_scene(*s, cfg, prep.derive(s->name)));
      if (cfg.get_int("eval_every") > 0)
        for (const auto* s : m.split("test")) test.push_back(load_train_scene(*s, cfg, prep.derive(s->name)));
      if (scenes.empty()) throw_data("manifest has no training scenes");
      Evaluator evaluator;
      if (!test.empty()) evaluator = [&](const PointEncoder& e) { return evaluate_student(e, test, bank); };

      TrainState st;
      st.rng = root.derive(tr_stage == 1 ? "train-stage1" : "train-stage2");
      if (!tr_init.empty()) {
        load_checkpoint(tr_init, st.encoder, st.adam);
        if (st.encoder.output_dim() != bank.dim()) throw_data("--init encoder output does not match the bank dimension");
        const AdamState fresh = AdamState::for_encoder(st.encoder, cfg);
        st.adam.lr = fresh.lr;
        st.adam.beta1 = fresh.beta1;
        st.adam.beta2 = fresh.beta2;
        st.adam.eps = fresh.eps;
      } else if (tr_stage == 2) {
        throw_usage("stage 2 needs --init with a stage-1 checkpoint");
      } else {
        Rng init = root.derive("init");
        st.encoder = init_encoder(cfg, bank.dim(), init);
        st.adam = AdamState::for_encoder(st.encoder, cfg);
      }
      const TrainReport rep = tr_stage == 1 ? train_stage1(scenes, st, cfg, evaluator)
                                            : train_stage2(scenes, st, bank, cfg, evaluator);
      save_checkpoint(tr_ckpt, st.encoder, st.adam, cfg.hash(), cfg.to_text());
      if (!tr_report.empty()) write_text(tr_report, rep.to_csv());
      if (!g.quiet) std::cerr << rep.to_csv();
    } else if (*eval) {
      const PointCloud gt_cloud = load_ply(ev_gt);
      if (!gt_cloud.labels) throw_data("ground-truth PLY has no labels");
      const TextBank bank = load_bank(ev_bank);
      const FeatureMatrix pred_m = load_tensor(ev_pred);
      if (pred_m.rows() != gt_cloud.size()) throw_data("prediction count does not match the ground truth");
      std::vector<std::string> names = bank.class_names;
      std::vector<int> pred;
      if (!ev_multi.empty()) {
        const MultiNameMap map = MultiNameMap::load(ev_multi, bank);
        if (pred_m.cols() != bank.dim()) throw_data("--multiname needs predicted features, not ids");
        pred = infer_multiname(pred_m, bank, map);
        names = map.benchmark_classes;
      } else if (pred_m.cols() == 1) {
        for (double v : pred_m.data()) pred.push_back(static_cast<int>(v));
      } else {
        pred = infer_labels(pred_m, bank);
      }
      const ConfusionMatrix cm = confusion(pred, *gt_cloud.labels, names.size());
      const SegMetrics sm = miou_macc(cm);
      nlohmann::json j = metrics_json(sm, names);
      j["points"] = cm.total();
      j["ignored"] = cm.ignored;
      if (!ev_part.empty()) {
        TextBank names_bank;
        names_bank.class_names = names;
        const ClassPartition part = ClassPartition::load(ev_part, names_bank);
        for (const auto& gm : partition_report(cm, part)) j["groups"][gm.name] = {{"miou", gm.miou}, {"macc", gm.macc}};
      }
      write_text(ev_out, j.dump(2) + "\n");
      char buf[96];
      std::snprintf(buf, sizeof buf, "mIoU %.2f  mAcc %.2f", 100 * sm.miou, 100 * sm.macc);
      say(g, buf);
    } else if (*infer) {
      const Config flag_cfg = flags.build(infer, g, std::nullopt);
      const Config cfg = checkpoint_config(in_ckpt, flag_cfg);
      PointEncoder enc;
      AdamState adam;
      load_checkpoint(in_ckpt, enc, adam);
      const TextBank bank = load_bank(in_bank);
      if (enc.output_dim() != bank.dim())
        throw_data("checkpoint outputs " + std::to_string(enc.output_dim()) + "-d features but the bank is " +
                   std::to_string(bank.dim()) + "-d");
      const PointCloud cloud = load_ply(in_scene);
      const auto t0 = std::chrono::steady_clock::now();
      const FeatureMatrix feats = forward(enc, compute_descriptors(cloud, descriptor_params(cfg)));
      const std::vector<int> labels = infer_labels(feats, bank);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      save_ids(labels, in_out);
      if (!in_feat.empty()) save_tensor(feats, in_feat);
      if (!in_ply.empty()) {
        PointCloud colored = cloud;
        colored.labels = labels;
        save_ply(colored, in_ply, ColorBy::LabelPalette);
      }
      char buf[96];
      std::snprintf(buf, sizeof buf, "inferred %zu points in %.3f s", cloud.size(), secs);
      say(g, buf);
    } else if (*pipe) {
      const BenchmarkKind kind = parse_benchmark(pl_bench);
      const Config cfg = flags.build(pipe, g, kind);
      const auto t0 = std::chrono::steady_clock::now();
      say(g, "synthesizing the " + pl_bench + " benchmark");
      const Benchmark bm = [&] {
        try {
          return make_benchmark(kind, g.seed);
        } catch (const Error& e) {
          throw Error(e.kind(), "synth: " + std::string(e.what()));
        }
      }();
      const AblationResult res = run_ablation(bm, cfg, [&](const std::string& m) { say(g, m); });
      fs::create_directories(pl_out);
      write_text(fs::path(pl_out) / "ablation.csv", ablation_csv(res.rows));
      write_text(fs::path(pl_out) / "ablation.md", ablation_table(res.rows));
      write_text(fs::path(pl_out) / "config.txt", cfg.to_text());
      const char* names[] = {"stage1_pixel_point", "stage1_geometry_guided", "stage2_no_vote", "stage2_ggsd"};
      for (std::size_t k = 0; k < res.reports.size() && k < 4; ++k)
        write_text(fs::path(pl_out) / (std::string(names[k]) + ".csv"), res.reports[k].to_csv());
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (!g.quiet) {
        std::cout << ablation_table(res.rows);
        std::printf("superpoint purity %.4f, %.1f s\n", res.purity, secs);
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
