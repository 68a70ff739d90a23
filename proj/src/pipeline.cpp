#include "ggsd/pipeline.hpp"

#include <cstdio>

#include "ggsd/error.hpp"
#include "ggsd/eval.hpp"
#include "ggsd/selfdistill.hpp"
#include "ggsd/superpoint.hpp"

namespace ggsd {

const std::vector<std::string> kAblationMethods = {"2D Fusion Projection", "Pixel-Point Distillation",
                                                   "Geometry Guided Distillation", "Self-Distillation", "GGSD"};

Config benchmark_preset(BenchmarkKind kind) {
  Config cfg;
  cfg.set("voxel_size", kind == BenchmarkKind::Tiny ? "0.15" : "0.08");
  cfg.set("seed_spacing", kind == BenchmarkKind::Tiny ? "0.6" : "0.4");
  cfg.set("lr", "0.01");
  cfg.set("lr_schedule", "cosine");
  cfg.set("hidden", "32");
  cfg.set("epochs_stage1", kind == BenchmarkKind::Tiny ? "20" : "16");
  cfg.set("epochs_stage2", kind == BenchmarkKind::Tiny ? "8" : "6");
  cfg.set("points_per_step", "1024");
  cfg.set("ema_momentum", "0.99");
  cfg.set("tau", "0.1");
  cfg.set("lambda_sd", "0.2");
  return cfg;
}

DescriptorParams descriptor_params(const Config& cfg) {
  DescriptorParams p;
  const long k = cfg.get_int("descriptor_k");
  if (k < 3) throw_usage("descriptor_k must be at least 3");
  p.k = static_cast<std::size_t>(k);
  p.position_scale = cfg.get_double("descriptor_scale");
  if (!(p.position_scale > 0)) throw_usage("descriptor_scale must be positive");
  p.pool_voxel = cfg.get_bool("voxelize_inputs") ? cfg.get_double("voxel_size") : 0.0;
  return p;
}

Superpointing compute_superpoints(const PointCloud& cloud, const Config& cfg, Rng& rng) {
  const std::string& method = cfg.get_string("superpoint_method");
  if (method == "vccs") return vccs_superpoints(cloud, VccsParams::from_config(cfg));
  if (method == "ransac") return outdoor_superpoints(cloud, RansacParams::from_config(cfg), rng);
  throw_usage("superpoint_method must be vccs or ransac, got '" + method + "'");
}

TrainScene prepare_scene(const PointCloud& cloud, const std::vector<CameraView>& views, const Config& cfg, Rng& rng) {
  TrainScene s;
  s.name = cloud.scene_id;
  s.sp = compute_superpoints(cloud, cfg, rng);
  FusedFeatures fused = fuse_views(cloud, views, cfg.get_double("sigma_factor"), cfg.get_bool("occlusion"));
  s.fused = std::move(fused.features);
  s.mask = std::move(fused.covered);
  s.descriptors = compute_descriptors(cloud, descriptor_params(cfg));
  if (cloud.labels) s.labels = *cloud.labels;
  return s;
}

PointEncoder init_encoder(const Config& cfg, std::size_t out_dim, Rng& rng) {
  const long h = cfg.get_int("hidden");
  if (h < 1) throw_usage("hidden must be positive");
  const auto hs = static_cast<std::size_t>(h);
  return PointEncoder::glorot({kDescriptorDim, hs, hs, out_dim}, rng);
}

namespace {

EvalSnapshot score(const std::vector<TrainScene>& scenes, const TextBank& bank,
                   const std::function<FeatureMatrix(const TrainScene&)>& features) {
  ConfusionMatrix total{bank.size(), std::vector<std::uint64_t>(bank.size() * bank.size(), 0), 0};
  for (const auto& s : scenes) {
    if (s.labels.empty()) throw_data("evaluation scene '" + s.name + "' has no labels");
    const std::vector<int> pred = infer_labels(features(s), bank);
    std::vector<int> gt = s.labels;
    for (std::size_t i = 0; i < gt.size(); ++i)
      if (!s.mask[i]) gt[i] = -1;
    total.merge(confusion(pred, gt, bank.size()));
  }
  const SegMetrics m = miou_macc(total);
  return {m.miou, m.macc};
}

}  // namespace

EvalSnapshot evaluate_student(const PointEncoder& enc, const std::vector<TrainScene>& scenes, const TextBank& bank) {
  return score(scenes, bank, [&](const TrainScene& s) { return forward(enc, s.descriptors); });
}

EvalSnapshot evaluate_projection(const std::vector<TrainScene>& scenes, const TextBank& bank) {
  return score(scenes, bank, [](const TrainScene& s) { return s.fused; });
}

std::vector<TrainScene> prepare_bundles(const std::vector<SynthBundle>& bundles, const Config& cfg, Rng rng) {
  std::vector<TrainScene> out;
  out.reserve(bundles.size());
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    Rng srng = rng.derive(i);
    out.push_back(prepare_scene(bundles[i].cloud, bundles[i].views, cfg, srng));
  }
  return out;
}

AblationResult run_ablation(const Benchmark& bm, const Config& cfg, const Logger& log) {
  const auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };
  const Rng root = Rng(bm.seed).derive("pipeline");
  const TextBank& bank = bm.bank;

  say("superpoints, fusion and descriptors");
  const std::vector<TrainScene> train = prepare_bundles(bm.train, cfg, root.derive("prepare-train"));
  const std::vector<TrainScene> test = prepare_bundles(bm.test, cfg, root.derive("prepare-test"));

  AblationResult res;
  double purity = 0;
  std::size_t n = 0;
  for (const auto* set : {&train, &test})
    for (const auto& s : *set) {
      purity += superpoint_purity(s.sp, s.labels);
      ++n;
    }
  res.purity = purity / static_cast<double>(n);

  const Evaluator evaluator = [&](const PointEncoder& enc) { return evaluate_student(enc, test, bank); };
  const auto row = [&](std::size_t k, const EvalSnapshot& e) {
    res.rows.push_back({kAblationMethods[k], e.miou, e.macc});
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-30s mIoU %6.2f  mAcc %6.2f", kAblationMethods[k].c_str(), 100 * e.miou, 100 * e.macc);
    say(buf);
  };

  row(0, evaluate_projection(test, bank));

  Rng init_rng = root.derive("init");
  const PointEncoder init = init_encoder(cfg, bank.dim(), init_rng);
  const auto stage1 = [&](bool sp_loss) {
    Config c = cfg;
    c.set("sp_loss", sp_loss ? "true" : "false");
    TrainState st{init, AdamState::for_encoder(init, c), root.derive("train-stage1")};
    res.reports.push_back(train_stage1(train, st, c, evaluator));
    return st;
  };

  say("stage 1 without the superpoint term");
  const TrainState pp = stage1(false);
  row(1, evaluate_student(pp.encoder, test, bank));

  say("stage 1");
  const TrainState gg = stage1(true);
  row(2, evaluate_student(gg.encoder, test, bank));

  const auto stage2 = [&](bool vote) {
    Config c = cfg;
    c.set("vote", vote ? "true" : "false");
    TrainState st = gg;
    st.rng = root.derive("train-stage2");
    res.reports.push_back(train_stage2(train, st, bank, c, evaluator));
    return st;
  };

  say("stage 2 without voting");
  const TrainState sd = stage2(false);
  row(3, evaluate_student(sd.encoder, test, bank));

  say("stage 2");
  TrainState full = stage2(true);
  row(4, evaluate_student(full.encoder, test, bank));
  res.final_encoder = std::move(full.encoder);
  return res;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "method,mIoU,mAcc\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, ",%.2f,%.2f\n", 100 * r.miou, 100 * r.macc);
    out += r.method + buf;
  }
  return out;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::string out = "| Method                       |  mIoU |  mAcc |\n|------------------------------|-------|-------|\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "| %-28s | %5.2f | %5.2f |\n", r.method.c_str(), 100 * r.miou, 100 * r.macc);
    out += buf;
  }
  return out;
}

}  // namespace ggsd
