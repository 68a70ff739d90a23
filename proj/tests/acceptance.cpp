// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//
//   ggsd_acceptance                 run everything
//   ggsd_acceptance --only 1,2,7    run a subset
//   ggsd_acceptance --write-golden  rerun the standard ablation and pin its values

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "ggsd/distill.hpp"
#include "ggsd/encoder.hpp"
#include "ggsd/eval.hpp"
#include "ggsd/io.hpp"
#include "ggsd/parallel.hpp"
#include "ggsd/pipeline.hpp"
#include "ggsd/projection.hpp"
#include "ggsd/selfdistill.hpp"
#include "ggsd/superpoint.hpp"
#include "ggsd/synth.hpp"
#include "recovery.hpp"

using namespace ggsd;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------------------
// Random instances

FeatureMatrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  FeatureMatrix m(r, c);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

FeatureMatrix unit_rows(FeatureMatrix m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double n = 0;
    for (double v : m.row(i)) n += v * v;
    n = std::sqrt(n);
    if (n > 0)
      for (double& v : m.row(i)) v /= n;
  }
  return m;
}

std::vector<bool> random_mask(std::size_t n, double p, Rng& rng) {
  std::vector<bool> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = rng.uniform() < p;
  return m;
}

/// Every id in [0, n) is used at least once when m >= n.
Superpointing random_partition(std::size_t m, int n, Rng& rng) {
  Superpointing sp;
  sp.num_superpoints = n;
  for (std::size_t i = 0; i < m; ++i)
    sp.assignment.push_back(i < static_cast<std::size_t>(n) ? static_cast<int>(i) : static_cast<int>(rng.below(n)));
  return sp;
}

TextBank random_bank(std::size_t l, std::size_t c, Rng& rng) {
  TextBank b;
  b.embeddings = unit_rows(random_matrix(l, c, rng));
  for (std::size_t i = 0; i < l; ++i) b.class_names.push_back("c" + std::to_string(i));
  return b;
}

// ---------------------------------------------------------------------------
// 1. Gradients through the encoder

struct FdStats {
  int configs = 0;
  int probes = 0;
  int bad = 0;
  double worst = 0.0;
};

/// Compares backward() of `loss(forward(enc))` with central differences on random parameters.
template <typename Loss>
void fd_check(PointEncoder enc, const FeatureMatrix& desc, Loss&& loss, Rng& rng, FdStats& st) {
  const ForwardCache cache = forward_cached(enc, desc);
  const GradBuffer g = backward(enc, cache, loss(cache.output).grad);
  const auto value = [&] { return loss(forward(enc, desc)).value; };
  ++st.configs;
  for (int p = 0; p < 24; ++p) {
    const std::size_t k = rng.below(enc.params().size());
    const double h = 1e-5, saved = enc.params()[k];
    enc.params()[k] = saved + h;
    const double up = value();
    enc.params()[k] = saved - h;
    const double down = value();
    enc.params()[k] = saved;
    const double fd = (up - down) / (2 * h), an = g.params[k];
    const double scale = std::max(std::abs(fd), std::abs(an));
    ++st.probes;
    if (scale < 1e-8) continue;  // both vanish; relative error is meaningless
    const double rel = std::abs(fd - an) / scale;
    st.worst = std::max(st.worst, rel);
    st.bad += rel > 1e-4;
  }
}

Verdict criterion_gradients() {
  const auto t0 = Clock::now();
  Rng rng(101);
  std::map<std::string, FdStats> stats;
  for (int trial = 0; trial < 24; ++trial) {
    const std::size_t m = 16 + rng.below(40), c = 3 + rng.below(6), h = 4 + rng.below(8);
    const PointEncoder enc = PointEncoder::glorot({kDescriptorDim, h, h, c}, rng);
    const FeatureMatrix desc = random_matrix(m, kDescriptorDim, rng);
    const FeatureMatrix f2 = unit_rows(random_matrix(m, c, rng));
    const Superpointing sp = random_partition(m, 2 + static_cast<int>(rng.below(6)), rng);
    const auto mask = random_mask(m, 0.75, rng);

    fd_check(enc, desc, [&](const FeatureMatrix& x) { return loss_pixel_point(x, f2, mask); }, rng, stats["L_p"]);
    fd_check(enc, desc, [&](const FeatureMatrix& x) { return loss_superpoint(x, f2, sp, mask); }, rng, stats["L_sp"]);
    fd_check(
        enc, desc,
        [&](const FeatureMatrix& x) {
          const Stage1Loss s = loss_stage1(x, f2, sp, mask);
          return LossResult{s.l_d, s.grad};
        },
        rng, stats["L_d"]);

    const TextBank bank = random_bank(2 + rng.below(8), c, rng);
    std::vector<int> targets(m);
    for (int& t : targets) t = rng.uniform() < 0.15 ? -1 : static_cast<int>(rng.below(bank.size()));
    const double tau = std::vector<double>{0.05, 0.1, 0.3, 1.0}[rng.below(4)];
    fd_check(enc, desc, [&](const FeatureMatrix& x) { return loss_contrastive(x, targets, bank, tau); }, rng,
             stats["L_sd"]);
  }
  const double secs = seconds_since(t0);
  Verdict v{secs < 60.0, ""};
  std::ostringstream d;
  for (const auto& [name, s] : stats) {
    v.pass = v.pass && s.configs >= 20 && s.bad == 0;
    d << name << " " << s.configs << " configs worst rel " << fmt("%.1e", s.worst) << "; ";
  }
  d << fmt("%.1f s", secs);
  v.detail = d.str();
  return v;
}

// ---------------------------------------------------------------------------
// 2. Brute-force oracles

struct OracleTally {
  int instances = 0;
  int mismatches = 0;
  double worst = 0.0;
  void check(bool ok) {
    ++instances;
    mismatches += !ok;
  }
};

bool oracle_superpoint_mean(Rng& rng, double& worst) {
  const std::size_t m = 1 + rng.below(2000), c = 1 + rng.below(8);
  const int n = 1 + static_cast<int>(rng.below(std::min<std::size_t>(m, 200)));
  const FeatureMatrix f = random_matrix(m, c, rng);
  const Superpointing sp = random_partition(m, n, rng);
  const auto mask = random_mask(m, 0.7, rng);
  const SuperpointMeans got = superpoint_mean(f, sp, mask);

  FeatureMatrix sum(static_cast<std::size_t>(n), c);
  std::vector<std::size_t> cnt(static_cast<std::size_t>(n), 0);
  for (std::size_t i = 0; i < m; ++i) {
    if (!mask[i]) continue;
    const auto s = static_cast<std::size_t>(sp.assignment[i]);
    ++cnt[s];
    for (std::size_t k = 0; k < c; ++k) sum(s, k) += f(i, k);
  }
  if (got.counts != cnt || got.means.rows() != static_cast<std::size_t>(n) || got.means.cols() != c) return false;
  double err = 0;
  for (std::size_t s = 0; s < static_cast<std::size_t>(n); ++s)
    for (std::size_t k = 0; k < c; ++k) {
      const double want = cnt[s] ? sum(s, k) / static_cast<double>(cnt[s]) : 0.0;
      err = std::max(err, std::abs(got.means(s, k) - want));
    }
  worst = std::max(worst, err);
  return err <= 1e-10;
}

bool oracle_euclidean_cluster(Rng& rng) {
  const std::size_t m = 1 + rng.below(2000);
  PointCloud cloud;
  const double extent = rng.uniform(1.0, 6.0);
  for (std::size_t i = 0; i < m; ++i) {
    cloud.positions.push_back({rng.uniform(0, extent), rng.uniform(0, extent), rng.uniform(0, 0.3 * extent)});
    cloud.colors.push_back({0.5, 0.5, 0.5});
  }
  const auto subset = random_mask(m, rng.uniform(0.3, 1.0), rng);
  const double dist = rng.uniform(0.05, 0.3);
  const std::vector<int> got = euclidean_cluster(cloud, subset, dist);

  std::vector<std::size_t> parent(m);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < m; ++i) {
    if (!subset[i]) continue;
    for (std::size_t j = i + 1; j < m; ++j) {
      if (!subset[j]) continue;
      double d2 = 0;
      for (int k = 0; k < 3; ++k) d2 += std::pow(cloud.positions[i][k] - cloud.positions[j][k], 2);
      if (std::sqrt(d2) < dist) {
        const std::size_t a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  // Roots are the lowest index of each component; ids count components in root order.
  std::map<std::size_t, int> id;
  std::vector<int> want(m, -1);
  for (std::size_t i = 0; i < m; ++i) {
    if (!subset[i]) continue;
    const std::size_t r = find(i);
    auto it = id.find(r);
    if (it == id.end()) it = id.emplace(r, static_cast<int>(id.size())).first;
    want[i] = it->second;
  }
  return got == want;
}

bool oracle_confusion_miou(Rng& rng, double& worst) {
  const std::size_t m = 1 + rng.below(2000), l = 2 + rng.below(12);
  std::vector<int> pred(m), gt(m);
  for (std::size_t i = 0; i < m; ++i) {
    // Skewed draws leave some classes absent from one side.
    pred[i] = static_cast<int>(rng.below(l) * rng.below(l) / l);
    gt[i] = rng.uniform() < 0.1 ? -1 : static_cast<int>(rng.below(l));
  }
  const ConfusionMatrix cm = confusion(pred, gt, l);
  std::vector<std::uint64_t> want(l * l, 0);
  std::uint64_t ignored = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (gt[i] < 0) {
      ++ignored;
      continue;
    }
    ++want[static_cast<std::size_t>(gt[i]) * l + static_cast<std::size_t>(pred[i])];
  }
  if (cm.num_classes != l || cm.counts != want || cm.ignored != ignored) return false;

  double iou_sum = 0, acc_sum = 0;
  int iou_n = 0, acc_n = 0;
  for (std::size_t c = 0; c < l; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (gt[i] < 0) continue;
      const bool g = static_cast<std::size_t>(gt[i]) == c, p = static_cast<std::size_t>(pred[i]) == c;
      tp += g && p;
      fp += !g && p;
      fn += g && !p;
    }
    if (tp + fp + fn > 0) {
      iou_sum += tp / (tp + fp + fn);
      ++iou_n;
    }
    if (tp + fn > 0) {
      acc_sum += tp / (tp + fn);
      ++acc_n;
    }
  }
  const SegMetrics sm = miou_macc(cm);
  const double e = std::max(std::abs(sm.miou - (iou_n ? iou_sum / iou_n : 0.0)),
                            std::abs(sm.macc - (acc_n ? acc_sum / acc_n : 0.0)));
  worst = std::max(worst, e);
  return e <= 1e-10;
}

bool oracle_pseudo_labels(Rng& rng) {
  const std::size_t m = 1 + rng.below(2000), c = 2 + rng.below(6), l = 2 + rng.below(10);
  // Small integers make exact ties common.
  TextBank bank;
  bank.embeddings = FeatureMatrix(l, c);
  for (double& v : bank.embeddings.data()) v = static_cast<double>(rng.below(5)) - 2.0;
  for (std::size_t i = 0; i < l; ++i) bank.class_names.push_back("c" + std::to_string(i));
  FeatureMatrix f(m, c);
  for (std::size_t i = 0; i < m; ++i)
    if (rng.uniform() > 0.05)
      for (double& v : f.row(i)) v = static_cast<double>(rng.below(5)) - 2.0;
  const std::vector<int> got = assign_pseudo_labels(f, bank);

  std::vector<int> want(m, -1);
  for (std::size_t i = 0; i < m; ++i) {
    bool zero = true;
    for (double v : f.row(i)) zero = zero && v == 0.0;
    if (zero) continue;
    double best = -1e300;
    for (std::size_t j = 0; j < l; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < c; ++k) s += f(i, k) * bank.embeddings(j, k);
      if (s > best) {
        best = s;
        want[i] = static_cast<int>(j);
      }
    }
  }
  return got == want;
}

bool oracle_vote(Rng& rng) {
  const std::size_t m = 1 + rng.below(2000);
  const int n = 1 + static_cast<int>(rng.below(std::min<std::size_t>(m, 150)));
  const int l = 2 + static_cast<int>(rng.below(6));
  const Superpointing sp = random_partition(m, n, rng);
  std::vector<int> raw(m);
  for (int& r : raw) r = rng.uniform() < 0.1 ? -1 : static_cast<int>(rng.below(l));
  const PseudoLabels got = superpoint_vote(raw, sp);

  std::vector<std::vector<int>> hist(static_cast<std::size_t>(n), std::vector<int>(l, 0));
  for (std::size_t i = 0; i < m; ++i)
    if (raw[i] >= 0) ++hist[static_cast<std::size_t>(sp.assignment[i])][static_cast<std::size_t>(raw[i])];
  std::vector<int> winner(static_cast<std::size_t>(n), -1);
  for (std::size_t s = 0; s < hist.size(); ++s) {
    int best = 0;
    for (int c = 0; c < l; ++c)
      if (hist[s][c] > best) {
        best = hist[s][c];
        winner[s] = c;
      }
  }
  std::vector<int> want(m);
  for (std::size_t i = 0; i < m; ++i) want[i] = winner[static_cast<std::size_t>(sp.assignment[i])];
  return got.raw == raw && got.voted == want;
}

Verdict criterion_oracles() {
  Rng rng(202);
  std::map<std::string, OracleTally> t;
  for (int i = 0; i < 100; ++i) {
    t["superpoint_mean"].check(oracle_superpoint_mean(rng, t["superpoint_mean"].worst));
    t["euclidean_cluster"].check(oracle_euclidean_cluster(rng));
    t["confusion/miou_macc"].check(oracle_confusion_miou(rng, t["confusion/miou_macc"].worst));
    t["assign_pseudo_labels"].check(oracle_pseudo_labels(rng));
    t["superpoint_vote"].check(oracle_vote(rng));
  }
  Verdict v{true, ""};
  std::ostringstream d;
  for (const auto& [name, s] : t) {
    v.pass = v.pass && s.instances == 100 && s.mismatches == 0;
    d << name << " " << s.instances - s.mismatches << "/" << s.instances << "; ";
  }
  v.detail = d.str();
  return v;
}

// ---------------------------------------------------------------------------
// 3, 4, 6. Standard benchmark ablation

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<AblationRow> rows;
  double purity = 0.0;
};

struct AblationRuns {
  std::vector<SeedRun> seeds;
  double seconds = 0.0;
};

AblationRuns run_standard_ablation() {
  AblationRuns out;
  const auto t0 = Clock::now();
  const Config cfg = benchmark_preset(BenchmarkKind::Standard);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Benchmark bm = make_benchmark(BenchmarkKind::Standard, seed);
    const AblationResult r = run_ablation(bm, cfg);
    out.seeds.push_back({seed, r.rows, r.purity});
    std::fprintf(stderr, "  seed %llu:", static_cast<unsigned long long>(seed));
    for (const auto& row : r.rows) std::fprintf(stderr, " %s %.2f", row.method.c_str(), 100 * row.miou);
    std::fprintf(stderr, " purity %.4f\n", r.purity);
  }
  out.seconds = seconds_since(t0);
  return out;
}

double row_miou(const SeedRun& s, std::size_t k) { return 100.0 * s.rows.at(k).miou; }

const fs::path kGolden = fs::path(GGSD_GOLDEN_DIR) / "ablation_standard.csv";

std::string golden_text(const AblationRuns& runs) {
  std::ostringstream o;
  o << "seed,method,miou,macc,purity\n";
  char buf[256];
  for (const auto& s : runs.seeds)
    for (const auto& r : s.rows) {
      std::snprintf(buf, sizeof buf, "%llu,%s,%.6f,%.6f,%.6f\n", static_cast<unsigned long long>(s.seed),
                    r.method.c_str(), r.miou, r.macc, s.purity);
      o << buf;
    }
  return o.str();
}

/// Largest deviation (in mIoU points) from the pinned values, or -1 if the file is missing or malformed.
double golden_drift(const AblationRuns& runs) {
  if (!fs::exists(kGolden)) return -1;
  std::istringstream in(read_text(kGolden));
  std::string line;
  std::getline(in, line);
  std::map<std::pair<std::uint64_t, std::string>, double> pinned;
  while (std::getline(in, line)) {
    std::istringstream l(line);
    std::string seed, method, miou;
    std::getline(l, seed, ',');
    std::getline(l, method, ',');
    std::getline(l, miou, ',');
    pinned[{std::stoull(seed), method}] = 100.0 * std::stod(miou);
  }
  double drift = 0;
  std::size_t matched = 0;
  for (const auto& s : runs.seeds)
    for (const auto& r : s.rows) {
      const auto it = pinned.find({s.seed, r.method});
      if (it == pinned.end()) return -1;
      drift = std::max(drift, std::abs(it->second - 100.0 * r.miou));
      ++matched;
    }
  return matched == pinned.size() ? drift : -1;
}

std::size_t method_index(const AblationRuns& runs, const std::string& name) {
  const auto& rows = runs.seeds.front().rows;
  for (std::size_t k = 0; k < rows.size(); ++k)
    if (rows[k].method == name) return k;
  std::cerr << "no ablation row named " << name << "\n";
  std::exit(1);
}

Verdict criterion_ablation(const AblationRuns& runs) {
  const std::size_t proj = method_index(runs, "2D Fusion Projection"), pp = method_index(runs, "Pixel-Point Distillation"),
                    gg = method_index(runs, "Geometry Guided Distillation"), full = method_index(runs, "GGSD");
  double mean[4] = {0, 0, 0, 0};
  for (const auto& s : runs.seeds) {
    mean[0] += row_miou(s, proj) / runs.seeds.size();
    mean[1] += row_miou(s, pp) / runs.seeds.size();
    mean[2] += row_miou(s, gg) / runs.seeds.size();
    mean[3] += row_miou(s, full) / runs.seeds.size();
  }
  const bool order = mean[0] < mean[1] && mean[1] < mean[2] && mean[2] < mean[3];
  const bool margins = mean[3] - mean[0] >= 2.0 && mean[3] - mean[1] >= 1.0;
  const double drift = golden_drift(runs);
  const bool pinned = drift >= 0 && drift <= 0.01;
  const bool fast = runs.seconds < 1800.0;
  std::ostringstream d;
  d << "mean mIoU Proj " << fmt("%.2f", mean[0]) << " < PP " << fmt("%.2f", mean[1]) << " < GG "
    << fmt("%.2f", mean[2]) << " < GGSD " << fmt("%.2f", mean[3]) << "; GGSD-Proj " << fmt("%.2f", mean[3] - mean[0])
    << ", GGSD-PP " << fmt("%.2f", mean[3] - mean[1]) << "; golden "
    << (drift < 0 ? std::string("missing") : "drift " + fmt("%.4f", drift)) << "; " << fmt("%.0f s", runs.seconds);
  return {order && margins && pinned && fast, d.str()};
}

Verdict criterion_student_beats_teacher(const AblationRuns& runs) {
  const std::size_t gg = method_index(runs, "Geometry Guided Distillation");
  int wins = 0;
  std::ostringstream d;
  for (const auto& s : runs.seeds) {
    const double delta = row_miou(s, gg) - row_miou(s, method_index(runs, "2D Fusion Projection"));
    wins += delta > 0;
    d << "seed " << s.seed << " " << fmt("%+.2f", delta) << "; ";
  }
  d << "stage-1 student beats projection on " << wins << "/" << runs.seeds.size() << " seeds";
  return {wins == static_cast<int>(runs.seeds.size()) && runs.seeds.size() == 5, d.str()};
}

Verdict criterion_purity(const AblationRuns& runs) {
  double mean = 0, lo = 1;
  for (const auto& s : runs.seeds) {
    mean += s.purity / runs.seeds.size();
    lo = std::min(lo, s.purity);
  }
  return {mean >= 0.95, "mean purity " + fmt("%.4f", mean) + ", lowest seed " + fmt("%.4f", lo)};
}

// ---------------------------------------------------------------------------
// 5. Voting on label-pure regions

Verdict criterion_voting() {
  int wins = 0, trials = 0;
  double gain = 0;
  std::size_t smallest = SIZE_MAX;
  const int classes = 6;
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng = Rng(505).derive("vote").derive(static_cast<std::uint64_t>(trial));
    SynthSceneSpec spec;
    spec.name = "vote";
    spec.room = {6.0, 4.0, 2.0};
    spec.points_per_m2 = 120.0;
    spec.seed = 1000 + static_cast<std::uint64_t>(trial);
    for (int k = 0; k < classes; ++k) {
      SynthObject o;
      o.shape = ShapeKind::PlanePatch;
      o.center = {0.5 + k, 1.0 + rng.uniform(0, 2), 0.2 + 0.3 * k};
      o.size = {0.9, 1.5 + rng.uniform(0, 0.5), 0.0};
      o.class_id = k;
      o.color = {0.15 * k, 1.0 - 0.15 * k, 0.5};
      spec.objects.push_back(o);
    }
    const PointCloud cloud = gen_scene(spec);
    VccsParams p;
    p.voxel_size = 0.1;
    p.seed_spacing = 0.6;
    const Superpointing sp = vccs_superpoints(cloud, p);
    const auto& gt = *cloud.labels;

    // Keep superpoints with at least 25 members that carry a single label.
    const auto members = sp.members();
    Superpointing kept;
    std::vector<int> truth;
    for (const auto& mem : members) {
      if (mem.size() < 25) continue;
      bool pure = true;
      for (std::size_t i : mem) pure = pure && gt[i] == gt[mem.front()];
      if (!pure) continue;
      for (std::size_t i : mem) {
        kept.assignment.push_back(kept.num_superpoints);
        truth.push_back(gt[i]);
      }
      smallest = std::min(smallest, mem.size());
      ++kept.num_superpoints;
    }
    if (kept.num_superpoints == 0) continue;
    std::vector<int> raw(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i)
      raw[i] = rng.uniform() < 0.3 ? (truth[i] + 1 + static_cast<int>(rng.below(classes - 1))) % classes : truth[i];
    const auto [ra, va] = vote_gain(raw, superpoint_vote(raw, kept).voted, truth);
    ++trials;
    wins += va > ra;
    gain += (va - ra) / 100.0;
  }
  return {trials == 100 && wins >= 99, "voted > raw in " + std::to_string(wins) + "/" + std::to_string(trials) +
                                           " trials, mean gain " + fmt("%.3f", gain) + ", smallest superpoint " +
                                           std::to_string(smallest)};
}

// ---------------------------------------------------------------------------
// 7. EMA contraction

double param_distance(const PointEncoder& a, const PointEncoder& b) {
  double s = 0;
  for (std::size_t k = 0; k < a.params().size(); ++k) s += std::pow(a.params()[k] - b.params()[k], 2);
  return std::sqrt(s);
}

Verdict criterion_ema() {
  Rng rng(707);
  double worst = 0;
  int steps = 0;
  for (double m : {0.5, 0.9, 0.99, 0.999}) {
    const PointEncoder student = PointEncoder::glorot({kDescriptorDim, 32, 32, 16}, rng);
    PointEncoder teacher = PointEncoder::glorot({kDescriptorDim, 32, 32, 16}, rng);
    const std::vector<double> frozen = student.params();
    double d = param_distance(teacher, student);
    for (int t = 0; t < 100; ++t) {
      ema_update(teacher, student, m);
      const double next = param_distance(teacher, student);
      worst = std::max(worst, std::abs(next - m * d));
      d = next;
      ++steps;
    }
    if (student.params() != frozen) return {false, "student changed"};
  }
  return {worst <= 1e-9, std::to_string(steps) + " steps, worst |d_t+1 - m d_t| " + fmt("%.1e", worst)};
}

// ---------------------------------------------------------------------------
// 8. Determinism and round trips

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GGSD_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Verdict criterion_determinism() {
  const fs::path root = fs::temp_directory_path() / ("ggsd_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::ostringstream d;
  bool ok = true;

  const fs::path a = root / "a", b = root / "b";
  const std::string args = "--seed 42 --threads 1 pipeline --benchmark tiny --out ";
  const int ca = run_cli(args + "'" + a.string() + "'"), cb = run_cli(args + "'" + b.string() + "'");
  std::size_t csvs = 0, same = 0;
  if (ca != 0 || cb != 0) {
    ok = false;
    d << "pipeline exit codes " << ca << "/" << cb << "; ";
  } else {
    for (const auto& e : fs::directory_iterator(a)) {
      if (e.path().extension() != ".csv") continue;
      ++csvs;
      same += fs::exists(b / e.path().filename()) && slurp(e.path()) == slurp(b / e.path().filename());
    }
    ok = ok && csvs >= 5 && same == csvs;
    d << same << "/" << csvs << " CSVs identical; ";
  }

  // FTNS: float32 payloads survive file round trips bit for bit.
  Rng rng(808);
  int ftns_ok = 0;
  for (int t = 0; t < 20; ++t) {
    Tensor tensor;
    tensor.dims = {1 + rng.below(50), 1 + rng.below(20)};
    for (std::uint64_t i = 0; i < tensor.element_count(); ++i) tensor.data.push_back(static_cast<float>(rng.normal()));
    const fs::path p = root / ("t" + std::to_string(t) + ".ftns");
    write_ftns(tensor, p);
    const Tensor back = read_ftns(p);
    FeatureMatrix m = to_matrix(tensor);
    save_tensor(m, p);
    ftns_ok += back.dims == tensor.dims &&
               std::memcmp(back.data.data(), tensor.data.data(), tensor.data.size() * sizeof(float)) == 0 &&
               load_tensor(p) == m && encode_ftns(decode_ftns(encode_ftns(tensor))) == encode_ftns(tensor);
  }
  ok = ok && ftns_ok == 20;
  d << "FTNS " << ftns_ok << "/20 exact; ";

  // PLY: synthetic scenes are already float/8-bit quantized.
  const Benchmark bm = make_benchmark(BenchmarkKind::Tiny, 42);
  int ply_ok = 0, ply_n = 0;
  for (const auto* split : {&bm.train, &bm.test})
    for (const auto& s : *split) {
      const fs::path p = root / (s.cloud.scene_id + ".ply");
      save_ply(s.cloud, p);
      const PointCloud back = load_ply(p);
      ++ply_n;
      ply_ok += back.positions == s.cloud.positions && back.colors == s.cloud.colors && back.labels == s.cloud.labels &&
                format_ply(back) == slurp(p);
    }
  ok = ok && ply_ok == ply_n && ply_n > 0;
  d << "PLY " << ply_ok << "/" << ply_n << " exact";
  fs::remove_all(root);
  return {ok, d.str()};
}

// ---------------------------------------------------------------------------
// 9. Occlusion against ray casting, zero-noise recovery

bool ray_blocked(const OccluderScene& sc, const Vec3& p) {
  const Vec3 eye = sc.view.center();
  const double zr = sc.rect_min[2];
  if (p[2] <= zr + 1e-9) return false;
  const double s = (zr - eye[2]) / (p[2] - eye[2]);
  const double x = eye[0] + s * (p[0] - eye[0]), y = eye[1] + s * (p[1] - eye[1]);
  return x >= sc.rect_min[0] && x <= sc.rect_max[0] && y >= sc.rect_min[1] && y <= sc.rect_max[1];
}

Verdict criterion_occlusion() {
  Rng rng(909);
  TextBank bank;
  bank.class_names = {"back", "occluder"};
  bank.embeddings = FeatureMatrix::from_rows({{1, 0}, {0, 1}});

  int scenes_ok = 0;
  std::size_t points = 0, excluded = 0, covered = 0, correct = 0, largest = 0;
  for (int t = 0; t < 10; ++t) {
    const OccluderScene sc = gen_occluder_scene(rng, 5000);
    largest = std::max(largest, sc.cloud.size());
    const FusedFeatures f = fuse_views(sc.cloud, std::vector<CameraView>{sc.view}, 0.2, true);
    bool same = sc.cloud.size() <= 5000;
    for (std::size_t i = 0; i < sc.cloud.size(); ++i) {
      const bool blocked = ray_blocked(sc, sc.cloud.positions[i]);
      excluded += blocked;
      same = same && f.covered[i] == !blocked;
    }
    scenes_ok += same;
    points += sc.cloud.size();
    const auto st = testing::zero_noise_recovery(sc.cloud, {sc.view}, bank, 0.2);
    covered += st.covered;
    correct += st.correct;
  }

  // Rooms: report how often the fused label is the ground truth, and require
  // every miss to be explained by a different-class surface owning the pixel.
  const Benchmark bm = make_benchmark(BenchmarkKind::Standard, 0, TeacherNoiseModel::none());
  testing::RecoveryStats room;
  for (const auto& s : bm.train) {
    const auto st = testing::zero_noise_recovery(s.cloud, s.views, bm.bank, 0.2);
    room.covered += st.covered;
    room.correct += st.correct;
    room.explained += st.explained;
  }

  std::ostringstream d;
  d << scenes_ok << "/10 occluder scenes match ray casting (" << points << " points, max " << largest << ", "
    << excluded << " occluded); zero-noise recovery " << correct << "/" << covered << " covered; standard rooms "
    << fmt("%.2f%%", 100.0 * room.correct / std::max<std::size_t>(1, room.covered)) << " recovered, "
    << room.explained << "/" << room.covered << " explained by pixel owners";
  const bool ok = scenes_ok == 10 && excluded > 0 && covered > 0 && correct == covered && room.covered > 0 &&
                  room.explained == room.covered;
  return {ok, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  bool write_golden = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--write-golden") {
      write_golden = true;
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream s(argv[++i]);
      for (std::string tok; std::getline(s, tok, ',');) only.insert(std::stoi(tok));
    } else {
      std::cerr << "usage: ggsd_acceptance [--only 1,2,...] [--write-golden]\n";
      return 2;
    }
  }
  set_num_threads(1);
  const auto wanted = [&](int k) { return only.empty() || only.count(k) > 0; };

  if (write_golden) {
    const AblationRuns runs = run_standard_ablation();
    fs::create_directories(kGolden.parent_path());
    write_text(kGolden, golden_text(runs));
    std::cout << "wrote " << kGolden << "\n";
    return 0;
  }

  int failed = 0;
  const auto report = [&](int k, const char* name, const Verdict& v) {
    std::cout << (v.pass ? "PASS" : "FAIL") << "  [" << k << "] " << name << ": " << v.detail << std::endl;
    failed += !v.pass;
  };

  if (wanted(1)) report(1, "gradient correctness", criterion_gradients());
  if (wanted(2)) report(2, "oracle equivalence", criterion_oracles());
  AblationRuns runs;
  if (wanted(3) || wanted(4) || wanted(6)) runs = run_standard_ablation();
  if (wanted(3)) report(3, "ablation trend", criterion_ablation(runs));
  if (wanted(4)) report(4, "student beats teacher", criterion_student_beats_teacher(runs));
  if (wanted(5)) report(5, "voting denoises", criterion_voting());
  if (wanted(6)) report(6, "superpoint purity", criterion_purity(runs));
  if (wanted(7)) report(7, "EMA contraction", criterion_ema());
  if (wanted(8)) report(8, "determinism", criterion_determinism());
  if (wanted(9)) report(9, "projection and occlusion", criterion_occlusion());
  return failed == 0 ? 0 : 1;
}
