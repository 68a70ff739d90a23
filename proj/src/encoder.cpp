#include "ggsd/encoder.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>

#include "ggsd/error.hpp"
#include "ggsd/geometry.hpp"
#include "ggsd/io.hpp"
#include "ggsd/kdtree.hpp"
#include "ggsd/linalg.hpp"
#include "ggsd/parallel.hpp"
#include "ggsd/superpoint.hpp"

namespace ggsd {

namespace {
// Row block used for forward/backward sharding. Gradient partial sums are
// formed per block and combined in block order, so results do not depend on
// the worker count.
constexpr std::size_t kBlockRows = 256;
}  // namespace

FeatureMatrix compute_descriptors(const PointCloud& cloud, const DescriptorParams& p) {
  const std::size_t m = cloud.size();
  if (p.k < 3) throw_usage("compute_descriptors: k must be >= 3");
  if (m < p.k) throw_usage("compute_descriptors: fewer points than k");
  if (!(p.position_scale > 0)) throw_usage("compute_descriptors: position scale must be positive");

  Vec3 lo = cloud.positions.front(), hi = lo;
  for (const auto& x : cloud.positions)
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], x[k]);
      hi[k] = std::max(hi[k], x[k]);
    }
  const Vec3 center{(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, (lo[2] + hi[2]) / 2};
  const auto shapes = local_shapes(cloud.positions, p.k);

  FeatureMatrix d(m, kDescriptorDim);
  for (std::size_t i = 0; i < m; ++i) {
    auto row = d.row(i);
    for (int k = 0; k < 3; ++k) {
      row[k] = (cloud.positions[i][k] - center[k]) / p.position_scale;
      row[3 + k] = cloud.colors[i][k];
      row[6 + k] = shapes[i].normal[k];
    }
    const auto& ev = shapes[i].eigenvalues;
    if (!shapes[i].degenerate && ev[0] > 0) {
      row[9] = (ev[0] - ev[1]) / ev[0];
      row[10] = (ev[1] - ev[2]) / ev[0];
      row[11] = ev[2] / ev[0];
    }
    // Bounded density proxy from the mean neighbor spacing (in units of position_scale).
    row[12] = 1.0 / (1.0 + 10.0 * shapes[i].mean_neighbor_distance / p.position_scale);
  }

  if (p.pool_voxel > 0) {
    const VoxelMap vm = voxelize(cloud, p.pool_voxel);
    FeatureMatrix pooled(vm.size(), kDescriptorDim);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < kDescriptorDim; ++k) pooled(vm.point_voxel[i], k) += d(i, k);
    for (std::size_t v = 0; v < vm.size(); ++v)
      for (std::size_t k = 0; k < kDescriptorDim; ++k) pooled(v, k) /= static_cast<double>(vm.counts[v]);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < kDescriptorDim; ++k) d(i, k) = pooled(vm.point_voxel[i], k);
  }
  return d;
}

PointEncoder::PointEncoder(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw_usage("PointEncoder: need at least input and output sizes");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] == 0 || sizes_[l + 1] == 0) throw_usage("PointEncoder: zero-width layer");
    offsets_.push_back(total);
    total += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);
}

PointEncoder PointEncoder::glorot(std::vector<std::size_t> layer_sizes, Rng& rng) {
  PointEncoder enc(std::move(layer_sizes));
  for (std::size_t l = 0; l < enc.num_layers(); ++l) {
    const std::size_t in = enc.sizes_[l], out = enc.sizes_[l + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    double* w = enc.params_.data() + enc.weight_offset(l);
    for (std::size_t k = 0; k < in * out; ++k) w[k] = rng.uniform(-a, a);
  }
  return enc;
}

namespace {

void check_params(const PointEncoder& enc) {
  for (double v : enc.params())
    if (!std::isfinite(v)) throw_numeric("point encoder has a non-finite parameter");
}

/// Forward over rows [begin, end) of every cached matrix.
void forward_rows(const PointEncoder& enc, ForwardCache& cache, std::size_t begin, std::size_t end) {
  const std::size_t layers = enc.num_layers();
  const auto& sizes = enc.layer_sizes();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = sizes[l], out = sizes[l + 1];
    const double* w = enc.params().data() + enc.weight_offset(l);
    const double* b = enc.params().data() + enc.bias_offset(l);
    const FeatureMatrix& x = cache.inputs[l];
    FeatureMatrix& y = l + 1 < layers ? cache.inputs[l + 1] : cache.pre_norm;
    for (std::size_t r = begin; r < end; ++r) {
      double* yr = y.row(r).data();
      const double* xr = x.row(r).data();
      for (std::size_t o = 0; o < out; ++o) yr[o] = b[o];
      for (std::size_t i = 0; i < in; ++i) {
        const double a = xr[i];
        const double* wi = w + i * out;
        for (std::size_t o = 0; o < out; ++o) yr[o] += a * wi[o];
      }
      if (l + 1 < layers)
        for (std::size_t o = 0; o < out; ++o) yr[o] = std::tanh(yr[o]);
    }
  }
  const std::size_t c = enc.output_dim();
  for (std::size_t r = begin; r < end; ++r) {
    const auto v = cache.pre_norm.row(r);
    auto y = cache.output.row(r);
    const double n = norm(v);
    for (std::size_t k = 0; k < c; ++k) y[k] = n > kNormEps ? v[k] / n : v[k];
  }
}

ForwardCache allocate_cache(const PointEncoder& enc, const FeatureMatrix& desc) {
  if (enc.num_layers() == 0) throw_usage("forward: empty encoder");
  if (desc.cols() != enc.input_dim())
    throw_data("forward: descriptor width " + std::to_string(desc.cols()) + " != encoder input " +
               std::to_string(enc.input_dim()));
  check_params(enc);
  ForwardCache cache;
  cache.inputs.push_back(desc);
  for (std::size_t l = 1; l < enc.num_layers(); ++l) cache.inputs.emplace_back(desc.rows(), enc.layer_sizes()[l]);
  cache.pre_norm = FeatureMatrix(desc.rows(), enc.output_dim());
  cache.output = FeatureMatrix(desc.rows(), enc.output_dim());
  return cache;
}

}  // namespace

ForwardCache forward_cached(const PointEncoder& enc, const FeatureMatrix& desc) {
  ForwardCache cache = allocate_cache(enc, desc);
  parallel_for(desc.rows(), [&](std::size_t b, std::size_t e) { forward_rows(enc, cache, b, e); }, kBlockRows);
  return cache;
}

FeatureMatrix forward(const PointEncoder& enc, const FeatureMatrix& desc) { return forward_cached(enc, desc).output; }

GradBuffer backward(const PointEncoder& enc, const ForwardCache& cache, const FeatureMatrix& d_output) {
  const std::size_t rows = cache.output.rows();
  const std::size_t c = enc.output_dim();
  if (d_output.rows() != rows || d_output.cols() != c) throw_data("backward: upstream gradient shape mismatch");
  if (!d_output.all_finite()) throw_numeric("backward: non-finite upstream gradient");

  const std::size_t layers = enc.num_layers();
  const auto& sizes = enc.layer_sizes();
  const std::size_t nparams = enc.params().size();
  const std::size_t nblocks = (rows + kBlockRows - 1) / kBlockRows;
  std::vector<std::vector<double>> partial(nblocks);

  // Transposed weights (out x in) for the input-gradient products.
  std::vector<std::vector<double>> wt(layers);
  for (std::size_t l = 1; l < layers; ++l) {
    const std::size_t in = sizes[l], out = sizes[l + 1];
    const double* w = enc.params().data() + enc.weight_offset(l);
    wt[l].resize(in * out);
    for (std::size_t i = 0; i < in; ++i)
      for (std::size_t o = 0; o < out; ++o) wt[l][o * in + i] = w[i * out + o];
  }

  std::size_t max_width = 0;
  for (auto s : sizes) max_width = std::max(max_width, s);

  parallel_for(nblocks, [&](std::size_t bb, std::size_t be) {
    std::vector<double> dz(max_width), dprev(max_width);
    for (std::size_t blk = bb; blk < be; ++blk) {
      std::vector<double>& g = partial[blk];
      g.assign(nparams, 0.0);
      const std::size_t r0 = blk * kBlockRows, r1 = std::min(rows, r0 + kBlockRows);
      for (std::size_t r = r0; r < r1; ++r) {
        // Through y = v / |v|: dv = (g - y (y.g)) / |v|; zero rows pass no gradient.
        const auto v = cache.pre_norm.row(r);
        const auto y = cache.output.row(r);
        const auto up = d_output.row(r);
        const double n = norm(v);
        if (n <= kNormEps) continue;
        const double yg = dot(y, up);
        for (std::size_t k = 0; k < c; ++k) dz[k] = (up[k] - y[k] * yg) / n;

        for (std::size_t l = layers; l-- > 0;) {
          const std::size_t in = sizes[l], out = sizes[l + 1];
          if (l + 1 < layers) {
            const double* a = cache.inputs[l + 1].row(r).data();
            for (std::size_t o = 0; o < out; ++o) dz[o] *= 1.0 - a[o] * a[o];
          }
          const double* x = cache.inputs[l].row(r).data();
          double* gw = g.data() + enc.weight_offset(l);
          double* gb = g.data() + enc.bias_offset(l);
          for (std::size_t i = 0; i < in; ++i) {
            const double xi = x[i];
            double* gwi = gw + i * out;
            for (std::size_t o = 0; o < out; ++o) gwi[o] += xi * dz[o];
          }
          for (std::size_t o = 0; o < out; ++o) gb[o] += dz[o];
          if (l == 0) break;
          std::fill(dprev.begin(), dprev.begin() + static_cast<std::ptrdiff_t>(in), 0.0);
          for (std::size_t o = 0; o < out; ++o) {
            const double d = dz[o];
            const double* wo = wt[l].data() + o * in;
            for (std::size_t i = 0; i < in; ++i) dprev[i] += d * wo[i];
          }
          std::copy(dprev.begin(), dprev.begin() + static_cast<std::ptrdiff_t>(in), dz.begin());
        }
      }
    }
  }, 1);

  GradBuffer out;
  out.params.assign(nparams, 0.0);
  for (const auto& g : partial)
    for (std::size_t k = 0; k < nparams; ++k) out.params[k] += g[k];
  out.d_output = d_output;
  return out;
}

AdamState AdamState::for_encoder(const PointEncoder& enc, double lr) {
  AdamState st;
  st.m.assign(enc.params().size(), 0.0);
  st.v.assign(enc.params().size(), 0.0);
  st.lr = lr;
  return st;
}

AdamState AdamState::for_encoder(const PointEncoder& enc, const Config& cfg) {
  AdamState st = for_encoder(enc, cfg.get_double("lr"));
  st.beta1 = cfg.get_double("adam_beta1");
  st.beta2 = cfg.get_double("adam_beta2");
  st.eps = cfg.get_double("adam_eps");
  return st;
}

void adam_step(PointEncoder& enc, const GradBuffer& grads, AdamState& st) {
  auto& p = enc.params();
  if (grads.params.size() != p.size() || st.m.size() != p.size() || st.v.size() != p.size())
    throw_data("adam_step: shape mismatch");
  ++st.step;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double g = grads.params[k];
    st.m[k] = st.beta1 * st.m[k] + (1.0 - st.beta1) * g;
    st.v[k] = st.beta2 * st.v[k] + (1.0 - st.beta2) * g * g;
    const double mhat = st.m[k] / c1;
    const double vhat = st.v[k] / c2;
    p[k] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
  }
}

void ema_update(PointEncoder& teacher, const PointEncoder& student, double momentum) {
  if (!teacher.same_architecture(student)) throw_data("ema_update: architecture mismatch");
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw_usage("ema_update: momentum must lie in [0, 1]");
  auto& t = teacher.params();
  const auto& s = student.params();
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = momentum * t[k] + (1.0 - momentum) * s[k];
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

void append_blob(std::vector<std::uint8_t>& out, const double* data, std::vector<std::uint64_t> dims) {
  Tensor t;
  t.dims = std::move(dims);
  t.data.resize(t.element_count());
  for (std::size_t k = 0; k < t.data.size(); ++k) t.data[k] = static_cast<float>(data[k]);
  const auto bytes = encode_ftns(t);
  out.insert(out.end(), bytes.begin(), bytes.end());
}

std::size_t blob_size(std::size_t rank, std::uint64_t count) { return 16 + 8 * rank + 4 * count; }

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const PointEncoder& enc, const AdamState& adam,
                     std::uint64_t config_hash, const std::string& note) {
  std::vector<std::uint8_t> bytes;
  nlohmann::json blobs = nlohmann::json::array();
  auto add = [&](const std::string& name, const double* data, std::vector<std::uint64_t> dims) {
    const std::size_t offset = bytes.size();
    append_blob(bytes, data, dims);
    blobs.push_back({{"name", name}, {"offset", offset}, {"dims", dims}});
  };
  for (int part = 0; part < 3; ++part) {
    const double* base = part == 0 ? enc.params().data() : part == 1 ? adam.m.data() : adam.v.data();
    const std::string prefix = part == 0 ? "" : part == 1 ? "adam_m." : "adam_v.";
    if (part > 0 && adam.m.size() != enc.params().size()) break;
    for (std::size_t l = 0; l < enc.num_layers(); ++l) {
      const std::uint64_t in = enc.layer_sizes()[l], out = enc.layer_sizes()[l + 1];
      add(prefix + "layer" + std::to_string(l) + ".weight", base + enc.weight_offset(l), {in, out});
      add(prefix + "layer" + std::to_string(l) + ".bias", base + enc.bias_offset(l), {out});
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));

  nlohmann::json manifest = {
      {"format", "ggsd-checkpoint"},
      {"version", 1},
      {"layer_sizes", enc.layer_sizes()},
      {"step", adam.step},
      {"lr", adam.lr},
      {"config_hash", config_hash},
      {"blobs", blobs},
  };
  if (!note.empty()) manifest["note"] = note;
  write_text(path.string() + ".json", manifest.dump(2) + "\n");
}

void load_checkpoint(const std::filesystem::path& path, PointEncoder& enc, AdamState& adam) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text(path.string() + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw_data("checkpoint manifest " + path.string() + ".json: " + e.what());
  }
  const std::string blob = read_text(path);
  const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(blob.data()), blob.size());

  enc = PointEncoder(manifest.at("layer_sizes").get<std::vector<std::size_t>>());
  adam = AdamState::for_encoder(enc, manifest.value("lr", 1e-4));
  adam.step = manifest.value("step", 0L);
  for (const auto& b : manifest.at("blobs")) {
    const std::string name = b.at("name");
    const std::size_t offset = b.at("offset");
    const auto dims = b.at("dims").get<std::vector<std::uint64_t>>();
    std::uint64_t count = 1;
    for (auto d : dims) count *= d;
    const std::size_t size = blob_size(dims.size(), count);
    if (offset + size > bytes.size()) throw_data("checkpoint " + path.string() + ": blob '" + name + "' truncated");
    const Tensor t = decode_ftns(bytes.subspan(offset, size));

    std::string local = name;
    double* base = enc.params().data();
    if (local.rfind("adam_m.", 0) == 0) {
      base = adam.m.data();
      local = local.substr(7);
    } else if (local.rfind("adam_v.", 0) == 0) {
      base = adam.v.data();
      local = local.substr(7);
    }
    const auto dot_pos = local.find('.');
    const std::size_t layer = std::stoul(local.substr(5, dot_pos - 5));
    if (layer >= enc.num_layers()) throw_data("checkpoint: blob '" + name + "' names a missing layer");
    const bool is_bias = local.substr(dot_pos + 1) == "bias";
    const std::size_t expect = is_bias ? enc.layer_sizes()[layer + 1]
                                       : enc.layer_sizes()[layer] * enc.layer_sizes()[layer + 1];
    if (t.data.size() != expect) throw_data("checkpoint: blob '" + name + "' has the wrong size");
    double* dst = base + (is_bias ? enc.bias_offset(layer) : enc.weight_offset(layer));
    for (std::size_t k = 0; k < expect; ++k) dst[k] = t.data[k];
  }
  check_params(enc);
}

}  // namespace ggsd
