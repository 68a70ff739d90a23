#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ggsd/config.hpp"
#include "ggsd/distill.hpp"
#include "ggsd/error.hpp"
#include "ggsd/eval.hpp"
#include "ggsd/io.hpp"
#include "ggsd/parallel.hpp"
#include "ggsd/pipeline.hpp"
#include "ggsd/projection.hpp"
#include "ggsd/selfdistill.hpp"
#include "ggsd/superpoint.hpp"
#include "ggsd/synth.hpp"

namespace py = pybind11;
using namespace ggsd;

namespace {

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IArray = py::array_t<int, py::array::c_style | py::array::forcecast>;

DArray to_numpy(const FeatureMatrix& m) {
  DArray out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

FeatureMatrix from_numpy(const DArray& a) {
  if (a.ndim() != 2) throw_usage("expected a 2-D array");
  const auto r = static_cast<std::size_t>(a.shape(0)), c = static_cast<std::size_t>(a.shape(1));
  return FeatureMatrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

IArray ids_to_numpy(const std::vector<int>& v) {
  IArray out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::vector<int> ids_from_numpy(const IArray& a) {
  if (a.ndim() != 1) throw_usage("expected a 1-D array");
  return {a.data(), a.data() + a.shape(0)};
}

DArray vec3_to_numpy(const std::vector<Vec3>& v) {
  DArray out({v.size(), std::size_t{3}});
  double* p = out.mutable_data();
  for (const auto& x : v) p = std::copy(x.begin(), x.end(), p);
  return out;
}

std::vector<Vec3> vec3_from_numpy(const DArray& a) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw_usage("expected an (N, 3) array");
  std::vector<Vec3> out(static_cast<std::size_t>(a.shape(0)));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {a.at(i, 0), a.at(i, 1), a.at(i, 2)};
  return out;
}

std::vector<bool> mask_from(const std::optional<py::array_t<bool>>& m, std::size_t n) {
  if (!m) return std::vector<bool>(n, true);
  const auto a = m->unchecked<1>();
  std::vector<bool> out(static_cast<std::size_t>(a.shape(0)));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a(i);
  return out;
}

Superpointing partition_from(const IArray& assignment) {
  Superpointing sp;
  sp.assignment = ids_from_numpy(assignment);
  for (int a : sp.assignment) sp.num_superpoints = std::max(sp.num_superpoints, a + 1);
  return sp;
}

py::tuple loss_tuple(const LossResult& r) { return py::make_tuple(r.value, to_numpy(r.grad)); }

}  // namespace

PYBIND11_MODULE(_ggsd, m) {
  m.doc() = "Geometry-guided 3D distillation from 2D open-vocabulary features";

  // The module keeps the exception types alive, so raw handles are safe here.
  const py::exception<Error> base(m, "GgsdError");
  static PyObject* usage = py::exception<Error>(m, "UsageError", base.ptr()).ptr();
  static PyObject* data = py::exception<Error>(m, "DataError", base.ptr()).ptr();
  static PyObject* numeric = py::exception<Error>(m, "NumericError", base.ptr()).ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyObject* type = e.kind() == ErrorKind::Usage ? usage : e.kind() == ErrorKind::Data ? data : numeric;
      PyErr_SetString(type, e.what());
    }
  });

  m.def("set_num_threads", &set_num_threads, py::arg("n"));

  py::class_<Config>(m, "Config")
      .def(py::init<>())
      .def_static("preset", [](const std::string& bench) { return benchmark_preset(parse_benchmark(bench)); },
                  py::arg("benchmark"))
      .def_static("parse", &Config::parse, py::arg("text"))
      .def("set", &Config::set, py::arg("key"), py::arg("value"))
      .def("get", &Config::get_string, py::arg("key"))
      .def("get_float", &Config::get_double, py::arg("key"))
      .def("get_int", &Config::get_int, py::arg("key"))
      .def("get_bool", &Config::get_bool, py::arg("key"))
      .def("to_text", &Config::to_text)
      .def("hash", &Config::hash)
      .def_static("keys", [] {
        std::vector<std::string> keys;
        for (const auto& k : config_schema()) keys.push_back(k.key);
        return keys;
      });

  py::class_<PointCloud>(m, "PointCloud")
      .def(py::init([](const DArray& positions, std::optional<DArray> colors, std::optional<IArray> labels) {
             PointCloud c;
             c.positions = vec3_from_numpy(positions);
             c.colors = colors ? vec3_from_numpy(*colors) : std::vector<Vec3>(c.positions.size(), {0.5, 0.5, 0.5});
             if (labels) c.labels = ids_from_numpy(*labels);
             c.validate();
             return c;
           }),
           py::arg("positions"), py::arg("colors") = py::none(), py::arg("labels") = py::none())
      .def_property_readonly("positions", [](const PointCloud& c) { return vec3_to_numpy(c.positions); })
      .def_property_readonly("colors", [](const PointCloud& c) { return vec3_to_numpy(c.colors); })
      .def_property_readonly("labels",
                             [](const PointCloud& c) -> py::object {
                               if (!c.labels) return py::none();
                               return ids_to_numpy(*c.labels);
                             })
      .def_readwrite("scene_id", &PointCloud::scene_id)
      .def("__len__", &PointCloud::size);

  py::class_<TextBank>(m, "TextBank")
      .def_readonly("class_names", &TextBank::class_names)
      .def_property_readonly("embeddings", [](const TextBank& b) { return to_numpy(b.embeddings); })
      .def("__len__", &TextBank::size);

  py::class_<CameraView>(m, "CameraView")
      .def_readonly("width", &CameraView::width)
      .def_readonly("height", &CameraView::height)
      .def_property_readonly("depth",
                             [](const CameraView& v) {
                               DArray out({static_cast<std::size_t>(v.height), static_cast<std::size_t>(v.width)});
                               std::copy(v.depth.begin(), v.depth.end(), out.mutable_data());
                               return out;
                             })
      .def("center", &CameraView::center);

  py::class_<SynthBundle>(m, "Scene")
      .def_readonly("cloud", &SynthBundle::cloud)
      .def_readonly("views", &SynthBundle::views)
      .def_property_readonly("name", [](const SynthBundle& b) { return b.spec.name; });

  py::class_<Benchmark>(m, "Benchmark")
      .def_readonly("seed", &Benchmark::seed)
      .def_readonly("bank", &Benchmark::bank)
      .def_readonly("train", &Benchmark::train)
      .def_readonly("test", &Benchmark::test);

  m.def(
      "make_benchmark",
      [](const std::string& kind, std::uint64_t seed, bool noiseless) {
        return make_benchmark(parse_benchmark(kind), seed,
                              noiseless ? std::optional<TeacherNoiseModel>(TeacherNoiseModel::none()) : std::nullopt);
      },
      py::arg("kind") = "tiny", py::arg("seed") = 0, py::arg("noiseless") = false);

  m.def("load_ply", [](const std::filesystem::path& p) { return load_ply(p); }, py::arg("path"));
  m.def("save_ply", [](const PointCloud& c, const std::filesystem::path& p) { save_ply(c, p); }, py::arg("cloud"),
        py::arg("path"));
  m.def("load_tensor", [](const std::filesystem::path& p) { return to_numpy(load_tensor(p)); }, py::arg("path"));
  m.def("save_tensor", [](const DArray& a, const std::filesystem::path& p) { save_tensor(from_numpy(a), p); },
        py::arg("array"), py::arg("path"));

  m.def(
      "compute_superpoints",
      [](const PointCloud& cloud, const Config& cfg, std::uint64_t seed) {
        Rng rng(seed);
        return ids_to_numpy(compute_superpoints(cloud, cfg, rng).assignment);
      },
      py::arg("cloud"), py::arg("config"), py::arg("seed") = 0);
  m.def(
      "superpoint_purity",
      [](const IArray& assignment, const IArray& labels) {
        return superpoint_purity(partition_from(assignment), ids_from_numpy(labels));
      },
      py::arg("assignment"), py::arg("labels"));

  m.def(
      "fuse_views",
      [](const PointCloud& cloud, const std::vector<CameraView>& views, double sigma, bool occlusion) {
        const FusedFeatures f = fuse_views(cloud, views, sigma, occlusion);
        py::array_t<bool> covered(static_cast<py::ssize_t>(f.covered.size()));
        for (std::size_t i = 0; i < f.covered.size(); ++i) covered.mutable_data()[i] = f.covered[i];
        return py::make_tuple(to_numpy(f.features), covered);
      },
      py::arg("cloud"), py::arg("views"), py::arg("sigma") = 0.2, py::arg("occlusion") = true);

  m.def(
      "infer_labels",
      [](const DArray& f, const TextBank& bank) { return ids_to_numpy(infer_labels(from_numpy(f), bank)); },
      py::arg("features"), py::arg("bank"));
  m.def(
      "assign_pseudo_labels",
      [](const DArray& f, const TextBank& bank) { return ids_to_numpy(assign_pseudo_labels(from_numpy(f), bank)); },
      py::arg("features"), py::arg("bank"));
  m.def(
      "superpoint_vote",
      [](const IArray& raw, const IArray& assignment) {
        return ids_to_numpy(superpoint_vote(ids_from_numpy(raw), partition_from(assignment)).voted);
      },
      py::arg("raw"), py::arg("assignment"));
  m.def(
      "miou_macc",
      [](const IArray& pred, const IArray& gt, std::size_t num_classes) {
        const SegMetrics s = miou_macc(confusion(ids_from_numpy(pred), ids_from_numpy(gt), num_classes));
        return py::make_tuple(s.miou, s.macc);
      },
      py::arg("pred"), py::arg("gt"), py::arg("num_classes"));

  m.def(
      "loss_pixel_point",
      [](const DArray& f3d, const DArray& f2d, std::optional<py::array_t<bool>> mask) {
        return loss_tuple(loss_pixel_point(from_numpy(f3d), from_numpy(f2d), mask_from(mask, f3d.shape(0))));
      },
      py::arg("f3d"), py::arg("f2d"), py::arg("mask") = py::none());
  m.def(
      "loss_superpoint",
      [](const DArray& f3d, const DArray& f2d, const IArray& assignment, std::optional<py::array_t<bool>> mask) {
        return loss_tuple(loss_superpoint(from_numpy(f3d), from_numpy(f2d), partition_from(assignment),
                                          mask_from(mask, f3d.shape(0))));
      },
      py::arg("f3d"), py::arg("f2d"), py::arg("assignment"), py::arg("mask") = py::none());
  m.def(
      "loss_contrastive",
      [](const DArray& f3d, const IArray& targets, const TextBank& bank, double tau) {
        return loss_tuple(loss_contrastive(from_numpy(f3d), ids_from_numpy(targets), bank, tau));
      },
      py::arg("f3d"), py::arg("targets"), py::arg("bank"), py::arg("tau"));

  m.def(
      "run_ablation",
      [](const Benchmark& bm, const Config& cfg) {
        AblationResult r;
        {
          py::gil_scoped_release release;
          r = run_ablation(bm, cfg);
        }
        py::list rows;
        for (const auto& row : r.rows) rows.append(py::make_tuple(row.method, row.miou, row.macc));
        return py::make_tuple(rows, r.purity);
      },
      py::arg("benchmark"), py::arg("config"));
}
