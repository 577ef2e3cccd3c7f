#include <memory>
#include <optional>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "capvst/io.hpp"
#include "capvst/matting.hpp"
#include "capvst/metrics.hpp"
#include "capvst/pipeline.hpp"
#include "capvst/selftest.hpp"

namespace py = pybind11;
using namespace capvst;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const FloatArray& a) {
  if (a.ndim() != 3) throw ShapeError("expected a (C, H, W) array");
  Tensor t(int(a.shape(0)), int(a.shape(1)), int(a.shape(2)));
  std::copy(a.data(), a.data() + a.size(), t.data().begin());
  return t;
}

FloatArray to_array(const Tensor& t) {
  FloatArray a({t.channels(), t.height(), t.width()});
  std::copy(t.data().begin(), t.data().end(), a.mutable_data());
  return a;
}

RegionMask to_mask(const py::array_t<int, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw ShapeError("expected an (H, W) label array");
  return RegionMask(int(a.shape(0)), int(a.shape(1)),
                    std::vector<int>(a.data(), a.data() + a.size()));
}

}  // namespace

PYBIND11_MODULE(_capvst, m) {
  m.doc() = "Reversible photorealistic style transfer engine.";

  py::register_exception<Error>(m, "Error");
  py::register_exception<ShapeError>(m, "ShapeError", m.attr("Error"));
  py::register_exception<NumericError>(m, "NumericError", m.attr("Error"));
  py::register_exception<ConfigError>(m, "ConfigError", m.attr("Error"));
  py::register_exception<IoError>(m, "IoError", m.attr("Error"));

  py::class_<StylizationEngine>(m, "Engine")
      .def(py::init([](std::uint64_t seed, bool zero_residual, const std::string& weights) {
             if (!weights.empty()) return std::make_unique<StylizationEngine>(load_weights(weights));
             return std::make_unique<StylizationEngine>(init_weights(
                 default_plan(), RngSeed{seed},
                 zero_residual ? InitMode::kZeroResidual : InitMode::kRandom));
           }),
           py::arg("seed") = 0, py::arg("zero_residual") = false, py::arg("weights") = "")
      .def_property_readonly("parameter_count",
                             [](const StylizationEngine& e) { return e.weights().parameter_count(); })
      .def_property_readonly("style_stat_count", &StylizationEngine::style_stat_count)
      .def("encode", [](const StylizationEngine& e, const FloatArray& x) {
        return to_array(e.encode(to_tensor(x)));
      })
      .def("decode", [](const StylizationEngine& e, const FloatArray& z) {
        return to_array(e.decode(to_tensor(z)));
      })
      .def(
          "stylize",
          [](const StylizationEngine& e, const FloatArray& content, const FloatArray& style,
             std::optional<double> eps) {
            TransferOptions opts;
            opts.eps = eps;
            const Tensor c = to_tensor(content);
            const Tensor s = to_tensor(style);
            Tensor out;
            {
              py::gil_scoped_release release;
              out = e.stylize(c, s, opts);
            }
            return to_array(out);
          },
          py::arg("content"), py::arg("style"), py::arg("eps") = py::none())
      .def(
          "cycle_reconstruct",
          [](const StylizationEngine& e, const FloatArray& content, const FloatArray& style,
             std::optional<double> eps) {
            return to_array(e.cycle_reconstruct(to_tensor(content), to_tensor(style), eps));
          },
          py::arg("content"), py::arg("style"), py::arg("eps") = py::none());

  m.def(
      "transfer",
      [](const FloatArray& f_c, const FloatArray& f_s, std::optional<double> eps) {
        return to_array(transfer(to_tensor(f_c), to_tensor(f_s), nullptr, nullptr, eps));
      },
      py::arg("f_c"), py::arg("f_s"), py::arg("eps") = py::none());
  m.def(
      "masked_transfer",
      [](const FloatArray& f_c, const FloatArray& f_s,
         const py::array_t<int, py::array::c_style | py::array::forcecast>& mask_c,
         const py::array_t<int, py::array::c_style | py::array::forcecast>& mask_s,
         std::optional<double> eps) {
        const RegionMask mc = to_mask(mask_c);
        const RegionMask ms = to_mask(mask_s);
        return to_array(transfer(to_tensor(f_c), to_tensor(f_s), &mc, &ms, eps));
      },
      py::arg("f_c"), py::arg("f_s"), py::arg("mask_c"), py::arg("mask_s"),
      py::arg("eps") = py::none());
  m.def(
      "wct_svd",
      [](const FloatArray& f_c, const FloatArray& f_s, std::optional<double> eps) {
        return to_array(wct_svd(to_tensor(f_c), to_tensor(f_s), eps));
      },
      py::arg("f_c"), py::arg("f_s"), py::arg("eps") = py::none());
  m.def("covariance", [](const FloatArray& f) { return covariance_of(to_tensor(f)); });
  m.def(
      "cholesky",
      [](const Matrix& s, double eps) {
        const CholeskyFactor f = cholesky(s, eps);
        return py::make_tuple(f.lower, f.eps);
      },
      py::arg("s"), py::arg("eps") = 0.0);
  m.def("cholesky_backward", &cholesky_backward, py::arg("s"), py::arg("l"), py::arg("grad_l"));

  m.def(
      "matting_laplacian",
      [](const FloatArray& image, int radius, double eps) {
        const SparseLaplacian lap = build_laplacian(to_tensor(image), radius, eps);
        py::array_t<std::int64_t> rows(lap.entries.size()), cols(lap.entries.size());
        py::array_t<double> values(lap.entries.size());
        for (std::size_t i = 0; i < lap.entries.size(); ++i) {
          rows.mutable_at(i) = std::int64_t(lap.entries[i].row);
          cols.mutable_at(i) = std::int64_t(lap.entries[i].col);
          values.mutable_at(i) = lap.entries[i].value;
        }
        return py::make_tuple(rows, cols, values, lap.n);
      },
      py::arg("image"), py::arg("radius") = kDefaultWindowRadius,
      py::arg("eps") = kDefaultMattingEps,
      "Returns (rows, cols, values, n) of the sparse Laplacian.");
  m.def(
      "matting_loss",
      [](const FloatArray& content, const FloatArray& stylized) {
        return matting_loss(build_laplacian(to_tensor(content)), to_tensor(stylized));
      },
      py::arg("content"), py::arg("stylized"));

  m.def("ssim", [](const FloatArray& a, const FloatArray& b) {
    return ssim(to_tensor(a), to_tensor(b));
  });
  m.def("cycle_loss", [](const FloatArray& a, const FloatArray& b) {
    return cycle_loss(to_tensor(a), to_tensor(b));
  });
  m.def("latent_style_distance", [](const FloatArray& a, const FloatArray& b) {
    return latent_style_distance(to_tensor(a), to_tensor(b));
  });
  m.def(
      "temporal_error",
      [](const FloatArray& prev, const FloatArray& next, const FloatArray& u, const FloatArray& v,
         std::optional<py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>> valid) {
        const Tensor p = to_tensor(prev);
        FlowField flow(p.height(), p.width());
        if (u.size() != py::ssize_t(flow.u.size()) || v.size() != py::ssize_t(flow.v.size())) {
          throw ShapeError("flow must be H x W");
        }
        std::copy(u.data(), u.data() + u.size(), flow.u.begin());
        std::copy(v.data(), v.data() + v.size(), flow.v.begin());
        if (valid) {
          if (valid->size() != py::ssize_t(flow.valid.size())) throw ShapeError("valid mask must be H x W");
          std::copy(valid->data(), valid->data() + valid->size(), flow.valid.begin());
        }
        const TemporalError e = temporal_error(p, to_tensor(next), flow);
        return py::make_tuple(e.mean, e.valid_pixels, to_array(e.heatmap));
      },
      py::arg("prev"), py::arg("next"), py::arg("u"), py::arg("v"), py::arg("valid") = py::none());

  m.def("read_image", [](const std::string& path) { return to_array(read_image(path)); });
  m.def("write_image", [](const std::string& path, const FloatArray& image) {
    write_image(path, to_tensor(image));
  });

  m.def(
      "selftest_json", [](std::uint64_t seed) { return run_selftest(seed).dump(); },
      py::arg("seed") = 0);
  m.def(
      "bench_json",
      [](int side, int reps, std::uint64_t seed) {
        return run_bench(BenchOptions{side, reps, seed}).dump();
      },
      py::arg("side") = 512, py::arg("reps") = 20, py::arg("seed") = 0);
}
