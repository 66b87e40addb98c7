#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "msq/error.hpp"
#include "msq/fpga_model.hpp"
#include "msq/kernel.hpp"
#include "msq/partition.hpp"
#include "msq/quantizers.hpp"
#include "msq/serialize.hpp"

namespace py = pybind11;
using namespace msq;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Dicts cross the boundary as JSON text; nothing here is hot.
Json from_py(const py::object& o) {
  const auto text = py::module_::import("json").attr("dumps")(o).cast<std::string>();
  return parse_json(text, "argument");
}

py::object to_py(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Matrix2D to_matrix(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D array, got " + std::to_string(a.ndim()) + "-D");
  return Matrix2D(a.shape(0), a.shape(1), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Matrix2D& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Mixed fixed-point / sum-of-power-of-two quantization and shift-add GEMM emulation.";

  static py::exception<Error> base(m, "Error");
  static py::exception<Error> input(m, "InputError", base.ptr());
  static py::exception<Error> config(m, "ConfigError", base.ptr());
  static py::exception<Error> numeric(m, "NumericError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::kInput: PyErr_SetString(input.ptr(), e.what()); break;
        case ErrorKind::kConfig: PyErr_SetString(config.ptr(), e.what()); break;
        case ErrorKind::kNumeric: PyErr_SetString(numeric.ptr(), e.what()); break;
      }
    }
  });

  m.def(
      "build_levels",
      [](const py::object& scheme, double alpha) {
        const LevelSet ls = build_levels(scheme_from_json(from_py(scheme)), alpha);
        return to_py(to_json(ls));
      },
      py::arg("scheme"), py::arg("alpha") = 1.0,
      "Level set of a scheme such as {'type': 'sp2', 'm1': 2, 'm2': 1}.");

  m.def(
      "project",
      [](const Array& w, const py::object& scheme, double alpha) {
        const LevelSet ls = build_levels(scheme_from_json(from_py(scheme)), alpha);
        Array out(std::vector<py::ssize_t>(w.shape(), w.shape() + w.ndim()));
        const double* src = w.data();
        double* dst = out.mutable_data();
        for (py::ssize_t i = 0; i < w.size(); ++i) dst[i] = project(src[i], ls);
        return out;
      },
      py::arg("w"), py::arg("scheme"), py::arg("alpha") = 1.0);

  m.def(
      "partition",
      [](const Array& w, double pr_sp2, const std::string& name) {
        return to_py(to_json(partition_layer(to_matrix(w), pr_sp2), name));
      },
      py::arg("w"), py::arg("pr_sp2") = 0.5, py::arg("name") = "layer");

  m.def(
      "quantize",
      [](const Array& w, double pr_sp2, std::optional<double> alpha, const py::object& schemes,
         const std::string& name) {
        const Matrix2D wm = to_matrix(w);
        const MixedScheme ms = schemes.is_none() ? MixedScheme{} : mixed_scheme_from_json(from_py(schemes));
        const RowPartition part = partition_layer(wm, pr_sp2);
        auto proj = project_matrix(wm, part, ms, alpha ? *alpha : choose_alpha(wm, part, ms));
        proj.layer.name = name;
        return py::make_tuple(to_py(to_json(proj.layer)), to_array(proj.values));
      },
      py::arg("w"), py::arg("pr_sp2") = 0.5, py::arg("alpha") = py::none(), py::arg("schemes") = py::none(),
      py::arg("name") = "layer", "Returns (layer dict, dequantized weights).");

  m.def(
      "emulate",
      [](const py::object& layer_obj, const Array& acts, std::optional<int> act_bits, std::optional<double> act_clip,
         std::size_t bat, std::size_t blk_in, std::size_t blk_out_fixed, std::size_t blk_out_sp2) {
        QuantizedLayer layer = quantized_layer_from_json(from_py(layer_obj));
        const Matrix2D a = to_matrix(acts);
        if (act_bits) layer.act_bits = *act_bits;
        const double max_act = a.max_abs();
        const ActQuant aq{layer.act_bits, act_clip ? *act_clip : (max_act > 0.0 ? max_act : 1.0)};
        const ActCodes codes = quantize_activations(a, aq);
        const GemmResult res = hetero_gemm(codes.codes, layer, GemmTile{bat, blk_in, blk_out_fixed, blk_out_sp2});
        return py::make_tuple(to_array(dequantize_output(res.out, layer, codes.scale)), to_py(to_json(res.stats)));
      },
      py::arg("layer"), py::arg("acts"), py::arg("act_bits") = py::none(), py::arg("act_clip") = py::none(),
      py::arg("bat") = 1, py::arg("blk_in") = 16, py::arg("blk_out_fixed") = 16, py::arg("blk_out_sp2") = 16,
      "Shift-add GEMM of quantized activations against a layer. Returns (outputs, stats).");

  m.def(
      "peak_throughput",
      [](std::size_t bat, std::size_t blk_in, std::size_t blk_out_fixed, std::size_t blk_out_sp2, double freq_mhz) {
        return peak_throughput(DesignPoint{"", bat, blk_in, blk_out_fixed, blk_out_sp2, freq_mhz});
      },
      py::arg("bat") = 1, py::arg("blk_in") = 16, py::arg("blk_out_fixed") = 16, py::arg("blk_out_sp2") = 0,
      py::arg("freq_mhz") = 100.0, "Peak GOPS.");

  m.def(
      "characterize",
      [](const std::string& device, const std::string& devices, std::optional<double> lut_cap,
         std::optional<double> overhead, std::size_t step) {
        const auto db = load_device_db(devices);
        const DeviceProfile& prof = find_device(db, device);
        if (prof.calibration.size() < 2)
          throw ConfigError("device " + prof.device.name + " has no LUT calibration points");
        const Calibration cal = calibrate_lut_model(prof.calibration);
        const RatioSelection sel = select_ratio(prof.device, prof.base, cal.model, lut_cap.value_or(prof.lut_cap),
                                                overhead.value_or(prof.overhead_lut), step);
        py::dict out;
        out["device"] = prof.device.name;
        out["blk_out_fixed"] = sel.design.blk_out_fixed;
        out["blk_out_sp2"] = sel.design.blk_out_sp2;
        out["pr_sp2"] = sel.pr_sp2;
        out["peak_gops"] = peak_throughput(sel.design);
        out["predicted_lut"] = sel.predicted_lut;
        out["predicted_dsp"] = sel.predicted_dsp;
        out["lut_per_sp2_lane"] = cal.model.lut_per_sp2_lane;
        out["base_lut"] = cal.model.base_lut;
        return out;
      },
      py::arg("device"), py::arg("devices"), py::arg("lut_cap") = py::none(), py::arg("overhead") = py::none(),
      py::arg("step") = 8);
}
