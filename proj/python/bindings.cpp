#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "layerspectra/invariants.hpp"
#include "layerspectra/pipeline.hpp"

namespace py = pybind11;
using namespace layerspectra;

namespace {

RunConfig config_from(const std::string& text, const std::string& base_dir) {
  return parse_config(Json::parse(text), base_dir);
}

LayerSpec layer_from(const RunConfig& config) {
  const ResolvedRun rr = resolve(config);
  return make_layer(build_meridian(rr.profile, rr.s_max, rr.h), rr.a);
}

}  // namespace

PYBIND11_MODULE(_layerspectra, m) {
  m.doc() = "Quantum layers over rotational hypersurfaces (JSON in, JSON out)";

  // Translators run newest first, so the base class goes in before its subclasses.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<AdmissibilityError>(m, "AdmissibilityError", PyExc_RuntimeError);

  m.def("version", &version_string);
  m.def("eta_closed", &eta_closed, py::arg("k"), py::arg("a"));
  m.def("eta_quadrature", &eta_quadrature, py::arg("k"), py::arg("a"));
  m.def("bessel_k", &numerics::bessel_k, py::arg("order"), py::arg("z"));

  m.def(
      "normalize_config",
      [](const std::string& text, const std::string& base_dir) {
        return to_json(config_from(text, base_dir)).dump();
      },
      py::arg("config"), py::arg("base_dir") = ".");
  m.def(
      "input_hash",
      [](const std::string& text, const std::string& base_dir) {
        return input_hash(config_from(text, base_dir));
      },
      py::arg("config"), py::arg("base_dir") = ".");

  // In-memory module calls; nothing is written to disk.
  m.def(
      "validate",
      [](const std::string& text, const std::string& base_dir) {
        py::gil_scoped_release release;
        return to_json(validate(layer_from(config_from(text, base_dir)))).dump();
      },
      py::arg("config"), py::arg("base_dir") = ".");
  m.def(
      "k_total",
      [](const std::string& text, const std::string& base_dir) {
        py::gil_scoped_release release;
        return to_json(K_total(layer_from(config_from(text, base_dir)))).dump();
      },
      py::arg("config"), py::arg("base_dir") = ".");
  m.def(
      "certify",
      [](const std::string& text, const std::string& base_dir) {
        py::gil_scoped_release release;
        const RunConfig c = config_from(text, base_dir);
        CertifyOptions o;
        o.sigmas = c.numerics.sigma_sweep;
        o.force_perturbation = c.numerics.force_perturbation;
        return to_json(certify(layer_from(c), o)).dump();
      },
      py::arg("config"), py::arg("base_dir") = ".");

  // Full pipeline with records on disk. Returns (exit code, run dir, record).
  m.def(
      "run",
      [](const std::string& text, const std::string& command, const std::string& out, int workers,
         const std::string& base_dir) {
        RunConfig c = config_from(text, base_dir);
        c.command = command;
        RunOutcome o;
        {
          py::gil_scoped_release release;
          o = run(c, output_root(c, out), workers);
        }
        return py::make_tuple(o.exit_code, o.run_dir.string(), o.record.is_null() ? "null" : o.record.dump(),
                              o.message);
      },
      py::arg("config"), py::arg("command"), py::arg("out") = "", py::arg("workers") = 1,
      py::arg("base_dir") = ".");
}
