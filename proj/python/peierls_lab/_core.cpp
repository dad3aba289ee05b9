#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "peierls/config.hpp"
#include "peierls/effective_model.hpp"
#include "peierls/pipeline.hpp"
#include "peierls/reference_reduction.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text; the Python wrapper handles dicts.
peierls::RunConfig parse(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw peierls::ConfigError(std::string("config: ") + e.what());
  }
  return peierls::parse_config(j);
}

std::string run(const std::string& command, const std::string& config, const std::filesystem::path& out) {
  const peierls::RunConfig c = parse(config);
  py::gil_scoped_release release;
  if (command == "bands") return peierls::cmd_bands(c, out).dump();
  if (command == "frame") return peierls::cmd_frame(c, out).dump();
  if (command == "effective") return peierls::cmd_effective(c, out).dump();
  if (command == "compare") return peierls::cmd_compare(c, out).dump();
  if (command == "evolve") return peierls::cmd_evolve(c, out).dump();
  if (command == "butterfly") return peierls::cmd_butterfly(c, out).dump();
  if (command == "validate") {
    return peierls::cmd_validate(c, out).to_json().dump();
  }
  throw peierls::ConfigError("unknown command '" + command + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of peierls_lab";
  py::register_exception<peierls::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<peierls::NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<peierls::InvariantError>(m, "InvariantError", PyExc_AssertionError);

  m.def("version", &peierls::artifact_version);
  m.def("config_hash", [](const std::string& text) { return parse(text).hash(); });
  m.def("check_config", [](const std::string& text) { (void)parse(text); });
  m.def("run", &run, py::arg("command"), py::arg("config"), py::arg("out_dir"));
  m.def(
      "spectral_distance",
      [](const std::vector<double>& a, const std::vector<double>& b, double lo, double hi) -> py::object {
        const auto d = peierls::spectral_distance(a, b, lo, hi);
        if (d.empty) return py::none();
        return py::float_(d.value);
      },
      py::arg("a"), py::arg("b"), py::arg("lo"), py::arg("hi"));
  m.def(
      "harper_butterfly",
      [](int m_cells, int flux_points) {
        std::vector<std::tuple<double, double, double>> rows;
        for (const auto& r : peierls::harper_butterfly(m_cells, flux_points)) {
          rows.emplace_back(r.flux, r.eigenvalue, r.weight);
        }
        return rows;
      },
      py::arg("m_cells"), py::arg("flux_points"));
}
