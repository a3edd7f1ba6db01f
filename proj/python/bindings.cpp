#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "csync/errors.hpp"
#include "csync/scenario_config.hpp"
#include "csync/setpoint_guard.hpp"
#include "csync/simulation.hpp"

namespace py = pybind11;
using namespace csync;

namespace {

ScenarioConfig config_from(const std::string& path_or_text) {
  const auto first = path_or_text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && path_or_text[first] == '{') return parse_config_text(path_or_text);
  return load_config(path_or_text);
}

}  // namespace

PYBIND11_MODULE(_csync, m) {
  m.doc() = "Universal inverter controller and phasor microgrid simulator";

  static py::exception<Error> base(m, "CsyncError", PyExc_RuntimeError);
  static py::exception<ParseError> parse_err(m, "ParseError", base.ptr());
  static py::exception<ValidationError> valid_err(m, "ValidationError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ValidationError& e) {
      py::set_error(valid_err, py::make_tuple(e.what(), e.field()));
    } catch (const ParseError& e) {
      py::set_error(parse_err, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  m.def(
      "resolve_config", [](const std::string& src) { return to_json(config_from(src)).dump(); }, py::arg("source"),
      "Parse and validate a scenario (path or JSON text); returns the resolved config as JSON text.");

  m.def(
      "run",
      [](const std::string& src, std::optional<std::string> out, std::optional<int> decimation,
         std::optional<std::uint64_t> seed) {
        RunOptions o;
        if (out) o.out_dir = *out;
        o.decimation = decimation;
        o.seed = seed;
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_scenario(config_from(src), o);
        }
        py::list events;
        for (const auto& e : r.events) events.append(py::make_tuple(e.t, e.type, e.target, e.detail));
        return py::make_tuple(r.metrics.to_json().dump(), events);
      },
      py::arg("source"), py::arg("out") = py::none(), py::arg("decimation") = py::none(), py::arg("seed") = py::none(),
      "Run a scenario; returns (metrics JSON text, [(t, type, target, detail), ...]).");

  m.def(
      "guard_validate",
      [](double p_set, double q_set, double v_nom, double p_load, double q_load, double m_p, double n_q, double u,
         double u_v, double p_set_now, double v_nom_now, double f_nom) {
        PlantSnapshot plant;
        plant.params.m_p = m_p;
        plant.params.n_q = n_q;
        plant.params.p_set = p_set_now;
        plant.params.v_nom = v_nom_now;
        plant.params.f_nom = f_nom;
        plant.state.u = u;
        plant.state.u_v = u_v;
        plant.p_load_est = p_load;
        plant.q_load_est = q_load;
        Setpoint sp;
        sp.p_set = p_set;
        sp.q_set = q_set;
        sp.v_nom = v_nom;
        GuardLimits lim;
        lim.dp_max = 10.0;
        lim.dv_nom_max = 10.0;
        const GuardVerdict v = validate(sp, plant, lim);
        return py::make_tuple(v.accepted, std::string(to_string(v.reason)), v.predicted_f, v.predicted_v);
      },
      py::arg("p_set"), py::arg("q_set") = 0.0, py::arg("v_nom") = 1.0, py::arg("p_load") = 0.0,
      py::arg("q_load") = 0.0, py::arg("m_p") = 0.01, py::arg("n_q") = 0.05, py::arg("u") = 0.0, py::arg("u_v") = 0.0,
      py::arg("p_set_now") = 0.0, py::arg("v_nom_now") = 1.0, py::arg("f_nom") = 60.0,
      "Screen one setpoint with default limits and the rate checks opened; returns "
      "(accepted, reason, predicted_f_hz, predicted_v_pu).");

  m.def("format_number", &format_number, py::arg("value"));
}
