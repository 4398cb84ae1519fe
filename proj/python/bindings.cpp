#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <vector>

#include "dynrisk/config.hpp"
#include "dynrisk/empirical.hpp"
#include "dynrisk/oracle_suites.hpp"
#include "dynrisk/run.hpp"
#include "dynrisk/scoring.hpp"
#include "dynrisk/simple_envs.hpp"
#include "dynrisk/spectrum.hpp"
#include "dynrisk/tree.hpp"

namespace py = pybind11;
using namespace dynrisk;

namespace {

std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

FiniteTreeMdp tree_from(const std::optional<std::filesystem::path>& path) {
  return path ? FiniteTreeMdp::load(*path) : example_tree();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Dynamic spectral risk: scoring functions, oracles and training runs";

  py::register_exception<SpectrumError>(m, "SpectrumError", PyExc_ValueError);
  py::register_exception<ScoreDomainError>(m, "ScoreDomainError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_RuntimeError);
  py::register_exception<TreeStructureError>(m, "TreeStructureError", PyExc_ValueError);

  py::class_<Spectrum>(m, "Spectrum")
      .def(py::init<std::vector<double>, std::vector<double>>(), py::arg("thresholds"), py::arg("weights"))
      .def_static("cvar", &Spectrum::cvar, py::arg("alpha"))
      .def_static("parse", [](const std::string& text) { return Spectrum::parse(text); }, py::arg("text"))
      .def_property_readonly("thresholds", [](const Spectrum& s) { return to_vector(s.thresholds()); })
      .def_property_readonly("weights", [](const Spectrum& s) { return to_vector(s.weights()); })
      .def("__len__", &Spectrum::size)
      .def("__str__", &Spectrum::to_string)
      .def("__repr__", [](const Spectrum& s) { return "Spectrum('" + s.to_string() + "')"; })
      .def(py::self == py::self);

  m.def("score_cvar", &score_cvar, py::arg("a1"), py::arg("a2"), py::arg("y"), py::arg("alpha"),
        py::arg("C"));
  m.def(
      "score_spectral",
      [](const std::vector<double>& var_levels, double risk, double y, const Spectrum& s, double C) {
        return score_spectral_raw(var_levels, risk, y, s, C);
      },
      py::arg("var_levels"), py::arg("risk"), py::arg("y"), py::arg("spectrum"), py::arg("C"));

  m.def(
      "empirical_var", [](const std::vector<double>& x, double alpha) { return empirical_var(x, alpha); },
      py::arg("samples"), py::arg("alpha"));
  m.def(
      "empirical_cvar", [](const std::vector<double>& x, double alpha) { return empirical_cvar(x, alpha); },
      py::arg("samples"), py::arg("alpha"));
  m.def(
      "empirical_spectral",
      [](const std::vector<double>& x, const Spectrum& s) { return empirical_spectral(x, s); },
      py::arg("samples"), py::arg("spectrum"));
  m.def(
      "weighted_risk",
      [](const std::vector<double>& v, const std::vector<double>& p, const Spectrum& s) {
        const WeightedRisk r = weighted_risk(v, p, s);
        return py::make_tuple(r.var_levels, r.risk);
      },
      py::arg("values"), py::arg("probs"), py::arg("spectrum"),
      "Returns (VaR at each threshold, spectral risk).");

  m.def(
      "tree_dynamic_risk",
      [](const Spectrum& s, const std::optional<std::filesystem::path>& path) {
        const TreeSolution sol = tree_dynamic_risk(tree_from(path), s);
        return py::make_tuple(sol.value, sol.action);
      },
      py::arg("spectrum"), py::arg("tree_file") = py::none(),
      "Per-node dynamic risk and optimal action; the bundled example tree by default.");
  m.def(
      "static_precommitment",
      [](const Spectrum& s, const std::optional<std::filesystem::path>& path, std::size_t root) {
        const PlanResult r = static_precommitment(tree_from(path), s, root);
        return py::make_tuple(r.plan, r.value);
      },
      py::arg("spectrum"), py::arg("tree_file") = py::none(), py::arg("root") = 0);

  m.def(
      "run_oracle_suite",
      [](const std::string& suite, std::uint64_t seed) {
        py::list out;
        for (const OracleCheck& c : run_oracle_suite(suite, seed)) {
          py::dict d;
          d["suite"] = c.suite;
          d["name"] = c.name;
          d["passed"] = c.passed;
          d["value"] = c.value;
          d["expected"] = c.expected;
          d["tolerance"] = c.tolerance;
          d["detail"] = c.detail;
          out.append(d);
        }
        return out;
      },
      py::arg("suite") = "all", py::arg("seed") = 1);

  m.def(
      "validate_config",
      [](const std::string& text) {
        const RunConfig cfg = parse_config(text);
        cfg.validate();
        return cfg.to_ini();
      },
      py::arg("text"), "Parses and validates config text; returns the normalized form.");
  m.def(
      "preset", [](const std::string& name) { return preset(name).to_ini(); }, py::arg("name"));

  m.def(
      "train",
      [](const std::string& config_text, const std::filesystem::path& out, std::optional<int> iterations,
         std::optional<std::uint64_t> seed) {
        RunConfig cfg = parse_config(config_text);
        if (iterations) cfg.iterations = *iterations;
        if (seed) cfg.seed = *seed;
        cfg.validate();
        py::gil_scoped_release release;
        const TrainingSession s = train_run(cfg, out);
        return s.iteration();
      },
      py::arg("config_text"), py::arg("out"), py::arg("iterations") = py::none(), py::arg("seed") = py::none(),
      "Runs cmd_train on config text; returns the number of iterations completed.");
  m.def(
      "evaluate",
      [](const std::filesystem::path& checkpoint, const std::filesystem::path& out, std::size_t episodes,
         std::uint64_t seed, std::size_t threads) {
        py::gil_scoped_release release;
        eval_run(checkpoint, out, episodes, seed, threads);
      },
      py::arg("checkpoint"), py::arg("out"), py::arg("episodes") = 10000, py::arg("seed") = 1,
      py::arg("threads") = 1);
}
