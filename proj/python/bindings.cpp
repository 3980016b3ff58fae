#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "probstl/errors.hpp"
#include "probstl/scenario.hpp"
#include "probstl/stl.hpp"

namespace py = pybind11;
using namespace probstl;

namespace {

StlFormula parse_any(const std::string& text, int state_dim, std::optional<double> dt) {
  return dt ? parse_formula(text, state_dim, *dt) : parse_formula(text, state_dim);
}

// rows: one state vector per step.
StackedSignal signal_from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ConfigError("signal needs at least one step");
  int n = static_cast<int>(rows.front().size());
  Eigen::VectorXd data(static_cast<int>(rows.size()) * n);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (static_cast<int>(rows[t].size()) != n)
      throw ConfigError("signal rows must have equal length");
    for (int i = 0; i < n; ++i) data[static_cast<int>(t) * n + i] = rows[t][i];
  }
  return StackedSignal(std::move(data), n);
}

RunOptions make_options(std::optional<std::uint64_t> seed, std::optional<int> threads,
                        bool negate, const std::string& out_dir) {
  RunOptions opt;
  opt.seed = seed;
  opt.threads = threads;
  opt.negate = negate;
  opt.out_dir = out_dir;
  return opt;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core: formula evaluation and scenario estimation";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<EstimationError>(m, "EstimationError", PyExc_RuntimeError);

  m.def(
      "robustness",
      [](const std::string& formula, const std::vector<std::vector<double>>& rows,
         std::optional<double> dt) {
        StackedSignal sig = signal_from_rows(rows);
        return robustness(parse_any(formula, sig.state_dim, dt), sig, 0);
      },
      py::arg("formula"), py::arg("signal"), py::arg("dt") = std::nullopt,
      "Quantitative satisfaction score of the formula on a step-major signal.");

  m.def(
      "horizon",
      [](const std::string& formula, int state_dim, std::optional<double> dt) {
        return horizon(parse_any(formula, state_dim, dt));
      },
      py::arg("formula"), py::arg("state_dim"), py::arg("dt") = std::nullopt,
      "Number of signal steps the formula inspects.");

  m.def(
      "verify_json",
      [](const std::string& scenario, const std::string& base_dir,
         std::optional<std::uint64_t> seed, std::optional<int> threads, bool negate,
         const std::string& out_dir) {
        Scenario sc = parse_scenario(scenario, base_dir);
        return run_verify(sc, make_options(seed, threads, negate, out_dir)).dump();
      },
      py::arg("scenario"), py::arg("base_dir") = ".", py::arg("seed") = std::nullopt,
      py::arg("threads") = std::nullopt, py::arg("negate") = false, py::arg("out_dir") = "");

  m.def(
      "verify_ra_json",
      [](const std::string& scenario, const std::string& base_dir,
         std::optional<std::uint64_t> seed, std::optional<int> threads,
         const std::string& out_dir) {
        Scenario sc = parse_scenario(scenario, base_dir);
        return run_verify_ra(sc, make_options(seed, threads, false, out_dir)).dump();
      },
      py::arg("scenario"), py::arg("base_dir") = ".", py::arg("seed") = std::nullopt,
      py::arg("threads") = std::nullopt, py::arg("out_dir") = "");

  m.def(
      "mc_json",
      [](const std::string& scenario, const std::string& base_dir,
         std::optional<std::uint64_t> seed, std::optional<int> threads, bool negate) {
        Scenario sc = parse_scenario(scenario, base_dir);
        return run_mc(sc, make_options(seed, threads, negate, "")).dump();
      },
      py::arg("scenario"), py::arg("base_dir") = ".", py::arg("seed") = std::nullopt,
      py::arg("threads") = std::nullopt, py::arg("negate") = false);

  m.def(
      "sample_json",
      [](const std::string& scenario, int count, const std::string& side,
         const std::string& out_dir, const std::string& base_dir,
         std::optional<std::uint64_t> seed, std::optional<int> threads) {
        Scenario sc = parse_scenario(scenario, base_dir);
        return run_sample(sc, count, side, make_options(seed, threads, false, out_dir)).dump();
      },
      py::arg("scenario"), py::arg("count"), py::arg("side"), py::arg("out_dir"),
      py::arg("base_dir") = ".", py::arg("seed") = std::nullopt,
      py::arg("threads") = std::nullopt);
}
