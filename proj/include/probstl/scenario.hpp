#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "probstl/ess.hpp"
#include "probstl/geometry.hpp"
#include "probstl/hdr.hpp"
#include "probstl/system.hpp"

namespace probstl {

// Reach-avoid specification in state space; windows already on the step grid.
struct ReachAvoidTask {
  std::optional<Polytope> init;
  std::vector<Polytope> unsafe;
  std::vector<GoalSpec> goals;
  bool midpoints = false;
};

struct EstimatorSettings {
  HdrConfig hdr;
  int n_outer = 8;   // outer iterations for mixture scenarios
  int n_mc = 2400;   // simple-random-sampling baseline size
  std::uint64_t seed = 0;
};

// One fully parsed configuration document.  Either `system` (simulation and
// construction of the trajectory Gaussian) or `gaussian` (a distribution
// fitted from data, no simulator) is present, and exactly one of `formula`
// and `reach_avoid`.
struct Scenario {
  std::string name;
  std::string digest;  // FNV-1a over the document bytes, hex

  std::optional<LtvSystem> system;
  std::optional<TrajectoryGaussian> gaussian;
  int t_H = 0;
  double dt = 1.0;
  std::string measurement = "linear";  // or "distance_xy"

  std::optional<StlFormula> formula;
  std::optional<ReachAvoidTask> reach_avoid;

  EstimatorSettings estimator;

  std::string result_name = "result.json";
  std::string samples_name;   // empty: verify exports no trajectory CSV
  std::string nestings_name;  // empty: no nesting-series CSV
};

// Throws ConfigError on schema violations and ParseError on malformed
// formula text.  `base_dir` resolves a relative "gaussian_file" reference.
Scenario parse_scenario(const std::string& json_text, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);

std::string fnv1a_hex(const std::string& bytes);

// Trajectory CSV: header "x0[0],...,x0[n-1],x1[0],...", one row per
// trajectory, values in shortest round-trip form.
void write_trajectory_csv(const std::string& path, const std::vector<StackedSignal>& trajectories,
                          int state_dim, int steps);
std::vector<StackedSignal> read_trajectory_csv(const std::string& path);

// Serialized TrajectoryGaussian: {"state_dim", "mean", "cov"}.
void write_gaussian_file(const std::string& path, const TrajectoryGaussian& g);
TrajectoryGaussian load_gaussian_file(const std::string& path);

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides the scenario seed
  std::optional<int> threads;
  bool negate = false;    // verify / mc: target !formula instead
  std::string out_dir;    // empty: build the document, write no files
};

// Command cores.  Each returns the result document; file outputs land under
// options.out_dir when it is set.  ConfigError for contract violations,
// EstimationError when an estimate cannot be produced.
nlohmann::json run_verify(const Scenario& sc, const RunOptions& options);
nlohmann::json run_verify_ra(const Scenario& sc, const RunOptions& options);
nlohmann::json run_mc(const Scenario& sc, const RunOptions& options);
nlohmann::json run_sample(const Scenario& sc, int count, const std::string& side,
                          const RunOptions& options);
nlohmann::json run_fit(const std::string& csv_path, const nlohmann::json& fragment,
                       const std::string& out_path);
nlohmann::json run_compare(const Scenario& sc, int runs, const RunOptions& options);

}  // namespace probstl
