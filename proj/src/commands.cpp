#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "probstl/errors.hpp"
#include "probstl/geometry.hpp"
#include "probstl/hdr.hpp"
#include "probstl/mc.hpp"
#include "probstl/mixture.hpp"
#include "probstl/rng.hpp"
#include "probstl/scenario.hpp"
#include "probstl/util.hpp"

namespace probstl {

namespace {

using nlohmann::json;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

std::uint64_t effective_seed(const Scenario& sc, const RunOptions& opt) {
  return opt.seed.value_or(sc.estimator.seed);
}

HdrConfig effective_hdr(const Scenario& sc, const RunOptions& opt) {
  HdrConfig cfg = sc.estimator.hdr;
  if (opt.threads) cfg.threads = *opt.threads;
  return cfg;
}

bool has_mixture(const Scenario& sc) {
  return sc.system && (sc.system->v.is_mixture() || sc.system->w.is_mixture());
}

int scenario_dim(const Scenario& sc) {
  return sc.system ? sc.system->n : sc.gaussian->state_dim();
}

JacobianFn measurement_jacobian(const Scenario& sc) {
  if (sc.measurement == "distance_xy") return distance_xy_jacobian;
  return nullptr;
}

MeasurementFn measurement_fn(const Scenario& sc) {
  if (sc.measurement == "distance_xy") return distance_xy_measurement;
  return nullptr;
}

// The range measurement has no fixed C; it is linearized along the expected
// closed-loop path before the trajectory Gaussian exists.
TrajectoryGaussian scenario_gaussian(const Scenario& sc) {
  if (sc.gaussian) return *sc.gaussian;
  LtvSystem sys = *sc.system;
  if (sc.measurement == "distance_xy") {
    sys.C = propagate_expected_state(sys, distance_xy_jacobian, sc.t_H).C;
  }
  return build_trajectory_gaussian(sys, sc.t_H);
}

// Satisfaction formula of the scenario; a reach-avoid task without an
// explicit initial region gets a vacuous face so the formula has one.
StlFormula target_formula(const Scenario& sc, bool negate) {
  StlFormula f = [&] {
    if (sc.formula) return *sc.formula;
    const ReachAvoidTask& ra = *sc.reach_avoid;
    Polytope init;
    if (ra.init) {
      init = *ra.init;
    } else {
      init.faces.push_back(Halfspace{Eigen::VectorXd::Zero(scenario_dim(sc)), 1.0});
    }
    return build_reach_avoid_formula(init, ra.unsafe, ra.goals, sc.t_H);
  }();
  return negate ? StlFormula::negation(std::move(f)) : f;
}

UnionOfPolytopes scenario_failure_union(const Scenario& sc) {
  const ReachAvoidTask& ra = *sc.reach_avoid;
  ReachAvoidDomains domains = build_reach_avoid_domains(
      ra.init ? *ra.init : Polytope{}, ra.unsafe, ra.goals, sc.t_H, ra.midpoints);
  return failure_union(domains);
}

json base_doc(const Scenario& sc, std::uint64_t seed) {
  json doc;
  doc["scenario"] = sc.name;
  doc["digest"] = sc.digest;
  doc["seed"] = seed;
  return doc;
}

json nesting_json(const NestingRecord& r) {
  return json{{"level", r.level},
              {"cutoff", r.cutoff},
              {"samples", r.samples},
              {"in_count", r.in_count},
              {"conditional", r.conditional}};
}

void fill_result(json& doc, const VerificationResult& r) {
  doc["probability"] = r.probability;
  doc["variance"] = r.variance;
  doc["std_dev"] = r.std_dev;
  doc["ci"] = json{{"level", r.ci_level}, {"lo", r.ci_lo}, {"hi", r.ci_hi}};
  doc["upper_bound_only"] = r.upper_bound_only;
  json nest = json::array();
  for (const NestingRecord& n : r.nestings) nest.push_back(nesting_json(n));
  doc["nestings"] = std::move(nest);
}

void fill_mixture(json& doc, const MixtureEstimate& est, int n_outer, double ci_level) {
  doc["probability"] = est.probability;
  doc["variance"] = est.variance;
  doc["std_dev"] = est.std_dev;
  double z = normal_quantile(0.5 + ci_level / 2.0);
  doc["ci"] = json{{"level", ci_level},
                   {"lo", std::clamp(est.probability - z * est.std_dev, 0.0, 1.0)},
                   {"hi", std::clamp(est.probability + z * est.std_dev, 0.0, 1.0)}};
  doc["upper_bound_only"] = est.upper_bound_only;
  doc["nestings"] = json::array();
  json runs = json::array();
  for (const VerificationResult& r : est.runs) {
    runs.push_back(json{{"probability", r.probability},
                        {"std_dev", r.std_dev},
                        {"nestings", r.nestings.size()}});
  }
  doc["mixture"] = json{{"n_outer", n_outer},
                        {"between_variance", est.between_variance},
                        {"within_variance", est.within_variance},
                        {"runs", std::move(runs)}};
}

void write_result_file(const std::string& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << doc.dump(2) << '\n';
}

void write_nestings_csv(const std::string& path, const std::vector<NestingRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << "level,cutoff,samples,in_count,conditional\n";
  for (const NestingRecord& r : records) {
    out << r.level << ',' << format_double(r.cutoff) << ',' << r.samples << ',' << r.in_count
        << ',' << format_double(r.conditional) << '\n';
  }
}

// Stamps the wall time, writes the declared side files, and lands the
// finished document in the result file, so the file equals the return value.
void finish(json& doc, const Scenario& sc, const RunOptions& opt, const Timer& timer,
            const std::vector<NestingRecord>* nestings,
            const std::vector<StackedSignal>* retained, int state_dim, int steps) {
  doc["timing"] = json{{"seconds", timer.seconds()}};
  if (opt.out_dir.empty()) return;
  std::filesystem::path dir(opt.out_dir);
  std::filesystem::create_directories(dir);
  json outputs = doc.contains("outputs") ? doc["outputs"] : json::object();
  if (retained != nullptr && !sc.samples_name.empty()) {
    std::string p = (dir / sc.samples_name).string();
    write_trajectory_csv(p, *retained, state_dim, steps);
    outputs["samples_csv"] = p;
  }
  if (nestings != nullptr && !sc.nestings_name.empty()) {
    std::string p = (dir / sc.nestings_name).string();
    write_nestings_csv(p, *nestings);
    outputs["nestings_csv"] = p;
  }
  std::string result_path = (dir / sc.result_name).string();
  outputs["result"] = result_path;
  doc["outputs"] = std::move(outputs);
  write_result_file(result_path, doc);
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

json run_verify(const Scenario& sc, const RunOptions& opt) {
  Timer timer;
  const std::uint64_t seed = effective_seed(sc, opt);
  const HdrConfig cfg = effective_hdr(sc, opt);
  json doc = base_doc(sc, seed);
  doc["negated"] = opt.negate;

  DomainOracle oracle{StlDomain{target_formula(sc, opt.negate)}};
  Mt19937Source rng(seed);

  if (has_mixture(sc)) {
    MixtureEstimate est = mixture_estimate(*sc.system, sc.t_H, oracle, sc.estimator.n_outer, cfg,
                                           rng, measurement_jacobian(sc));
    doc["mode"] = "mixture";
    fill_mixture(doc, est, sc.estimator.n_outer, cfg.ci_level);
    std::vector<NestingRecord> none;
    finish(doc, sc, opt, timer, &none, nullptr, 0, 0);
    return doc;
  }

  TrajectoryGaussian g = scenario_gaussian(sc);
  VerificationResult res = hdr_estimate(g, oracle, cfg, rng);
  doc["mode"] = "stl";
  fill_result(doc, res);
  finish(doc, sc, opt, timer, &res.nestings, &res.retained, g.state_dim(), g.steps());
  return doc;
}

json run_verify_ra(const Scenario& sc, const RunOptions& opt) {
  Timer timer;
  if (!sc.reach_avoid) throw ConfigError("verify-ra needs a reach_avoid specification");
  const std::uint64_t seed = effective_seed(sc, opt);
  const HdrConfig cfg = effective_hdr(sc, opt);
  json doc = base_doc(sc, seed);
  doc["mode"] = "reach-avoid";

  UnionOfPolytopes fu = scenario_failure_union(sc);
  doc["reach_avoid"] =
      json{{"midpoints", sc.reach_avoid->midpoints}, {"members", fu.members.size()}};

  if (fu.members.empty()) {
    // Nothing can fail; report the exact zero without running the estimator.
    doc["probability"] = 0.0;
    doc["variance"] = 0.0;
    doc["std_dev"] = 0.0;
    doc["ci"] = json{{"level", cfg.ci_level}, {"lo", 0.0}, {"hi", 0.0}};
    doc["upper_bound_only"] = false;
    doc["nestings"] = json::array();
    std::vector<NestingRecord> none;
    std::vector<StackedSignal> empty;
    finish(doc, sc, opt, timer, &none, &empty, scenario_dim(sc), sc.t_H);
    return doc;
  }

  DomainOracle oracle{PolytopeDomain{std::move(fu)}};
  Mt19937Source rng(seed);

  if (has_mixture(sc)) {
    MixtureEstimate est = mixture_estimate(*sc.system, sc.t_H, oracle, sc.estimator.n_outer, cfg,
                                           rng, measurement_jacobian(sc));
    fill_mixture(doc, est, sc.estimator.n_outer, cfg.ci_level);
    std::vector<NestingRecord> none;
    finish(doc, sc, opt, timer, &none, nullptr, 0, 0);
    return doc;
  }

  TrajectoryGaussian g = scenario_gaussian(sc);
  VerificationResult res = hdr_estimate(g, oracle, cfg, rng);
  fill_result(doc, res);
  finish(doc, sc, opt, timer, &res.nestings, &res.retained, g.state_dim(), g.steps());
  return doc;
}

json run_mc(const Scenario& sc, const RunOptions& opt) {
  Timer timer;
  if (!sc.system) throw ConfigError("mc simulates the closed loop; a Gaussian file is not enough");
  const std::uint64_t seed = effective_seed(sc, opt);
  json doc = base_doc(sc, seed);
  doc["mode"] = "mc";

  Mt19937Source rng(seed);
  MeasurementFn measure = measurement_fn(sc);
  McResult res;
  bool applied_negate = false;
  if (sc.formula) {
    StlFormula f = opt.negate ? StlFormula::negation(*sc.formula) : *sc.formula;
    applied_negate = opt.negate;
    res = srs_estimate(*sc.system, f, sc.estimator.n_mc, rng, measure);
  } else {
    DomainOracle oracle{PolytopeDomain{scenario_failure_union(sc)}};
    res = srs_estimate(*sc.system, sc.t_H, oracle, sc.estimator.n_mc, rng, measure);
  }
  doc["negated"] = applied_negate;

  int hits = static_cast<int>(
      std::count(res.satisfied.begin(), res.satisfied.end(), std::uint8_t{1}));
  doc["mc"] = json{{"n_mc", res.n_mc}, {"hits", hits}};
  doc["probability"] = res.p_hat;
  doc["variance"] = res.variance;
  double sd = std::sqrt(res.variance);
  doc["std_dev"] = sd;
  double ci = sc.estimator.hdr.ci_level;
  double z = normal_quantile(0.5 + ci / 2.0);
  doc["ci"] = json{{"level", ci},
                   {"lo", clamp01(res.p_hat - z * sd)},
                   {"hi", clamp01(res.p_hat + z * sd)}};
  finish(doc, sc, opt, timer, nullptr, nullptr, 0, 0);
  return doc;
}

json run_sample(const Scenario& sc, int count, const std::string& side, const RunOptions& opt) {
  Timer timer;
  if (count < 0) throw ConfigError("sample count must be nonnegative");
  if (side != "satisfy" && side != "violate")
    throw ConfigError("side must be \"satisfy\" or \"violate\"");
  if (has_mixture(sc))
    throw ConfigError("sampling requires Gaussian noise channels; condition the mixture first");

  const std::uint64_t seed = effective_seed(sc, opt);
  const HdrConfig cfg = effective_hdr(sc, opt);
  json doc = base_doc(sc, seed);
  doc["mode"] = sc.formula ? "stl" : "reach-avoid";
  doc["sample"] = json{{"count", count}, {"side", side}};

  TrajectoryGaussian g = scenario_gaussian(sc);
  std::optional<DomainOracle> oracle;
  if (!sc.formula && side == "violate") {
    UnionOfPolytopes fu = scenario_failure_union(sc);
    if (fu.members.empty()) throw EstimationError("the failure set is empty; nothing to sample");
    oracle.emplace(PolytopeDomain{std::move(fu)});
  } else {
    // Formula scenarios negate directly; reach-avoid satisfaction uses the
    // derived formula.
    oracle.emplace(StlDomain{target_formula(sc, side == "violate")});
  }

  std::vector<StackedSignal> samples;
  int chains = 0;
  if (count > 0) {
    Mt19937Source rng(seed);
    VerificationResult warm = hdr_estimate(g, *oracle, cfg, rng);
    if (warm.upper_bound_only)
      throw EstimationError(
          "splitting stopped before the target set; raise K_cap or n_k to reach it");
    if (warm.retained.empty())
      throw EstimationError("no trajectory reached the target set; nothing to chain from");
    chains = static_cast<int>(warm.retained.size());
    std::vector<std::uint64_t> chain_seeds(chains);
    for (auto& s : chain_seeds) s = draw_seed(rng);
    std::vector<std::vector<StackedSignal>> per_chain(chains);
    parallel_for(chains, cfg.threads, [&](int c) {
      int quota = count / chains + (c < count % chains ? 1 : 0);
      if (quota == 0) return;
      ChainConfig cc;
      cc.n_d = cfg.n_d;
      cc.seed = chain_seeds[c];
      per_chain[c] = sample_chain(warm.retained[c], quota, g, *oracle, cc);
    });
    for (auto& chunk : per_chain) {
      for (auto& s : chunk) samples.push_back(std::move(s));
    }
    doc["warm"] = json{{"probability", warm.probability},
                       {"std_dev", warm.std_dev},
                       {"nestings", warm.nestings.size()}};
  }
  doc["sample"]["chains"] = chains;

  std::filesystem::path dir(opt.out_dir.empty() ? "." : opt.out_dir);
  std::filesystem::create_directories(dir);
  std::string csv_path =
      (dir / (sc.samples_name.empty() ? "samples.csv" : sc.samples_name)).string();
  write_trajectory_csv(csv_path, samples, g.state_dim(), g.steps());
  doc["outputs"] = json{{"samples_csv", csv_path}};
  finish(doc, sc, opt, timer, nullptr, nullptr, 0, 0);
  return doc;
}

json run_fit(const std::string& csv_path, const nlohmann::json& fragment,
             const std::string& out_path) {
  Timer timer;
  std::vector<StackedSignal> trajectories = read_trajectory_csv(csv_path);
  if (trajectories.empty()) throw ConfigError(csv_path + " holds no trajectories");
  double ridge = 1e-9;
  if (fragment.is_object() && fragment.contains("ridge"))
    ridge = fragment["ridge"].get<double>();
  TrajectoryGaussian g = fit_gaussian(trajectories, ridge);
  write_gaussian_file(out_path, g);
  json doc;
  doc["mode"] = "fit";
  doc["trajectories"] = trajectories.size();
  doc["state_dim"] = g.state_dim();
  doc["steps"] = g.steps();
  doc["outputs"] = json{{"gaussian", out_path}};
  doc["timing"] = json{{"seconds", timer.seconds()}};
  return doc;
}

json run_compare(const Scenario& sc, int runs, const RunOptions& opt) {
  Timer timer;
  if (runs < 1) throw ConfigError("compare needs at least one run");
  if (!sc.system)
    throw ConfigError("compare simulates the closed loop; a Gaussian file is not enough");
  const std::uint64_t seed = effective_seed(sc, opt);
  const HdrConfig cfg = effective_hdr(sc, opt);
  const bool mixture = has_mixture(sc);
  MeasurementFn measure = measurement_fn(sc);
  JacobianFn jacobian = measurement_jacobian(sc);

  // Both estimators target the same event: the formula (negated on request)
  // or the reach-avoid failure union.
  std::optional<StlFormula> mc_formula;
  std::optional<DomainOracle> oracle;
  bool empty_target = false;
  if (sc.formula) {
    mc_formula = opt.negate ? StlFormula::negation(*sc.formula) : *sc.formula;
    oracle.emplace(StlDomain{*mc_formula});
  } else {
    UnionOfPolytopes fu = scenario_failure_union(sc);
    empty_target = fu.members.empty();
    if (!empty_target) oracle.emplace(PolytopeDomain{std::move(fu)});
  }
  std::optional<TrajectoryGaussian> g;
  if (!mixture && !empty_target) g = scenario_gaussian(sc);

  struct Row {
    std::uint64_t seed_hdr = 0, seed_mc = 0;
    double p_hdr = 0.0, std_hdr = 0.0, p_mc = 0.0, std_mc = 0.0;
  };
  Mt19937Source master(seed);
  std::vector<Row> rows(runs);
  for (Row& row : rows) {
    row.seed_hdr = draw_seed(master);
    row.seed_mc = draw_seed(master);
    if (empty_target) continue;
    Mt19937Source rng_h(row.seed_hdr);
    if (mixture) {
      MixtureEstimate est =
          mixture_estimate(*sc.system, sc.t_H, *oracle, sc.estimator.n_outer, cfg, rng_h, jacobian);
      row.p_hdr = est.probability;
      row.std_hdr = est.std_dev;
    } else {
      VerificationResult res = hdr_estimate(*g, *oracle, cfg, rng_h);
      row.p_hdr = res.probability;
      row.std_hdr = res.std_dev;
    }
    Mt19937Source rng_m(row.seed_mc);
    McResult mc = mc_formula
                      ? srs_estimate(*sc.system, *mc_formula, sc.estimator.n_mc, rng_m, measure)
                      : srs_estimate(*sc.system, sc.t_H, *oracle, sc.estimator.n_mc, rng_m,
                                     measure);
    row.p_mc = mc.p_hat;
    row.std_mc = std::sqrt(mc.variance);
  }

  auto mean_of = [&](auto field) {
    double s = 0.0;
    for (const Row& r : rows) s += r.*field;
    return s / runs;
  };
  auto sample_std = [&](auto field, double mean) {
    if (runs < 2) return 0.0;
    double s = 0.0;
    for (const Row& r : rows) s += (r.*field - mean) * (r.*field - mean);
    return std::sqrt(s / (runs - 1));
  };
  double hdr_mean = mean_of(&Row::p_hdr), mc_mean = mean_of(&Row::p_mc);
  int agree = 0;
  for (const Row& r : rows) {
    double tol = 3.0 * std::hypot(r.std_hdr, r.std_mc);
    if (std::abs(r.p_hdr - r.p_mc) <= tol) ++agree;
  }

  json doc = base_doc(sc, seed);
  doc["mode"] = "compare";
  doc["negated"] = sc.formula ? opt.negate : false;
  doc["compare"] = json{{"runs", runs},
                        {"hdr_mean", hdr_mean},
                        {"hdr_std", sample_std(&Row::p_hdr, hdr_mean)},
                        {"mc_mean", mc_mean},
                        {"mc_std", sample_std(&Row::p_mc, mc_mean)},
                        {"agree_3sigma", static_cast<double>(agree) / runs}};

  if (!opt.out_dir.empty()) {
    std::filesystem::path dir(opt.out_dir);
    std::filesystem::create_directories(dir);
    std::string series_path = (dir / "compare.csv").string();
    {
      std::ofstream out(series_path, std::ios::binary);
      if (!out) throw ConfigError("cannot write " + series_path);
      out << "run,seed_hdr,seed_mc,p_hdr,std_hdr,p_mc,std_mc\n";
      for (int i = 0; i < runs; ++i) {
        const Row& r = rows[i];
        out << i << ',' << r.seed_hdr << ',' << r.seed_mc << ',' << format_double(r.p_hdr) << ','
            << format_double(r.std_hdr) << ',' << format_double(r.p_mc) << ','
            << format_double(r.std_mc) << '\n';
      }
    }
    std::string hist_path = (dir / "histogram.csv").string();
    {
      double lo = rows[0].p_hdr, hi = rows[0].p_hdr;
      for (const Row& r : rows) {
        lo = std::min({lo, r.p_hdr, r.p_mc});
        hi = std::max({hi, r.p_hdr, r.p_mc});
      }
      const int bins = 20;
      double width = (hi - lo) / bins;
      std::vector<int> count_hdr(bins, 0), count_mc(bins, 0);
      auto bin_of = [&](double x) {
        if (width <= 0.0) return 0;
        return std::min(bins - 1, static_cast<int>((x - lo) / width));
      };
      for (const Row& r : rows) {
        ++count_hdr[bin_of(r.p_hdr)];
        ++count_mc[bin_of(r.p_mc)];
      }
      std::ofstream out(hist_path, std::ios::binary);
      if (!out) throw ConfigError("cannot write " + hist_path);
      out << "bin_lo,bin_hi,count_hdr,count_mc\n";
      for (int b = 0; b < bins; ++b) {
        out << format_double(lo + b * width) << ',' << format_double(lo + (b + 1) * width) << ','
            << count_hdr[b] << ',' << count_mc[b] << '\n';
      }
    }
    doc["outputs"] = json{{"series_csv", series_path}, {"histogram_csv", hist_path}};
  }
  finish(doc, sc, opt, timer, nullptr, nullptr, 0, 0);
  return doc;
}

}  // namespace probstl
