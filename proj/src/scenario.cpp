#include "probstl/scenario.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>

#include "probstl/errors.hpp"
#include "probstl/util.hpp"

namespace probstl {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) { throw ConfigError(msg); }

const json& need(const json& obj, const char* key, const char* where) {
  auto it = obj.find(key);
  if (it == obj.end()) bad(std::string(where) + ": missing \"" + key + "\"");
  return *it;
}

double as_number(const json& j, const char* what) {
  if (!j.is_number()) bad(std::string(what) + ": expected a number");
  return j.get<double>();
}

int as_int(const json& j, const char* what) {
  if (!j.is_number_integer()) bad(std::string(what) + ": expected an integer");
  return j.get<int>();
}

std::uint64_t as_seed(const json& j, const char* what) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  bad(std::string(what) + ": expected a nonnegative integer");
}

Eigen::VectorXd as_vector(const json& j, const char* what) {
  if (!j.is_array()) bad(std::string(what) + ": expected an array of numbers");
  Eigen::VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = as_number(j[i], what);
  return v;
}

Eigen::MatrixXd as_matrix(const json& j, const char* what) {
  if (!j.is_array()) bad(std::string(what) + ": expected an array of rows");
  if (j.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::VectorXd first = as_vector(j[0], what);
  Eigen::MatrixXd m(j.size(), first.size());
  m.row(0) = first;
  for (size_t i = 1; i < j.size(); ++i) {
    Eigen::VectorXd row = as_vector(j[i], what);
    if (row.size() != m.cols()) bad(std::string(what) + ": ragged rows");
    m.row(static_cast<Eigen::Index>(i)) = row;
  }
  return m;
}

// {"A": [[...]], "b": [...]} meaning Ax + b >= 0 rowwise; zero rows are the
// whole space.
Polytope as_polytope(const json& j, int dim, const char* what) {
  if (!j.is_object()) bad(std::string(what) + ": expected {\"A\", \"b\"}");
  Eigen::MatrixXd A = as_matrix(need(j, "A", what), what);
  Eigen::VectorXd b = as_vector(need(j, "b", what), what);
  if (A.rows() != b.size()) bad(std::string(what) + ": A and b disagree on the face count");
  if (A.rows() > 0 && A.cols() != dim)
    bad(std::string(what) + ": faces have the wrong state dimension");
  Polytope p;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    p.faces.push_back(Halfspace{A.row(i).transpose(), b(i)});
  }
  return p;
}

NoiseSpec as_noise(const json* j, int dim, const char* what) {
  if (j == nullptr || j->is_null()) return NoiseSpec::zero(dim);
  if (!j->is_object()) bad(std::string(what) + ": expected a noise object");
  if (j->contains("components")) {
    auto model = std::make_shared<MixtureNoiseModel>();
    for (const json& comp : need(*j, "components", what)) {
      model->components.push_back(MixtureComponent{as_vector(need(comp, "mu", what), what),
                                                   as_matrix(need(comp, "sigma", what), what)});
    }
    const json& weights = need(*j, "weights", what);
    if (weights.contains("static")) {
      model->weights = StaticWeights{as_vector(weights["static"], what)};
    } else if (weights.contains("markov")) {
      const json& mk = weights["markov"];
      model->weights = MarkovWeights{as_matrix(need(mk, "P", what), what),
                                     as_vector(need(mk, "init", what), what)};
    } else {
      bad(std::string(what) + ": weights must be \"static\" or \"markov\"");
    }
    model->validate();
    if (model->dim() != dim) bad(std::string(what) + ": mixture dimension mismatch");
    return NoiseSpec::from_mixture(std::move(model));
  }
  if (j->contains("mean") || j->contains("cov")) {
    Eigen::VectorXd mean = as_vector(need(*j, "mean", what), what);
    Eigen::MatrixXd cov = as_matrix(need(*j, "cov", what), what);
    if (mean.size() != dim || cov.rows() != dim || cov.cols() != dim)
      bad(std::string(what) + ": dimension mismatch");
    return NoiseSpec::constant(std::move(mean), std::move(cov));
  }
  bad(std::string(what) + ": expected null, {\"mean\", \"cov\"}, or a mixture block");
}

LtvSystem parse_system(const json& s, std::string& measurement) {
  LtvSystem sys;
  sys.dt = as_number(need(s, "dt", "system"), "dt");
  if (!(sys.dt > 0.0)) bad("system: dt must be positive");

  Eigen::MatrixXd A = as_matrix(need(s, "A", "system"), "A");
  if (A.rows() == 0 || A.rows() != A.cols()) bad("system: A must be square and nonempty");
  sys.n = static_cast<int>(A.rows());
  Eigen::MatrixXd B = as_matrix(need(s, "B", "system"), "B");
  if (B.rows() != sys.n || B.cols() == 0) bad("system: B must be n x m");
  sys.m = static_cast<int>(B.cols());

  Eigen::MatrixXd C;
  if (s.contains("C")) {
    C = as_matrix(s["C"], "C");
    if (C.cols() != sys.n || C.rows() == 0) bad("system: C must be q x n");
  } else {
    C = Eigen::MatrixXd::Identity(sys.n, sys.n);
  }
  sys.q = static_cast<int>(C.rows());
  sys.A = {A};
  sys.B = {B};
  sys.C = {C};

  const json& fb = need(s, "feedback", "system");
  if (fb.contains("lqr")) {
    if (sys.q != sys.n) bad("system: lqr feedback pairs with a full-state measurement");
    const json& lq = fb["lqr"];
    Eigen::MatrixXd K = lqr_gain(A, B, as_matrix(need(lq, "Q", "lqr"), "Q"),
                                 as_matrix(need(lq, "R", "lqr"), "R"));
    sys.feedback = DirectFeedback{{K}};
  } else if (fb.contains("observer")) {
    const json& ob = fb["observer"];
    sys.feedback = ObserverFeedback{{as_matrix(need(ob, "K", "observer"), "K")},
                                    {as_matrix(need(ob, "L", "observer"), "L")},
                                    as_vector(need(ob, "xhat0", "observer"), "xhat0")};
  } else if (fb.contains("K")) {
    sys.feedback = DirectFeedback{{as_matrix(fb["K"], "K")}};
  } else {
    bad("system: feedback must provide \"K\", \"lqr\", or \"observer\"");
  }

  if (s.contains("reference")) {
    const json& r = s["reference"];
    if (r.is_array() && !r.empty() && r[0].is_array()) {
      for (const json& step : r) sys.r.push_back(as_vector(step, "reference"));
    } else {
      sys.r = {as_vector(r, "reference")};
    }
  } else {
    sys.r = {Eigen::VectorXd::Zero(sys.m)};
  }

  const json& x0 = need(s, "x0", "system");
  sys.x0 = GaussianSpec{as_vector(need(x0, "mean", "x0"), "x0.mean"),
                        as_matrix(need(x0, "cov", "x0"), "x0.cov")};

  sys.v = as_noise(s.contains("measurement_noise") ? &s["measurement_noise"] : nullptr, sys.q,
                   "measurement_noise");
  sys.w = as_noise(s.contains("process_noise") ? &s["process_noise"] : nullptr, sys.n,
                   "process_noise");

  measurement = s.contains("measurement") ? s["measurement"].get<std::string>() : "linear";
  if (measurement != "linear" && measurement != "distance_xy")
    bad("system: measurement must be \"linear\" or \"distance_xy\"");
  if (measurement == "distance_xy" && sys.q != 1)
    bad("system: the range measurement is one-dimensional");
  return sys;
}

// Window seconds cover the step grid: lo rounds down, hi rounds up, with a
// tolerance so grid-aligned bounds stay exact.
std::pair<int, int> window_steps(double lo_s, double hi_s, double dt, int t_H) {
  if (lo_s < 0.0 || lo_s > hi_s) bad("reach_avoid: malformed goal window");
  int lo = static_cast<int>(std::floor(lo_s / dt + 1e-9));
  int hi = static_cast<int>(std::ceil(hi_s / dt - 1e-9));
  if (hi < lo) hi = lo;
  if (hi >= t_H) bad("reach_avoid: goal window extends past the horizon");
  return {lo, hi};
}

ReachAvoidTask parse_reach_avoid(const json& ra, int dim, double dt, int t_H) {
  ReachAvoidTask task;
  if (ra.contains("init")) task.init = as_polytope(ra["init"], dim, "reach_avoid.init");
  if (ra.contains("unsafe")) {
    for (const json& obs : ra["unsafe"]) {
      task.unsafe.push_back(as_polytope(obs, dim, "reach_avoid.unsafe"));
    }
  }
  for (const json& g : need(ra, "goals", "reach_avoid")) {
    const json& w = need(g, "window", "goal");
    if (!w.is_array() || w.size() != 2) bad("goal: window must be [lo, hi] in seconds");
    auto [lo, hi] = window_steps(as_number(w[0], "window"), as_number(w[1], "window"), dt, t_H);
    GoalSpec spec;
    spec.region = as_polytope(need(g, "region", "goal"), dim, "goal.region");
    spec.window_lo = lo;
    spec.window_hi = hi;
    task.goals.push_back(std::move(spec));
  }
  task.midpoints = ra.contains("midpoints") && ra["midpoints"].get<bool>();
  return task;
}

void parse_estimator(const json& e, EstimatorSettings& out) {
  if (e.contains("n_k")) out.hdr.n_k = as_int(e["n_k"], "n_k");
  if (e.contains("target_std")) out.hdr.target_std = as_number(e["target_std"], "target_std");
  if (e.contains("p_guess")) out.hdr.p_guess = as_number(e["p_guess"], "p_guess");
  if (e.contains("n_cap")) out.hdr.n_cap = as_int(e["n_cap"], "n_cap");
  if (e.contains("K_cap")) out.hdr.K_cap = as_int(e["K_cap"], "K_cap");
  if (e.contains("ci_level")) out.hdr.ci_level = as_number(e["ci_level"], "ci_level");
  if (e.contains("n_d")) out.hdr.n_d = as_int(e["n_d"], "n_d");
  if (e.contains("threads")) out.hdr.threads = as_int(e["threads"], "threads");
  if (e.contains("seed")) out.seed = as_seed(e["seed"], "seed");
  if (e.contains("n_outer")) out.n_outer = as_int(e["n_outer"], "n_outer");
  if (e.contains("n_mc")) out.n_mc = as_int(e["n_mc"], "n_mc");
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  for (int i = 15; i >= 0; --i) {
    buf[i] = "0123456789abcdef"[h & 0xf];
    h >>= 4;
  }
  buf[16] = '\0';
  return buf;
}

Scenario parse_scenario(const std::string& json_text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    bad(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) bad("scenario: expected a JSON object");

  try {
    Scenario sc;
    sc.digest = fnv1a_hex(json_text);
    sc.name = doc.contains("name") ? doc["name"].get<std::string>() : "scenario";

    const bool has_system = doc.contains("system");
    const bool has_gaussian = doc.contains("gaussian_file");
    if (has_system == has_gaussian)
      bad("scenario: provide exactly one of \"system\" and \"gaussian_file\"");

    int state_dim = 0;
    if (has_system) {
      sc.system = parse_system(doc["system"], sc.measurement);
      sc.dt = sc.system->dt;
      double T = as_number(need(doc["system"], "horizon_seconds", "system"), "horizon_seconds");
      if (!(T > 0.0)) bad("system: horizon_seconds must be positive");
      sc.t_H = static_cast<int>(std::ceil(T / sc.dt - 1e-9)) + 1;
      state_dim = sc.system->n;
    } else {
      std::filesystem::path p = doc["gaussian_file"].get<std::string>();
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      sc.gaussian = load_gaussian_file(p.string());
      sc.t_H = sc.gaussian->steps();
      state_dim = sc.gaussian->state_dim();
    }

    const json& spec = need(doc, "specification", "scenario");
    const bool has_formula = spec.contains("formula");
    const bool has_ra = spec.contains("reach_avoid");
    if (has_formula == has_ra)
      bad("specification: provide exactly one of \"formula\" and \"reach_avoid\"");

    if (has_formula) {
      std::string units =
          spec.contains("formula_units") ? spec["formula_units"].get<std::string>() : "steps";
      if (units == "seconds") {
        if (!has_system) bad("specification: second-valued intervals need a system time step");
        sc.formula = parse_formula(spec["formula"].get<std::string>(), state_dim, sc.dt);
      } else if (units == "steps") {
        sc.formula = parse_formula(spec["formula"].get<std::string>(), state_dim);
      } else {
        bad("specification: formula_units must be \"steps\" or \"seconds\"");
      }
      if (horizon(*sc.formula) > sc.t_H) {
        bad("specification: the formula needs " + std::to_string(horizon(*sc.formula)) +
            " steps but the horizon provides " + std::to_string(sc.t_H));
      }
    } else {
      sc.reach_avoid = parse_reach_avoid(spec["reach_avoid"], state_dim, sc.dt, sc.t_H);
    }

    if (doc.contains("estimator")) parse_estimator(doc["estimator"], sc.estimator);

    if (doc.contains("outputs")) {
      const json& out = doc["outputs"];
      if (out.contains("result")) sc.result_name = out["result"].get<std::string>();
      if (out.contains("samples_csv")) sc.samples_name = out["samples_csv"].get<std::string>();
      if (out.contains("nestings_csv")) sc.nestings_name = out["nestings_csv"].get<std::string>();
    }

    if (sc.system) sc.system->validate(sc.t_H);
    return sc;
  } catch (const json::exception& e) {
    bad(std::string("scenario: ") + e.what());
  }
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad("cannot read scenario file " + path);
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_scenario(text, std::filesystem::path(path).parent_path().string());
}

void write_trajectory_csv(const std::string& path, const std::vector<StackedSignal>& trajectories,
                          int state_dim, int steps) {
  if (state_dim < 1 || steps < 1) bad("trajectory csv: empty shape");
  std::ofstream out(path, std::ios::binary);
  if (!out) bad("cannot write " + path);
  for (int t = 0; t < steps; ++t) {
    for (int i = 0; i < state_dim; ++i) {
      if (t + i > 0) out << ',';
      out << 'x' << t << '[' << i << ']';
    }
  }
  out << '\n';
  for (const StackedSignal& traj : trajectories) {
    if (traj.state_dim != state_dim || traj.steps != steps)
      bad("trajectory csv: inconsistent trajectory shape");
    for (Eigen::Index k = 0; k < traj.data.size(); ++k) {
      if (k > 0) out << ',';
      out << format_double(traj.data[k]);
    }
    out << '\n';
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::vector<StackedSignal> read_trajectory_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) bad(path + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  auto header = split_csv_line(line);
  if (header.empty()) bad(path + ": empty header");
  int state_dim = 0;
  while (state_dim < static_cast<int>(header.size()) &&
         header[state_dim].rfind("x0[", 0) == 0) {
    ++state_dim;
  }
  if (state_dim == 0 || header.size() % state_dim != 0)
    bad(path + ": header is not a trajectory layout");
  const int steps = static_cast<int>(header.size()) / state_dim;
  for (int t = 0; t < steps; ++t) {
    for (int i = 0; i < state_dim; ++i) {
      std::string expect = "x" + std::to_string(t) + "[" + std::to_string(i) + "]";
      if (header[t * state_dim + i] != expect)
        bad(path + ": unexpected header column \"" + header[t * state_dim + i] + "\"");
    }
  }

  std::vector<StackedSignal> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      bad(path + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
          " cells, expected " + std::to_string(header.size()));
    Eigen::VectorXd data(header.size());
    for (size_t k = 0; k < cells.size(); ++k) {
      double value = 0.0;
      const char* first = cells[k].data();
      const char* last = first + cells[k].size();
      auto res = std::from_chars(first, last, value);
      if (res.ec != std::errc{} || res.ptr != last)
        bad(path + ": line " + std::to_string(line_no) + " has a malformed number");
      data[static_cast<Eigen::Index>(k)] = value;
    }
    out.emplace_back(std::move(data), state_dim);
  }
  return out;
}

void write_gaussian_file(const std::string& path, const TrajectoryGaussian& g) {
  json doc;
  doc["state_dim"] = g.state_dim();
  doc["mean"] = std::vector<double>(g.mean().data(), g.mean().data() + g.mean().size());
  json cov = json::array();
  for (Eigen::Index i = 0; i < g.cov().rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < g.cov().cols(); ++j) row.push_back(g.cov()(i, j));
    cov.push_back(std::move(row));
  }
  doc["cov"] = std::move(cov);
  std::ofstream out(path, std::ios::binary);
  if (!out) bad("cannot write " + path);
  out << doc.dump(2) << '\n';
}

TrajectoryGaussian load_gaussian_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad("cannot read Gaussian file " + path);
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    bad(path + " is not valid JSON: " + e.what());
  }
  try {
    int state_dim = as_int(need(doc, "state_dim", "gaussian"), "state_dim");
    Eigen::VectorXd mean = as_vector(need(doc, "mean", "gaussian"), "mean");
    Eigen::MatrixXd cov = as_matrix(need(doc, "cov", "gaussian"), "cov");
    return TrajectoryGaussian(std::move(mean), std::move(cov), state_dim);
  } catch (const json::exception& e) {
    bad(path + ": " + e.what());
  }
}

}  // namespace probstl
