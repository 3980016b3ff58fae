#include "probstl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "probstl/errors.hpp"

namespace probstl {

namespace {

constexpr double kTwoPi = 6.283185307179586476925;

double normalize_angle(double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0) t += kTwoPi;
  return t;
}

}  // namespace

double Polytope::margin(const Eigen::VectorXd& x) const {
  double m = std::numeric_limits<double>::infinity();
  for (const Halfspace& f : faces) m = std::min(m, f.evaluate(x));
  return m;
}

bool Polytope::contains(const Eigen::VectorXd& x, double shift) const {
  for (const Halfspace& f : faces) {
    if (f.evaluate(x) + shift < 0) return false;
  }
  return true;
}

double UnionOfPolytopes::margin(const Eigen::VectorXd& x) const {
  double m = -std::numeric_limits<double>::infinity();
  for (const Polytope& p : members) m = std::max(m, p.margin(x));
  return m;
}

bool UnionOfPolytopes::contains(const Eigen::VectorXd& x, double shift) const {
  for (const Polytope& p : members) {
    if (p.contains(x, shift)) return true;
  }
  return false;
}

int UnionOfPolytopes::dim() const {
  for (const Polytope& p : members) {
    if (!p.faces.empty()) return static_cast<int>(p.faces.front().a.size());
  }
  return 0;
}

bool EllipseArcs::contains(double theta) const {
  double t = normalize_angle(theta);
  for (const auto& [lo, hi] : intervals) {
    if (t >= lo && t < hi) return true;
    // Intervals may extend past 2pi; test the wrapped copy too.
    if (hi > kTwoPi && t + kTwoPi >= lo && t + kTwoPi < hi) return true;
  }
  return false;
}

double EllipseArcs::sample(double u01) const {
  if (intervals.empty() || measure <= 0) throw EstimationError("sampling from empty arc set");
  double target = u01 * measure;
  for (const auto& [lo, hi] : intervals) {
    double len = hi - lo;
    if (target < len) return normalize_angle(lo + target);
    target -= len;
  }
  return normalize_angle(intervals.back().second);  // u01 at the upper end
}

EllipseRoots ellipse_halfspace_roots(const Eigen::VectorXd& mean, const Eigen::VectorXd& u,
                                     const Eigen::VectorXd& v, const Halfspace& hs, double shift) {
  // Constraint along the ellipse: c + alpha cos(theta) + beta sin(theta).
  const double alpha = hs.a.dot(u);
  const double beta = hs.a.dot(v);
  const double c = hs.a.dot(mean) + hs.b + shift;
  const double r = std::hypot(alpha, beta);

  EllipseRoots out;
  if (r == 0.0) {
    out.degenerate = (c == 0.0);
    return out;
  }
  if (std::abs(c) > r) return out;  // constraint sign is constant

  const double phi0 = std::atan2(beta, alpha);
  const double ratio = std::clamp(-c / r, -1.0, 1.0);
  const double delta = std::acos(ratio);  // in [0, pi]
  out.angles[0] = normalize_angle(phi0 + delta);
  if (delta == 0.0 || delta == 3.14159265358979323846) {
    out.count = 1;  // tangency
    return out;
  }
  out.angles[1] = normalize_angle(phi0 - delta);
  out.count = 2;
  return out;
}

EllipseArcs arcs_from_candidates(std::vector<double> candidates,
                                 const std::function<bool(double)>& active_at) {
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  EllipseArcs out;
  if (candidates.empty()) {
    // No boundary crosses the ellipse: membership is constant over it.
    if (!active_at(0.0)) throw EstimationError("ellipse carries no active arc");
    out.intervals.emplace_back(0.0, kTwoPi);
    out.measure = kTwoPi;
    return out;
  }

  // Elementary arcs between consecutive candidates, cyclic.
  const size_t k = candidates.size();
  std::vector<char> active(k, 0);
  bool any = false, all = true;
  for (size_t i = 0; i < k; ++i) {
    double lo = candidates[i];
    double hi = (i + 1 < k) ? candidates[i + 1] : candidates[0] + kTwoPi;
    active[i] = active_at(0.5 * (lo + hi)) ? 1 : 0;
    any = any || active[i];
    all = all && active[i];
  }
  if (!any) throw EstimationError("ellipse carries no active arc");
  if (all) {
    out.intervals.emplace_back(0.0, kTwoPi);
    out.measure = kTwoPi;
    return out;
  }

  // Merge runs of active elementary arcs, starting after an inactive one so
  // no run is split across the seam.
  size_t start = 0;
  while (active[start]) ++start;
  for (size_t step = 0; step < k;) {
    size_t i = (start + 1 + step) % k;
    if (!active[i]) {
      ++step;
      continue;
    }
    size_t run = 0;
    while (run < k && active[(i + run) % k]) ++run;
    // The run ends at the next candidate; endpoints are candidate values
    // verbatim so equal candidate sets give equal arcs bit for bit.
    size_t next = (i + run) % k;
    double lo = candidates[i];
    double hi = candidates[next] + (next <= i ? kTwoPi : 0.0);
    out.intervals.emplace_back(lo, hi);
    step += run;
  }
  std::sort(out.intervals.begin(), out.intervals.end());
  for (const auto& [lo, hi] : out.intervals) out.measure += hi - lo;
  if (out.intervals.empty()) throw EstimationError("ellipse carries no active arc");
  return out;
}

EllipseArcs active_arcs_union(const Eigen::VectorXd& mean, const Eigen::VectorXd& u,
                              const Eigen::VectorXd& v, const UnionOfPolytopes& domain,
                              double shift) {
  std::vector<double> roots;
  for (const Polytope& p : domain.members) {
    for (const Halfspace& f : p.faces) {
      EllipseRoots r = ellipse_halfspace_roots(mean, u, v, f, shift);
      for (int k = 0; k < r.count; ++k) roots.push_back(r.angles[k]);
    }
  }
  return arcs_from_candidates(std::move(roots), [&](double theta) {
    return domain.contains(mean + u * std::cos(theta) + v * std::sin(theta), shift);
  });
}

Halfspace lift_predicate(const LinearPredicate& pred, int t, int t_H) {
  if (t < 0 || t >= t_H) throw ConfigError("lift step out of range");
  const int n = static_cast<int>(pred.a.size());
  Halfspace out{Eigen::VectorXd::Zero(static_cast<long>(n) * t_H), pred.b};
  out.a.segment(static_cast<long>(n) * t, n) = pred.a;
  return out;
}

Halfspace midpoint_constraint(const LinearPredicate& pred, int t, int t_H) {
  if (t < 0 || t + 1 >= t_H) throw ConfigError("midpoint step out of range");
  const int n = static_cast<int>(pred.a.size());
  Halfspace out{Eigen::VectorXd::Zero(static_cast<long>(n) * t_H), pred.b};
  out.a.segment(static_cast<long>(n) * t, n) = 0.5 * pred.a;
  out.a.segment(static_cast<long>(n) * (t + 1), n) = 0.5 * pred.a;
  return out;
}

namespace {

void add_lifted_faces(Polytope& target, const Polytope& source, int t, int t_H) {
  for (const Halfspace& f : source.faces) {
    target.faces.push_back(lift_predicate(LinearPredicate{f.a, f.b}, t, t_H));
  }
}

void add_midpoint_faces(Polytope& target, const Polytope& source, int t, int t_H) {
  for (const Halfspace& f : source.faces) {
    target.faces.push_back(midpoint_constraint(LinearPredicate{f.a, f.b}, t, t_H));
  }
}

// Enumerates all per-goal reach-time tuples and appends the goal faces at
// the chosen times to a copy of `base`.
void append_goal_tuples(const Polytope& base, const std::vector<GoalSpec>& goals, size_t g,
                        int t_H, std::vector<Polytope>& out) {
  if (g == goals.size()) {
    out.push_back(base);
    return;
  }
  for (int tau = goals[g].window_lo; tau <= goals[g].window_hi; ++tau) {
    Polytope next = base;
    add_lifted_faces(next, goals[g].region, tau, t_H);
    append_goal_tuples(next, goals, g + 1, t_H, out);
  }
}

}  // namespace

ReachAvoidDomains build_reach_avoid_domains(const Polytope& init,
                                            const std::vector<Polytope>& unsafe,
                                            const std::vector<GoalSpec>& goals, int t_H,
                                            bool midpoints, long enumeration_cap) {
  if (t_H < 1) throw ConfigError("reach-avoid horizon must be positive");
  long reach_tuples = 1;
  for (const GoalSpec& g : goals) {
    if (g.window_lo < 0 || g.window_hi >= t_H || g.window_lo > g.window_hi) {
      throw ConfigError("goal window outside the horizon");
    }
    reach_tuples *= g.window_hi - g.window_lo + 1;
  }

  const long hit_positions = midpoints ? 2L * t_H - 1 : t_H;
  long count_a = static_cast<long>(unsafe.size()) * hit_positions * reach_tuples;
  long count_b = 0;
  for (const GoalSpec& g : goals) {
    long combos = 1;
    for (int tau = g.window_lo; tau <= g.window_hi; ++tau) {
      combos *= static_cast<long>(g.region.faces.size());
      if (combos > enumeration_cap) break;
    }
    count_b += combos;
  }
  if (count_a + count_b > enumeration_cap) {
    throw ConfigError("reach-avoid enumeration exceeds the cap; use the formula path");
  }

  ReachAvoidDomains out;

  // Hit an obstacle (at a step or, optionally, between steps) and still
  // reach every goal inside its window.
  for (const Polytope& obs : unsafe) {
    for (long pos = 0; pos < hit_positions; ++pos) {
      Polytope base = Polytope{};
      add_lifted_faces(base, init, 0, t_H);
      if (!midpoints || pos < t_H) {
        add_lifted_faces(base, obs, static_cast<int>(pos), t_H);
      } else {
        add_midpoint_faces(base, obs, static_cast<int>(pos - t_H), t_H);
      }
      append_goal_tuples(base, goals, 0, t_H, out.type_a.members);
    }
  }

  // Miss some goal: one violated face per window step, all choices.
  for (const GoalSpec& g : goals) {
    const size_t n_faces = g.region.faces.size();
    const int span = g.window_hi - g.window_lo + 1;
    long combos = 1;
    for (int s = 0; s < span; ++s) combos *= static_cast<long>(n_faces);
    for (long code = 0; code < combos; ++code) {
      Polytope member;
      add_lifted_faces(member, init, 0, t_H);
      long rest = code;
      for (int s = 0; s < span; ++s) {
        const Halfspace& f = g.region.faces[rest % n_faces];
        rest /= n_faces;
        member.faces.push_back(
            lift_predicate(LinearPredicate{-f.a, -f.b}, g.window_lo + s, t_H));
      }
      out.type_b.members.push_back(member);
    }
  }

  // Satisfaction side: avoid every obstacle at every step via one violated
  // obstacle face per (obstacle, step), then reach the goals.
  long sat_choices = reach_tuples;
  for (const Polytope& obs : unsafe) {
    for (int t = 0; t < t_H && sat_choices <= enumeration_cap; ++t) {
      sat_choices *= static_cast<long>(obs.faces.size());
    }
    if (midpoints) {
      for (int t = 0; t + 1 < t_H && sat_choices <= enumeration_cap; ++t) {
        sat_choices *= static_cast<long>(obs.faces.size());
      }
    }
  }
  if (sat_choices > enumeration_cap) return out;  // delegate to the formula path

  std::vector<Polytope> avoid{Polytope{}};
  add_lifted_faces(avoid.front(), init, 0, t_H);
  auto expand = [&](const Polytope& obs, int pos, bool mid) {
    std::vector<Polytope> next;
    next.reserve(avoid.size() * obs.faces.size());
    for (const Polytope& base : avoid) {
      for (const Halfspace& f : obs.faces) {
        Polytope grown = base;
        LinearPredicate flipped{-f.a, -f.b};
        grown.faces.push_back(mid ? midpoint_constraint(flipped, pos, t_H)
                                  : lift_predicate(flipped, pos, t_H));
        next.push_back(std::move(grown));
      }
    }
    avoid = std::move(next);
  };
  for (const Polytope& obs : unsafe) {
    for (int t = 0; t < t_H; ++t) expand(obs, t, false);
    if (midpoints) {
      for (int t = 0; t + 1 < t_H; ++t) expand(obs, t, true);
    }
  }
  out.satisfaction.emplace();
  for (const Polytope& base : avoid) {
    append_goal_tuples(base, goals, 0, t_H, out.satisfaction->members);
  }
  return out;
}

StlFormula build_reach_avoid_formula(const Polytope& init, const std::vector<Polytope>& unsafe,
                                     const std::vector<GoalSpec>& goals, int t_H) {
  if (t_H < 1) throw ConfigError("reach-avoid horizon must be positive");
  auto conjunction = [](const Polytope& p) {
    if (p.faces.empty()) throw ConfigError("polytope without faces");
    StlFormula acc = StlFormula::predicate(LinearPredicate{p.faces[0].a, p.faces[0].b});
    for (size_t i = 1; i < p.faces.size(); ++i) {
      acc = StlFormula::conjunction(std::move(acc),
                                    StlFormula::predicate(LinearPredicate{p.faces[i].a, p.faces[i].b}));
    }
    return acc;
  };

  StlFormula task = conjunction(init);
  for (const Polytope& obs : unsafe) {
    task = StlFormula::conjunction(
        std::move(task),
        StlFormula::always(0, t_H - 1, StlFormula::negation(conjunction(obs))));
  }
  for (const GoalSpec& g : goals) {
    if (g.window_lo < 0 || g.window_hi >= t_H || g.window_lo > g.window_hi) {
      throw ConfigError("goal window outside the horizon");
    }
    task = StlFormula::conjunction(
        std::move(task),
        StlFormula::eventually(g.window_lo, g.window_hi, conjunction(g.region)));
  }
  return task;
}

UnionOfPolytopes failure_union(const ReachAvoidDomains& domains) {
  UnionOfPolytopes out = domains.type_a;
  out.members.insert(out.members.end(), domains.type_b.members.begin(),
                     domains.type_b.members.end());
  return out;
}

}  // namespace probstl
