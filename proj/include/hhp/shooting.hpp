#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "exponents.hpp"
#include "phase_system.hpp"
#include "profile_ode.hpp"

namespace hhp {

// which side of a threshold an outcome lies on
enum class Side { Low, High, Threshold, Unknown };

inline Side side_of(const ProfileTrajectory& t) {
  switch (t.termination) {
    case TailClass::AlgebraicDecay: return Side::Low;
    case TailClass::TransversalZero: return Side::High;
    case TailClass::CompactSupport:
    case TailClass::GaussianTail:
      if (t.q5_exit == Q5Exit::Q1) return Side::Low;
      if (t.q5_exit == Q5Exit::Q3) return Side::High;
      return Side::Threshold;
    default: return Side::Unknown;
  }
}

inline PhaseEndpoint expected_endpoint(TailClass c) {
  switch (c) {
    case TailClass::AlgebraicDecay: return PhaseEndpoint::Q1;
    case TailClass::TransversalZero: return PhaseEndpoint::Q3;
    case TailClass::CompactSupport:
    case TailClass::GaussianTail: return PhaseEndpoint::Q5;
    case TailClass::DiagnosticQ4: return PhaseEndpoint::DiagnosticQ4;
    default: return PhaseEndpoint::Unresolved;
  }
}

// near-threshold profiles shadow Q5 and may leave toward either side
inline bool endpoint_consistent(const ProfileTrajectory& t, PhaseEndpoint e) {
  if (e == expected_endpoint(t.termination)) return true;
  if (t.termination == TailClass::CompactSupport || t.termination == TailClass::GaussianTail)
    return (e == PhaseEndpoint::Q1 && t.q5_exit == Q5Exit::Q1) || (e == PhaseEndpoint::Q3 && t.q5_exit == Q5Exit::Q3);
  return false;
}

struct GridPoint {
  double A = 0.0;
  TailClass cls = TailClass::Unresolved;
  Q5Exit q5_exit = Q5Exit::None;
  std::optional<double> tail_constant;
  std::optional<double> support_edge;
  std::optional<double> edge_slope;
  bool g_interior_minimum = false;
  std::optional<PhaseEndpoint> phase_endpoint;  // set on cross-checked points
  bool consistent = true;
  std::string note;
};

struct Bracket {
  double lo = 0.0, hi = 0.0;
  TailClass lo_class = TailClass::Unresolved, hi_class = TailClass::Unresolved;
  int iterations = 0;
  bool valid = true;
  std::string note;
  // the last midpoint that ended on the Q5 branch, if any
  std::optional<double> threshold_A;
  std::optional<ProfileTrajectory> threshold_trajectory;
  int refine_iterations = 0;
  double refined_width = 0.0;
  // extreme midpoints of the reported bisection with an unambiguous class
  std::optional<double> algebraic_max, transversal_min;

  double rel_width() const { return (hi - lo) / (0.5 * (hi + lo)); }
};

struct ShootingReport {
  ProblemParams params;
  ProfileOptions tolerances;
  std::vector<GridPoint> grid;
  std::vector<Bracket> flips;
  std::optional<double> a_star_lower;  // largest A verified AlgebraicDecay below the first flip
  std::optional<double> a_star_upper;  // smallest A verified TransversalZero
  double bracket_width = 0.0;
};

struct SweepOptions {
  // cross-check every n-th grid point through the phase system (0 disables)
  int phase_check_every = 1;
  unsigned threads = 0;  // 0 = HH_NUM_THREADS or hardware concurrency
};

struct BisectOptions {
  double rel_tol = 1e-6;
  // width floor for the search of a trajectory on the Q5 branch
  double min_rel_width = 1e-13;
  bool seek_threshold_trajectory = true;
  bool validate_endpoints = true;
};

inline unsigned sweep_threads(unsigned requested, std::size_t jobs) {
  unsigned n = requested;
  if (n == 0) {
    n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("HH_NUM_THREADS")) {
      const long v = std::strtol(env, nullptr, 10);
      if (v >= 1) n = std::min<unsigned>(n, unsigned(v));
    }
  }
  return std::max(1u, std::min<unsigned>(n, unsigned(std::max<std::size_t>(jobs, 1))));
}

template <class Job>
void parallel_for(std::size_t count, unsigned threads, Job job) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) job(i);
    });
  for (auto& th : pool) th.join();
}

inline PhaseOptions phase_options_from(const ProfileOptions& o) {
  PhaseOptions p;
  p.rtol = o.rtol;
  p.atol = o.atol;
  return p;
}

// phase integration from the image of the profile start
inline PhaseTrajectory phase_cross_check(const ProblemParams& q, double A, const ProfileOptions& o) {
  const double xi0 = o.xi0 > 0.0 ? o.xi0 : auto_start_radius(q, A, o.atol);
  return integrate_phase(q, profile_to_phase(q, series_start(q, A, xi0)), phase_options_from(o));
}

inline GridPoint classify_point(const ProblemParams& q, double A, const ProfileOptions& o, bool cross_check) {
  GridPoint g;
  g.A = A;
  const auto t = integrate_profile(q, A, o);
  g.cls = t.termination;
  g.q5_exit = t.q5_exit;
  g.tail_constant = t.tail_constant;
  g.support_edge = t.support_edge;
  g.edge_slope = t.edge_slope;
  g.note = t.note;
  if (t.samples.size() >= 3) g.g_interior_minimum = g_transform(t, q).interior_minimum;
  if (cross_check) {
    g.phase_endpoint = phase_cross_check(q, A, o).endpoint;
    g.consistent = endpoint_consistent(t, *g.phase_endpoint);
  }
  return g;
}

inline std::vector<GridPoint> sweep(const ProblemParams& q, const std::vector<double>& a_grid,
                                    const ProfileOptions& o = {}, const SweepOptions& so = {}) {
  if (classify_regime(q) == Regime::BlowUpOnly) throw std::domain_error("sweep needs p > p_F");
  for (double A : a_grid)
    if (!(A > 0.0) || !std::isfinite(A)) throw std::domain_error("A must be positive and finite");
  std::vector<GridPoint> out(a_grid.size());
  parallel_for(a_grid.size(), sweep_threads(so.threads, a_grid.size()), [&](std::size_t i) {
    const bool check = so.phase_check_every > 0 && i % std::size_t(so.phase_check_every) == 0;
    out[i] = classify_point(q, a_grid[i], o, check);
  });
  return out;
}

inline std::vector<double> log_grid(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw std::domain_error("log grid needs 0 < lo < hi and n >= 2");
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = lo * std::pow(hi / lo, double(i) / (n - 1));
  g.back() = hi;
  return g;
}

namespace detail {

inline ProfileOptions halved(ProfileOptions o) {
  o.rtol *= 0.5;
  o.atol *= 0.5;
  return o;
}

}  // namespace detail

inline Bracket bisect_threshold(const ProblemParams& q, double a_lo, double a_hi, const ProfileOptions& o = {},
                                const BisectOptions& bo = {}) {
  if (!(a_lo > 0.0) || !(a_hi > a_lo)) throw std::domain_error("bracket needs 0 < lo < hi");
  const auto tlo = integrate_profile(q, a_lo, o);
  const auto thi = integrate_profile(q, a_hi, o);
  const Side slo = side_of(tlo), shi = side_of(thi);
  if (tlo.termination == TailClass::Unresolved || thi.termination == TailClass::Unresolved)
    throw std::domain_error("bracket endpoint is Unresolved");
  if (slo == shi || slo == Side::Unknown || shi == Side::Unknown || slo == Side::Threshold ||
      shi == Side::Threshold)
    throw std::domain_error("bracket endpoints must classify on different sides");

  Bracket b;
  b.lo = a_lo;
  b.hi = a_hi;
  b.lo_class = tlo.termination;
  b.hi_class = thi.termination;

  // one bisection step on br; false when the midpoint cannot be placed
  auto halve = [&](Bracket& br) -> bool {
    const double mid = 0.5 * (br.lo + br.hi);
    if (!(mid > br.lo && mid < br.hi)) return false;
    auto t = integrate_profile(q, mid, o);
    ++br.iterations;
    const Side s = side_of(t);
    const TailClass c = t.termination;
    if (&br == &b && c == TailClass::AlgebraicDecay && (!b.algebraic_max || mid > *b.algebraic_max))
      b.algebraic_max = mid;
    if (&br == &b && c == TailClass::TransversalZero && (!b.transversal_min || mid < *b.transversal_min))
      b.transversal_min = mid;
    if (c == TailClass::CompactSupport || c == TailClass::GaussianTail) {
      b.threshold_A = mid;
      b.threshold_trajectory = std::move(t);
    }
    if (s == Side::Unknown || s == Side::Threshold) {
      // saddle shadowing beyond the budget limits the achievable width
      br.note = "midpoint unresolved; bisection stopped at the achievable width";
      return false;
    }
    (s == slo ? br.lo : br.hi) = mid;
    (s == slo ? br.lo_class : br.hi_class) = c;
    return true;
  };

  // the reported bracket stops at rel_tol so that it can survive tolerance
  // refinement
  while (b.rel_width() >= bo.rel_tol && halve(b)) {
  }

  // the Q5 signature needs a trajectory much closer to the threshold than the
  // reported width; keep halving a copy down to the width floor
  if (bo.seek_threshold_trajectory) {
    Bracket deep{b.lo, b.hi, b.lo_class, b.hi_class};
    while (deep.rel_width() >= bo.min_rel_width && halve(deep)) {
    }
    b.refine_iterations = deep.iterations;
    b.refined_width = deep.rel_width();
    if (!b.threshold_trajectory && b.note.empty()) b.note = "no Q5-branch midpoint before the width floor";
  }

  if (bo.validate_endpoints) {
    const auto h = detail::halved(o);
    const bool lo_same = side_of(integrate_profile(q, b.lo, h)) == slo;
    const bool hi_same = side_of(integrate_profile(q, b.hi, h)) == shi;
    if (!lo_same || !hi_same) {
      b.valid = false;
      b.note = "endpoint class changed under tolerance refinement";
    }
  }
  return b;
}

inline ShootingReport shoot(const ProblemParams& q, const std::vector<double>& a_grid, const ProfileOptions& o = {},
                            const SweepOptions& so = {}, const BisectOptions& bo = {}) {
  ShootingReport r{q, o, sweep(q, a_grid, o, so), {}, {}, {}, 0.0};
  std::vector<std::size_t> order(r.grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return r.grid[a].A < r.grid[b].A; });

  auto side_at = [&](std::size_t i) {
    const auto& g = r.grid[i];
    ProfileTrajectory t;
    t.termination = g.cls;
    t.q5_exit = g.q5_exit;
    return side_of(t);
  };
  for (std::size_t j = 0; j + 1 < order.size(); ++j) {
    const Side a = side_at(order[j]), b = side_at(order[j + 1]);
    if (a == Side::Unknown || b == Side::Unknown || a == Side::Threshold || b == Side::Threshold || a == b)
      continue;
    r.flips.push_back(bisect_threshold(q, r.grid[order[j]].A, r.grid[order[j + 1]].A, o, bo));
  }

  for (const auto& g : r.grid)
    if (g.cls == TailClass::TransversalZero && (!r.a_star_upper || g.A < *r.a_star_upper)) r.a_star_upper = g.A;
  for (const auto& f : r.flips) {
    if (!f.valid) continue;
    std::optional<double> t = f.transversal_min;
    if (f.hi_class == TailClass::TransversalZero) t = f.hi;
    if (t && (!r.a_star_upper || *t < *r.a_star_upper)) r.a_star_upper = t;
  }
  auto below = [&](double A) { return !r.a_star_upper || A < *r.a_star_upper; };
  for (const auto& g : r.grid)
    if (g.cls == TailClass::AlgebraicDecay && below(g.A) && (!r.a_star_lower || g.A > *r.a_star_lower))
      r.a_star_lower = g.A;
  for (const auto& f : r.flips) {
    if (!f.valid) continue;
    std::optional<double> a = f.algebraic_max;
    if (f.lo_class == TailClass::AlgebraicDecay) a = f.lo;
    if (a && below(*a) && (!r.a_star_lower || *a > *r.a_star_lower)) r.a_star_lower = a;
  }
  for (const auto& f : r.flips) r.bracket_width = std::max(r.bracket_width, f.hi - f.lo);
  return r;
}

struct CSweepPoint {
  double C = 0.0;
  double A = 0.0;
  PhaseEndpoint endpoint = PhaseEndpoint::Unresolved;
  TailClass cls = TailClass::Unresolved;
  Q5Exit q5_exit = Q5Exit::None;
  bool consistent = false;
};

// the family l_C through the phase system, compared with profiles at A(C)
inline std::vector<CSweepPoint> sweep_c(const ProblemParams& q, const std::vector<double>& c_grid,
                                        const ProfileOptions& o = {}, const SweepOptions& so = {},
                                        double eps = 1e-6) {
  std::vector<CSweepPoint> out(c_grid.size());
  parallel_for(c_grid.size(), sweep_threads(so.threads, c_grid.size()), [&](std::size_t i) {
    CSweepPoint p;
    p.C = c_grid[i];
    p.A = c_to_a(q, p.C);
    p.endpoint = integrate_phase(q, seed_unstable_manifold(q, p.C, eps), phase_options_from(o)).endpoint;
    const auto t = integrate_profile(q, p.A, o);
    p.cls = t.termination;
    p.q5_exit = t.q5_exit;
    p.consistent = endpoint_consistent(t, p.endpoint);
    out[i] = p;
  });
  return out;
}

}  // namespace hhp
