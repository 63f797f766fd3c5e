#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dopri5.hpp"
#include "exponents.hpp"
#include "phase_system.hpp"

namespace hhp {

struct ProfileState {
  double xi = 0.0;
  double f = 0.0;
  double w = 0.0;  // (f^m)'
};

enum class TailClass { AlgebraicDecay, CompactSupport, GaussianTail, TransversalZero, Unresolved, DiagnosticQ4 };

inline std::string_view to_string(TailClass c) {
  switch (c) {
    case TailClass::AlgebraicDecay: return "AlgebraicDecay";
    case TailClass::CompactSupport: return "CompactSupport";
    case TailClass::GaussianTail: return "GaussianTail";
    case TailClass::TransversalZero: return "TransversalZero";
    case TailClass::Unresolved: return "Unresolved";
    case TailClass::DiagnosticQ4: return "DiagnosticQ4";
  }
  return "?";
}

// side on which a trajectory leaves the Q5 neighbourhood
enum class Q5Exit { None, Q1, Q3, Unknown };

inline std::string_view to_string(Q5Exit e) {
  switch (e) {
    case Q5Exit::None: return "none";
    case Q5Exit::Q1: return "Q1";
    case Q5Exit::Q3: return "Q3";
    case Q5Exit::Unknown: return "unknown";
  }
  return "?";
}

struct ProfileOptions {
  double xi_max = 1e4;
  double rtol = 1e-10;
  double atol = 1e-12;
  // TransversalZero when the flux at the zero event exceeds this multiple of
  // the flux predicted by the interface law
  double edge_factor = 2.0;
  double tail_flatness = 1e-4;
  double gauss_tol = 1e-3;
  // slow-manifold tail: k/X below slow_delta and the relaxed-state residual
  // below slow_match
  double slow_delta = 1e-4;
  double slow_match = 1e-6;
  // continue in the x-chart once f < handoff_fraction*A near Q5
  double handoff_fraction = 1e-3;
  long max_steps = 2'000'000;
  double xi0 = 0.0;  // 0 selects the automatic start radius
  int edge_samples = 50;
};

struct ProfileTrajectory {
  std::vector<ProfileState> samples;
  TailClass termination = TailClass::Unresolved;
  std::optional<double> tail_constant;
  std::optional<double> support_edge;
  std::optional<double> edge_slope;

  Q5Exit q5_exit = Q5Exit::None;
  double zero_threshold = 0.0;
  std::optional<double> flux_ratio;       // (f^m)' at the zero event over the interface prediction
  std::optional<double> handoff_xi;       // x-chart continuation started here
  std::optional<double> slow_tail_xi;     // slow-manifold tail started here
  double gaussian_span_lo = 0.0, gaussian_span_hi = 0.0;
  double xi0 = 0.0;
  long steps = 0;
  std::string note;
};

inline ProblemParams require_fujita_range(const ProblemParams& q) {
  if (q.p() <= fujita_exponent(q)) throw std::domain_error("profiles need p > p_F");
  return q;
}

inline Vec<2> ode_rhs(const ProblemParams& q, const ProfileState& s) {
  if (!(s.f > 0.0)) throw std::domain_error("degenerate state - event handling required");
  if (!(s.xi > 0.0)) throw std::domain_error("xi must be positive");
  const auto e = derive_exponents(q);
  const double m = q.m();
  const double fp = s.w / (m * std::pow(s.f, m - 1.0));
  const double dw = -(q.dim() - 1.0) * s.w / s.xi - e.alpha * s.f - e.beta * s.xi * fp -
                    std::pow(s.xi, q.sigma()) * std::pow(s.f, q.p());
  return {fp, dw};
}

// residual of (f^m)'' + (N-1)/xi (f^m)' + alpha f + beta xi f' + xi^sigma f^p
inline double ode_residual(const ProblemParams& q, double xi, double f, double fp, double fpp) {
  const auto e = derive_exponents(q);
  const double m = q.m();
  const double fm1 = std::pow(f, m - 1.0);
  const double dfm = m * fm1 * fp;
  const double d2fm = m * fm1 * fpp + (m > 1.0 ? m * (m - 1.0) * std::pow(f, m - 2.0) * fp * fp : 0.0);
  return d2fm + (q.dim() - 1.0) / xi * dfm + e.alpha * f + e.beta * xi * fp +
         std::pow(xi, q.sigma()) * std::pow(f, q.p());
}

inline ProfileState series_start(const ProblemParams& q, double A, double xi0) {
  if (!(A > 0.0)) throw std::domain_error("A must be positive");
  if (!(xi0 > 0.0)) throw std::domain_error("xi0 must be positive");
  const auto e = derive_exponents(q);
  const double m = q.m(), p = q.p(), s = q.sigma(), N = q.dim();

  if (s < 0.0) {
    const double d = (p - m) / (m * (N + s) * (s + 2.0));
    const double f = std::pow(std::pow(A, m - p) + d * std::pow(xi0, s + 2.0), -1.0 / (p - m));
    return {xi0, f, -std::pow(f, p) * std::pow(xi0, s + 1.0) / (N + s)};
  }
  // for sigma = 0 the reaction enters at the same order as the self-similar term
  const double a = e.alpha + (s == 0.0 ? std::pow(A, p - 1.0) : 0.0);
  if (m == 1.0) {
    const double f = A * std::exp(-a * xi0 * xi0 / (2.0 * N));
    return {xi0, f, -a * xi0 * f / N};
  }
  const double base = std::pow(A, m - 1.0) - a * (m - 1.0) * xi0 * xi0 / (2.0 * m * N);
  if (!(base > 0.0)) throw std::domain_error("xi0 too large for the series start");
  const double f = std::pow(base, 1.0 / (m - 1.0));
  return {xi0, f, -a * xi0 * f / N};
}

inline PhaseState profile_to_phase(const ProblemParams& q, const ProfileState& s) {
  const auto e = derive_exponents(q);
  const double m = q.m();
  return {e.alpha / m * s.xi * s.xi * std::pow(s.f, 1.0 - m), s.xi * s.w / (m * std::pow(s.f, m)),
          std::pow(s.xi, q.sigma() + 2.0) * std::pow(s.f, q.p() - m) / m, std::log(s.xi)};
}

inline ProfileState phase_to_profile(const ProblemParams& q, const PhaseState& s) {
  if (!(s.Z > 0.0)) throw std::domain_error("profile reconstruction needs Z > 0");
  const double m = q.m();
  const double xi = std::exp(s.eta);
  const double f = std::exp((std::log(m * s.Z) - (q.sigma() + 2.0) * s.eta) / (q.p() - m));
  return {xi, f, m * std::pow(f, m) * s.Y / xi};
}

namespace detail {

struct TailModel {
  double m, p, N, k, beta, nu, b, c1;

  explicit TailModel(const ProblemParams& q) {
    const auto e = derive_exponents(q);
    m = q.m();
    p = q.p();
    N = q.dim();
    k = tail_exponent(q);
    beta = e.beta;
    nu = 1.0 / e.beta;
    b = m * k * (m * k + 2.0 - N);
    c1 = N - 2.0 - 2.0 * m * k;
  }

  double phi1(double G) const { return -(b * std::pow(G, m) + std::pow(G, p)) / beta; }

  // outer expansion of dG/deta for g = xi^k f, eps = xi^{-nu}
  double dG(double eta, double G) const {
    const double eps = std::exp(-nu * eta);
    const double p1 = phi1(G);
    const double p2 = -(c1 - nu) * m * std::pow(G, m - 1.0) * p1 / beta;
    return eps * p1 + eps * eps * p2;
  }

  ProfileState profile(double eta, double G) const {
    const double xi = std::exp(eta);
    const double Ge = dG(eta, G);
    return {xi, G * std::pow(xi, -k),
            std::pow(xi, -m * k - 1.0) * (m * std::pow(G, m - 1.0) * Ge - m * k * std::pow(G, m))};
  }
};

inline double start_radius(const ProblemParams& q, double A, double atol) {
  const auto e = derive_exponents(q);
  const double m = q.m(), p = q.p(), s = q.sigma(), N = q.dim();
  if (s > 0.0) {
    double xi0 = 1e-3 * std::min(1.0, std::pow(A, (m - 1.0) / 2.0));
    const double react = std::pow(atol * m * (N + s) * (s + 2.0) / std::pow(A, p - m), 1.0 / (s + 2.0));
    return std::min(xi0, react);
  }
  if (s == 0.0) {
    const double a = e.alpha + std::pow(A, p - 1.0);
    return 0.5 * std::sqrt(2.0 * N * std::sqrt(atol) * std::pow(A, m - 1.0) / a);
  }
  const double by_alpha = std::sqrt(2.0 * N * atol * std::pow(A, m - 1.0) / e.alpha);
  const double d = (p - m) / (m * (N + s) * (s + 2.0));
  const double by_react = std::pow(std::sqrt(atol) / (d * std::pow(A, p - m)), 1.0 / (s + 2.0));
  return std::min(by_alpha, by_react);
}

// least squares fit of f^{m-1} = a + b xi over the given samples
inline std::pair<double, double> edge_fit(const std::vector<ProfileState>& v, double m, int count) {
  const std::size_t n = std::min<std::size_t>(v.size(), std::size_t(count));
  const std::size_t first = v.size() - n;
  // centred sums; the window is narrow compared with xi itself
  double mx = 0, my = 0;
  for (std::size_t i = first; i < v.size(); ++i) mx += v[i].xi, my += std::pow(v[i].f, m - 1.0);
  mx /= n, my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = first; i < v.size(); ++i) {
    const double dx = v[i].xi - mx;
    sxx += dx * dx;
    sxy += dx * (std::pow(v[i].f, m - 1.0) - my);
  }
  const double b = sxy / sxx;
  return {my - b * mx, b};
}

}  // namespace detail

inline double auto_start_radius(const ProblemParams& q, double A, double atol) {
  return detail::start_radius(q, A, atol);
}

// interface slope (f^{m-1})' at a support edge xi0
inline double interface_slope(const ProblemParams& q, double xi0) {
  const auto e = derive_exponents(q);
  return -(q.m() - 1.0) * (q.p() - q.m()) * e.alpha * xi0 / (q.m() * (q.sigma() + 2.0));
}

class ProfileIntegrator {
 public:
  ProfileIntegrator(const ProblemParams& q, double A, const ProfileOptions& o)
      : q_(require_fujita_range(q)), A_(A), o_(o), ex_(derive_exponents(q)), tail_(q) {
    if (!(A > 0.0) || !std::isfinite(A)) throw std::domain_error("A must be positive and finite");
    m_ = q.m();
    k_ = tail_exponent(q);
    f_thr_ = std::sqrt(o.atol) * A;
    tr_.zero_threshold = f_thr_;
  }

  ProfileTrajectory run() {
    double xi0 = o_.xi0 > 0.0 ? o_.xi0 : detail::start_radius(q_, A_, o_.atol);
    if (q_.sigma() < 0.0 && o_.xi0 <= 0.0) xi0 = refine_negative_sigma_start(xi0);
    tr_.xi0 = xi0;
    const ProfileState s0 = series_start(q_, A_, xi0);
    tr_.samples.push_back(s0);
    integrate_fw(s0);
    return std::move(tr_);
  }

 private:
  auto fw_rhs() const {
    return [this](double xi, const Vec<2>& u) -> Vec<2> {
      const double f = u[0], w = u[1];
      if (!(f > 0.0)) return {NAN, NAN};
      const double fp = w / (m_ * std::pow(f, m_ - 1.0));
      return {fp, -(q_.dim() - 1.0) * w / xi - ex_.alpha * f - ex_.beta * xi * fp -
                      std::pow(xi, q_.sigma()) * std::pow(f, q_.p())};
    };
  }

  Vec<2> fw_atol() const { return {o_.atol * std::min(1.0, A_), o_.atol * std::min(1.0, std::pow(A_, m_))}; }

  // for sigma < 0 the next term of the expansion is unknown; shrink xi0 until
  // integrating from a ten times smaller start reproduces the series value
  double refine_negative_sigma_start(double xi0) {
    auto rhs = fw_rhs();
    for (int it = 0; it < 12; ++it) {
      const ProfileState a = series_start(q_, A_, xi0 / 10.0);
      const ProfileState b = series_start(q_, A_, xi0);
      Dopri5<2, decltype(rhs)> st(rhs, a.xi, {a.f, a.w}, o_.rtol, fw_atol());
      bool ok = true;
      while (st.t() < xi0)
        if (st.step(xi0) != StepStatus::Accepted) {
          ok = false;
          break;
        }
      if (ok && std::abs(st.y()[0] - b.f) <= 1e-9 * b.f) return xi0;
      xi0 /= 10.0;
    }
    tr_.note = "negative-sigma start not verified";
    return xi0;
  }

  void track_gaussian(double xi, double ratio) {
    if (m_ != 1.0) return;
    if (std::abs(ratio + 0.5) < o_.gauss_tol) {
      if (g_open_ < 0.0) g_open_ = xi;
      if (xi - g_open_ > tr_.gaussian_span_hi - tr_.gaussian_span_lo || tr_.gaussian_span_hi == 0.0) {
        if (xi / g_open_ > (tr_.gaussian_span_lo > 0 ? tr_.gaussian_span_hi / tr_.gaussian_span_lo : 1.0)) {
          tr_.gaussian_span_lo = g_open_;
          tr_.gaussian_span_hi = xi;
        }
      }
    } else {
      g_open_ = -1.0;
    }
  }

  bool gaussian_decade() const {
    return tr_.gaussian_span_lo > 0.0 && tr_.gaussian_span_hi >= 10.0 * tr_.gaussian_span_lo;
  }

  double gaussian_constant(const ProfileState& s) const {
    // e^{xi^2/4} xi^{N - 2 alpha} f
    return std::exp(s.xi * s.xi / 4.0 + (q_.dim() - 2.0 * ex_.alpha) * std::log(s.xi) + std::log(s.f));
  }

  bool slow_ready(double X, double Y, double eta, double G) const {
    if (!(X > 0.0) || k_ / X > o_.slow_delta) return false;
    return std::abs(k_ + Y - tail_.dG(eta, G) / G) <= o_.slow_match;
  }

  // flux ratio r = y / y(Q5); r ~ 1 on the interface law, r -> inf toward Q3
  double flux_ratio(double X, double Y) const { return -k_ * Y / X; }

  void finish(TailClass c) { tr_.termination = c; }

  void finish_by_monitor() {
    const double xi_end = tr_.samples.back().xi;
    if (xi_end >= o_.xi_max * (1.0 - 1e-12) && flat_last_decade()) {
      finish(TailClass::AlgebraicDecay);
      const auto& s = tr_.samples.back();
      tr_.tail_constant = std::pow(s.xi, k_) * s.f;
      return;
    }
    if (m_ == 1.0 && gaussian_decade()) {
      finish(TailClass::GaussianTail);
      tr_.tail_constant = gaussian_constant(tr_.samples.back());
      return;
    }
    tr_.note = "tail monitor did not stabilise";
    finish(TailClass::Unresolved);
  }

  bool flat_last_decade() const {
    const double xi_end = tr_.samples.back().xi;
    double sum = 0.0;
    int n = 0;
    for (auto it = tr_.samples.rbegin(); it != tr_.samples.rend() && it->xi >= xi_end / 10.0; ++it) {
      sum += std::pow(it->xi, k_) * it->f;
      ++n;
    }
    if (n < 3 || tr_.samples.front().xi > xi_end / 10.0) return false;
    const double mean = sum / n;
    double dev = 0.0;
    for (auto it = tr_.samples.rbegin(); it != tr_.samples.rend() && it->xi >= xi_end / 10.0; ++it)
      dev = std::max(dev, std::abs(std::pow(it->xi, k_) * it->f - mean));
    return dev < o_.tail_flatness * std::abs(mean);
  }

  void push(const ProfileState& s) {
    if (s.xi > tr_.samples.back().xi) tr_.samples.push_back(s);
  }

  void integrate_fw(const ProfileState& s0) {
    auto rhs = fw_rhs();
    Dopri5<2, decltype(rhs)> st(rhs, s0.xi, {s0.f, s0.w}, o_.rtol, fw_atol());
    for (;;) {
      if (++tr_.steps > o_.max_steps) {
        tr_.note = "step budget exhausted";
        return finish(TailClass::Unresolved);
      }
      // the tail is stiff for an explicit method; the step-size controller
      // keeps the fast component at the noise level set by atol, so atol has
      // to follow the magnitude of the state
      {
        const auto base = fw_atol();
        const auto& u = st.y();
        st.set_atol({std::max(std::min(base[0], 1e-6 * std::abs(u[0])), 1e-6 * base[0]),
                     std::max(std::min(base[1], 1e-6 * std::abs(u[1])), 1e-6 * base[1])});
      }
      const StepStatus status = st.step(o_.xi_max);
      if (status != StepStatus::Accepted) {
        tr_.note = status == StepStatus::StepUnderflow ? "step size underflow" : "non-finite state";
        return finish(TailClass::Unresolved);
      }
      const double xi = st.t();
      const double f = st.y()[0], w = st.y()[1];

      if (f <= f_thr_) {
        // localise f = threshold on the dense output
        double lo = st.t_prev(), hi = xi;
        for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
          const double mid = 0.5 * (lo + hi);
          (st.dense(mid)[0] > f_thr_ ? lo : hi) = mid;
        }
        const auto u = st.dense(lo);
        const ProfileState ev{lo, u[0], u[1]};
        push(ev);
        const PhaseState ph = profile_to_phase(q_, ev);
        return zero_event(ph, ev, nullptr);
      }

      const ProfileState s{xi, f, w};
      push(s);
      const PhaseState ph = profile_to_phase(q_, s);
      track_gaussian(xi, ph.Y / (xi * xi));

      if (ph.Z > 1e12 && ph.Z > 1e12 * ph.X) {
        tr_.note = "Z -> inf with Z/X -> inf";
        return finish(TailClass::DiagnosticQ4);
      }
      const double G = std::pow(xi, k_) * f;
      if (slow_ready(ph.X, ph.Y, ph.eta, G)) return slow_tail(ph.eta, G);

      const double r = flux_ratio(ph.X, ph.Y);
      if (f <= o_.handoff_fraction * A_ && r > 1.0 / o_.edge_factor && r < o_.edge_factor) {
        tr_.handoff_xi = xi;
        return continue_x(ph);
      }
      if (xi >= o_.xi_max) return finish_by_monitor();
    }
  }

  void zero_event(const PhaseState& ph, const ProfileState& ev, void*) {
    const double r = flux_ratio(ph.X, ph.Y);
    tr_.flux_ratio = r;
    if (r > o_.edge_factor) return finish(TailClass::TransversalZero);
    if (m_ > 1.0) {
      finish(TailClass::CompactSupport);
      const auto [a, b] = detail::edge_fit(tr_.samples, m_, o_.edge_samples);
      tr_.edge_slope = b;
      tr_.support_edge = -a / b;
    } else {
      finish(TailClass::GaussianTail);
      tr_.tail_constant = gaussian_constant(ev);
    }
    tr_.q5_exit = Q5Exit::Unknown;
  }

  // x-chart continuation: (x, y, z, eta) in eta1
  void continue_x(const PhaseState& start) {
    const FieldCoeffs<double> c(q_);
    auto g = [&c](double, const Vec<4>& u) {
      const auto d = chart_x_field(c, u[0], u[1], u[2]);
      return Vec<4>{d[0], d[1], d[2], u[0]};
    };
    const ProjectedState ps = to_projected(start);
    constexpr double tiny = 1e-300;
    Dopri5<4, decltype(g)> st(g, 0.0, {ps.x, ps.y, ps.z, start.eta}, o_.rtol,
                              {tiny, o_.atol, tiny, o_.atol});
    const double cap = 0.05 / std::max(1.0, (m_ - 1.0) * c.kk);
    const double side = 2.0;
    bool recording = true;

    auto to_profile = [&](const Vec<4>& u) {
      return phase_to_profile(q_, to_phase({u[0], u[1], u[2], 0.0}, u[3]));
    };

    for (;;) {
      if (++tr_.steps > o_.max_steps) {
        tr_.note = "step budget exhausted";
        if (recording) return finish(TailClass::Unresolved);
        return;
      }
      if (recording) st.set_max_step(cap);
      else st.set_max_step(std::numeric_limits<double>::infinity());
      if (st.step() != StepStatus::Accepted) {
        tr_.note = "step size underflow in x-chart";
        if (recording) finish(TailClass::Unresolved);
        return;
      }
      const Vec<4> u = st.y();
      if (!(u[0] > 0.0) || !(u[2] > 0.0)) {
        tr_.note = "x-chart state left the positive cone";
        if (recording) finish(TailClass::Unresolved);
        return;
      }
      const double X = 1.0 / u[0], Y = u[1] / u[0];
      const double r = flux_ratio(X, Y);

      if (!recording) {
        if (r < 1.0 / side) {
          tr_.q5_exit = Q5Exit::Q1;
          return;
        }
        if (r > side) {
          tr_.q5_exit = Q5Exit::Q3;
          return;
        }
        continue;
      }

      const ProfileState s = to_profile(u);
      if (s.f <= f_thr_) {
        double lo = st.t_prev(), hi = st.t();
        for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++i) {
          const double mid = 0.5 * (lo + hi);
          (to_profile(st.dense(mid)).f > f_thr_ ? lo : hi) = mid;
        }
        const auto ue = st.dense(lo);
        const ProfileState ev = to_profile(ue);
        push(ev);
        zero_event(to_phase({ue[0], ue[1], ue[2], 0.0}, ue[3]), ev, nullptr);
        if (tr_.termination == TailClass::TransversalZero) return;
        recording = false;
        continue;
      }
      push(s);
      track_gaussian(s.xi, Y / (s.xi * s.xi));

      const double Z = u[2] / u[0];
      if (Z > 1e12 && u[2] > 1e12) {
        tr_.note = "Z -> inf with Z/X -> inf";
        return finish(TailClass::DiagnosticQ4);
      }
      const double G = std::pow(s.xi, k_) * s.f;
      if (slow_ready(X, Y, u[3], G)) return slow_tail(u[3], G);
      if (s.xi >= o_.xi_max) return finish_by_monitor();
    }
  }

  void slow_tail(double eta0, double G0) {
    tr_.slow_tail_xi = std::exp(eta0);
    const double eta_end = std::log(o_.xi_max);
    double eta = eta0, G = G0;
    if (eta0 < eta_end) {
      auto rhs = [this](double e, const Vec<1>& u) { return Vec<1>{tail_.dG(e, u[0])}; };
      Dopri5<1, decltype(rhs)> st(rhs, eta0, {G0}, o_.rtol, {o_.atol * G0});
      st.set_max_step(0.05);
      while (st.t() < eta_end) {
        if (++tr_.steps > o_.max_steps || st.step(eta_end) != StepStatus::Accepted) {
          tr_.note = "slow tail integration failed";
          return finish(TailClass::Unresolved);
        }
        push(tail_.profile(st.t(), st.y()[0]));
      }
      eta = st.t();
      G = st.y()[0];
    }
    if (!flat_last_decade()) {
      tr_.note = "tail monitor did not stabilise";
      return finish(TailClass::Unresolved);
    }
    finish(TailClass::AlgebraicDecay);
    tr_.tail_constant = G + tail_.phi1(G) * std::exp(-tail_.nu * eta) / tail_.nu;
  }

  ProblemParams q_;
  double A_;
  ProfileOptions o_;
  DerivedExponents ex_;
  detail::TailModel tail_;
  double m_, k_, f_thr_;
  double g_open_ = -1.0;
  ProfileTrajectory tr_;
};

inline ProfileTrajectory integrate_profile(const ProblemParams& q, double A, const ProfileOptions& o = {}) {
  return ProfileIntegrator(q, A, o).run();
}

struct GProfile {
  std::vector<std::pair<double, double>> g;  // (xi, xi^k f)
  bool interior_minimum = false;
};

inline GProfile g_transform(const ProfileTrajectory& tr, const ProblemParams& q) {
  GProfile out;
  const double k = tail_exponent(q);
  for (const auto& s : tr.samples)
    if (s.f > 0.0) out.g.emplace_back(s.xi, std::pow(s.xi, k) * s.f);
  const auto& g = out.g;
  for (std::size_t i = 1; i + 1 < g.size(); ++i) {
    const double tol = 1e-8 * std::abs(g[i].second);
    if (g[i].second < g[i - 1].second - tol && g[i].second < g[i + 1].second - tol) {
      out.interior_minimum = true;
      break;
    }
  }
  return out;
}

}  // namespace hhp
