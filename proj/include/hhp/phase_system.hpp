#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dopri5.hpp"
#include "exponents.hpp"

namespace hhp {

struct PhaseState {
  double X = 0.0, Y = 0.0, Z = 0.0;
  double eta = 0.0;
};

// projected chart x = 1/X, y = Y/X, z = Z/X
struct ProjectedState {
  double x = 0.0, y = 0.0, z = 0.0;
  double eta1 = 0.0;
};

inline ProjectedState to_projected(const PhaseState& s, double eta1 = 0.0) {
  if (!(s.X > 0.0)) throw std::domain_error("projection needs X > 0");
  return {1.0 / s.X, s.Y / s.X, s.Z / s.X, eta1};
}

inline PhaseState to_phase(const ProjectedState& s, double eta) {
  if (!(s.x > 0.0)) throw std::domain_error("projection needs x > 0");
  return {1.0 / s.x, s.y / s.x, s.z / s.x, eta};
}

template <class T>
struct FieldCoeffs {
  T m, p, sigma, N;
  T kk;  // (p-m)/(sigma+2)

  explicit FieldCoeffs(const ProblemParams& q)
      : m(q.m()), p(q.p()), sigma(q.sigma()), N(q.dim()),
        kk((T(q.p()) - T(q.m())) / (T(q.sigma()) + T(2))) {}
};

template <class T>
std::array<T, 3> phase_field(const FieldCoeffs<T>& c, T X, T Y, T Z) {
  return {X * (T(2) - (c.m - T(1)) * Y),
          -X - (c.N - T(2)) * Y - Z - c.m * Y * Y - c.kk * X * Y,
          Z * (c.sigma + T(2) + (c.p - c.m) * Y)};
}

template <class T>
std::array<T, 3> chart_x_field(const FieldCoeffs<T>& c, T x, T y, T z) {
  return {x * ((c.m - T(1)) * y - T(2) * x),
          -y * y - c.kk * y - x - c.N * x * y - x * z,
          z * ((c.p - T(1)) * y + c.sigma * x)};
}

// chart at Y = -inf (sign +1, Q3) or Y = +inf (sign -1, Q2); variables
// x = X/Y, z = Z/Y, w = 1/Y
template <class T>
std::array<T, 3> chart_y_field(const FieldCoeffs<T>& c, int sign, T x, T z, T w) {
  const T s(sign);
  return {s * (-x - c.N * x * w - c.kk * x * x - x * x * w - x * z * w),
          s * (-c.p * z - (c.N + c.sigma) * z * w - c.kk * x * z - x * z * w - z * z * w),
          s * (-c.m * w - (c.N - T(2)) * w * w - c.kk * x * w - x * w * w - z * w * w)};
}

template <class T>
std::array<T, 3> chart_w_field(const FieldCoeffs<T>& c, T x, T y, T w) {
  return {x * ((c.m - T(1)) * y - T(2) * x),
          -y * y - c.kk * y - x - c.N * x * y - w,
          w * ((c.sigma - T(2)) * x + (c.m + c.p - T(2)) * y)};
}

inline Vec<3> phase_rhs(const ProblemParams& q, const PhaseState& s) {
  return phase_field(FieldCoeffs<double>(q), s.X, s.Y, s.Z);
}

inline Vec<3> chart_x_rhs(const ProblemParams& q, const ProjectedState& s) {
  return chart_x_field(FieldCoeffs<double>(q), s.x, s.y, s.z);
}

inline Vec<3> chart_y_rhs(const ProblemParams& q, int sign, const Vec<3>& s) {
  if (sign != 1 && sign != -1) throw std::invalid_argument("chart sign must be +1 or -1");
  return chart_y_field(FieldCoeffs<double>(q), sign, s[0], s[1], s[2]);
}

inline Vec<3> chart_w_rhs(const ProblemParams& q, const Vec<3>& s) {
  return chart_w_field(FieldCoeffs<double>(q), s[0], s[1], s[2]);
}

using Mat3 = Eigen::Matrix3d;

inline Mat3 phase_jacobian(const ProblemParams& q, double X, double Y, double Z) {
  const FieldCoeffs<double> c(q);
  Mat3 J;
  J << 2.0 - (c.m - 1.0) * Y, -(c.m - 1.0) * X, 0.0,
      -1.0 - c.kk * Y, -(c.N - 2.0) - 2.0 * c.m * Y - c.kk * X, -1.0,
      0.0, (c.p - c.m) * Z, c.sigma + 2.0 + (c.p - c.m) * Y;
  return J;
}

inline Mat3 chart_x_jacobian(const ProblemParams& q, double x, double y, double z) {
  const FieldCoeffs<double> c(q);
  Mat3 J;
  J << (c.m - 1.0) * y - 4.0 * x, (c.m - 1.0) * x, 0.0,
      -1.0 - c.N * y - z, -2.0 * y - c.kk - c.N * x, -x,
      c.sigma * z, (c.p - 1.0) * z, (c.p - 1.0) * y + c.sigma * x;
  return J;
}

inline Mat3 chart_y_jacobian(const ProblemParams& q, int sign, double x, double z, double w) {
  const FieldCoeffs<double> c(q);
  Mat3 J;
  J << -1.0 - c.N * w - 2.0 * c.kk * x - 2.0 * x * w - z * w, -x * w,
      -c.N * x - x * x - x * z,
      -c.kk * z - z * w, -c.p - (c.N + c.sigma) * w - c.kk * x - x * w - 2.0 * z * w,
      -(c.N + c.sigma) * z - x * z - z * z,
      -c.kk * w - w * w, -w * w,
      -c.m - 2.0 * (c.N - 2.0) * w - c.kk * x - 2.0 * x * w - 2.0 * z * w;
  return double(sign) * J;
}

template <class F>
Mat3 finite_difference_jacobian(F field, const Vec<3>& at, double h = 1e-5) {
  Mat3 J;
  for (int j = 0; j < 3; ++j) {
    Vec<3> a = at, b = at;
    a[j] += h;
    b[j] -= h;
    const auto fa = field(a), fb = field(b);
    for (int i = 0; i < 3; ++i) J(i, j) = (fa[i] - fb[i]) / (2.0 * h);
  }
  return J;
}

enum class Chart { Finite, XProjected, YProjected, Poincare };

inline std::string_view to_string(Chart c) {
  switch (c) {
    case Chart::Finite: return "finite";
    case Chart::XProjected: return "x-proj";
    case Chart::YProjected: return "y-proj";
    case Chart::Poincare: return "poincare";
  }
  return "?";
}

struct CriticalPoint {
  std::string name;
  Chart chart;
  Vec<3> coords;
  std::vector<std::complex<double>> eigenvalues;
  std::vector<Eigen::Vector3cd> eigenvectors;
  std::string nature;
};

namespace detail {

// eigenvectors from the analytic Jacobian, ordered to match the closed-form list
inline std::vector<Eigen::Vector3cd> matched_eigenvectors(const Mat3& J,
                                                          const std::vector<std::complex<double>>& lam) {
  Eigen::EigenSolver<Mat3> es(J);
  std::vector<Eigen::Vector3cd> out;
  std::vector<bool> used(3, false);
  for (const auto& l : lam) {
    int best = -1;
    double dist = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
      if (used[i]) continue;
      const double d = std::abs(es.eigenvalues()[i] - l);
      if (d < dist) dist = d, best = i;
    }
    used[best] = true;
    Eigen::Vector3cd v = es.eigenvectors().col(best);
    int piv = 0;
    for (int i = 1; i < 3; ++i)
      if (std::abs(v[i]) > std::abs(v[piv]) + 1e-12) piv = i;
    v /= v[piv] / std::abs(v[piv]);
    out.push_back(v.normalized());
  }
  return out;
}

inline std::vector<std::complex<double>> as_complex(std::initializer_list<double> v) {
  return {v.begin(), v.end()};
}

}  // namespace detail

// closed-form spectra
inline std::vector<std::complex<double>> p0_eigenvalues(const ProblemParams& q) {
  return detail::as_complex({2.0, -(q.dim() - 2.0), q.sigma() + 2.0});
}

inline Vec<3> p1_coords(const ProblemParams& q) { return {0.0, -(q.dim() - 2.0) / q.m(), 0.0}; }

inline std::vector<std::complex<double>> p1_eigenvalues(const ProblemParams& q) {
  const double n2 = q.dim() - 2.0;
  return detail::as_complex({2.0 + (q.m() - 1.0) * n2 / q.m(), n2,
                             q.sigma() + 2.0 - (q.p() - q.m()) * n2 / q.m()});
}

inline Vec<3> p2_coords(const ProblemParams& q) {
  const double d = q.p() - q.m();
  const double pc = first_critical_exponent(q).value();
  return {0.0, -(q.sigma() + 2.0) / d, (q.dim() - 2.0) * (q.sigma() + 2.0) * (q.p() - pc) / (d * d)};
}

// 2 + (m-1)k along X, and the roots of l^2 - T l + D inside {X=0}
// with T = 2mk - (N-2), D = (p-m) Z(P2)
inline std::vector<std::complex<double>> p2_eigenvalues(const ProblemParams& q) {
  const double k = tail_exponent(q);
  const double T = 2.0 * q.m() * k - (q.dim() - 2.0);
  const double D = (q.p() - q.m()) * p2_coords(q)[2];
  const std::complex<double> disc = std::sqrt(std::complex<double>(T * T - 4.0 * D));
  return {2.0 + (q.m() - 1.0) * k, 0.5 * (T + disc), 0.5 * (T - disc)};
}

inline Vec<3> q5_coords(const ProblemParams& q) {
  return {0.0, -(q.p() - q.m()) / (q.sigma() + 2.0), 0.0};
}

inline std::vector<std::complex<double>> q5_eigenvalues(const ProblemParams& q) {
  const double kk = (q.p() - q.m()) / (q.sigma() + 2.0);
  return detail::as_complex({-(q.m() - 1.0) * kk, kk, -(q.p() - 1.0) * kk});
}

inline std::vector<std::complex<double>> q1_eigenvalues(const ProblemParams& q) {
  return detail::as_complex({0.0, -(q.p() - q.m()) / (q.sigma() + 2.0), 0.0});
}

inline std::vector<CriticalPoint> catalog_critical_points(const ProblemParams& q) {
  using detail::matched_eigenvectors;
  std::vector<CriticalPoint> out;
  const int N = q.dim();

  {
    auto lam = p0_eigenvalues(q);
    std::string nature = N >= 3 ? "saddle: 2D unstable manifold (X, Z directions), 1D stable manifold"
                                : (N == 2 ? "non-hyperbolic: coincides with P1"
                                          : "unstable node");
    out.push_back({"P0", Chart::Finite, {0, 0, 0}, lam,
                   matched_eigenvectors(phase_jacobian(q, 0, 0, 0), lam), nature});
  }
  if (N != 2) {
    const auto c = p1_coords(q);
    auto lam = p1_eigenvalues(q);
    std::string nature;
    if (N == 1) nature = "unstable node";
    else if (lam[2].real() < 0) nature = "saddle: 2D unstable manifold, 1D stable manifold";
    else if (lam[2].real() > 0) nature = "unstable node";
    else nature = "non-hyperbolic (p = p_c)";
    out.push_back({"P1", Chart::Finite, c, lam,
                   matched_eigenvectors(phase_jacobian(q, c[0], c[1], c[2]), lam), nature});
  }
  if (N >= 3 && q.p() > first_critical_exponent(q).value()) {
    const auto c = p2_coords(q);
    auto lam = p2_eigenvalues(q);
    std::string nature;
    const double re = lam[1].real();
    const bool focus = std::abs(lam[1].imag()) > 0.0;
    if (re > 0) nature = focus ? "unstable focus in {X=0}, unstable along X" : "unstable node";
    else if (re < 0) nature = focus ? "stable focus in {X=0}, unstable along X" : "stable node in {X=0}, unstable along X";
    else nature = "center in {X=0} (p = p_S)";
    out.push_back({"P2", Chart::Finite, c, lam,
                   matched_eigenvectors(phase_jacobian(q, c[0], c[1], c[2]), lam), nature});
  }
  {
    auto lam = q1_eigenvalues(q);
    out.push_back({"Q1", Chart::XProjected, {0, 0, 0}, lam,
                   matched_eigenvectors(chart_x_jacobian(q, 0, 0, 0), lam),
                   "non-hyperbolic attractor for orbits from the finite region (center manifolds)"});
  }
  {
    auto lam = detail::as_complex({1.0, q.p(), q.m()});
    out.push_back({"Q2", Chart::YProjected, {0, 0, 0}, lam,
                   matched_eigenvectors(chart_y_jacobian(q, -1, 0, 0, 0), lam), "unstable node"});
  }
  {
    auto lam = detail::as_complex({-1.0, -q.p(), -q.m()});
    out.push_back({"Q3", Chart::YProjected, {0, 0, 0}, lam,
                   matched_eigenvectors(chart_y_jacobian(q, 1, 0, 0, 0), lam), "stable node"});
  }
  out.push_back({"Q4", Chart::Poincare, {0, 0, 1}, {}, {},
                 "non-hyperbolic; no connections with the finite region"});
  {
    const auto c = q5_coords(q);
    auto lam = q5_eigenvalues(q);
    std::string nature = q.m() > 1.0 ? "saddle: 2D stable manifold, 1D unstable manifold"
                                     : "saddle-node: center-stable manifold, 1D unstable manifold";
    out.push_back({"Q5", Chart::XProjected, c, lam,
                   matched_eigenvectors(chart_x_jacobian(q, c[0], c[1], c[2]), lam), nature});
  }
  {
    const double kappa = 1.0;  // gamma = 1/sqrt(2)
    auto lam = detail::as_complex({0.0, -(q.p() - q.m()) / (q.sigma() + 2.0), 0.0});
    out.push_back({"Qgamma", Chart::XProjected, {0, 0, kappa}, lam,
                   matched_eigenvectors(chart_x_jacobian(q, 0, 0, kappa), lam),
                   "critical line; only orbits inside {x=0}"});
  }
  return out;
}

// one-parameter family l_C leaving P0; C = +inf selects the {X=0} orbit
inline PhaseState seed_unstable_manifold(const ProblemParams& q, double C, double eps = 1e-6) {
  if (!(eps > 0.0)) throw std::domain_error("eps must be positive");
  if (!(C >= 0.0)) throw std::domain_error("C must be >= 0");
  const double N = q.dim(), s = q.sigma();
  if (std::isinf(C)) return {0.0, -eps / (N + s), eps, std::log(eps)};
  const double X = eps;
  const double Z = C * std::pow(eps, (s + 2.0) / 2.0);
  double Y = -X / N - Z / (N + s);
  if (C == 0.0) Y += (q.p() - fujita_exponent(q)) / (N * (N + 2.0) * (s + 2.0)) * X * X;
  return {X, Y, Z, 0.0};
}

// normal component of the field in {Z=0} along Y = -X/N
inline double fujita_line_defect(const ProblemParams& q, double X) {
  return (q.p() - fujita_exponent(q)) * X * X / (q.dim() * (q.sigma() + 2.0));
}

template <class T = double>
T fujita_line_normal_component(const ProblemParams& q, T X) {
  const FieldCoeffs<T> c(q);
  const auto F = phase_field(c, X, -X / c.N, T(0));
  return F[0] / c.N + F[1];
}

inline double sobolev_cylinder(const ProblemParams& q, double Y) {
  if (q.dim() < 3) throw std::domain_error("cylinder needs N >= 3");
  const double N = q.dim();
  return -((N + q.sigma()) / (N - 2.0)) * (q.m() * Y + N - 2.0) * Y;
}

inline double cylinder_defect(const ProblemParams& q, double X, double Y) {
  if (q.dim() < 3) throw std::domain_error("cylinder needs N >= 3");
  const double N = q.dim(), m = q.m();
  const double pS = sobolev_exponent(q).value();
  const double kk = (q.p() - m) / (q.sigma() + 2.0);
  return (N + q.sigma()) / (N - 2.0) *
         ((pS - q.p()) * Y * Y * (m * Y + N - 2.0) - X * (1.0 + kk * Y) * (2.0 * m * Y + N - 2.0));
}

// d/deta [Z - Z(Y)] on the cylinder curve inside {X=0}
template <class T = double>
T cylinder_flow_defect(const ProblemParams& q, T Y) {
  const FieldCoeffs<T> c(q);
  const T Zc = -((c.N + c.sigma) / (c.N - T(2))) * (c.m * Y + c.N - T(2)) * Y;
  const T dZc = -((c.N + c.sigma) / (c.N - T(2))) * (T(2) * c.m * Y + c.N - T(2));
  const auto F = phase_field(c, T(0), Y, Zc);
  return F[2] - dZc * F[1];
}

enum class PhaseEndpoint { Q1, Q3, Q5, P1, P2, DiagnosticQ4, Unresolved };

inline std::string_view to_string(PhaseEndpoint e) {
  switch (e) {
    case PhaseEndpoint::Q1: return "Q1";
    case PhaseEndpoint::Q3: return "Q3";
    case PhaseEndpoint::Q5: return "Q5";
    case PhaseEndpoint::P1: return "P1";
    case PhaseEndpoint::P2: return "P2";
    case PhaseEndpoint::DiagnosticQ4: return "DiagnosticQ4";
    case PhaseEndpoint::Unresolved: return "Unresolved";
  }
  return "?";
}

struct PhaseSample {
  PhaseState s;
  Chart chart;
};

struct PhaseOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double switch_up = 1e6;
  double switch_down = 1e5;
  long max_steps = 2'000'000;
  double q5_tol = 1e-6;
  double q5_hold = 5.0;
  // Q5 is also tracked in the finite chart once X exceeds this; for m = 1 the
  // approach along the Fujita line is unstable at a rate growing with X
  double q5_min_X = 10.0;
  double q1_x = 1e-4;
  double q1_yz = 1e-3;
  double q3_tol = 1e-6;
  double point_tol = 1e-6;
  double point_hold = 1.0;
  double q4_big = 1e12;
  // stop once eta passes this value (finite chart time or tracked eta)
  double eta_max = std::numeric_limits<double>::infinity();
};

struct PhaseTrajectory {
  std::vector<PhaseSample> samples;
  PhaseEndpoint endpoint = PhaseEndpoint::Unresolved;
  std::string note;
};

namespace detail {

inline double max_abs_diff(const Vec<3>& a, const Vec<3>& b) {
  double d = 0.0;
  for (int i = 0; i < 3; ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace detail

// Flow of (PSsyst) in eta with a switch to the x-chart (time eta1, eta carried
// as a fourth component) while X is large.
inline PhaseTrajectory integrate_phase(const ProblemParams& q, const PhaseState& seed,
                                       const PhaseOptions& o = {}) {
  if (seed.X < 0.0 || seed.Z < 0.0) throw std::domain_error("seed must have X >= 0 and Z >= 0");
  const FieldCoeffs<double> c(q);
  const double yq5 = -c.kk;
  const bool has_p2 = q.dim() >= 3 && q.p() > first_critical_exponent(q).value();
  const Vec<3> P1 = p1_coords(q);
  const Vec<3> P2 = has_p2 ? p2_coords(q) : Vec<3>{0, 0, 0};
  constexpr double tiny = 1e-250;

  PhaseTrajectory tr;
  tr.samples.push_back({seed, Chart::Finite});

  PhaseState cur = seed;
  long steps = 0;
  double near_p1 = -1.0, near_p2 = -1.0;  // eta at which proximity began
  double near_q5 = -1.0;

  auto q3_close = [&](double X, double Y, double Z) {
    if (!(Y < 0.0)) return false;
    return std::max({std::abs(X / Y), std::abs(Z / Y), std::abs(1.0 / Y)}) < o.q3_tol;
  };

  for (;;) {
    if (cur.X <= o.switch_up) {
      auto f = [&](double, const Vec<3>& u) { return phase_field(c, u[0], u[1], u[2]); };
      Dopri5<3, decltype(f)> st(f, cur.eta, {cur.X, cur.Y, cur.Z}, o.rtol, {tiny, o.atol, tiny});
      double X_prev = cur.X;
      near_q5 = -1.0;
      for (;;) {
        if (++steps > o.max_steps) {
          tr.note = "step budget exhausted";
          return tr;
        }
        if (st.step() != StepStatus::Accepted) {
          tr.note = "step size underflow";
          return tr;
        }
        Vec<3> u = st.y();
        u[0] = std::max(u[0], 0.0);
        u[2] = std::max(u[2], 0.0);
        cur = {u[0], u[1], u[2], st.t()};
        tr.samples.push_back({cur, Chart::Finite});

        if (q3_close(u[0], u[1], u[2])) {
          tr.endpoint = PhaseEndpoint::Q3;
          return tr;
        }
        if (u[2] > o.q4_big && u[2] > o.q4_big * u[0]) {
          tr.endpoint = PhaseEndpoint::DiagnosticQ4;
          tr.note = "Z -> inf with Z/X -> inf";
          return tr;
        }
        if (u[0] >= o.q5_min_X && std::abs(u[1] / u[0] - yq5) < o.q5_tol) {
          // eta1 elapses at rate X
          if (near_q5 < 0.0) near_q5 = 0.0;
          else near_q5 += 0.5 * (u[0] + X_prev) * (st.t() - st.t_prev());
          if (near_q5 >= o.q5_hold) {
            tr.endpoint = PhaseEndpoint::Q5;
            return tr;
          }
        } else {
          near_q5 = -1.0;
        }
        X_prev = u[0];
        const double d1 = detail::max_abs_diff(u, P1);
        if (d1 < o.point_tol) {
          if (near_p1 < 0.0) near_p1 = cur.eta;
          if (cur.eta - near_p1 >= o.point_hold) {
            tr.endpoint = PhaseEndpoint::P1;
            return tr;
          }
        } else {
          near_p1 = -1.0;
        }
        if (has_p2) {
          const double d2 = detail::max_abs_diff(u, P2);
          if (d2 < o.point_tol) {
            if (near_p2 < 0.0) near_p2 = cur.eta;
            if (cur.eta - near_p2 >= o.point_hold) {
              tr.endpoint = PhaseEndpoint::P2;
              return tr;
            }
          } else {
            near_p2 = -1.0;
          }
        }
        if (cur.eta >= o.eta_max) {
          tr.note = "eta budget exhausted";
          return tr;
        }
        if (cur.X > o.switch_up) break;
      }
    }

    // x-chart
    auto g = [&](double, const Vec<4>& u) {
      const auto d = chart_x_field(c, u[0], u[1], u[2]);
      return Vec<4>{d[0], d[1], d[2], u[0]};
    };
    const ProjectedState ps = to_projected(cur);
    Dopri5<4, decltype(g)> st(g, 0.0, {ps.x, ps.y, ps.z, cur.eta}, o.rtol, {tiny, o.atol, tiny, o.atol});
    near_q5 = -1.0;
    for (;;) {
      if (++steps > o.max_steps) {
        tr.note = "step budget exhausted";
        return tr;
      }
      if (st.step() != StepStatus::Accepted) {
        tr.note = "step size underflow";
        return tr;
      }
      Vec<4> u = st.y();
      u[0] = std::max(u[0], 0.0);
      u[2] = std::max(u[2], 0.0);
      const double x = u[0], y = u[1], z = u[2];
      if (!(x > 0.0)) {
        tr.note = "x underflow";
        return tr;
      }
      cur = to_phase({x, y, z, st.t()}, u[3]);
      tr.samples.push_back({cur, Chart::XProjected});

      if (y < 0.0 && std::max({std::abs(1.0 / y), std::abs(z / y), std::abs(x / y)}) < o.q3_tol) {
        tr.endpoint = PhaseEndpoint::Q3;
        return tr;
      }
      if (std::abs(y - yq5) < o.q5_tol) {
        if (near_q5 < 0.0) near_q5 = st.t();
        if (st.t() - near_q5 >= o.q5_hold) {
          tr.endpoint = PhaseEndpoint::Q5;
          return tr;
        }
      } else {
        near_q5 = -1.0;
      }
      if (x < o.q1_x && std::abs(y) < o.q1_yz && z < o.q1_yz) {
        tr.endpoint = PhaseEndpoint::Q1;
        return tr;
      }
      if (z > o.q4_big * x && z / x > o.q4_big) {
        tr.endpoint = PhaseEndpoint::DiagnosticQ4;
        tr.note = "Z -> inf with Z/X -> inf";
        return tr;
      }
      if (x < 1e-3 * o.q1_x && std::abs(y) < o.q1_yz && z >= o.q1_yz) {
        tr.endpoint = PhaseEndpoint::DiagnosticQ4;
        tr.note = "convergence toward the Q_gamma line";
        return tr;
      }
      if (u[3] >= o.eta_max) {
        tr.note = "eta budget exhausted";
        return tr;
      }
      if (cur.X < o.switch_down) break;
    }
  }
}

}  // namespace hhp
