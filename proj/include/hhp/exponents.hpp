#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hhp {

// (m, p, sigma, N) for u_t = Lap(u^m) + |x|^sigma u^p
class ProblemParams {
 public:
  ProblemParams(double m, double p, double sigma, int dim)
      : m_(m), p_(p), sigma_(sigma), dim_(dim) {
    if (!std::isfinite(m) || !std::isfinite(p) || !std::isfinite(sigma))
      throw std::domain_error("parameters must be finite");
    if (m < 1.0) throw std::domain_error("m must be >= 1");
    if (dim < 1) throw std::domain_error("dim must be >= 1");
    if (!(sigma > std::max(-2.0, -double(dim))))
      throw std::domain_error("sigma must exceed max(-2,-N)");
    if (!(p > m)) throw std::domain_error("p must exceed m");
  }

  double m() const { return m_; }
  double p() const { return p_; }
  double sigma() const { return sigma_; }
  int dim() const { return dim_; }

  ProblemParams with_p(double p) const { return {m_, p, sigma_, dim_}; }

 private:
  double m_, p_, sigma_;
  int dim_;
};

// p_c and p_S are infinite for N = 1, 2
class CriticalExponent {
 public:
  static CriticalExponent finite(double v) { return CriticalExponent(v, false); }
  static CriticalExponent unbounded() { return CriticalExponent(0.0, true); }

  bool is_unbounded() const { return unbounded_; }
  double value() const {
    if (unbounded_) throw std::domain_error("critical exponent is unbounded");
    return v_;
  }
  bool above(double p) const { return unbounded_ || v_ > p; }
  bool at_or_below(double p) const { return !above(p); }

  std::string str() const;

 private:
  CriticalExponent(double v, bool u) : v_(v), unbounded_(u) {}
  double v_;
  bool unbounded_;
};

enum class Regime { BlowUpOnly, FujitaToSobolev, SobolevSupercritical };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::BlowUpOnly: return "BlowUpOnly";
    case Regime::FujitaToSobolev: return "FujitaToSobolev";
    case Regime::SobolevSupercritical: return "SobolevSupercritical";
  }
  return "?";
}

struct DerivedExponents {
  double alpha;
  double beta;
  double bigL;
  double pF;
  CriticalExponent pc;
  CriticalExponent pS;
  Regime regime;
};

inline double fujita_exponent(const ProblemParams& q) {
  return q.m() + (q.sigma() + 2.0) / q.dim();
}

inline CriticalExponent first_critical_exponent(const ProblemParams& q) {
  if (q.dim() <= 2) return CriticalExponent::unbounded();
  return CriticalExponent::finite(q.m() * (q.dim() + q.sigma()) / (q.dim() - 2.0));
}

inline CriticalExponent sobolev_exponent(const ProblemParams& q) {
  if (q.dim() <= 2) return CriticalExponent::unbounded();
  return CriticalExponent::finite(q.m() * (q.dim() + 2.0 * q.sigma() + 2.0) / (q.dim() - 2.0));
}

inline Regime classify_regime(const ProblemParams& q) {
  if (q.p() <= fujita_exponent(q)) return Regime::BlowUpOnly;
  if (sobolev_exponent(q).above(q.p())) return Regime::FujitaToSobolev;
  return Regime::SobolevSupercritical;
}

inline DerivedExponents derive_exponents(const ProblemParams& q) {
  const double L = q.sigma() * (q.m() - 1.0) + 2.0 * (q.p() - 1.0);
  return {(q.sigma() + 2.0) / L,
          (q.p() - q.m()) / L,
          L,
          fujita_exponent(q),
          first_critical_exponent(q),
          sobolev_exponent(q),
          classify_regime(q)};
}

// algebraic decay rate k = (sigma+2)/(p-m), f ~ L xi^{-k}
inline double tail_exponent(const ProblemParams& q) {
  return (q.sigma() + 2.0) / (q.p() - q.m());
}

// A = (Cm)^{2/L} (alpha/m)^{(sigma+2)/L}
inline double c_to_a(const ProblemParams& q, double C) {
  if (!(C > 0.0) || !std::isfinite(C)) throw std::domain_error("C must be positive and finite");
  const auto e = derive_exponents(q);
  return std::pow(C * q.m(), 2.0 / e.bigL) * std::pow(e.alpha / q.m(), (q.sigma() + 2.0) / e.bigL);
}

inline double a_to_c(const ProblemParams& q, double A) {
  if (!(A > 0.0) || !std::isfinite(A)) throw std::domain_error("A must be positive and finite");
  const auto e = derive_exponents(q);
  return std::pow(A, e.bigL / 2.0) * std::pow(e.alpha / q.m(), -(q.sigma() + 2.0) / 2.0) / q.m();
}

inline double stationary_constant(const ProblemParams& q) {
  const auto pc = first_critical_exponent(q);
  if (q.dim() < 3 || !(q.p() > pc.value()))
    throw std::domain_error("stationary solution does not exist");
  const double d = q.p() - q.m();
  const double base = q.m() * (q.sigma() + 2.0) * (q.dim() - 2.0) * (q.p() - pc.value()) / (d * d);
  return std::pow(base, 1.0 / d);
}

inline double stationary_profile(const ProblemParams& q, double xi) {
  if (!(xi > 0.0)) throw std::domain_error("xi must be positive");
  return stationary_constant(q) * std::pow(xi, -tail_exponent(q));
}

}  // namespace hhp

inline std::string hhp::CriticalExponent::str() const {
  if (unbounded_) return "inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v_);
  return buf;
}
