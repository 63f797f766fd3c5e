#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>

namespace hhp {

template <std::size_t D>
using Vec = std::array<double, D>;

template <std::size_t D>
bool all_finite(const Vec<D>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

enum class StepStatus { Accepted, StepUnderflow, NonFinite };

// Dormand-Prince 5(4) with the Hairer-Wanner continuous extension.
// The right-hand side may return non-finite values to mark states outside
// its domain; such trial steps are rejected and retried with a smaller h.
template <std::size_t D, class Rhs>
class Dopri5 {
 public:
  Dopri5(Rhs f, double t0, const Vec<D>& y0, double rtol, const Vec<D>& atol, double h0 = 0.0)
      : f_(std::move(f)), t_(t0), y_(y0), rtol_(rtol), atol_(atol) {
    k1_ = f_(t_, y_);
    h_ = h0 > 0.0 ? h0 : initial_step();
    t_old_ = t_;
    y_old_ = y_;
  }

  double t() const { return t_; }
  const Vec<D>& y() const { return y_; }
  double t_prev() const { return t_old_; }
  const Vec<D>& y_prev() const { return y_old_; }
  double h() const { return h_; }
  const Vec<D>& dydt() const { return k1_; }
  long rejected() const { return rejected_; }

  void set_max_step(double h) { h_max_ = h; }
  void set_h(double h) { h_ = h; }
  void set_atol(const Vec<D>& a) { atol_ = a; }

  // one accepted step, never past t_end
  StepStatus step(double t_end = std::numeric_limits<double>::infinity()) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                            a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

    bool last_rejected = false;
    for (;;) {
      double h = std::min(h_, h_max_);
      if (t_ + h > t_end) h = t_end - t_;
      if (!(h > std::abs(t_) * 1e-15 && h > 1e-300)) return StepStatus::StepUnderflow;

      Vec<D> yt, k2, k3, k4, k5, k6, k7, y1;
      for (std::size_t i = 0; i < D; ++i) yt[i] = y_[i] + h * a21 * k1_[i];
      k2 = f_(t_ + c2 * h, yt);
      for (std::size_t i = 0; i < D; ++i) yt[i] = y_[i] + h * (a31 * k1_[i] + a32 * k2[i]);
      k3 = f_(t_ + c3 * h, yt);
      for (std::size_t i = 0; i < D; ++i)
        yt[i] = y_[i] + h * (a41 * k1_[i] + a42 * k2[i] + a43 * k3[i]);
      k4 = f_(t_ + c4 * h, yt);
      for (std::size_t i = 0; i < D; ++i)
        yt[i] = y_[i] + h * (a51 * k1_[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      k5 = f_(t_ + c5 * h, yt);
      for (std::size_t i = 0; i < D; ++i)
        yt[i] = y_[i] + h * (a61 * k1_[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
      k6 = f_(t_ + h, yt);
      for (std::size_t i = 0; i < D; ++i)
        y1[i] = y_[i] + h * (a71 * k1_[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
      k7 = f_(t_ + h, y1);

      double err = 0.0;
      for (std::size_t i = 0; i < D; ++i) {
        const double e = h * (e1 * k1_[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        const double sc = atol_[i] + rtol_ * std::max(std::abs(y_[i]), std::abs(y1[i]));
        err += (e / sc) * (e / sc);
      }
      err = std::sqrt(err / D);

      if (!std::isfinite(err) || !all_finite(y1) || !all_finite(k7)) {
        h_ = 0.25 * h;
        ++rejected_;
        last_rejected = true;
        continue;
      }
      if (err > 1.0) {
        h_ = h * std::max(0.2, 0.9 * std::pow(err, -0.2));
        ++rejected_;
        last_rejected = true;
        continue;
      }

      for (std::size_t i = 0; i < D; ++i) {
        const double dy = y1[i] - y_[i];
        const double bspl = h * k1_[i] - dy;
        rc1_[i] = y_[i];
        rc2_[i] = dy;
        rc3_[i] = bspl;
        rc4_[i] = dy - h * k7[i] - bspl;
        rc5_[i] = h * (d1 * k1_[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
      }
      t_old_ = t_;
      y_old_ = y_;
      h_used_ = h;
      t_ = (t_ + h >= t_end) ? t_end : t_ + h;
      y_ = y1;
      k1_ = k7;

      double grow = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
      grow = std::clamp(grow, 0.2, last_rejected ? 1.0 : 5.0);
      h_ = h * grow;
      return StepStatus::Accepted;
    }
  }

  // continuous extension on [t_prev, t]
  Vec<D> dense(double t) const {
    const double th = (t - t_old_) / h_used_;
    const double th1 = 1.0 - th;
    Vec<D> out;
    for (std::size_t i = 0; i < D; ++i)
      out[i] = rc1_[i] + th * (rc2_[i] + th1 * (rc3_[i] + th * (rc4_[i] + th1 * rc5_[i])));
    return out;
  }

 private:
  double initial_step() {
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < D; ++i) {
      const double sc = atol_[i] + rtol_ * std::abs(y_[i]);
      d0 += (y_[i] / sc) * (y_[i] / sc);
      d1 += (k1_[i] / sc) * (k1_[i] / sc);
    }
    d0 = std::sqrt(d0 / D);
    d1 = std::sqrt(d1 / D);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    if (std::abs(t_) > 0.0) h0 = std::min(h0, 0.1 * std::abs(t_));
    return std::max(h0, 1e-300);
  }

  Rhs f_;
  double t_, t_old_;
  Vec<D> y_, y_old_, k1_;
  double rtol_;
  Vec<D> atol_;
  double h_ = 0.0, h_used_ = 0.0;
  double h_max_ = std::numeric_limits<double>::infinity();
  long rejected_ = 0;
  Vec<D> rc1_{}, rc2_{}, rc3_{}, rc4_{}, rc5_{};
};

template <std::size_t D, class Rhs>
Dopri5(Rhs, double, const Vec<D>&, double, const Vec<D>&, double) -> Dopri5<D, Rhs>;

}  // namespace hhp
