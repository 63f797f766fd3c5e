#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hhp/phase_system.hpp"
#include "hhp/verify.hpp"

using namespace hhp;

namespace {

ProblemParams draw(std::mt19937& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double m = 1.0 + 2.0 * U(rng);
  const int N = 1 + int(6 * U(rng));
  const double lo = std::max(-2.0, -double(N));
  const double sigma = lo + 0.05 + (3.0 - lo) * U(rng);
  return {m, m + (sigma + 2.0) / N + 0.05 + 10.0 * U(rng), sigma, N};
}

std::vector<std::complex<double>> sorted(std::vector<std::complex<double>> v) {
  std::sort(v.begin(), v.end(), [](auto a, auto b) { return a.real() < b.real(); });
  return v;
}

const CriticalPoint* find_point(const std::vector<CriticalPoint>& cat, const std::string& name) {
  for (const auto& c : cat)
    if (c.name == name) return &c;
  return nullptr;
}

}  // namespace

TEST(PhaseField, CriticalPointsOfTheFiniteChart) {
  const ProblemParams q(2, 5, 1, 3);
  const auto z = phase_rhs(q, {0, 0, 0, 0});
  EXPECT_EQ(z, (Vec<3>{0, 0, 0}));
  std::mt19937 rng(21);
  for (int i = 0; i < 100; ++i) {
    const auto r = draw(rng);
    const auto v = phase_rhs(r, {0, -(r.dim() - 2.0) / r.m(), 0, 0});
    for (double c : v) ASSERT_NEAR(c, 0.0, 1e-13);
  }
}

TEST(PhaseField, FujitaLineExample) {
  const ProblemParams q(2, 3, 1, 3);
  const auto v = phase_rhs(q, {1.0, -1.0 / 3.0, 0.0, 0.0});
  EXPECT_NEAR(v[0], 7.0 / 3.0, 1e-15);
  EXPECT_NEAR(v[1], -7.0 / 9.0, 1e-15);
  EXPECT_EQ(v[2], 0.0);
  EXPECT_NEAR(v[1], -v[0] / 3.0, 1e-15);
}

TEST(PhaseField, ProjectedChartCriticalPoints) {
  const ProblemParams q(2, 5, 1, 3);
  EXPECT_EQ(q5_coords(q), (Vec<3>{0, -1, 0}));
  for (double c : chart_x_rhs(q, {0, -1, 0, 0})) EXPECT_EQ(c, 0.0);
  for (double kappa : {0.1, 1.0, 7.0})
    for (double c : chart_x_rhs(q, {0, 0, kappa, 0})) EXPECT_EQ(c, 0.0);
}

TEST(PhaseField, ChartAtInfiniteY) {
  const ProblemParams q(2, 5, 1, 3);
  for (double c : chart_y_rhs(q, 1, {0, 0, 0})) EXPECT_EQ(c, 0.0);
  for (double c : chart_y_rhs(q, -1, {0, 0, 0})) EXPECT_EQ(c, 0.0);
  const Mat3 j3 = chart_y_jacobian(q, 1, 0, 0, 0);
  const Mat3 j2 = chart_y_jacobian(q, -1, 0, 0, 0);
  EXPECT_TRUE(j3.isApprox(Mat3(Eigen::Vector3d(-1, -5, -2).asDiagonal())));
  EXPECT_TRUE(j2.isApprox(-j3));
  EXPECT_EQ(j3(2, 2), -2.0);
  EXPECT_THROW(chart_y_rhs(q, 0, {0, 0, 0}), std::invalid_argument);
}

TEST(PhaseField, ChartWMatchesChainRule) {
  std::mt19937 rng(22);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const auto q = draw(rng);
    const double x = 0.01 + 2.0 * U(rng), y = -3.0 + 3.0 * U(rng), z = 5.0 * U(rng);
    const auto dx = chart_x_rhs(q, {x, y, z, 0});
    const auto dw = chart_w_rhs(q, {x, y, x * z});
    ASSERT_NEAR(dw[0], dx[0], 1e-12 * (1 + std::abs(dx[0])));
    ASSERT_NEAR(dw[1], dx[1], 1e-12 * (1 + std::abs(dx[1])));
    ASSERT_NEAR(dw[2], x * dx[2] + z * dx[0], 1e-12 * (1 + std::abs(dw[2])));
  }
  const ProblemParams q(2, 5, 1, 3);
  for (double c : chart_w_rhs(q, {0, 0, 0})) EXPECT_EQ(c, 0.0);
  for (double c : chart_w_rhs(q, {0, -1, 0})) EXPECT_EQ(c, 0.0);
}

TEST(PhaseFieldProperty, InvariantPlanesAndCrossingSign) {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const auto q = draw(rng);
    const double X = 100.0 * U(rng), Y = -10.0 + 20.0 * U(rng), Z = 100.0 * U(rng);
    ASSERT_EQ(phase_rhs(q, {0.0, Y, Z, 0})[0], 0.0);
    ASSERT_EQ(phase_rhs(q, {X, Y, 0.0, 0})[2], 0.0);
    const double dY = phase_rhs(q, {X, 0.0, Z, 0})[1];
    ASSERT_EQ(dY, -X - Z);
    ASSERT_LE(dY, 0.0);
  }
}

TEST(PhaseField, AnalyticJacobiansMatchFiniteDifferences) {
  std::mt19937 rng(24);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const auto q = draw(rng);
    const Vec<3> u{2.0 * U(rng), -2.0 * U(rng), 2.0 * U(rng)};
    const Mat3 fd = finite_difference_jacobian([&](const Vec<3>& v) { return phase_rhs(q, {v[0], v[1], v[2], 0}); }, u);
    ASSERT_TRUE(phase_jacobian(q, u[0], u[1], u[2]).isApprox(fd, 1e-7));
    const Mat3 fx = finite_difference_jacobian([&](const Vec<3>& v) { return chart_x_rhs(q, {v[0], v[1], v[2], 0}); }, u);
    ASSERT_TRUE(chart_x_jacobian(q, u[0], u[1], u[2]).isApprox(fx, 1e-7));
    for (int s : {1, -1}) {
      const Mat3 fy = finite_difference_jacobian([&](const Vec<3>& v) { return chart_y_rhs(q, s, v); }, u);
      ASSERT_TRUE(chart_y_jacobian(q, s, u[0], u[1], u[2]).isApprox(fy, 1e-7));
    }
  }
}

TEST(Catalog, ClosedFormExamples) {
  const auto q5 = sorted(q5_eigenvalues({2, 5, 1, 3}));
  EXPECT_NEAR(q5[0].real(), -4.0, 1e-14);
  EXPECT_NEAR(q5[1].real(), -1.0, 1e-14);
  EXPECT_NEAR(q5[2].real(), 1.0, 1e-14);

  const auto p2 = p2_coords({2, 15, 1, 3});
  EXPECT_EQ(p2[0], 0.0);
  EXPECT_NEAR(p2[1], -3.0 / 13.0, 1e-15);
  EXPECT_NEAR(p2[2], 21.0 / 169.0, 1e-15);

  const auto m1 = q5_eigenvalues({1, 3, 0, 3});
  EXPECT_EQ(m1[0], 0.0);

  EXPECT_EQ(p1_coords({2, 5, 1, 2}), (Vec<3>{0, 0, 0}));
}

TEST(Catalog, PointsPresentPerRegime) {
  EXPECT_EQ(find_point(catalog_critical_points({2, 5, 1, 3}), "P2"), nullptr);
  EXPECT_EQ(find_point(catalog_critical_points({2, 8, 1, 3}), "P2"), nullptr);
  EXPECT_NE(find_point(catalog_critical_points({2, 15, 1, 3}), "P2"), nullptr);
  const auto n2 = catalog_critical_points({2, 5, 1, 2});
  EXPECT_EQ(find_point(n2, "P1"), nullptr);
  EXPECT_NE(find_point(n2, "P0")->nature.find("coincides"), std::string::npos);
  const auto cat = catalog_critical_points({2, 5, 1, 3});
  EXPECT_EQ(find_point(cat, "Q2")->nature, "unstable node");
  EXPECT_EQ(find_point(cat, "Q3")->nature, "stable node");
  EXPECT_NE(find_point(cat, "Q5")->nature.find("saddle"), std::string::npos);
}

TEST(CatalogProperty, EigenpairsOfAnalyticJacobians) {
  std::mt19937 rng(25);
  for (int i = 0; i < 60; ++i) {
    const auto q = draw(rng);
    for (const auto& c : catalog_critical_points(q)) {
      if (c.eigenvalues.empty()) continue;
      Mat3 J;
      if (c.chart == Chart::Finite) J = phase_jacobian(q, c.coords[0], c.coords[1], c.coords[2]);
      else if (c.chart == Chart::XProjected) J = chart_x_jacobian(q, c.coords[0], c.coords[1], c.coords[2]);
      else J = chart_y_jacobian(q, c.name == "Q3" ? 1 : -1, 0, 0, 0);
      // the double zero eigenvalue on the Q_gamma line is defective, so a
      // backward-stable solver only resolves it to about sqrt(machine eps)
      const double tol = c.name == "Qgamma" ? 1e-7 : 1e-10;
      ASSERT_LE(detail::eigen_mismatch(detail::eigenvalues(J), c.eigenvalues), tol) << c.name;
      for (std::size_t k = 0; k < c.eigenvectors.size(); ++k) {
        const Eigen::Vector3cd r = J.cast<std::complex<double>>() * c.eigenvectors[k] - c.eigenvalues[k] * c.eigenvectors[k];
        ASSERT_LE(r.norm(), tol) << c.name;
      }
    }
  }
}

TEST(CatalogProperty, FiniteDifferenceEigenvalues) {
  for (const auto& q : {ProblemParams(2, 5, 1, 3), ProblemParams(2, 15, 1, 3), ProblemParams(1, 4, 0, 3),
                        ProblemParams(3, 20, 0.5, 4), ProblemParams(1.5, 4, -0.5, 2)})
    EXPECT_EQ(check_eigenvalues(q).status, CheckStatus::Pass) << check_eigenvalues(q).value;
}

TEST(Seeds, FamilyParameterExamples) {
  const ProblemParams q(2, 5, 1, 3);
  const double eps = 1e-3;
  const auto s0 = seed_unstable_manifold(q, 0.0, eps);
  EXPECT_EQ(s0.X, eps);
  EXPECT_EQ(s0.Z, 0.0);
  EXPECT_NEAR(s0.Y, -eps / 3.0 + (5.0 - 3.0) / (3.0 * 5.0 * 3.0) * eps * eps, 1e-18);
  const auto si = seed_unstable_manifold(q, INFINITY, eps);
  EXPECT_EQ(si.X, 0.0);
  EXPECT_EQ(si.Z, eps);
  EXPECT_NEAR(si.Y, -eps / 4.0, 1e-18);
  EXPECT_NEAR(seed_unstable_manifold({2, 5, 2, 3}, 1.0, eps).Z, eps * eps, 1e-20);
  EXPECT_THROW(seed_unstable_manifold(q, 1.0, 0.0), std::domain_error);
  EXPECT_THROW(seed_unstable_manifold(q, -1.0), std::domain_error);
}

// second-order expansion of l_0: the residual behaves like c3 X^3, so the
// log-log slope tends to 3 and R/X^3 settles to a nonzero constant
TEST(Seeds, ZeroFamilyExpansionOrder) {
  for (const auto& q : {ProblemParams(2, 5, 1, 3), ProblemParams(1, 3, 0, 3), ProblemParams(3, 7, 2, 2)}) {
    const FieldCoeffs<double> c(q);
    const double N = q.dim(), c2 = (q.p() - fujita_exponent(q)) / (N * (N + 2.0) * (q.sigma() + 2.0));
    auto f = [&](double, const Vec<2>& u) {
      const auto F = phase_field(c, u[0], u[1], 0.0);
      return Vec<2>{F[0], F[1]};
    };
    const double eps = 1e-9;
    const auto s = seed_unstable_manifold(q, 0.0, eps);
    Dopri5<2, decltype(f)> sol(f, 0.0, {s.X, s.Y}, 1e-13, {1e-300, 1e-24});
    std::vector<double> X, R;
    for (double target : {5e-4, 1e-3, 2e-3, 4e-3, 8e-3}) {
      const double eta = 0.5 * std::log(target / eps);
      while (sol.t() < eta) ASSERT_EQ(sol.step(eta), StepStatus::Accepted);
      X.push_back(sol.y()[0]);
      R.push_back(std::abs(sol.y()[1] + X.back() / N - c2 * X.back() * X.back()));
    }
    std::vector<double> slope;
    for (std::size_t i = 0; i + 1 < X.size(); ++i) slope.push_back(std::log(R[i] / R[i + 1]) / std::log(X[i] / X[i + 1]));
    for (std::size_t i = 0; i + 1 < slope.size(); ++i)
      EXPECT_LT(std::abs(slope[i] - 3.0), std::abs(slope[i + 1] - 3.0)) << q.m() << " " << q.p();
    EXPECT_NEAR(slope.front(), 3.0, 2e-3) << q.m() << " " << q.p();
    const double c3a = R[1] / std::pow(X[1], 3), c3b = R[0] / std::pow(X[0], 3);
    EXPECT_GT(c3b, 0.0);
    EXPECT_NEAR(c3a / c3b, 1.0, 1e-2);
  }
}

TEST(Invariants, FujitaLineDefect) {
  const ProblemParams q(2, 5, 1, 3);
  EXPECT_NEAR(fujita_line_defect(q, 1.0), 2.0 / 9.0, 1e-15);
  EXPECT_NEAR(fujita_line_defect(q, 2.0), 4.0 * fujita_line_defect(q, 1.0), 1e-15);
  EXPECT_EQ(fujita_line_defect(q.with_p(3.0), 5.0), 0.0);
  std::mt19937 rng(26);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const auto r = draw(rng);
    const double X = 0.001 + 10.0 * U(rng);
    ASSERT_NEAR(fujita_line_normal_component(r, X), fujita_line_defect(r, X), 1e-12 * (1 + X * X * r.p()));
  }
}

TEST(Invariants, FujitaTangencyAtTheFujitaExponent) {
  for (const auto& q : {ProblemParams(2, 5, 1, 3), ProblemParams(1, 3, 0, 3), ProblemParams(1.5, 4, -0.5, 2)})
    EXPECT_EQ(check_fujita_tangency(q).status, CheckStatus::Pass) << check_fujita_tangency(q).value;
}

TEST(Invariants, SobolevCylinder) {
  const ProblemParams q(2, 14, 1, 3);
  EXPECT_NEAR(sobolev_cylinder(q, -0.25), 0.5, 1e-15);
  EXPECT_NEAR(cylinder_defect(q, 1.0, -0.25), 0.0, 1e-14);
  for (double Y : {-0.4, -0.1, 0.3}) EXPECT_NEAR(cylinder_defect(q, 0.0, Y), 0.0, 1e-14);
  std::mt19937 rng(27);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    auto r = draw(rng);
    if (r.dim() < 3) continue;
    r = r.with_p(sobolev_exponent(r).value());
    const double N = r.dim(), X = 5.0 * U(rng), Y = -(N - 2.0) / r.m() * U(rng);
    const double t = 1.0 + 2.0 * r.m() * Y / (N - 2.0);
    ASSERT_NEAR(cylinder_defect(r, X, Y), -(N + r.sigma()) * X * t * t, 1e-11 * (1.0 + X));
    ASSERT_NEAR(cylinder_flow_defect(r, Y), 0.0, 1e-11);
  }
  EXPECT_THROW(sobolev_cylinder({2, 5, 1, 2}, -0.1), std::domain_error);
  EXPECT_EQ(check_sobolev_cylinder({2, 5, 1, 3}).status, CheckStatus::Pass);
}

TEST(PhaseFlow, ChartConsistency) {
  for (const auto& q : {ProblemParams(2, 5, 1, 3), ProblemParams(1, 3, 0, 3), ProblemParams(3, 9, -0.5, 4)})
    EXPECT_EQ(check_chart_consistency(q).status, CheckStatus::Pass) << check_chart_consistency(q).value;
}

TEST(PhaseFlow, SpecialSeedsReachTheirEndpoints) {
  const ProblemParams q(2, 5, 1, 3);
  EXPECT_EQ(integrate_phase(q, seed_unstable_manifold(q, 0.0)).endpoint, PhaseEndpoint::Q1);
  EXPECT_EQ(integrate_phase(q, seed_unstable_manifold(q, INFINITY)).endpoint, PhaseEndpoint::Q3);
  const auto pS = q.with_p(14.0);
  EXPECT_EQ(integrate_phase(pS, seed_unstable_manifold(pS, INFINITY)).endpoint, PhaseEndpoint::P1);
  const auto super = q.with_p(15.0);
  EXPECT_EQ(integrate_phase(super, seed_unstable_manifold(super, INFINITY)).endpoint, PhaseEndpoint::P2);
  const auto pF = q.with_p(3.0);
  EXPECT_EQ(integrate_phase(pF, seed_unstable_manifold(pF, 0.0)).endpoint, PhaseEndpoint::Q5);
  const ProblemParams heat(1, 5.0 / 3.0, 0, 3);
  EXPECT_EQ(integrate_phase(heat, seed_unstable_manifold(heat, 0.0)).endpoint, PhaseEndpoint::Q5);
}

TEST(PhaseFlow, CylinderOrbitFollowsTheCurve) {
  const ProblemParams q(2, 14, 1, 3);
  const auto t = integrate_phase(q, seed_unstable_manifold(q, INFINITY));
  ASSERT_EQ(t.endpoint, PhaseEndpoint::P1);
  for (const auto& s : t.samples) {
    ASSERT_EQ(s.s.X, 0.0);
    ASSERT_NEAR(s.s.Z, sobolev_cylinder(q, s.s.Y), 1e-6 * (1.0 + s.s.Z));
  }
}

TEST(PhaseFlowProperty, FamilyStaysInTheAdmissibleRegion) {
  const ProblemParams q(2, 5, 1, 3);
  for (double C : {0.01, 0.3, 1.0, 10.0, 1e3}) {
    const auto t = integrate_phase(q, seed_unstable_manifold(q, C));
    EXPECT_NE(t.endpoint, PhaseEndpoint::Unresolved) << C;
    for (const auto& s : t.samples) {
      if (s.chart != Chart::Finite) continue;
      ASSERT_GE(s.s.X, 0.0);
      ASSERT_GE(s.s.Z, 0.0);
      ASSERT_LT(s.s.Y, 0.0);
    }
  }
}
