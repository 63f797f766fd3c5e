#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "exponents.hpp"
#include "phase_system.hpp"
#include "profile_ode.hpp"
#include "shooting.hpp"

namespace hhp {

inline constexpr const char* kVersion = "1.0.0";

using Json = nlohmann::ordered_json;
using Metadata = std::vector<std::pair<std::string, std::string>>;

inline std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json num(const std::optional<double>& v) { return v ? num(*v) : Json(nullptr); }

inline Metadata base_metadata(const ProblemParams& q, const std::string& command) {
  return {{"tool", "hhp"},
          {"version", kVersion},
          {"command", command},
          {"m", fmt17(q.m())},
          {"p", fmt17(q.p())},
          {"sigma", fmt17(q.sigma())},
          {"dim", std::to_string(q.dim())}};
}

inline void add_tolerances(Metadata& md, const ProfileOptions& o) {
  md.emplace_back("rtol", fmt17(o.rtol));
  md.emplace_back("atol", fmt17(o.atol));
  md.emplace_back("xi_max", fmt17(o.xi_max));
  md.emplace_back("tail_flatness", fmt17(o.tail_flatness));
  md.emplace_back("gauss_tol", fmt17(o.gauss_tol));
  md.emplace_back("edge_factor", fmt17(o.edge_factor));
}

inline void write_metadata(std::ostream& os, const Metadata& md) {
  for (const auto& [k, v] : md) os << "# " << k << '=' << v << '\n';
}

inline Json metadata_json(const Metadata& md) {
  Json j = Json::object();
  for (const auto& [k, v] : md) j[k] = v;
  return j;
}

inline Json params_json(const ProblemParams& q) {
  return Json{{"m", q.m()}, {"p", q.p()}, {"sigma", q.sigma()}, {"dim", q.dim()}};
}

inline Json tolerances_json(const ProfileOptions& o) {
  return Json{{"rtol", o.rtol},
              {"atol", o.atol},
              {"xi_max", o.xi_max},
              {"tail_flatness", o.tail_flatness},
              {"gauss_tol", o.gauss_tol},
              {"edge_factor", o.edge_factor},
              {"zero_threshold", "sqrt(atol)*A"}};
}

inline void write_profile_csv(std::ostream& os, const ProfileTrajectory& t, const ProblemParams& q,
                              const Metadata& md) {
  write_metadata(os, md);
  const double k = tail_exponent(q);
  os << "xi,f,w,g\n";
  for (const auto& s : t.samples)
    os << fmt17(s.xi) << ',' << fmt17(s.f) << ',' << fmt17(s.w) << ',' << fmt17(std::pow(s.xi, k) * s.f) << '\n';
}

inline void write_phase_csv(std::ostream& os, const PhaseTrajectory& t, const Metadata& md) {
  write_metadata(os, md);
  os << "eta,X,Y,Z,chart\n";
  for (const auto& s : t.samples)
    os << fmt17(s.s.eta) << ',' << fmt17(s.s.X) << ',' << fmt17(s.s.Y) << ',' << fmt17(s.s.Z) << ','
       << to_string(s.chart) << '\n';
}

inline Json exponents_json(const ProblemParams& q, const Metadata& md) {
  const auto e = derive_exponents(q);
  auto crit = [](const CriticalExponent& c) { return c.is_unbounded() ? Json("inf") : Json(c.value()); };
  return Json{{"metadata", metadata_json(md)},
              {"params", params_json(q)},
              {"alpha", e.alpha},
              {"beta", e.beta},
              {"L", e.bigL},
              {"p_F", e.pF},
              {"p_c", crit(e.pc)},
              {"p_S", crit(e.pS)},
              {"regime", to_string(e.regime)}};
}

inline Json profile_summary_json(const ProfileTrajectory& t, const ProblemParams& q, double A,
                                 const ProfileOptions& o, const Metadata& md) {
  Json j{{"metadata", metadata_json(md)},
         {"params", params_json(q)},
         {"A", A},
         {"class", to_string(t.termination)},
         {"tail_constant", num(t.tail_constant)},
         {"support_edge", num(t.support_edge)},
         {"edge_slope", num(t.edge_slope)},
         {"edge_slope_law", t.support_edge ? num(interface_slope(q, *t.support_edge)) : Json(nullptr)},
         {"q5_exit", to_string(t.q5_exit)},
         {"flux_ratio", num(t.flux_ratio)},
         {"xi0", t.xi0},
         {"xi_end", t.samples.empty() ? Json(nullptr) : num(t.samples.back().xi)},
         {"samples", t.samples.size()},
         {"steps", t.steps},
         {"slow_tail_from", num(t.slow_tail_xi)},
         {"handoff_xi", num(t.handoff_xi)},
         {"gaussian_span", Json::array({t.gaussian_span_lo, t.gaussian_span_hi})},
         {"g_interior_minimum", t.samples.size() >= 3 && g_transform(t, q).interior_minimum},
         {"note", t.note}};
  Json tol = tolerances_json(o);
  tol["classification"] = {
      {"AlgebraicDecay", "xi^k f flat within tail_flatness over the last decade before xi_max"},
      {"TransversalZero", "flux ratio y/y(Q5) > edge_factor at f = zero_threshold"},
      {"CompactSupport", "flux ratio <= edge_factor at f = zero_threshold, m > 1"},
      {"GaussianTail", "flux ratio <= edge_factor at f = zero_threshold, m = 1"}};
  j["tolerances"] = tol;
  return j;
}

inline Json phase_summary_json(const PhaseTrajectory& t, const ProblemParams& q, double C, const Metadata& md) {
  const auto& last = t.samples.back();
  return Json{{"metadata", metadata_json(md)},
              {"params", params_json(q)},
              {"C", std::isinf(C) ? Json("inf") : Json(C)},
              {"endpoint", to_string(t.endpoint)},
              {"samples", t.samples.size()},
              {"last", {{"eta", last.s.eta}, {"X", num(last.s.X)}, {"Y", num(last.s.Y)}, {"Z", num(last.s.Z)}}},
              {"note", t.note}};
}

inline Json report_json(const ShootingReport& r, const Metadata& md) {
  Json grid = Json::array();
  for (const auto& g : r.grid) {
    Json e{{"A", g.A}, {"class", to_string(g.cls)}, {"tail_constant", num(g.tail_constant)}};
    if (g.q5_exit != Q5Exit::None) e["q5_exit"] = to_string(g.q5_exit);
    if (g.support_edge) e["support_edge"] = num(g.support_edge);
    if (g.phase_endpoint) {
      e["phase_endpoint"] = to_string(*g.phase_endpoint);
      e["consistent"] = g.consistent;
    }
    e["g_interior_minimum"] = g.g_interior_minimum;
    if (!g.note.empty()) e["note"] = g.note;
    grid.push_back(e);
  }
  Json brackets = Json::array();
  for (const auto& b : r.flips) {
    Json e{{"lo", b.lo},
           {"hi", b.hi},
           {"lo_class", to_string(b.lo_class)},
           {"hi_class", to_string(b.hi_class)},
           {"rel_width", b.rel_width()},
           {"iterations", b.iterations},
           {"valid", b.valid},
           {"algebraic_max", num(b.algebraic_max)},
           {"transversal_min", num(b.transversal_min)}};
    if (b.threshold_trajectory) {
      const auto& t = *b.threshold_trajectory;
      Json th{{"A", *b.threshold_A},
              {"class", to_string(t.termination)},
              {"q5_exit", to_string(t.q5_exit)},
              {"refined_rel_width", b.refined_width},
              {"flux_ratio", num(t.flux_ratio)},
              {"support_edge", num(t.support_edge)},
              {"edge_slope", num(t.edge_slope)},
              {"edge_slope_law", t.support_edge ? num(interface_slope(r.params, *t.support_edge)) : Json(nullptr)},
              {"tail_constant", num(t.tail_constant)},
              {"gaussian_span", Json::array({t.gaussian_span_lo, t.gaussian_span_hi})}};
      e["threshold"] = th;
    }
    if (!b.note.empty()) e["note"] = b.note;
    brackets.push_back(e);
  }
  return Json{{"metadata", metadata_json(md)},
              {"params", params_json(r.params)},
              {"grid", grid},
              {"brackets", brackets},
              {"a_star_lower", num(r.a_star_lower)},
              {"a_star_upper", num(r.a_star_upper)},
              {"bracket_width", r.bracket_width},
              {"tolerances", tolerances_json(r.tolerances)}};
}

inline void write_report_csv(std::ostream& os, const ShootingReport& r, const Metadata& md) {
  write_metadata(os, md);
  os << "A,class,tail_constant\n";
  for (const auto& g : r.grid)
    os << fmt17(g.A) << ',' << to_string(g.cls) << ',' << (g.tail_constant ? fmt17(*g.tail_constant) : "") << '\n';
}

}  // namespace hhp
