#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hhp/exponents.hpp"
#include "hhp/io.hpp"
#include "hhp/phase_system.hpp"
#include "hhp/profile_ode.hpp"
#include "hhp/shooting.hpp"
#include "hhp/verify.hpp"

namespace {

constexpr int kOk = 0, kUnresolved = 1, kInvalid = 2;

struct Config {
  double m = 0, p = 0, sigma = 0;
  int dim = 0;
  double rtol = 1e-10, atol = 1e-12, xi_max = 1e4;
  std::string out, format, summary;

  double A = 0;
  std::string C = "1";
  double eps = 1e-6;

  double a_min = 1e-2, a_max = 1e2;
  int n = 17;
  std::vector<double> grid;
  double bisect_tol = 1e-6;
  int phase_every = 1;
  unsigned threads = 0;
};

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw std::runtime_error("cannot open " + path);
    }
  }
  std::ostream& os() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

hhp::ProblemParams params(const Config& c) { return {c.m, c.p, c.sigma, c.dim}; }

hhp::ProfileOptions profile_options(const Config& c) {
  if (!(c.rtol > 0.0) || !(c.atol > 0.0)) throw std::domain_error("tolerances must be positive");
  if (!(c.xi_max > 1.0)) throw std::domain_error("xi-max must exceed 1");
  hhp::ProfileOptions o;
  o.rtol = c.rtol;
  o.atol = c.atol;
  o.xi_max = c.xi_max;
  return o;
}

void write_json(std::ostream& os, const hhp::Json& j) { os << j.dump(2) << '\n'; }

int cmd_exponents(const Config& c) {
  const auto q = params(c);
  const auto md = hhp::base_metadata(q, "exponents");
  Output out(c.out);
  if (c.format == "json") {
    write_json(out.os(), hhp::exponents_json(q, md));
    return kOk;
  }
  const auto e = hhp::derive_exponents(q);
  hhp::write_metadata(out.os(), md);
  char buf[256];
  auto row = [&](const char* k, const std::string& v) {
    std::snprintf(buf, sizeof buf, "%-8s %s\n", k, v.c_str());
    out.os() << buf;
  };
  row("alpha", hhp::fmt17(e.alpha));
  row("beta", hhp::fmt17(e.beta));
  row("L", hhp::fmt17(e.bigL));
  row("p_F", hhp::fmt17(e.pF));
  row("p_c", e.pc.str());
  row("p_S", e.pS.str());
  row("regime", std::string(hhp::to_string(e.regime)));
  return kOk;
}

int cmd_integrate(const Config& c) {
  const auto q = params(c);
  if (!(c.A > 0.0) || !std::isfinite(c.A)) throw std::domain_error("A must be positive and finite");
  const auto o = profile_options(c);
  const auto t = hhp::integrate_profile(q, c.A, o);
  auto md = hhp::base_metadata(q, "integrate");
  hhp::add_tolerances(md, o);
  md.emplace_back("A", hhp::fmt17(c.A));
  md.emplace_back("class", std::string(hhp::to_string(t.termination)));
  const auto summary = hhp::profile_summary_json(t, q, c.A, o, md);
  if (c.format == "json") {
    Output out(c.out);
    write_json(out.os(), summary);
  } else {
    Output out(c.out);
    hhp::write_profile_csv(out.os(), t, q, md);
    const std::string sp = !c.summary.empty() ? c.summary : (c.out.empty() || c.out == "-" ? "" : c.out + ".json");
    if (!sp.empty()) {
      Output s(sp);
      write_json(s.os(), summary);
    }
  }
  return t.termination == hhp::TailClass::Unresolved ? kUnresolved : kOk;
}

double parse_c(const std::string& s) {
  if (s == "inf" || s == "+inf" || s == "infinity") return INFINITY;
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::domain_error("C must be a number or inf");
  }
  if (pos != s.size() || !(v >= 0.0) || std::isnan(v)) throw std::domain_error("C must be >= 0 or inf");
  return v;
}

int cmd_phase(const Config& c) {
  const auto q = params(c);
  const double C = parse_c(c.C);
  if (!(c.eps > 0.0)) throw std::domain_error("eps must be positive");
  hhp::PhaseOptions po;
  po.rtol = c.rtol;
  po.atol = c.atol;
  const auto t = hhp::integrate_phase(q, hhp::seed_unstable_manifold(q, C, c.eps), po);
  auto md = hhp::base_metadata(q, "phase");
  md.emplace_back("rtol", hhp::fmt17(c.rtol));
  md.emplace_back("atol", hhp::fmt17(c.atol));
  md.emplace_back("C", hhp::fmt17(C));
  md.emplace_back("eps", hhp::fmt17(c.eps));
  md.emplace_back("endpoint", std::string(hhp::to_string(t.endpoint)));
  const auto summary = hhp::phase_summary_json(t, q, C, md);
  Output out(c.out);
  if (c.format == "json") {
    write_json(out.os(), summary);
  } else {
    hhp::write_phase_csv(out.os(), t, md);
    const std::string sp = !c.summary.empty() ? c.summary : (c.out.empty() || c.out == "-" ? "" : c.out + ".json");
    if (!sp.empty()) {
      Output s(sp);
      write_json(s.os(), summary);
    }
  }
  return t.endpoint == hhp::PhaseEndpoint::Unresolved ? kUnresolved : kOk;
}

int cmd_shoot(const Config& c) {
  const auto q = params(c);
  const auto o = profile_options(c);
  if (!(c.bisect_tol > 0.0)) throw std::domain_error("bisect-tol must be positive");
  const auto grid = c.grid.empty() ? hhp::log_grid(c.a_min, c.a_max, c.n) : c.grid;
  hhp::SweepOptions so;
  so.threads = c.threads;
  so.phase_check_every = c.phase_every;
  hhp::BisectOptions bo;
  bo.rel_tol = c.bisect_tol;
  const auto r = hhp::shoot(q, grid, o, so, bo);
  auto md = hhp::base_metadata(q, "shoot");
  hhp::add_tolerances(md, o);
  md.emplace_back("bisect_tol", hhp::fmt17(c.bisect_tol));
  Output out(c.out);
  if (c.format == "csv")
    hhp::write_report_csv(out.os(), r, md);
  else
    write_json(out.os(), hhp::report_json(r, md));
  bool unresolved = false;
  for (const auto& g : r.grid) unresolved |= g.cls == hhp::TailClass::Unresolved;
  for (const auto& b : r.flips) unresolved |= !b.valid;
  return unresolved ? kUnresolved : kOk;
}

int cmd_verify(const Config& c) {
  const auto q = params(c);
  const auto checks = hhp::verify_suite(q);
  const auto md = hhp::base_metadata(q, "verify");
  Output out(c.out);
  bool failed = false;
  for (const auto& ch : checks) failed |= ch.status == hhp::CheckStatus::Fail;
  if (c.format == "json") {
    hhp::Json arr = hhp::Json::array();
    for (const auto& ch : checks)
      arr.push_back({{"name", ch.name},
                     {"status", hhp::to_string(ch.status)},
                     {"value", hhp::num(ch.value)},
                     {"tolerance", ch.tolerance},
                     {"detail", ch.detail}});
    write_json(out.os(), hhp::Json{{"metadata", hhp::metadata_json(md)}, {"checks", arr}});
  } else {
    hhp::write_metadata(out.os(), md);
    char buf[512];
    for (const auto& ch : checks) {
      std::snprintf(buf, sizeof buf, "%-4s %-20s %-11.3e tol %-8.1e %s\n", std::string(hhp::to_string(ch.status)).c_str(),
                    ch.name.c_str(), ch.value, ch.tolerance, ch.detail.c_str());
      out.os() << buf;
    }
  }
  return failed ? kUnresolved : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-similar profiles of u_t = Lap(u^m) + |x|^sigma u^p"};
  app.set_version_flag("--version", std::string(hhp::kVersion));
  app.set_config("--config", "", "key=value file; command-line flags take precedence");
  app.require_subcommand(1);

  Config c;
  app.add_option("--m", c.m, "diffusion exponent, m >= 1")->required();
  app.add_option("--p", c.p, "reaction exponent, p > m")->required();
  app.add_option("--sigma", c.sigma, "weight exponent, sigma > max(-2,-N)")->required();
  app.add_option("--dim", c.dim, "space dimension N >= 1")->required();
  app.add_option("--rtol", c.rtol, "relative tolerance")->capture_default_str();
  app.add_option("--atol", c.atol, "absolute tolerance")->capture_default_str();
  app.add_option("--xi-max", c.xi_max, "end of the integration range")->capture_default_str();
  app.add_option("--out", c.out, "output path (stdout if absent)");
  app.add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  auto* exp = app.add_subcommand("exponents", "derived exponents and regime")->fallthrough();
  auto* integ = app.add_subcommand("integrate", "profile from f(0)=A")->fallthrough();
  integ->add_option("--A", c.A, "profile height f(0)")->required();
  integ->add_option("--summary", c.summary, "summary JSON path (csv format)");
  auto* phase = app.add_subcommand("phase", "trajectory l_C of the phase system")->fallthrough();
  phase->add_option("--C", c.C, "family parameter, >= 0 or inf")->capture_default_str();
  phase->add_option("--eps", c.eps, "seed distance from P0")->capture_default_str();
  phase->add_option("--summary", c.summary, "summary JSON path (csv format)");
  auto* shoot = app.add_subcommand("shoot", "sweep in A and bisect every class flip")->fallthrough();
  shoot->add_option("--A-min", c.a_min, "smallest grid value")->capture_default_str();
  shoot->add_option("--A-max", c.a_max, "largest grid value")->capture_default_str();
  shoot->add_option("--n", c.n, "number of log-spaced grid values")->capture_default_str();
  shoot->add_option("--grid", c.grid, "explicit grid (overrides the log grid)");
  shoot->add_option("--bisect-tol", c.bisect_tol, "relative bracket width")->capture_default_str();
  shoot->add_option("--phase-every", c.phase_every, "phase cross-check every n-th point (0 = off)")
      ->capture_default_str();
  shoot->add_option("--threads", c.threads, "worker threads (0 = HH_NUM_THREADS or all cores)");
  auto* ver = app.add_subcommand("verify", "analytic check suite");

  ver->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    // exponents and verify print aligned text unless json is asked for
    if ((*ver || *exp) && c.format != "json") c.format = "text";
    if (c.format.empty()) c.format = *shoot ? "json" : "csv";
    if (*exp) return cmd_exponents(c);
    if (*integ) return cmd_integrate(c);
    if (*phase) return cmd_phase(c);
    if (*shoot) return cmd_shoot(c);
    if (*ver) return cmd_verify(c);
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  }
  return kOk;
}
