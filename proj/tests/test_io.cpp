#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "hhp/io.hpp"

using namespace hhp;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(HHP_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  for (std::size_t n; (n = fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// the first line that is not a metadata comment
std::string header_line(const std::string& text) {
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (line.empty() || line[0] != '#') return line;
  return {};
}

fs::path scratch() {
  const auto d = fs::temp_directory_path() / ("hhp_io_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

constexpr const char* kFig1 = "--m 2 --p 5 --sigma 1 --dim 3";

}  // namespace

TEST(Csv, ProfileHeaderAndMetadata) {
  const ProblemParams q(2, 5, 1, 3);
  ProfileOptions o;
  const auto t = integrate_profile(q, 0.5, o);
  auto md = base_metadata(q, "integrate");
  add_tolerances(md, o);
  std::ostringstream os;
  write_profile_csv(os, t, q, md);
  const std::string s = os.str();
  EXPECT_EQ(s.rfind("# tool=hhp\n# version=", 0), 0u);
  EXPECT_NE(s.find("# rtol=1e-10\n"), std::string::npos);
  EXPECT_EQ(header_line(s), "xi,f,w,g");
  // 17 significant digits round-trip
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line) && line != "xi,f,w,g") {
  }
  std::getline(in, line);
  EXPECT_EQ(std::stod(line.substr(0, line.find(','))), t.samples.front().xi);
}

TEST(Csv, PhaseHeaderAndCharts) {
  const ProblemParams q(2, 5, 1, 3);
  const auto t = integrate_phase(q, seed_unstable_manifold(q, 0.0));
  std::ostringstream os;
  write_phase_csv(os, t, base_metadata(q, "phase"));
  const std::string s = os.str();
  EXPECT_EQ(header_line(s), "eta,X,Y,Z,chart");
  EXPECT_NE(s.find(",finite\n"), std::string::npos);
  EXPECT_NE(s.find(",x-proj\n"), std::string::npos);
}

TEST(Json, ReportLayout) {
  const ProblemParams q(2, 5, 1, 3);
  const auto r = shoot(q, {0.5, 2.0});
  const auto j = report_json(r, base_metadata(q, "shoot"));
  ASSERT_TRUE(j.is_object());
  EXPECT_EQ(j.begin().key(), "metadata");
  EXPECT_EQ(j["metadata"]["version"], kVersion);
  for (const char* k : {"params", "grid", "brackets", "tolerances"}) EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j["grid"][0]["class"], "AlgebraicDecay");
  EXPECT_EQ(j["grid"][1]["class"], "TransversalZero");
  const auto& b = j["brackets"][0];
  for (const char* k : {"lo", "hi", "lo_class", "hi_class"}) EXPECT_TRUE(b.contains(k)) << k;
  EXPECT_TRUE(j["tolerances"].contains("rtol"));
  const std::string dumped = j.dump(2);
  EXPECT_EQ(dumped.find("\"metadata\""), dumped.find('"'));
}

TEST(Json, ProfileSummaryRecordsClassificationRules) {
  const ProblemParams q(2, 5, 1, 3);
  ProfileOptions o;
  const auto t = integrate_profile(q, 3.0, o);
  const auto j = profile_summary_json(t, q, 3.0, o, base_metadata(q, "integrate"));
  EXPECT_EQ(j.begin().key(), "metadata");
  EXPECT_EQ(j["class"], "TransversalZero");
  EXPECT_TRUE(j["tolerances"]["classification"].contains("CompactSupport"));
  EXPECT_TRUE(j["tail_constant"].is_null());
}

TEST(Cli, ExponentsTable) {
  const auto r = cli(std::string("exponents ") + kFig1 + " --format json");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = Json::parse(r.out);
  EXPECT_EQ(j.begin().key(), "metadata");
  EXPECT_NEAR(j["p_F"].get<double>(), 3.0, 1e-12);
  EXPECT_NEAR(j["p_c"].get<double>(), 8.0, 1e-12);
  EXPECT_NEAR(j["p_S"].get<double>(), 14.0, 1e-12);
  EXPECT_EQ(j["regime"], "FujitaToSobolev");
  const auto super = cli("exponents --m 2 --p 15 --sigma 1 --dim 3");
  EXPECT_NE(super.out.find("SobolevSupercritical"), std::string::npos);
  const auto low = cli("exponents --m 2 --p 5 --sigma 1 --dim 2 --format json");
  EXPECT_EQ(Json::parse(low.out)["p_S"], "inf");
}

TEST(Cli, InvalidInputExitsWithTwo) {
  const auto r = cli("exponents --m 2 --p 5 --sigma -5 --dim 3");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("sigma must exceed max(-2,-N)"), std::string::npos) << r.out;
  EXPECT_EQ(cli(std::string("integrate ") + kFig1 + " --A 0").code, 2);
  EXPECT_EQ(cli(std::string("integrate ") + kFig1 + " --A -1").code, 2);
  EXPECT_EQ(cli(std::string("phase ") + kFig1 + " --C -1").code, 2);
  EXPECT_EQ(cli(std::string("phase ") + kFig1 + " --C abc").code, 2);
  EXPECT_EQ(cli("integrate --m 2 --p 5 --sigma 1 --dim 3").code, 2);
  EXPECT_EQ(cli(std::string("exponents ") + kFig1 + " --format xml").code, 2);
  EXPECT_EQ(cli("bogus").code, 2);
  EXPECT_EQ(cli(std::string("integrate ") + kFig1 + " --A 1 --rtol 0").code, 2);
}

TEST(Cli, IntegrateWritesCsvAndSummary) {
  const auto dir = scratch();
  const auto csv = dir / "profile.csv";
  const auto r = cli(std::string("integrate ") + kFig1 + " --A 0.5 --out " + csv.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(header_line(slurp(csv)), "xi,f,w,g");
  const auto j = Json::parse(slurp(csv.string() + ".json"));
  EXPECT_EQ(j["class"], "AlgebraicDecay");
  EXPECT_NEAR(j["tail_constant"].get<double>(), 0.769154071137, 1e-8);
  const auto fig2 = cli("integrate --m 2 --p 15 --sigma 1 --dim 3 --A 1 --format json");
  EXPECT_EQ(Json::parse(fig2.out)["class"], "AlgebraicDecay");
  fs::remove_all(dir);
}

TEST(Cli, PhaseSpecialSeeds) {
  const auto cyl = cli("phase --m 2 --p 14 --sigma 1 --dim 3 --C inf --format json");
  ASSERT_EQ(cyl.code, 0) << cyl.out;
  EXPECT_EQ(Json::parse(cyl.out)["endpoint"], "P1");
  EXPECT_EQ(Json::parse(cli(std::string("phase ") + kFig1 + " --C 0 --format json").out)["endpoint"], "Q1");
  const auto one = Json::parse(cli(std::string("phase ") + kFig1 + " --C 1 --format json").out);
  const std::string e = one["endpoint"];
  EXPECT_TRUE(e == "Q1" || e == "Q3" || e == "Q5") << e;
  const auto csv = cli(std::string("phase ") + kFig1 + " --C 1");
  EXPECT_EQ(header_line(csv.out), "eta,X,Y,Z,chart");
}

TEST(Cli, ShootReport) {
  const auto r = cli(std::string("shoot ") + kFig1 + " --grid 0.5 2 --threads 1");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = Json::parse(r.out);
  EXPECT_EQ(j.begin().key(), "metadata");
  ASSERT_EQ(j["brackets"].size(), 1u);
  EXPECT_LE(j["brackets"][0]["rel_width"].get<double>(), 1e-6);
  const auto csv = cli(std::string("shoot ") + kFig1 + " --A-min 0.1 --A-max 10 --n 3 --format csv");
  EXPECT_EQ(header_line(csv.out), "A,class,tail_constant");
}

TEST(Cli, VerifyTable) {
  const auto r = cli(std::string("verify ") + kFig1);
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("PASS fujita_tangency"), std::string::npos) << r.out;
  const auto j = Json::parse(cli("verify --m 2 --p 15 --sigma 1 --dim 3 --format json").out);
  bool stationary = false;
  for (const auto& c : j["checks"])
    if (c["name"] == "stationary_residual") {
      stationary = true;
      EXPECT_EQ(c["status"], "PASS");
      EXPECT_LT(c["value"].get<double>(), 1e-10);
    }
  EXPECT_TRUE(stationary);
}

TEST(Cli, ConfigFilePrecedence) {
  const auto dir = scratch();
  const auto cfg = dir / "run.ini";
  std::ofstream(cfg) << "m=2\np=15\nsigma=1\ndim=3\nformat=json\n";
  const auto from_file = Json::parse(cli("exponents --config " + cfg.string()).out);
  EXPECT_EQ(from_file["regime"], "SobolevSupercritical");
  const auto overridden = Json::parse(cli("exponents --config " + cfg.string() + " --p 5").out);
  EXPECT_EQ(overridden["regime"], "FujitaToSobolev");
  fs::remove_all(dir);
}

TEST(Cli, OutputIsDeterministic) {
  const std::string args = std::string("shoot ") + kFig1 + " --A-min 0.1 --A-max 10 --n 4 --bisect-tol 1e-3";
  const auto a = cli(args), b = cli(args + " --threads 3");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  const auto p1 = cli(std::string("integrate ") + kFig1 + " --A 1.2"), p2 = cli(std::string("integrate ") + kFig1 + " --A 1.2");
  EXPECT_EQ(p1.out, p2.out);
}
