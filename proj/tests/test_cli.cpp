#include "ecfcc/io.hpp"
#include "ecfcc/sampling.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace ecfcc;

namespace {

const std::filesystem::path root = std::filesystem::temp_directory_path() / "ecfcc_cli_test";

struct Run
{
  int code;
  std::string out;
  std::string err;
};

std::string
slurp(const std::filesystem::path& p)
{
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Run
cli(const std::string& args)
{
  std::filesystem::create_directories(root);
  const auto out = root / "stdout.txt", err = root / "stderr.txt";
  const std::string cmd = std::string(ECFCC_CLI_PATH) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return { WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err) };
}

std::string
scenario(const std::string& name)
{
  return std::string(ECFCC_SOURCE_DIR) + "/scenarios/" + name;
}

void
write_file(const std::filesystem::path& p, const std::string& text)
{
  std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p);
  os << text;
}

} // namespace

TEST_CASE("estimate writes a two-column table")
{
  SamplerSpec spec;
  spec.dims = { make_mixture(0.5, Distribution{ GaussianDist{ 0.0, 0.2 } }, Distribution{ WeibullDist{ 4.0, 2.0, 1.0 } }) };
  spec.seed = 1;
  std::filesystem::create_directories(root);
  {
    std::ofstream os(root / "y.csv");
    io::write_csv(os, sample(spec, 1000));
  }
  const auto r = cli("estimate --samples " + (root / "y.csv").string() + " --out " + (root / "cdf.csv").string());
  REQUIRE(r.code == 0);
  std::ifstream is(root / "cdf.csv");
  const auto M = io::read_csv(is);
  CHECK(M.rows() == 1000);
  CHECK(M.cols() == 2);
  for (Eigen::Index i = 1; i < M.rows(); ++i)
    CHECK(M(i, 1) >= M(i - 1, 1) - 1e-7);
}

TEST_CASE("approximate on an affine table gives one chord and the cap")
{
  std::ostringstream table;
  table.precision(17);
  for (int i = 0; i <= 100; ++i)
    table << i / 100.0 << "," << i / 100.0 << "\n";
  write_file(root / "affine.csv", table.str());
  const auto r = cli("approximate --table " + (root / "affine.csv").string());
  REQUIRE(r.code == 0);
  std::istringstream is(r.out);
  const auto pwa = io::read_pwa(is);
  REQUIRE(pwa.size() == 2);
  CHECK(pwa.segments[0].slope == doctest::Approx(1.0));
  CHECK(pwa.segments[1].slope == 0.0);
}

TEST_CASE("solve, validate and qp on the double integrator")
{
  const auto out = root / "di";
  std::filesystem::remove_all(out);
  const auto r = cli("solve --config " + scenario("double_integrator.cfg") + " --out " + out.string());
  REQUIRE(r.code == 0);
  CHECK(r.out.find("status: optimal") != std::string::npos);
  for (const char* f : { "manifest.json", "solution.json", "cdf_row_0.csv", "pwa_row_19.csv", "mc_report.json",
                         "trajectory_stats.csv", "program.txt" })
    CHECK(std::filesystem::exists(out / f));

  const std::string args = "validate --config " + scenario("double_integrator.cfg") + " --solution " +
                           (out / "solution.json").string() + " --rollouts 20000";
  const auto a = cli(args + " --out " + (root / "rep_a.json").string());
  const auto b = cli(args + " --out " + (root / "rep_b.json").string() + " --threads 3");
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  const std::string ra = slurp(root / "rep_a.json"), rb = slurp(root / "rep_b.json");
  CHECK(!ra.empty());
  CHECK(ra == rb);

  const auto q = cli("qp --program " + (out / "program.txt").string());
  REQUIRE(q.code == 0);
  CHECK(q.out.find("status = optimal") != std::string::npos);
}

TEST_CASE("moments subcommand")
{
  write_file(root / "w.csv", "1\n2\n3\n");
  const auto r = cli("moments --samples " + (root / "w.csv").string() + " --sigma 0.5");
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["mean"][0].get<double>() == doctest::Approx(2.0));
  CHECK(j["second"][0].get<double>() == doctest::Approx(14.0 / 3.0 + 0.5));
  CHECK(j["cov_diag"][0].get<double>() == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("exit codes")
{
  std::string text = slurp(scenario("double_integrator.cfg"));
  const auto pos = text.find("risk_budget: 0.2");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 16, "risk_budget: 0.0");
  write_file(root / "infeasible.cfg", text);
  const auto inf = cli("solve --config " + (root / "infeasible.cfg").string() + " --out " + (root / "inf").string());
  CHECK(inf.code == 2);
  CHECK(inf.err.find("risk floors") != std::string::npos);

  write_file(root / "broken.cfg", "system:\n  A: [[1.0]]\n  B: [[1.0]]\n  horizon: x\n");
  const auto bad = cli("solve --config " + (root / "broken.cfg").string() + " --out " + (root / "bad").string());
  CHECK(bad.code == 1);
  CHECK(bad.err.find("broken.cfg:4:") != std::string::npos);

  CHECK(cli("frobnicate").code == 1);
  CHECK(cli("").code == 1);
}
