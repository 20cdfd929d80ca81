#include "ecfcc/error.hpp"
#include "ecfcc/lti.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace ecfcc;

namespace {

LtiSystem
double_integrator()
{
  LtiSystem s;
  s.A.resize(2, 2);
  s.A << 1.0, 0.25, 0.0, 1.0;
  s.B.resize(2, 1);
  s.B << 0.03125, 0.25;
  s.G = Eigen::MatrixXd::Identity(2, 2);
  s.horizon = 10;
  s.u_min = Eigen::VectorXd::Constant(1, -100.0);
  s.u_max = Eigen::VectorXd::Constant(1, 100.0);
  return s;
}

/// Loop simulation written independently of the library.
Eigen::VectorXd
loop_simulate(const LtiSystem& s, const Eigen::VectorXd& x0, const Eigen::VectorXd& u, const Eigen::VectorXd& w)
{
  const int n = s.n(), m = s.m(), p = s.p(), N = s.horizon;
  Eigen::VectorXd out(n * (N + 1));
  Eigen::VectorXd x = x0;
  out.head(n) = x;
  for (int k = 0; k < N; ++k) {
    x = (s.A * x + s.B * u.segment(k * m, m) + s.G * w.segment(k * p, p)).eval();
    out.segment((k + 1) * n, n) = x;
  }
  return out;
}

} // namespace

TEST_CASE("double integrator Abar block 2 is A squared")
{
  const auto c = concatenate(double_integrator());
  Eigen::Matrix2d expected;
  expected << 1.0, 0.5, 0.0, 1.0;
  CHECK((c.Abar.block(4, 0, 2, 2) - expected).norm() == 0.0);
  CHECK(c.Abar.rows() == 22);
  CHECK(c.Bbar.rows() == 22);
  CHECK(c.Bbar.cols() == 10);
  CHECK(c.Gbar.cols() == 20);
}

TEST_CASE("identity dynamics over one step")
{
  LtiSystem s;
  s.A = Eigen::MatrixXd::Identity(2, 2);
  s.B = Eigen::MatrixXd::Zero(2, 1);
  s.G = Eigen::MatrixXd::Identity(2, 2);
  s.horizon = 1;
  s.u_min = Eigen::VectorXd::Constant(1, -1.0);
  s.u_max = Eigen::VectorXd::Constant(1, 1.0);
  const auto c = concatenate(s);
  Eigen::MatrixXd stacked(4, 2);
  stacked << Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2);
  CHECK(c.Abar == stacked);
  CHECK(c.Bbar.isZero(0.0));
  CHECK(c.Gbar.topRows(2).isZero(0.0));
  CHECK(c.Gbar.bottomRows(2) == Eigen::MatrixXd::Identity(2, 2));
}

TEST_CASE("concatenated evaluation matches loop simulation on random systems")
{
  std::mt19937_64 gen(17);
  std::uniform_int_distribution<int> dim(1, 4), hor(1, 6);
  for (int trial = 0; trial < 100; ++trial) {
    LtiSystem s;
    const int n = dim(gen), m = dim(gen), p = dim(gen);
    s.A = 0.5 * oracle::random_matrix(gen, n, n);
    s.B = oracle::random_matrix(gen, n, m);
    s.G = oracle::random_matrix(gen, n, p);
    s.horizon = hor(gen);
    s.u_min = Eigen::VectorXd::Constant(m, -1.0);
    s.u_max = Eigen::VectorXd::Constant(m, 1.0);
    const auto c = concatenate(s);
    const Eigen::VectorXd x0 = oracle::random_vector(gen, n);
    const Eigen::VectorXd u = oracle::random_vector(gen, m * s.horizon);
    const Eigen::VectorXd w = oracle::random_vector(gen, p * s.horizon);
    const Eigen::VectorXd ref = loop_simulate(s, x0, u, w);
    const double scale = std::max(1.0, ref.cwiseAbs().maxCoeff());
    CHECK((c.evaluate(x0, u, w) - ref).cwiseAbs().maxCoeff() <= 1e-12 * scale);
    CHECK((simulate(s, x0, u, w) - ref).cwiseAbs().maxCoeff() <= 1e-12 * scale);

    // Structural zeros: future inputs and disturbances never reach the past.
    for (int k = 0; k <= s.horizon; ++k)
      for (int j = k; j < s.horizon; ++j) {
        CHECK(c.Bbar.block(k * n, j * m, n, m).isZero(0.0));
        CHECK(c.Gbar.block(k * n, j * p, n, p).isZero(0.0));
      }
  }
}

TEST_CASE("dimension mismatch is a configuration error")
{
  auto s = double_integrator();
  s.B = Eigen::MatrixXd::Zero(3, 1);
  CHECK_THROWS_AS(concatenate(s), DimensionError);
  s = double_integrator();
  s.u_min = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(concatenate(s), ConfigError);
  s = double_integrator();
  s.horizon = 0;
  CHECK_THROWS_AS(concatenate(s), ConfigError);
}

TEST_CASE("time-varying funnel rows")
{
  const auto s = double_integrator();
  StateBoundSpec spec;
  spec.coordinate = 0;
  spec.lower = AffineBound{ -2.0, -50.0 };
  spec.upper = AffineBound{ 2.0, 50.0 };
  spec.dt = 0.25;
  const auto c = build_time_varying_halfspaces(spec, s);
  REQUIRE(c.size() == 20);

  // k = 1 lower row: -x1[1] <= 2 * 0.25 + 50.
  const auto& lo = c.rows[0];
  CHECK(lo.offset == doctest::Approx(50.5));
  CHECK(lo.normal(2) == -1.0);
  CHECK(lo.normal.cwiseAbs().sum() == 1.0);
  const auto& hi = c.rows[1];
  CHECK(hi.offset == doctest::Approx(50.5));
  CHECK(hi.normal(2) == 1.0);
  CHECK(c.rows[19].offset == doctest::Approx(55.0));
}

TEST_CASE("zero slope gives identical single-coordinate thresholds")
{
  const auto s = double_integrator();
  StateBoundSpec spec;
  spec.coordinate = 1;
  spec.upper = AffineBound{ 0.0, 3.0 };
  const auto c = build_time_varying_halfspaces(spec, s);
  REQUIRE(c.size() == s.horizon);
  for (int k = 0; k < c.size(); ++k) {
    CHECK(c.rows[k].offset == 3.0);
    CHECK(c.rows[k].normal((k + 1) * 2 + 1) == 1.0);
  }
  spec.include_initial = true;
  CHECK(build_time_varying_halfspaces(spec, s).size() == s.horizon + 1);
}

TEST_CASE("coordinate out of range")
{
  StateBoundSpec spec;
  spec.coordinate = 2;
  spec.upper = AffineBound{ 0.0, 1.0 };
  CHECK_THROWS_AS(build_time_varying_halfspaces(spec, double_integrator()), DimensionError);
}

TEST_CASE("polytope membership agrees with per-step bound checks")
{
  const auto s = double_integrator();
  StateBoundSpec spec;
  spec.coordinate = 0;
  spec.lower = AffineBound{ -2.0, -5.0 };
  spec.upper = AffineBound{ 2.0, 5.0 };
  spec.dt = 0.25;
  const auto c = build_time_varying_halfspaces(spec, s);
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::VectorXd u = 20.0 * oracle::random_vector(gen, 10);
    const Eigen::VectorXd w = oracle::random_vector(gen, 20);
    const Eigen::VectorXd x = simulate(s, Eigen::Vector2d::Zero(), u, w);
    bool ok = true;
    for (int k = 1; k <= 10; ++k) {
      const double t = 0.25 * k, pos = x(2 * k);
      ok = ok && pos >= -2.0 * t - 5.0 && pos <= 2.0 * t + 5.0;
    }
    CHECK(c.contains(x) == ok);
  }
}
