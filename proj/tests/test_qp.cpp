#include "ecfcc/error.hpp"
#include "ecfcc/qp.hpp"
#include "oracles.hpp"
#include "qp_oracle.hpp"

#include <doctest.h>

using namespace ecfcc;


TEST_CASE("single active bound")
{
  QpProblem qp;
  qp.H = Eigen::MatrixXd::Constant(1, 1, 2.0);
  qp.f = Eigen::VectorXd::Constant(1, -6.0);
  qp.A = Eigen::MatrixXd::Constant(1, 1, 1.0);
  qp.b = Eigen::VectorXd::Constant(1, 1.0);
  const auto r = solve_qp(qp);
  REQUIRE(r.status == QpStatus::optimal);
  CHECK(r.z(0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.lambda(0) == doctest::Approx(4.0).epsilon(1e-7));
  CHECK(r.objective == doctest::Approx(1.0 - 6.0));
}

TEST_CASE("symmetric halfplane")
{
  QpProblem qp;
  qp.H = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  qp.f = Eigen::VectorXd::Zero(2);
  qp.A = Eigen::MatrixXd::Constant(1, 2, -1.0);
  qp.b = Eigen::VectorXd::Constant(1, -2.0);
  const auto r = solve_qp(qp);
  REQUIRE(r.status == QpStatus::optimal);
  CHECK(r.z(0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.z(1) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("linear objective over a box")
{
  QpProblem qp;
  qp.H = Eigen::MatrixXd::Zero(2, 2);
  qp.f = -Eigen::VectorXd::Ones(2);
  qp.A.resize(4, 2);
  qp.A << 1, 0, 0, 1, -1, 0, 0, -1;
  qp.b.resize(4);
  qp.b << 1, 2, 0, 0;
  const auto r = solve_qp(qp);
  REQUIRE(r.status == QpStatus::optimal);
  CHECK(r.z(0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.z(1) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(kkt_residuals(qp, r.z, r.lambda).within(1e-8));
}

TEST_CASE("random QPs match the active-set enumeration oracle")
{
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> nv(1, 12), nc(1, 20);
  for (int trial = 0; trial < 50; ++trial) {
    const QpProblem qp = oracle::random_qp(gen, nv(gen), nc(gen));
    const auto ref = oracle::enumerate_active_sets(qp);
    REQUIRE(ref.has_value());
    const auto r = solve_qp(qp);
    REQUIRE(r.status == QpStatus::optimal);
    CHECK((r.z - *ref).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(kkt_residuals(qp, r.z, r.lambda).within(1e-8));
  }
}

TEST_CASE("KKT recomputation")
{
  QpProblem qp;
  qp.H = Eigen::MatrixXd::Identity(2, 2);
  qp.f = Eigen::VectorXd::Zero(2);
  qp.A = Eigen::MatrixXd::Identity(2, 2);
  qp.b = Eigen::VectorXd::Constant(2, -1.0);
  Eigen::VectorXd z(2), lam(2);
  z << -1.0, -0.5;
  lam << 1.0, 0.5;
  const auto k = kkt_residuals(qp, z, lam);
  CHECK(k.primal_inf == doctest::Approx(0.5));
  CHECK(k.dual_inf == doctest::Approx(0.0));
  CHECK(k.comp_slack == doctest::Approx(0.25));
  CHECK(k.lambda_min == doctest::Approx(0.5));
  CHECK_FALSE(k.within(1e-8));
}

TEST_CASE("argmin is invariant to scaling the objective")
{
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 10; ++trial) {
    QpProblem qp = oracle::random_qp(gen, 6, 10);
    const auto a = solve_qp(qp);
    qp.H *= 37.0;
    qp.f *= 37.0;
    const auto b = solve_qp(qp);
    REQUIRE(a.status == QpStatus::optimal);
    REQUIRE(b.status == QpStatus::optimal);
    CHECK((a.z - b.z).cwiseAbs().maxCoeff() <= 1e-7);
  }
}

TEST_CASE("adding a constraint never lowers the optimum")
{
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 10; ++trial) {
    QpProblem qp = oracle::random_qp(gen, 5, 12);
    QpProblem fewer = qp;
    fewer.A = qp.A.topRows(11);
    fewer.b = qp.b.head(11);
    const auto a = solve_qp(fewer);
    const auto b = solve_qp(qp);
    REQUIRE(a.status == QpStatus::optimal);
    REQUIRE(b.status == QpStatus::optimal);
    CHECK(b.objective >= a.objective - 1e-9);
  }
}

TEST_CASE("infeasible problems carry a Farkas certificate")
{
  QpProblem qp;
  qp.H = Eigen::MatrixXd::Identity(2, 2);
  qp.f = Eigen::VectorXd::Zero(2);
  qp.A.resize(3, 2);
  qp.A << 1, 1, -1, 0, 0, -1;
  qp.b.resize(3);
  qp.b << -1, 0, 0;
  const auto r = solve_qp(qp);
  REQUIRE(r.status == QpStatus::infeasible);
  const Eigen::VectorXd& y = r.certificate;
  REQUIRE(y.size() == 3);
  CHECK(y.minCoeff() >= -1e-12);
  CHECK((qp.A.transpose() * y).cwiseAbs().maxCoeff() <= 1e-6 * y.sum());
  CHECK(qp.b.dot(y) < 0.0);
  CHECK_FALSE(r.diagnostic.empty());
}

TEST_CASE("unconstrained problems")
{
  QpProblem qp;
  qp.H = 4.0 * Eigen::MatrixXd::Identity(3, 3);
  qp.f = Eigen::Vector3d(4.0, -8.0, 0.0);
  qp.A.resize(0, 3);
  qp.b.resize(0);
  const auto r = solve_qp(qp);
  REQUIRE(r.status == QpStatus::optimal);
  CHECK((r.z - Eigen::Vector3d(-1.0, 2.0, 0.0)).norm() < 1e-12);
}

TEST_CASE("iteration limit")
{
  std::mt19937_64 gen(4);
  const QpProblem qp = oracle::random_qp(gen, 12, 20);
  QpSettings s;
  s.max_iter = 1;
  const auto r = solve_qp(qp, s);
  CHECK(r.status == QpStatus::max_iterations);
  CHECK(r.z.size() == 12);
  CHECK(std::string(to_string(r.status)) == "max-iterations");
}

TEST_CASE("malformed problems")
{
  QpProblem qp;
  qp.H = Eigen::MatrixXd::Identity(2, 2);
  qp.f = Eigen::VectorXd::Zero(3);
  qp.A.resize(0, 2);
  qp.b.resize(0);
  CHECK_THROWS_AS(solve_qp(qp), DimensionError);
  qp.f = Eigen::VectorXd::Zero(2);
  qp.H(0, 0) = -1.0;
  CHECK_THROWS_AS(solve_qp(qp), ConfigError);
}
