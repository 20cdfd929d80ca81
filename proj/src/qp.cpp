#include "ecfcc/qp.hpp"

#include "ecfcc/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace ecfcc {

void
QpProblem::validate() const
{
  const auto n = f.size();
  if (H.rows() != n || H.cols() != n)
    throw DimensionError("QP: H must be n x n with n = size of f");
  if (A.cols() != n && A.rows() > 0)
    throw DimensionError("QP: A must have one column per variable");
  if (A.rows() != b.size())
    throw DimensionError("QP: A and b row counts differ");
  if (!H.isApprox(H.transpose(), 1e-10) && !(H - H.transpose()).isZero(1e-12))
    throw ConfigError("QP: H must be symmetric");
  if (n > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    if (eig.eigenvalues().minCoeff() < -1e-9 * scale)
      throw ConfigError("QP: H must be positive semidefinite");
  }
}

KktResiduals
kkt_residuals(const QpProblem& qp, const Eigen::VectorXd& z, const Eigen::VectorXd& lambda)
{
  KktResiduals r;
  const Eigen::VectorXd slack = qp.A * z - qp.b;
  r.primal_inf = qp.b.size() > 0 ? std::max(0.0, slack.maxCoeff()) : 0.0;
  Eigen::VectorXd grad = qp.H * z + qp.f;
  if (qp.b.size() > 0)
    grad += qp.A.transpose() * lambda;
  r.dual_inf = grad.size() > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;
  r.comp_slack = qp.b.size() > 0 ? lambda.cwiseProduct(slack).cwiseAbs().maxCoeff() : 0.0;
  r.lambda_min = qp.b.size() > 0 ? lambda.minCoeff() : 0.0;
  return r;
}

const char*
to_string(QpStatus status)
{
  switch (status) {
    case QpStatus::optimal:
      return "optimal";
    case QpStatus::infeasible:
      return "infeasible";
    case QpStatus::max_iterations:
      return "max-iterations";
  }
  return "unknown";
}

namespace {

double
max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv)
{
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0)
      alpha = std::min(alpha, -v(i) / dv(i));
  }
  return alpha;
}

/// Solves the equality-constrained KKT system on the rows the iterate
/// marks active. Returns nothing if the polished point is no better.
std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>>
polish(const QpProblem& qp, const Eigen::VectorXd& s, const Eigen::VectorXd& lambda)
{
  const int n = qp.num_vars(), m = qp.num_constraints();
  std::vector<int> active;
  for (int i = 0; i < m; ++i) {
    if (lambda(i) > s(i))
      active.push_back(i);
  }
  const int na = static_cast<int>(active.size());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + na, n + na);
  Eigen::VectorXd rhs(n + na);
  K.topLeftCorner(n, n) = qp.H;
  rhs.head(n) = -qp.f;
  for (int r = 0; r < na; ++r) {
    K.block(n + r, 0, 1, n) = qp.A.row(active[static_cast<std::size_t>(r)]);
    K.block(0, n + r, n, 1) = qp.A.row(active[static_cast<std::size_t>(r)]).transpose();
    rhs(n + r) = qp.b(active[static_cast<std::size_t>(r)]);
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(K);
  const Eigen::VectorXd sol = cod.solve(rhs);
  if (!sol.allFinite())
    return std::nullopt;
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(m);
  for (int r = 0; r < na; ++r)
    lam(active[static_cast<std::size_t>(r)]) = sol(n + r);
  return std::make_pair(Eigen::VectorXd(sol.head(n)), lam);
}

struct IpmOutcome
{
  Eigen::VectorXd z;
  Eigen::VectorXd lambda;
  bool converged = false;
  bool diverged = false;
  int iterations = 0;
};

IpmOutcome
interior_point(const QpProblem& qp, const QpSettings& settings)
{
  const int n = qp.num_vars(), m = qp.num_constraints();
  IpmOutcome out;

  // Row equilibration; multipliers are mapped back on exit.
  Eigen::VectorXd row_norm(m);
  for (int i = 0; i < m; ++i) {
    const double nrm = qp.A.row(i).norm();
    row_norm(i) = nrm > 0.0 ? nrm : 1.0;
  }
  const Eigen::MatrixXd A = row_norm.cwiseInverse().asDiagonal() * qp.A;
  const Eigen::VectorXd b = qp.b.cwiseQuotient(row_norm);
  const double reg = 1e-13 * std::max(1.0, qp.H.cwiseAbs().maxCoeff());

  Eigen::VectorXd z = settings.initial && settings.initial->size() == n
                        ? *settings.initial
                        : Eigen::VectorXd(Eigen::VectorXd::Zero(n));
  Eigen::VectorXd s = (b - A * z).cwiseMax(0.0).array() + 1.0;
  Eigen::VectorXd lam = Eigen::VectorXd::Ones(m);

  auto unscaled_lambda = [&](const Eigen::VectorXd& l) { return Eigen::VectorXd(l.cwiseQuotient(row_norm)); };

  Eigen::MatrixXd M(n, n);
  for (int it = 0; it < settings.max_iter; ++it) {
    out.iterations = it;
    const Eigen::VectorXd rd = qp.H * z + qp.f + A.transpose() * lam;
    const Eigen::VectorXd rp = A * z + s - b;
    const double mu = s.dot(lam) / m;

    const Eigen::VectorXd lam_orig = unscaled_lambda(lam);
    if (kkt_residuals(qp, z, lam_orig).within(settings.tol)) {
      out.z = z;
      out.lambda = lam_orig;
      out.converged = true;
      return out;
    }
    if (mu < 1e-3) {
      if (auto polished = polish(qp, s.cwiseProduct(row_norm), lam_orig)) {
        if (kkt_residuals(qp, polished->first, polished->second).within(settings.tol)) {
          out.z = polished->first;
          out.lambda = polished->second;
          out.converged = true;
          return out;
        }
      }
    }
    if (!z.allFinite() || z.cwiseAbs().maxCoeff() > 1e14 || lam.cwiseAbs().maxCoeff() > 1e14) {
      out.diverged = true;
      break;
    }

    const Eigen::VectorXd d = lam.cwiseQuotient(s);
    M = qp.H + A.transpose() * d.asDiagonal() * A;
    M.diagonal().array() += reg;
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    Eigen::LDLT<Eigen::MatrixXd> ldlt;
    const bool use_llt = llt.info() == Eigen::Success;
    if (!use_llt)
      ldlt.compute(M);

    auto newton = [&](const Eigen::VectorXd& rc, Eigen::VectorXd& dz, Eigen::VectorXd& ds,
                      Eigen::VectorXd& dlam) {
      const Eigen::VectorXd rhs =
        -rd - A.transpose() * ((-rc + lam.cwiseProduct(rp)).cwiseQuotient(s));
      dz = use_llt ? Eigen::VectorXd(llt.solve(rhs)) : Eigen::VectorXd(ldlt.solve(rhs));
      ds = -rp - A * dz;
      dlam = (-rc - lam.cwiseProduct(ds)).cwiseQuotient(s);
    };

    Eigen::VectorXd dz, ds, dlam;
    const Eigen::VectorXd rc_aff = s.cwiseProduct(lam);
    newton(rc_aff, dz, ds, dlam);
    const double alpha_aff = std::min(max_step(s, ds), max_step(lam, dlam));
    const double mu_aff = (s + alpha_aff * ds).dot(lam + alpha_aff * dlam) / m;
    const double sigma = std::pow(mu_aff / mu, 3.0);

    const Eigen::VectorXd rc =
      rc_aff + ds.cwiseProduct(dlam) - Eigen::VectorXd::Constant(m, sigma * mu);
    newton(rc, dz, ds, dlam);
    const double alpha = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(lam, dlam)));

    z += alpha * dz;
    s += alpha * ds;
    lam += alpha * dlam;
    s = s.cwiseMax(1e-300);
    lam = lam.cwiseMax(1e-300);
  }
  out.iterations = settings.max_iter;
  out.z = z;
  out.lambda = unscaled_lambda(lam);
  return out;
}

QpResult
solve_unconstrained(const QpProblem& qp)
{
  QpResult r;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(qp.H);
  r.z = cod.solve(-qp.f);
  r.lambda.resize(0);
  r.kkt = kkt_residuals(qp, r.z, r.lambda);
  r.objective = qp.objective(r.z);
  r.status = QpStatus::optimal;
  return r;
}

/// min t  s.t.  A z - t <= b,  t >= -1
QpResult
phase_one(const QpProblem& qp, const QpSettings& settings)
{
  const int n = qp.num_vars(), m = qp.num_constraints();
  Eigen::VectorXd row_norm(m);
  for (int i = 0; i < m; ++i) {
    const double nrm = qp.A.row(i).norm();
    row_norm(i) = nrm > 0.0 ? nrm : 1.0;
  }
  QpProblem p1;
  p1.H = Eigen::MatrixXd::Zero(n + 1, n + 1);
  p1.H.diagonal().head(n).setConstant(1e-10);
  p1.f = Eigen::VectorXd::Zero(n + 1);
  p1.f(n) = 1.0;
  p1.A = Eigen::MatrixXd::Zero(m + 1, n + 1);
  p1.A.topLeftCorner(m, n) = row_norm.cwiseInverse().asDiagonal() * qp.A;
  p1.A.block(0, n, m, 1).setConstant(-1.0);
  p1.A(m, n) = -1.0;
  p1.b.resize(m + 1);
  p1.b.head(m) = qp.b.cwiseQuotient(row_norm);
  p1.b(m) = 1.0;

  QpSettings s1;
  s1.tol = settings.tol;
  s1.max_iter = std::max(settings.max_iter, 100);
  Eigen::VectorXd start = Eigen::VectorXd::Zero(n + 1);
  if (settings.initial && settings.initial->size() == n)
    start.head(n) = *settings.initial;
  start(n) = std::max(0.0, (p1.A.topLeftCorner(m, n) * start.head(n) - p1.b.head(m)).maxCoeff()) + 1.0;
  s1.initial = start;

  const IpmOutcome o = interior_point(p1, s1);
  QpResult r;
  r.z = o.z;
  r.lambda = o.lambda;
  // Multipliers of the normalised rows, mapped back to the rows of A.
  r.certificate = o.lambda.head(m).cwiseQuotient(row_norm);
  r.iterations = o.iterations;
  r.status = o.converged ? QpStatus::optimal : QpStatus::max_iterations;
  return r;
}

} // namespace

QpResult
solve_qp(const QpProblem& qp, const QpSettings& settings)
{
  qp.validate();
  if (!(settings.tol > 0.0))
    throw PreconditionError("QP tolerance must be positive");
  if (qp.num_constraints() == 0)
    return solve_unconstrained(qp);

  const IpmOutcome o = interior_point(qp, settings);
  QpResult r;
  r.z = o.z;
  r.lambda = o.lambda;
  r.iterations = o.iterations;
  r.kkt = kkt_residuals(qp, o.z, o.lambda);
  r.objective = qp.objective(o.z);
  if (o.converged) {
    r.status = QpStatus::optimal;
    return r;
  }

  const int n = qp.num_vars(), m = qp.num_constraints();
  const QpResult p1 = phase_one(qp, settings);
  const double violation = p1.z(n);
  std::ostringstream os;
  if (p1.status == QpStatus::optimal && violation > 10.0 * settings.tol) {
    r.status = QpStatus::infeasible;
    r.certificate = p1.certificate;
    std::vector<int> order(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i)
      order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return r.certificate(a) > r.certificate(b);
    });
    os << "infeasible: smallest achievable max violation (row-normalised) is " << violation
       << "; rows carrying the certificate:";
    for (std::size_t k = 0; k < order.size() && k < 8; ++k) {
      if (r.certificate(order[k]) <= 1e-9)
        break;
      os << " " << order[k];
    }
  } else {
    r.status = QpStatus::max_iterations;
    os << "no convergence after " << o.iterations << " iterations"
       << (o.diverged ? " (iterates diverged)" : "") << "; phase one max violation " << violation;
  }
  r.diagnostic = os.str();
  return r;
}

} // namespace ecfcc
