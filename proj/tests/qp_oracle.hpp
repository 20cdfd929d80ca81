#pragma once

#include "ecfcc/qp.hpp"
#include "oracles.hpp"

#include <functional>
#include <optional>

namespace oracle {

/// Brute-force active-set oracle for strictly convex QPs: scans subsets
/// by size and returns the first that yields a KKT point.
inline std::optional<Eigen::VectorXd>
enumerate_active_sets(const ecfcc::QpProblem& qp)
{
  const int n = qp.num_vars(), m = qp.num_constraints();
  std::vector<int> idx;
  std::optional<Eigen::VectorXd> found;
  std::function<bool(int, int)> rec = [&](int start, int left) -> bool {
    if (left == 0) {
      const int k = static_cast<int>(idx.size());
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + k, n + k);
      Eigen::VectorXd rhs(n + k);
      K.topLeftCorner(n, n) = qp.H;
      rhs.head(n) = -qp.f;
      for (int r = 0; r < k; ++r) {
        K.block(n + r, 0, 1, n) = qp.A.row(idx[r]);
        K.block(0, n + r, n, 1) = qp.A.row(idx[r]).transpose();
        rhs(n + r) = qp.b(idx[r]);
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
      if (lu.rank() < n + k)
        return false;
      const Eigen::VectorXd sol = lu.solve(rhs);
      const Eigen::VectorXd z = sol.head(n);
      if (k > 0 && sol.tail(k).minCoeff() < -1e-10)
        return false;
      if (m > 0 && (qp.A * z - qp.b).maxCoeff() > 1e-10)
        return false;
      found = z;
      return true;
    }
    for (int i = start; i <= m - left; ++i) {
      idx.push_back(i);
      if (rec(i + 1, left - 1))
        return true;
      idx.pop_back();
    }
    return false;
  };
  for (int size = 0; size <= std::min(n, m); ++size)
    if (rec(0, size))
      return found;
  return std::nullopt;
}

inline ecfcc::QpProblem
random_qp(std::mt19937_64& gen, int n, int m)
{
  ecfcc::QpProblem qp;
  const Eigen::MatrixXd L = random_matrix(gen, n, n);
  qp.H = L * L.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
  qp.f = 5.0 * random_vector(gen, n);
  qp.A = random_matrix(gen, m, n);
  // Feasible by construction around a random point.
  const Eigen::VectorXd z0 = random_vector(gen, n);
  std::uniform_real_distribution<double> slack(0.0, 1.0);
  qp.b = qp.A * z0;
  for (int i = 0; i < m; ++i)
    qp.b(i) += slack(gen);
  return qp;
}

} // namespace oracle
