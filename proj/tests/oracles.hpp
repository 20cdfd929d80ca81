#pragma once

// Reference values computed independently of the library code paths.

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace oracle {

inline double
normal_cdf(double x)
{
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

/// CDF of the Gaussian-kernel density estimate sum_j Phi((x - y_j) / s) / n.
inline double
kernel_cdf(const Eigen::VectorXd& y, double sigma2, double x)
{
  const double s = std::sqrt(sigma2);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < y.size(); ++j)
    acc += normal_cdf((x - y(j)) / s);
  return acc / static_cast<double>(y.size());
}

inline double
gamma_cdf(double k, double theta, double x)
{
  if (x <= 0.0)
    return 0.0;
  // Series for the regularized lower incomplete gamma function.
  const double z = x / theta;
  double term = 1.0 / k, sum = term;
  for (int n = 1; n < 2000; ++n) {
    term *= z / (k + n);
    sum += term;
    if (term < sum * 1e-17)
      break;
  }
  return std::exp(-z + k * std::log(z) - std::lgamma(k)) * sum;
}

inline double
weibull_cdf(double k, double theta, double x)
{
  return x <= 0.0 ? 0.0 : 1.0 - std::exp(-std::pow(x / theta, k));
}

inline double
uniform_cdf(double lo, double hi, double x)
{
  return x <= lo ? 0.0 : x >= hi ? 1.0 : (x - lo) / (hi - lo);
}

/// Matrix with i.i.d. standard normal entries.
inline Eigen::MatrixXd
random_matrix(std::mt19937_64& gen, int rows, int cols)
{
  std::normal_distribution<double> nd;
  Eigen::MatrixXd M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      M(i, j) = nd(gen);
  return M;
}

inline Eigen::VectorXd
random_vector(std::mt19937_64& gen, int n)
{
  return random_matrix(gen, n, 1).col(0);
}

} // namespace oracle
