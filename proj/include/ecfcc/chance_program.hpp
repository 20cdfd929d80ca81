#pragma once

#include "ecfcc/ecf.hpp"
#include "ecfcc/lti.hpp"
#include "ecfcc/qp.hpp"
#include "ecfcc/sandwich.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace ecfcc {

/// Expected tracking cost as a quadratic in ubar:
///   E[cost] = ubar^T H ubar + f^T ubar + c0.
struct QuadraticCost
{
  Eigen::MatrixXd H;
  Eigen::VectorXd f;
  double c0 = 0.0;
  /// tr(Q Gbar diag(C_w) Gbar^T), already included in c0.
  double trace_term = 0.0;
};

QuadraticCost expand_cost(const ConcatenatedSystem& csys,
                          const Eigen::VectorXd& x0,
                          const Eigen::VectorXd& x_ref,
                          const Eigen::MatrixXd& Q,
                          const Eigen::MatrixXd& R,
                          const MomentEstimates& moments);

/// Decision vector z = [ubar; deltabar].
struct VarLayout
{
  int num_inputs = 0;
  int num_risks = 0;

  int size() const { return num_inputs + num_risks; }
  int risk(int i) const { return num_inputs + i; }
};

enum class RowKind
{
  pwa,         ///< a_r (q_i - p_i^T xbar_nom) + c_r >= 1 - delta_i
  restriction, ///< q_i - p_i^T xbar_nom >= x_lb_i
  risk_budget, ///< sum_i delta_i <= Delta
  risk_floor,  ///< delta_i >= max(0, 1 - cap_i): the flat segment and delta_i >= 0
  input_upper,
  input_lower,
};

const char* to_string(RowKind kind);

struct RowInfo
{
  RowKind kind;
  int constraint = -1; ///< i for per-constraint rows
  int index = -1;      ///< segment r, or input index
  double cap = 1.0;    ///< cap_i on risk_floor rows
};

/// Convex QP over (ubar, deltabar): minimise z^T H z + f^T z + c0
/// subject to A z <= b.
struct ChanceProgram
{
  Eigen::MatrixXd H;
  Eigen::VectorXd f;
  double c0 = 0.0;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  VarLayout layout;
  std::vector<RowInfo> rows;
  double risk_budget = 0.0;
  /// Total confidence margin applied so far.
  double margin = 0.0;
  std::vector<std::string> warnings;

  double objective(const Eigen::VectorXd& z) const { return z.dot(H * z) + f.dot(z) + c0; }
  /// Standard form 1/2 z^T (2H) z + f^T z, divided by objective_scale(),
  /// with every row of A z <= b scaled to unit norm. The argmin is that of
  /// the program; the multipliers belong to the scaled problem.
  QpProblem to_qp() const;
  double objective_scale() const;
  /// Midpoint inputs, risks at Delta / (2l).
  Eigen::VectorXd interior_guess(const Eigen::VectorXd& u_min, const Eigen::VectorXd& u_max) const;
};

struct AssemblyInput
{
  const ConcatenatedSystem* csys = nullptr;
  Eigen::VectorXd x0;
  const PolytopeConstraints* constraints = nullptr;
  const std::vector<PwaUnderApprox>* pwas = nullptr;
  double risk_budget = 0.2;
  Eigen::VectorXd u_min;
  Eigen::VectorXd u_max;
  QuadraticCost cost;
};

/// Row order: for each constraint i, its PWA rows then its restriction
/// row; then the risk budget; then one floor row per i; then input upper
/// and lower bounds.
ChanceProgram assemble(const AssemblyInput& input);

/// Tightens every sloped PWA row by eps + eps_E + eps_D; floor rows are kept.
ChanceProgram apply_confidence_margin(const ChanceProgram& prog, const ConfidenceMargin& margin);

struct ControlSolution
{
  Eigen::VectorXd u_bar;
  Eigen::VectorXd delta_bar;
  double objective = 0.0;
  QpStatus status = QpStatus::max_iterations;
  KktResiduals kkt;
  int iterations = 0;
  std::string diagnostic;
};

ControlSolution solve(const ChanceProgram& prog,
                      const QpSettings& settings,
                      const Eigen::VectorXd& u_min,
                      const Eigen::VectorXd& u_max);

/// Sparse-triplet text export:
///   layout <num_inputs> <num_risks>
///   c0 <value>
///   H <nnz>       then "i j v" lines
///   f <n>         then one value per line
///   A <rows> <nnz> then "i j v" lines
///   b <rows>      then "<value> <kind> <constraint> <index> <cap>" lines
void write_program(std::ostream& os, const ChanceProgram& prog);
ChanceProgram read_program(std::istream& is);

} // namespace ecfcc
