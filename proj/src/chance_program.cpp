#include "ecfcc/chance_program.hpp"

#include "ecfcc/error.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace ecfcc {

namespace {

void
require_positive_definite(const Eigen::MatrixXd& M, const char* name, Eigen::Index dim)
{
  if (M.rows() != dim || M.cols() != dim)
    throw DimensionError(std::string(name) + " must be " + std::to_string(dim) + " x " +
                         std::to_string(dim));
  if (!(M - M.transpose()).isZero(1e-12 * std::max(1.0, M.cwiseAbs().maxCoeff())))
    throw ConfigError(std::string(name) + " must be symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success)
    throw ConfigError(std::string(name) + " must be positive definite");
}

} // namespace

QuadraticCost
expand_cost(const ConcatenatedSystem& csys,
            const Eigen::VectorXd& x0,
            const Eigen::VectorXd& x_ref,
            const Eigen::MatrixXd& Q,
            const Eigen::MatrixXd& R,
            const MomentEstimates& moments)
{
  require_positive_definite(Q, "Q", csys.state_dim());
  require_positive_definite(R, "R", csys.input_dim());
  if (x0.size() != csys.n)
    throw DimensionError("initial state has the wrong length");
  if (x_ref.size() != csys.state_dim())
    throw DimensionError("reference trajectory must have length n(N+1)");
  if (moments.mean.size() != csys.disturbance_dim() ||
      moments.cov_diag.size() != csys.disturbance_dim())
    throw DimensionError("moment estimates must have length pN");

  const Eigen::VectorXd offset = csys.Abar * x0 + csys.Gbar * moments.mean - x_ref;
  QuadraticCost cost;
  cost.H = csys.Bbar.transpose() * Q * csys.Bbar + R;
  cost.H = 0.5 * (cost.H + cost.H.transpose()).eval();
  cost.f = 2.0 * csys.Bbar.transpose() * (Q * offset);
  const Eigen::MatrixXd GC = csys.Gbar * moments.cov_diag.asDiagonal();
  cost.trace_term = (Q * GC * csys.Gbar.transpose()).trace();
  cost.c0 = offset.dot(Q * offset) + cost.trace_term;
  return cost;
}

const char*
to_string(RowKind kind)
{
  switch (kind) {
    case RowKind::pwa:
      return "pwa";
    case RowKind::restriction:
      return "restriction";
    case RowKind::risk_budget:
      return "risk_budget";
    case RowKind::risk_floor:
      return "risk_floor";
    case RowKind::input_upper:
      return "input_upper";
    case RowKind::input_lower:
      return "input_lower";
  }
  return "unknown";
}

namespace {

RowKind
row_kind_from_string(const std::string& s)
{
  for (auto k : { RowKind::pwa, RowKind::restriction, RowKind::risk_budget, RowKind::risk_floor,
                  RowKind::input_upper, RowKind::input_lower }) {
    if (s == to_string(k))
      return k;
  }
  throw ConfigError("unknown row kind '" + s + "'");
}

} // namespace

QpProblem
ChanceProgram::to_qp() const
{
  const double scale = objective_scale();
  QpProblem qp{ (2.0 / scale) * H, f / scale, A, b };
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const double nrm = A.row(i).norm();
    if (nrm > 0.0) {
      qp.A.row(i) /= nrm;
      qp.b(i) /= nrm;
    }
  }
  return qp;
}

double
ChanceProgram::objective_scale() const
{
  return std::max({ 1.0, 2.0 * H.cwiseAbs().maxCoeff(), f.cwiseAbs().maxCoeff() });
}

Eigen::VectorXd
ChanceProgram::interior_guess(const Eigen::VectorXd& u_min, const Eigen::VectorXd& u_max) const
{
  Eigen::VectorXd z(layout.size());
  const auto m = u_min.size();
  for (int k = 0; k < layout.num_inputs; ++k)
    z(k) = 0.5 * (u_min(k % m) + u_max(k % m));
  if (layout.num_risks > 0)
    z.tail(layout.num_risks).setConstant(risk_budget / (2.0 * layout.num_risks));
  return z;
}

ChanceProgram
assemble(const AssemblyInput& in)
{
  if (!in.csys || !in.constraints || !in.pwas)
    throw PreconditionError("assemble: system, constraints and PWAs are required");
  const auto& csys = *in.csys;
  const auto& cons = *in.constraints;
  const auto& pwas = *in.pwas;
  cons.validate(csys.state_dim());
  const int l = cons.size();
  if (static_cast<int>(pwas.size()) != l)
    throw PreconditionError("assemble: " + std::to_string(pwas.size()) +
                            " PWA under-approximations for " + std::to_string(l) +
                            " constraint rows");
  if (!(in.risk_budget >= 0.0 && in.risk_budget <= 1.0))
    throw PreconditionError("risk budget Delta must lie in [0, 1]");
  const int nu = csys.input_dim();
  if (in.u_min.size() != csys.m || in.u_max.size() != csys.m)
    throw DimensionError("input bounds must have one entry per input");
  if (in.cost.H.rows() != nu || in.cost.f.size() != nu)
    throw DimensionError("cost terms do not match the input dimension");

  ChanceProgram prog;
  prog.layout = { nu, l };
  prog.risk_budget = in.risk_budget;
  const int nz = prog.layout.size();
  prog.H = Eigen::MatrixXd::Zero(nz, nz);
  prog.H.topLeftCorner(nu, nu) = in.cost.H;
  prog.f = Eigen::VectorXd::Zero(nz);
  prog.f.head(nu) = in.cost.f;
  prog.c0 = in.cost.c0;

  int total = 1 + l + 2 * nu;
  for (const auto& pwa : pwas)
    total += pwa.size(); // non-flat segments plus one restriction row
  prog.A = Eigen::MatrixXd::Zero(total, nz);
  prog.b = Eigen::VectorXd::Zero(total);
  prog.rows.reserve(static_cast<std::size_t>(total));

  const Eigen::VectorXd x_free = csys.Abar * in.x0;
  int row = 0;
  for (int i = 0; i < l; ++i) {
    const auto& h = cons.rows[static_cast<std::size_t>(i)];
    const auto& pwa = pwas[static_cast<std::size_t>(i)];
    const Eigen::RowVectorXd pB = h.normal.transpose() * csys.Bbar;
    const double margin0 = h.offset - h.normal.dot(x_free); // q_i - p_i^T Abar x0
    for (int r = 0; r + 1 < pwa.size(); ++r) {
      const auto& seg = pwa.segments[static_cast<std::size_t>(r)];
      prog.A.block(row, 0, 1, nu) = seg.slope * pB;
      prog.A(row, prog.layout.risk(i)) = -1.0;
      prog.b(row) = seg.slope * margin0 + seg.intercept - 1.0;
      prog.rows.push_back({ RowKind::pwa, i, r, 1.0 });
      ++row;
    }
    prog.A.block(row, 0, 1, nu) = pB;
    prog.b(row) = margin0 - pwa.x_lb;
    prog.rows.push_back({ RowKind::restriction, i, -1, 1.0 });
    ++row;
  }
  prog.A.block(row, nu, 1, l).setOnes();
  prog.b(row) = in.risk_budget;
  prog.rows.push_back({ RowKind::risk_budget, -1, -1, 1.0 });
  ++row;
  double floor_sum = 0.0;
  for (int i = 0; i < l; ++i) {
    const double cap = pwas[static_cast<std::size_t>(i)].cap();
    prog.A(row, prog.layout.risk(i)) = -1.0;
    prog.b(row) = -std::max(0.0, 1.0 - cap);
    floor_sum += std::max(0.0, 1.0 - cap);
    prog.rows.push_back({ RowKind::risk_floor, i, -1, cap });
    ++row;
  }
  for (int k = 0; k < nu; ++k) {
    prog.A(row, k) = 1.0;
    prog.b(row) = in.u_max(k % csys.m);
    prog.rows.push_back({ RowKind::input_upper, -1, k, 1.0 });
    ++row;
  }
  for (int k = 0; k < nu; ++k) {
    prog.A(row, k) = -1.0;
    prog.b(row) = -in.u_min(k % csys.m);
    prog.rows.push_back({ RowKind::input_lower, -1, k, 1.0 });
    ++row;
  }
  if (floor_sum > in.risk_budget) {
    std::ostringstream os;
    os << "risk floors from the CDF caps sum to " << floor_sum << " > Delta = " << in.risk_budget
       << "; the program is infeasible";
    prog.warnings.push_back(os.str());
  }
  return prog;
}

ChanceProgram
apply_confidence_margin(const ChanceProgram& prog, const ConfidenceMargin& margin)
{
  const double total = margin.total();
  if (!(total >= 0.0) || !(total < 1.0))
    throw PreconditionError("confidence margin eps + eps_E + eps_D must lie in [0, 1)");
  ChanceProgram out = prog;
  out.margin = prog.margin + total;
  // The flat segment stays as the floor delta_i >= 1 - cap_i; a sloped row
  // can still be met past the table end, so a tightened target above the
  // cap only makes the program probably infeasible.
  double target_sum = 0.0;
  for (std::size_t r = 0; r < out.rows.size(); ++r) {
    const auto& info = out.rows[r];
    const auto idx = static_cast<Eigen::Index>(r);
    if (info.kind == RowKind::pwa)
      out.b(idx) -= total;
    else if (info.kind == RowKind::risk_floor)
      target_sum += std::max(0.0, 1.0 - info.cap + out.margin);
  }
  if (target_sum > out.risk_budget) {
    std::ostringstream os;
    os << "after tightening by " << out.margin << " the risks needed to stay within the table caps sum to "
       << target_sum << " > Delta = " << out.risk_budget << "; the program is probably infeasible";
    out.warnings.push_back(os.str());
  }
  return out;
}

ControlSolution
solve(const ChanceProgram& prog,
      const QpSettings& settings,
      const Eigen::VectorXd& u_min,
      const Eigen::VectorXd& u_max)
{
  QpSettings s = settings;
  if (!s.initial)
    s.initial = prog.interior_guess(u_min, u_max);
  const QpProblem qp = prog.to_qp();
  QpResult r = solve_qp(qp, s);
  if (r.status == QpStatus::optimal && prog.layout.num_risks > 0) {
    // Risks do not enter the cost, so any slack in delta_i is arbitrary.
    // Report the smallest allocation the rows of i allow at this ubar.
    const int nu = prog.layout.num_inputs;
    Eigen::VectorXd z = r.z;
    Eigen::VectorXd need = Eigen::VectorXd::Constant(prog.layout.num_risks, -std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < prog.rows.size(); ++k) {
      const auto& info = prog.rows[k];
      if (info.kind != RowKind::pwa && info.kind != RowKind::risk_floor)
        continue;
      const auto row = static_cast<Eigen::Index>(k);
      const double v = prog.A.row(row).head(nu).dot(z.head(nu)) - prog.b(row);
      need(info.constraint) = std::max(need(info.constraint), v);
    }
    for (int i = 0; i < prog.layout.num_risks; ++i)
      z(prog.layout.risk(i)) = std::min(z(prog.layout.risk(i)), need(i));
    const KktResiduals kkt = kkt_residuals(qp, z, r.lambda);
    if (kkt.within(s.tol)) {
      r.z = z;
      r.kkt = kkt;
    }
  }
  ControlSolution out;
  out.u_bar = r.z.head(prog.layout.num_inputs);
  out.delta_bar = r.z.tail(prog.layout.num_risks);
  out.objective = prog.objective(r.z);
  out.status = r.status;
  out.kkt = r.kkt;
  out.iterations = r.iterations;
  out.diagnostic = r.diagnostic;
  return out;
}

void
write_program(std::ostream& os, const ChanceProgram& prog)
{
  const auto old_precision = os.precision(17);
  os << "layout " << prog.layout.num_inputs << " " << prog.layout.num_risks << "\n";
  os << "risk_budget " << prog.risk_budget << "\n";
  os << "margin " << prog.margin << "\n";
  os << "c0 " << prog.c0 << "\n";
  auto triplets = [&](const char* tag, const Eigen::MatrixXd& M, bool rows_header) {
    int nnz = 0;
    for (Eigen::Index i = 0; i < M.rows(); ++i)
      for (Eigen::Index j = 0; j < M.cols(); ++j)
        nnz += M(i, j) != 0.0;
    os << tag;
    if (rows_header)
      os << " " << M.rows();
    os << " " << nnz << "\n";
    for (Eigen::Index i = 0; i < M.rows(); ++i)
      for (Eigen::Index j = 0; j < M.cols(); ++j)
        if (M(i, j) != 0.0)
          os << i << " " << j << " " << M(i, j) << "\n";
  };
  triplets("H", prog.H, false);
  os << "f " << prog.f.size() << "\n";
  for (Eigen::Index i = 0; i < prog.f.size(); ++i)
    os << prog.f(i) << "\n";
  triplets("A", prog.A, true);
  os << "b " << prog.b.size() << "\n";
  for (std::size_t r = 0; r < prog.rows.size(); ++r) {
    const auto& info = prog.rows[r];
    os << prog.b(static_cast<Eigen::Index>(r)) << " " << to_string(info.kind) << " "
       << info.constraint << " " << info.index << " " << info.cap << "\n";
  }
  os.precision(old_precision);
}

ChanceProgram
read_program(std::istream& is)
{
  auto expect = [&](const char* tag) {
    std::string word;
    if (!(is >> word) || word != tag)
      throw ConfigError(std::string("program file: expected '") + tag + "', got '" + word + "'");
  };
  ChanceProgram prog;
  expect("layout");
  is >> prog.layout.num_inputs >> prog.layout.num_risks;
  expect("risk_budget");
  is >> prog.risk_budget;
  expect("margin");
  is >> prog.margin;
  expect("c0");
  is >> prog.c0;
  const int nz = prog.layout.size();
  if (!is || nz <= 0)
    throw ConfigError("program file: malformed header");

  int nnz = 0;
  expect("H");
  is >> nnz;
  prog.H = Eigen::MatrixXd::Zero(nz, nz);
  for (int k = 0; k < nnz; ++k) {
    int i, j;
    double v;
    is >> i >> j >> v;
    if (!is || i < 0 || j < 0 || i >= nz || j >= nz)
      throw ConfigError("program file: bad H entry " + std::to_string(k));
    prog.H(i, j) = v;
  }
  int n = 0;
  expect("f");
  is >> n;
  if (n != nz)
    throw ConfigError("program file: f length does not match the layout");
  prog.f.resize(n);
  for (int i = 0; i < n; ++i)
    is >> prog.f(i);
  int rows = 0;
  expect("A");
  is >> rows >> nnz;
  if (!is || rows < 0)
    throw ConfigError("program file: malformed A header");
  prog.A = Eigen::MatrixXd::Zero(rows, nz);
  for (int k = 0; k < nnz; ++k) {
    int i, j;
    double v;
    is >> i >> j >> v;
    if (!is || i < 0 || j < 0 || i >= rows || j >= nz)
      throw ConfigError("program file: bad A entry " + std::to_string(k));
    prog.A(i, j) = v;
  }
  expect("b");
  int brows = 0;
  is >> brows;
  if (brows != rows)
    throw ConfigError("program file: b length does not match A");
  prog.b.resize(rows);
  for (int r = 0; r < rows; ++r) {
    std::string kind;
    RowInfo info{};
    is >> prog.b(r) >> kind >> info.constraint >> info.index >> info.cap;
    if (!is)
      throw ConfigError("program file: bad b entry " + std::to_string(r));
    info.kind = row_kind_from_string(kind);
    prog.rows.push_back(info);
  }
  return prog;
}

} // namespace ecfcc
