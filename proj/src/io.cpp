#include "ecfcc/io.hpp"

#include "ecfcc/error.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

namespace ecfcc::io {

namespace {

double
parse_number(std::string_view field, const std::string& source, int line)
{
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t'))
    field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
    field.remove_suffix(1);
  double value = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc() || ptr != end)
    throw ConfigError(source + ":" + std::to_string(line) + ": not a number: '" +
                      std::string(field) + "'");
  return value;
}

std::vector<double>
split_row(const std::string& text, const std::string& source, int line)
{
  std::vector<double> row;
  std::size_t start = 0;
  for (;;) {
    const auto comma = text.find(',', start);
    row.push_back(parse_number(std::string_view(text).substr(start, comma - start), source, line));
    if (comma == std::string::npos)
      break;
    start = comma + 1;
  }
  return row;
}

bool
blank(const std::string& s)
{
  return s.find_first_not_of(" \t\r") == std::string::npos;
}

std::ofstream
open_out(const std::filesystem::path& path)
{
  std::ofstream os(path);
  if (!os)
    throw Error("cannot write " + path.string());
  return os;
}

} // namespace

Eigen::MatrixXd
read_csv(std::istream& is, const std::string& source)
{
  std::vector<std::vector<double>> rows;
  std::string text;
  int line = 0;
  while (std::getline(is, text)) {
    ++line;
    if (blank(text) || text.front() == '#')
      continue;
    rows.push_back(split_row(text, source, line));
    if (rows.back().size() != rows.front().size())
      throw ConfigError(source + ":" + std::to_string(line) + ": expected " +
                        std::to_string(rows.front().size()) + " columns, found " +
                        std::to_string(rows.back().size()));
  }
  if (rows.empty())
    return {};
  Eigen::MatrixXd M(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return M;
}

Eigen::MatrixXd
read_csv(const std::filesystem::path& path)
{
  std::ifstream is(path);
  if (!is)
    throw ConfigError("cannot open " + path.string());
  return read_csv(is, path.string());
}

void
write_csv(std::ostream& os, const Eigen::MatrixXd& M)
{
  os << std::setprecision(17);
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c)
      os << (c ? "," : "") << M(r, c);
    os << "\n";
  }
}

void
write_cdf_table(std::ostream& os, const CdfTable& table)
{
  os << std::setprecision(17);
  for (int p = 0; p < table.size(); ++p)
    os << table.grid(p) << "," << table.values(p) << "\n";
}

CdfTable
read_cdf_table(std::istream& is, double quad_tol, const std::string& source)
{
  const Eigen::MatrixXd M = read_csv(is, source);
  if (M.cols() != 2 || M.rows() < 2)
    throw ConfigError(source + ": CDF table needs at least two rows of (x, cdf)");
  CdfTable t;
  t.grid = M.col(0);
  t.values = M.col(1);
  for (Eigen::Index p = 1; p < M.rows(); ++p) {
    if (!(t.grid(p) > t.grid(p - 1)))
      throw ConfigError(source + ":" + std::to_string(p + 1) + ": grid must be strictly increasing");
  }
  t.x_min = t.grid(0);
  t.x_max = t.grid(M.rows() - 1);
  t.quad_tol = quad_tol;
  return t;
}

void
write_pwa(std::ostream& os, const PwaUnderApprox& pwa)
{
  os << std::setprecision(17);
  os << "# x_lb=" << pwa.x_lb << " eps=" << pwa.eps << " x_max=" << pwa.x_max << "\n";
  for (const auto& s : pwa.segments)
    os << s.slope << "," << s.intercept << "\n";
}

PwaUnderApprox
read_pwa(std::istream& is, const std::string& source)
{
  std::string header;
  if (!std::getline(is, header) || header.rfind("# ", 0) != 0)
    throw ConfigError(source + ":1: expected '# x_lb=... eps=... x_max=...' header");
  PwaUnderApprox pwa;
  std::istringstream hs(header.substr(2));
  std::string item;
  int found = 0;
  while (hs >> item) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      continue;
    const auto key = item.substr(0, eq);
    const double value = parse_number(std::string_view(item).substr(eq + 1), source, 1);
    if (key == "x_lb")
      pwa.x_lb = value, ++found;
    else if (key == "eps")
      pwa.eps = value, ++found;
    else if (key == "x_max")
      pwa.x_max = value;
  }
  if (found != 2)
    throw ConfigError(source + ":1: header must carry x_lb and eps");
  const Eigen::MatrixXd M = read_csv(is, source);
  if (M.cols() != 2 || M.rows() < 1)
    throw ConfigError(source + ": expected (a, c) rows");
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    pwa.segments.push_back({ M(r, 0), M(r, 1) });
  return pwa;
}

void
write_qp_result(std::ostream& os, const QpResult& r)
{
  os << std::setprecision(17);
  os << "status = " << to_string(r.status) << "\n";
  os << "objective = " << r.objective << "\n";
  os << "iterations = " << r.iterations << "\n";
  os << "primal_inf = " << r.kkt.primal_inf << "\n";
  os << "dual_inf = " << r.kkt.dual_inf << "\n";
  os << "comp_slack = " << r.kkt.comp_slack << "\n";
  os << "lambda_min = " << r.kkt.lambda_min << "\n";
  auto vec = [&](const char* key, const Eigen::VectorXd& v) {
    os << key << " =";
    for (Eigen::Index i = 0; i < v.size(); ++i)
      os << " " << v(i);
    os << "\n";
  };
  vec("z", r.z);
  vec("lambda", r.lambda);
  if (!r.diagnostic.empty())
    os << "diagnostic = " << r.diagnostic << "\n";
}

nlohmann::json
to_json(const Eigen::VectorXd& v)
{
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

nlohmann::json
to_json(const Eigen::MatrixXd& M)
{
  auto j = nlohmann::json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    j.push_back(to_json(Eigen::VectorXd(M.row(r).transpose())));
  return j;
}

Eigen::VectorXd
vector_from_json(const nlohmann::json& j)
{
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

nlohmann::json
to_json(const MomentEstimates& m)
{
  return { { "mean", to_json(m.mean) }, { "second", to_json(m.second) }, { "cov_diag", to_json(m.cov_diag) } };
}

nlohmann::json
to_json(const KktResiduals& k)
{
  return { { "primal_inf", k.primal_inf },
           { "dual_inf", k.dual_inf },
           { "comp_slack", k.comp_slack },
           { "lambda_min", k.lambda_min } };
}

nlohmann::json
to_json(const ControlSolution& s)
{
  nlohmann::json j = { { "u_bar", to_json(s.u_bar) },
                       { "delta_bar", to_json(s.delta_bar) },
                       { "objective", s.objective },
                       { "status", to_string(s.status) },
                       { "iterations", s.iterations },
                       { "kkt", to_json(s.kkt) } };
  if (!s.diagnostic.empty())
    j["diagnostic"] = s.diagnostic;
  return j;
}

nlohmann::json
to_json(const McReport& r)
{
  return { { "n_rollouts", r.n_rollouts },
           { "satisfied", r.satisfied },
           { "satisfaction", r.satisfaction },
           { "wilson_interval", { r.wilson_interval.first, r.wilson_interval.second } },
           { "mean_stage_cost", to_json(r.mean_stage_cost) },
           { "mean_trajectory", to_json(r.mean_trajectory) },
           { "std_trajectory", to_json(r.std_trajectory) } };
}

void
write_trajectory_stats(std::ostream& os,
                       const McReport& report,
                       const Eigen::VectorXd& u_bar,
                       int m,
                       double dt)
{
  const auto steps = report.mean_trajectory.rows();
  const auto n = report.mean_trajectory.cols();
  os << "k,t";
  for (Eigen::Index d = 0; d < n; ++d)
    os << ",x" << d << "_mean";
  for (Eigen::Index d = 0; d < n; ++d)
    os << ",x" << d << "_std";
  os << ",stage_cost";
  for (int d = 0; d < m; ++d)
    os << ",u" << d;
  os << "\n" << std::setprecision(17);
  for (Eigen::Index k = 0; k < steps; ++k) {
    os << k << "," << k * dt;
    for (Eigen::Index d = 0; d < n; ++d)
      os << "," << report.mean_trajectory(k, d);
    for (Eigen::Index d = 0; d < n; ++d)
      os << "," << report.std_trajectory(k, d);
    os << "," << report.mean_stage_cost(k);
    for (int d = 0; d < m; ++d) {
      os << ",";
      if (k < steps - 1)
        os << u_bar(k * m + d);
    }
    os << "\n";
  }
}

void
write_text(const std::filesystem::path& path, const std::string& text)
{
  auto os = open_out(path);
  os << text;
}

} // namespace ecfcc::io
