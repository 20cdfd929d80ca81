#pragma once

#include "ecfcc/chance_program.hpp"
#include "ecfcc/ecf.hpp"
#include "ecfcc/inversion.hpp"
#include "ecfcc/monte_carlo.hpp"
#include "ecfcc/qp.hpp"
#include "ecfcc/sandwich.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <string>

namespace ecfcc::io {

/// Headerless numeric CSV; every row must have the same column count.
Eigen::MatrixXd read_csv(std::istream& is, const std::string& source = "<stream>");
Eigen::MatrixXd read_csv(const std::filesystem::path& path);
void write_csv(std::ostream& os, const Eigen::MatrixXd& M);

/// Two columns "x,cdf" without header.
void write_cdf_table(std::ostream& os, const CdfTable& table);
/// Rebuilds a table from (x, cdf) rows; the grid must be strictly increasing.
CdfTable read_cdf_table(std::istream& is, double quad_tol, const std::string& source = "<stream>");

/// "# x_lb=<v> eps=<v> x_max=<v>" then one "a,c" row per segment.
void write_pwa(std::ostream& os, const PwaUnderApprox& pwa);
PwaUnderApprox read_pwa(std::istream& is, const std::string& source = "<stream>");

/// Flat "key = value" record of a QP solve.
void write_qp_result(std::ostream& os, const QpResult& result);

nlohmann::json to_json(const Eigen::VectorXd& v);
nlohmann::json to_json(const Eigen::MatrixXd& M);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MomentEstimates& m);
nlohmann::json to_json(const KktResiduals& k);
nlohmann::json to_json(const ControlSolution& s);
nlohmann::json to_json(const McReport& r);

/// step, t, per-state mean and std, mean stage cost, inputs.
void write_trajectory_stats(std::ostream& os,
                            const McReport& report,
                            const Eigen::VectorXd& u_bar,
                            int m,
                            double dt);

void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace ecfcc::io
