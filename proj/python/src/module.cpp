#include "ecfcc/chance_program.hpp"
#include "ecfcc/ecf.hpp"
#include "ecfcc/error.hpp"
#include "ecfcc/inversion.hpp"
#include "ecfcc/qp.hpp"
#include "ecfcc/sampling.hpp"
#include "ecfcc/sandwich.hpp"
#include "ecfcc/scenario.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace ecfcc;

namespace {

py::dict
table_dict(const CdfTable& t)
{
  py::dict d;
  d["grid"] = t.grid;
  d["values"] = t.values;
  d["quad_tol"] = t.quad_tol;
  d["truncation"] = t.truncation;
  d["error_estimate"] = t.error_estimate;
  return d;
}

CdfTable
table_from(const Eigen::VectorXd& grid, const Eigen::VectorXd& values, double quad_tol)
{
  if (grid.size() != values.size())
    throw DimensionError("grid and values differ in length");
  CdfTable t;
  t.grid = grid;
  t.values = values;
  t.x_min = grid.size() ? grid(0) : 0.0;
  t.x_max = grid.size() ? grid(grid.size() - 1) : 0.0;
  t.quad_tol = quad_tol;
  return t;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
  m.doc() = "Chance-constrained open-loop control from disturbance samples";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ToleranceError>(m, "ToleranceError", base.ptr());
  py::register_exception<RestrictionError>(m, "RestrictionError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());

  py::class_<Distribution>(m, "Distribution")
    .def("mean", &Distribution::mean)
    .def("variance", &Distribution::variance)
    .def("__repr__", &Distribution::describe);
  m.def("uniform", [](double lo, double hi) { return Distribution{ UniformDist{ lo, hi } }; }, py::arg("lo"),
        py::arg("hi"));
  m.def("gamma", [](double k, double theta, double scale) { return Distribution{ GammaDist{ k, theta, scale } }; },
        py::arg("k"), py::arg("theta"), py::arg("scale") = 1.0);
  m.def("weibull",
        [](double k, double theta, double scale) { return Distribution{ WeibullDist{ k, theta, scale } }; },
        py::arg("k"), py::arg("theta"), py::arg("scale") = 1.0);
  m.def("gaussian", [](double mean, double variance) { return Distribution{ GaussianDist{ mean, variance } }; },
        py::arg("mean") = 0.0, py::arg("variance") = 1.0);
  m.def("mixture", &make_mixture, py::arg("weight"), py::arg("first"), py::arg("second"));

  m.def(
    "sample",
    [](const std::vector<Distribution>& dims, int count, std::uint64_t seed) {
      SamplerSpec spec;
      spec.dims = dims;
      spec.seed = seed;
      spec.validate();
      return sample(spec, count);
    },
    py::arg("dims"), py::arg("count"), py::arg("seed") = 0, "count x len(dims) matrix of i.i.d. draws");

  m.def(
    "estimate_cdf",
    [](const Eigen::VectorXd& y, std::optional<double> sigma2, int grid, double quad_tol) {
      double s2 = 0.0;
      if (sigma2) {
        s2 = *sigma2;
      } else {
        const auto bw = select_bandwidth(y, 1);
        s2 = bw.sigma(0, 0);
      }
      InversionOptions o;
      o.grid_size = grid;
      o.quad_tol = quad_tol;
      auto d = table_dict(invert(make_scalar_ecf(y, s2), o));
      d["sigma2"] = s2;
      return d;
    },
    py::arg("samples"), py::arg("sigma2") = py::none(), py::arg("grid") = 1000, py::arg("quad_tol") = 1e-7,
    "CDF table of the smoothed ECF of scalar samples; plug-in bandwidth by default");

  m.def(
    "gaussian_cdf",
    [](double mean, double variance, double x_min, double x_max, int grid, double quad_tol) {
      InversionOptions o;
      o.grid_size = grid;
      o.quad_tol = quad_tol;
      return table_dict(invert(GaussianCharacteristicFunction(mean, variance), x_min, x_max, o));
    },
    py::arg("mean"), py::arg("variance"), py::arg("x_min"), py::arg("x_max"), py::arg("grid") = 1000,
    py::arg("quad_tol") = 1e-7, "Gil-Pelaez inversion of a Gaussian characteristic function");

  m.def(
    "under_approximate",
    [](const Eigen::VectorXd& grid, const Eigen::VectorXd& values, double eps, int max_segments,
       double quad_tol) {
      const auto pwa = under_approximate(table_from(grid, values, quad_tol), eps, max_segments);
      py::list segs;
      for (const auto& s : pwa.segments)
        segs.append(py::make_tuple(s.slope, s.intercept));
      py::dict d;
      d["segments"] = segs;
      d["x_lb"] = pwa.x_lb;
      d["x_max"] = pwa.x_max;
      d["eps"] = pwa.eps;
      return d;
    },
    py::arg("grid"), py::arg("values"), py::arg("eps") = 1e-3, py::arg("max_segments") = 20,
    py::arg("quad_tol") = 0.0, "Concave piecewise-affine under-approximation as (slope, intercept) pairs");

  m.def(
    "dkw_margin",
    [](int n, double alpha, double eps_D, double eps) {
      const auto c = dkw_margin(n, alpha, eps_D, eps);
      py::dict d;
      d["alpha"] = c.alpha;
      d["eps_E"] = c.eps_E;
      d["eps_D"] = c.eps_D;
      d["eps"] = c.eps;
      d["total"] = c.total();
      return d;
    },
    py::arg("sample_count"), py::arg("alpha") = 0.05, py::arg("eps_D") = 0.0, py::arg("eps") = 0.0);

  m.def(
    "solve_qp",
    [](const Eigen::MatrixXd& H, const Eigen::VectorXd& f, const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
       double tol, int max_iter) {
      QpProblem qp{ H, f, A, b };
      qp.validate();
      QpSettings s;
      s.tol = tol;
      s.max_iter = max_iter;
      const auto r = solve_qp(qp, s);
      py::dict d;
      d["status"] = to_string(r.status);
      d["z"] = r.z;
      d["lambda"] = r.lambda;
      d["objective"] = r.objective;
      d["iterations"] = r.iterations;
      d["diagnostic"] = r.diagnostic;
      return d;
    },
    py::arg("H"), py::arg("f"), py::arg("A"), py::arg("b"), py::arg("tol") = 1e-8, py::arg("max_iter") = 100,
    "min 1/2 z'Hz + f'z subject to Az <= b");

  m.def(
    "run_scenario",
    [](const std::string& path, std::optional<std::uint64_t> seed, bool margin, bool validate,
       std::optional<int> rollouts) {
      auto cfg = load_scenario(path);
      if (rollouts)
        cfg.validation.rollouts = *rollouts;
      PipelineOptions o;
      o.seed = seed;
      o.margin = margin;
      o.validate = validate;
      PipelineResult res;
      {
        py::gil_scoped_release release;
        res = run_pipeline(cfg, o);
      }
      py::dict d;
      d["status"] = to_string(res.solution.status);
      d["objective"] = res.solution.objective;
      d["u"] = res.solution.u_bar;
      d["delta"] = res.solution.delta_bar;
      d["rows"] = res.row_ids;
      d["pipeline_seconds"] = res.pipeline_seconds();
      d["warnings"] = res.warnings;
      if (res.report) {
        d["satisfaction"] = res.report->satisfaction;
        d["wilson"] = res.report->wilson_interval;
        d["mean_trajectory"] = res.report->mean_trajectory;
      }
      return d;
    },
    py::arg("path"), py::arg("seed") = py::none(), py::arg("margin") = false, py::arg("validate") = true,
    py::arg("rollouts") = py::none(), "Runs the full pipeline on a scenario file");
}
