#include "storarb/robust.hpp"

#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "storarb/errors.hpp"
#include "storarb/normal.hpp"

namespace storarb {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Terms = std::vector<std::pair<Index, double>>;

void require_conf(double conf) {
  if (!(conf >= 0.5 && conf <= 0.999)) {
    throw std::invalid_argument(fmt::format("confidence {} outside [0.5, 0.999]", conf));
  }
}

void require_horizon(const FeasibleSet& fs, Index n, const char* what) {
  if (n != fs.horizon) {
    throw std::invalid_argument(
        fmt::format("{} has dimension {}, storage horizon is {}", what, n, fs.horizon));
  }
}

}  // namespace

RobustProgram reformulate_polyhedral(FeasibleSet fs, const PolyhedralSet& set) {
  require_horizon(fs, set.horizon(), "polyhedral set");
  if (set.D.cols() != fs.horizon || set.D.rows() != set.d.size()) {
    throw std::invalid_argument("polyhedral set D/d dimensions are inconsistent");
  }
  ProgramBuilder& pb = fs.builder;
  const Index rows = set.D.rows();
  const Index y = pb.add_variables("y", rows, ConeKind::NonNegative);
  const Index gamma = pb.add_variables("gamma", 1, ConeKind::Free);
  const Index slack = pb.add_variables("guarantee_slack", 1, ConeKind::NonNegative);
  // D'y + (p - b) = 0
  for (Index t = 0; t < fs.horizon; ++t) {
    Terms row;
    for (Index i = 0; i < rows; ++i) {
      if (set.D(i, t) != 0.0) row.emplace_back(y + i, set.D(i, t));
    }
    fs.append_net_terms(row, VectorXd::Unit(fs.horizon, t));
    pb.add_equality(row, 0.0);
  }
  // -d'y - gamma - slack = 0
  Terms guarantee = {{gamma, -1.0}, {slack, -1.0}};
  for (Index i = 0; i < rows; ++i) {
    if (set.d(i) != 0.0) guarantee.emplace_back(y + i, -set.d(i));
  }
  pb.add_equality(guarantee, 0.0);
  pb.set_objective(gamma, 1.0);
  RobustProgram rp{std::move(fs), {}, gamma};
  rp.program = rp.feasible.builder.build();
  return rp;
}

RobustProgram reformulate_ellipsoidal(FeasibleSet fs, const EllipsoidalSet& set) {
  require_horizon(fs, set.horizon(), "ellipsoidal set");
  if (set.shape.rows() != fs.horizon) throw std::invalid_argument("ellipsoid shape has wrong rows");
  ProgramBuilder& pb = fs.builder;
  // w = Q'(p - b), keeping only the nonzero columns of Q.
  std::vector<Index> cols;
  for (Index j = 0; j < set.shape.cols(); ++j) {
    if (!set.shape.col(j).isZero(0.0)) cols.push_back(j);
  }
  const Index gamma = pb.add_variables("gamma", 1, ConeKind::Free);
  Index bound;
  if (cols.empty()) {
    bound = pb.add_variables("penalty_bound", 1, ConeKind::NonNegative);
  } else {
    bound = pb.add_second_order_cone("penalty", static_cast<Index>(cols.size()) + 1);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      Terms row = {{bound + 1 + static_cast<Index>(k), 1.0}};
      fs.append_net_terms(row, -set.shape.col(cols[k]));
      pb.add_equality(row, 0.0);
    }
  }
  // t = center'(p - b) - gamma
  Terms row = {{bound, 1.0}, {gamma, 1.0}};
  fs.append_net_terms(row, -set.center);
  pb.add_equality(row, 0.0);
  pb.set_objective(gamma, 1.0);
  RobustProgram rp{std::move(fs), {}, gamma};
  rp.program = rp.feasible.builder.build();
  return rp;
}

EllipsoidalSet chance_normal_ellipsoid(const NormalModel& model, double conf) {
  require_conf(conf);
  if ((model.stddev.array() < 0.0).any()) throw std::invalid_argument("negative standard deviation");
  const double kappa = conf == 0.5 ? 0.0 : normal_quantile(conf);
  return {model.mean, MatrixXd(kappa * model.stddev.asDiagonal())};
}

RobustProgram reformulate_chance_normal(FeasibleSet fs, const NormalModel& model, double conf) {
  return reformulate_ellipsoidal(std::move(fs), chance_normal_ellipsoid(model, conf));
}

RobustSolution solve_robust(const RobustProgram& rp, const SolverOptions& options) {
  RobustSolution out;
  out.solution = solve(rp.program, options);
  if (!out.solution.optimal()) {
    throw SolverError(out.solution.status, fmt::format("robust program: {} ({})",
                                                       to_string(out.solution.status),
                                                       out.solution.message));
  }
  out.schedule = rp.feasible.extract(out.solution.primal);
  out.gamma = out.solution.objective_value;
  return out;
}

LogNormalSolution solve_chance_lognormal(const FeasibleSet& fs, const LogNormalModel& model,
                                         double conf, const LogNormalOptions& lopts,
                                         const SolverOptions& options) {
  require_conf(conf);
  require_horizon(fs, model.log_mean.size(), "lognormal model");
  const VectorXd mean = model.price_mean();
  const VectorXd sd = model.price_variance().cwiseSqrt();
  const double kappa_normal = conf == 0.5 ? 0.0 : normal_quantile(conf);
  const double z_low = conf == 0.5 ? 0.0 : normal_quantile(1.0 - conf);

  LogNormalSolution out;
  double kappa = kappa_normal;
  for (int k = 1; k <= lopts.max_iterations; ++k) {
    const EllipsoidalSet set{mean, MatrixXd(kappa * sd.asDiagonal())};
    const RobustSolution sol = solve_robust(reformulate_ellipsoidal(fs, set), options);
    const VectorXd x = sol.schedule.net();
    double next;
    out.schedule = sol.schedule;
    out.kappa = kappa;
    out.iterations = k;
    try {
      const FwMatch fw = fw_moment_match(model, x);
      out.gamma = std::exp(fw.log_mean + fw.log_std * z_low);
      out.normal_fallback = false;
      next = fw.variance > 0.0 ? std::max(0.0, (fw.mean - out.gamma) / std::sqrt(fw.variance))
                               : kappa;
    } catch (const NonPositiveMean&) {
      out.gamma = sol.gamma;
      out.normal_fallback = true;
      next = kappa_normal;
    }
    if (std::abs(next - kappa) < lopts.kappa_tol) {
      out.converged = true;
      break;
    }
    kappa = next;
  }
  return out;
}

WorstCase inner_worst_case(const VectorXd& x, const UncertaintyModel& model,
                           const SolverOptions& options) {
  if (const auto* box = std::get_if<PolyhedralSet>(&model)) {
    if (x.size() != box->horizon()) throw std::invalid_argument("weight length mismatch");
    WorstCase out;
    if (box->is_box()) {
      const VectorXd lo = box->box_lower();
      const VectorXd hi = box->box_upper();
      out.lambda = box->center;
      for (Index t = 0; t < x.size(); ++t) {
        if (x(t) > 0.0) out.lambda(t) = lo(t);
        if (x(t) < 0.0) out.lambda(t) = hi(t);
      }
      out.value = out.lambda.dot(x);
      return out;
    }
    // min x'lambda  s.t.  D lambda + s = d,  s >= 0
    ProgramBuilder pb;
    const Index T = x.size();
    const Index lam = pb.add_variables("lambda", T, ConeKind::Free);
    const Index s = pb.add_variables("s", box->D.rows(), ConeKind::NonNegative);
    for (Index i = 0; i < box->D.rows(); ++i) {
      Terms row = {{s + i, 1.0}};
      for (Index t = 0; t < T; ++t) {
        if (box->D(i, t) != 0.0) row.emplace_back(lam + t, box->D(i, t));
      }
      pb.add_equality(row, box->d(i));
    }
    for (Index t = 0; t < T; ++t) pb.set_objective(lam + t, -x(t));
    const Solution sol = solve(pb.build(), options);
    if (!sol.optimal()) {
      throw SolverError(sol.status, fmt::format("inner worst-case LP: {} ({})",
                                                to_string(sol.status), sol.message));
    }
    out.lambda = sol.primal.segment(lam, T);
    out.value = out.lambda.dot(x);
    return out;
  }
  if (const auto* ell = std::get_if<EllipsoidalSet>(&model)) {
    if (x.size() != ell->horizon()) throw std::invalid_argument("weight length mismatch");
    const VectorXd v = ell->shape.transpose() * x;
    const double n = v.norm();
    WorstCase out;
    out.lambda = ell->center;
    if (n > 0.0) out.lambda -= ell->shape * v / n;
    out.value = ell->center.dot(x) - n;
    return out;
  }
  throw std::invalid_argument("inner worst case needs a polyhedral or ellipsoidal model");
}

}  // namespace storarb
