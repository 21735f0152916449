// Robust and chance-constrained counterparts of the arbitrage problem, and
// worst-case oracles used to certify them.
#ifndef STORARB_ROBUST_HPP
#define STORARB_ROBUST_HPP

#include <Eigen/Dense>

#include "storarb/conic.hpp"
#include "storarb/storage.hpp"
#include "storarb/uncertainty.hpp"

namespace storarb {

/// Conic program maximizing the guaranteed profit gamma.
struct RobustProgram {
  FeasibleSet feasible;  // index maps for p, b, e
  ConicProgram program;
  Eigen::Index gamma = 0;
};

struct RobustSolution {
  Schedule schedule;
  double gamma = 0.0;
  Solution solution;
};

/// max gamma  s.t.  y >= 0, -d'y >= gamma, D'y = -(p - b).
RobustProgram reformulate_polyhedral(FeasibleSet fs, const PolyhedralSet& set);

/// max gamma  s.t.  center'(p - b) - ||Q'(p - b)|| >= gamma.
RobustProgram reformulate_ellipsoidal(FeasibleSet fs, const EllipsoidalSet& set);

/// The ellipsoidal program with center mu and Q = Phi^{-1}(conf) diag(sigma);
/// conf must lie in [0.5, 0.999].
RobustProgram reformulate_chance_normal(FeasibleSet fs, const NormalModel& model, double conf);

/// Ellipsoid equivalent to the chance-normal constraint at `conf`.
EllipsoidalSet chance_normal_ellipsoid(const NormalModel& model, double conf);

/// Throws SolverError unless Optimal.
RobustSolution solve_robust(const RobustProgram& rp, const SolverOptions& options = {});

struct LogNormalOptions {
  int max_iterations = 20;
  double kappa_tol = 1e-4;
};

struct LogNormalSolution {
  Schedule schedule;
  double gamma = 0.0;  // lognormal quantile of the matched profit
  double kappa = 0.0;
  int iterations = 0;
  bool converged = false;
  bool normal_fallback = false;  // final iterate used the normal multiplier
};

/// Fixed-point scheme on the SOC multiplier kappa with Fenton-Wilkinson
/// matching of the profit distribution at each iterate.
LogNormalSolution solve_chance_lognormal(const FeasibleSet& fs, const LogNormalModel& model,
                                         double conf, const LogNormalOptions& lopts = {},
                                         const SolverOptions& options = {});

struct WorstCase {
  Eigen::VectorXd lambda;
  double value = 0.0;
};

/// min lambda'x over the set.  Boxes and ellipsoids use closed forms; other
/// polyhedra solve the inner LP.  Throws std::invalid_argument for
/// distributional models and SolverError when the inner LP fails.
WorstCase inner_worst_case(const Eigen::VectorXd& x, const UncertaintyModel& model,
                           const SolverOptions& options = {});

}  // namespace storarb

#endif  // STORARB_ROBUST_HPP
