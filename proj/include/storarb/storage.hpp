// Storage asset and the deterministic price-taker arbitrage LP.
#ifndef STORARB_STORAGE_HPP
#define STORARB_STORAGE_HPP

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "storarb/conic.hpp"

namespace storarb {

enum class TerminalPolicy { EqualInitial, Free };

const char* to_string(TerminalPolicy policy);
TerminalPolicy parse_terminal_policy(const std::string& text);

struct StorageSpec {
  double power = 2.5;        // MW
  double energy = 10.0;      // MWh
  double efficiency = 0.9;   // applied on both charge and discharge
  double initial_soc = 5.0;  // MWh
  TerminalPolicy terminal = TerminalPolicy::EqualInitial;

  /// Throws std::invalid_argument unless P > 0, E > 0, 0 < eta <= 1 and
  /// 0 <= e0 <= E.
  void check() const;

  friend bool operator==(const StorageSpec&, const StorageSpec&) = default;
};

struct Schedule {
  Eigen::VectorXd discharge;  // p
  Eigen::VectorXd charge;     // b
  Eigen::VectorXd soc;        // e, end of each hour

  Eigen::Index horizon() const { return discharge.size(); }
  /// p - b
  Eigen::VectorXd net() const { return discharge - charge; }
};

/// Largest violation of the Schedule invariants (bounds, state-of-charge
/// chain, terminal condition) for the given spec.
double schedule_violation(const StorageSpec& spec, const Schedule& schedule);

/// Program fragment for the storage constraints.  The builder holds p, b and
/// e (3T decision variables) plus the slacks of their upper bounds; callers
/// extend it with objective terms and further constraints.  Discharge in
/// forced-zero hours is a free variable pinned to 0 by an equality.
struct FeasibleSet {
  StorageSpec spec;
  Eigen::Index horizon = 0;
  ProgramBuilder builder;
  std::vector<Eigen::Index> discharge;
  std::vector<Eigen::Index> charge;
  std::vector<Eigen::Index> soc;
  std::vector<Eigen::Index> forced_zero;  // hours with negative nominal price
  Eigen::Index soc_equalities = 0;
  Eigen::Index terminal_equalities = 0;

  Eigen::Index decision_variables() const { return 3 * horizon; }

  /// Appends coef_t * (p_t - b_t) for every hour to `terms`.
  void append_net_terms(std::vector<std::pair<Eigen::Index, double>>& terms,
                        const Eigen::VectorXd& coef) const;

  /// Adds coef' (p - b) to the objective.
  void add_net_objective(const Eigen::VectorXd& coef);

  Schedule extract(const Eigen::VectorXd& primal) const;
};

FeasibleSet build_feasible_set(const StorageSpec& spec, Eigen::Index horizon,
                               const Eigen::VectorXd& nominal_prices);

struct ForesightResult {
  Schedule schedule;
  double profit = 0.0;
};

/// max sum_t lambda_t (p_t - b_t) over the feasible set built with the
/// realised prices.  Throws SolverError unless the solve is Optimal.
ForesightResult solve_perfect_foresight(const StorageSpec& spec, const Eigen::VectorXd& prices,
                                        const SolverOptions& options = {});

/// sum_t lambda_t (p_t - b_t); throws std::invalid_argument on a length
/// mismatch.
double realized_profit(const Schedule& schedule, const Eigen::VectorXd& prices);

/// hour,p,b,e
void write_schedule_csv(std::ostream& out, const Schedule& schedule);

}  // namespace storarb

#endif  // STORARB_STORAGE_HPP
