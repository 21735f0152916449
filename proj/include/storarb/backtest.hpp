// Budget calibration, per-strategy backtests and frontier reports.
#ifndef STORARB_BACKTEST_HPP
#define STORARB_BACKTEST_HPP

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "storarb/robust.hpp"
#include "storarb/storage.hpp"
#include "storarb/uncertainty.hpp"

namespace storarb {

enum class StrategyId { PolyQuantile, PolyMeanStd, EllipMinVol, EllipCov, ChanceNormal, ChanceLogNormal };

inline constexpr std::array<StrategyId, 6> kAllStrategies = {
    StrategyId::PolyQuantile, StrategyId::PolyMeanStd,  StrategyId::EllipMinVol,
    StrategyId::EllipCov,     StrategyId::ChanceNormal, StrategyId::ChanceLogNormal};

const char* to_string(StrategyId id);
/// Throws std::invalid_argument for unknown names.
StrategyId parse_strategy(const std::string& name);
bool is_robust(StrategyId id);

/// Chance strategies map the normalised budget to a confidence level.
inline double confidence_for(double g) { return 0.5 + 0.499 * g; }

/// Every model the six strategies need, fitted once on the training days.
/// Ellipsoids are stored at radius 1.
struct FittedModels {
  HourlyStats stats;
  EllipsoidalSet covariance;
  EllipsoidalSet min_volume;
  NormalModel normal;
  LogNormalModel lognormal;

  Eigen::Index horizon() const { return stats.horizon(); }
};

FittedModels fit_models(const Eigen::MatrixXd& train, double lognormal_clip = 0.01,
                        const MveeOptions& mvee_options = {});

struct BacktestOptions {
  SolverOptions solver{1e-9, 100};
  LogNormalOptions lognormal;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct Calibration {
  StrategyId strategy = StrategyId::PolyQuantile;
  double r_max = 0.0;       // raw budget at which the guarantee reaches 0
  double gamma_zero = 0.0;  // guarantee at zero budget (confidence 0.5 for chance strategies)
  bool degenerate = false;  // gamma_zero <= 0: nothing to protect
  int solves = 0;
};

/// Robust strategies: raw budget where the guaranteed profit first reaches
/// zero, found in a doubling-then-bisection bracket that takes Newton steps
/// from the profitable side (the guarantee is convex in the budget).
/// PolyQuantile has r_max = 1.  Chance strategies only record gamma_zero and
/// the degenerate flag.
Calibration calibrate_budget(StrategyId strategy, const FittedModels& models,
                             const StorageSpec& spec, const BacktestOptions& options = {});

/// Optimal guarantee and schedule of a robust strategy at raw budget r, or
/// of a chance strategy at confidence r.
struct Decision {
  Schedule schedule;
  double worst_case = 0.0;
  double budget = 0.0;  // raw budget or confidence actually used
  bool converged = true;
};

Decision decide(StrategyId strategy, double budget, const FittedModels& models,
                const StorageSpec& spec, const BacktestOptions& options = {});

/// The robust uncertainty set for a raw budget; throws for chance strategies.
UncertaintyModel robust_set(StrategyId strategy, double budget, const FittedModels& models);

struct FrontierPoint {
  double gamma = 0.0;  // normalised budget
  double worst_case = 0.0;
  double expected_profit = 0.0;  // mean realised profit per test day
  double risk_days_per_year = 0.0;
  double nonneg_ratio = 0.0;
  long loss_days = 0;  // realised profit < -1e-6
  long test_days = 0;
  double budget = 0.0;  // raw budget or confidence
};

/// Applies the decision to every test day (rows of `test`).
FrontierPoint evaluate(const Decision& decision, double gamma, const Eigen::MatrixXd& test);

FrontierPoint run_strategy(StrategyId strategy, double gamma, const FittedModels& models,
                           const Calibration& calibration, const StorageSpec& spec,
                           const Eigen::MatrixXd& test, const BacktestOptions& options = {});

std::vector<FrontierPoint> build_frontier(StrategyId strategy, const std::vector<double>& grid,
                                          const FittedModels& models,
                                          const Calibration& calibration, const StorageSpec& spec,
                                          const Eigen::MatrixXd& test,
                                          const BacktestOptions& options = {});

struct StrategyFrontier {
  StrategyId strategy = StrategyId::PolyQuantile;
  Calibration calibration;
  std::vector<FrontierPoint> points;
};

struct DatasetInfo {
  std::string name;
  long train_days = 0;
  long test_days = 0;
  std::vector<int> train_years;
  std::vector<int> test_years;
};

struct BacktestReport {
  DatasetInfo dataset;
  StorageSpec spec;
  std::vector<double> gamma_grid;
  std::vector<StrategyFrontier> strategies;
};

inline const std::vector<double> kDefaultGrid = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};

/// Frontiers of the given strategies (reported in StrategyId order, grid
/// ascending).  Cells run concurrently and are merged in report order.  A
/// SolverError names the failing strategy and budget.
BacktestReport compare_all(std::vector<StrategyId> strategies, std::vector<double> grid,
                           const FittedModels& models, const std::vector<Calibration>& calibrations,
                           const StorageSpec& spec, const Eigen::MatrixXd& test,
                           const BacktestOptions& options = {});

/// Calibrates the strategies, concurrently.
std::vector<Calibration> calibrate_all(const std::vector<StrategyId>& strategies,
                                       const FittedModels& models, const StorageSpec& spec,
                                       const BacktestOptions& options = {});

/// strategy,gamma,worst_case,expected_profit,risk_days_per_year,nonneg_ratio
void write_frontier_csv(std::ostream& out, const BacktestReport& report);

std::string report_to_json(const BacktestReport& report);
BacktestReport report_from_json(const std::string& text);

/// Fitted models plus calibrations, as written by the calibrate command.
struct ModelBundle {
  FittedModels models;
  StorageSpec spec;  // calibrations depend on the unit
  std::vector<Calibration> calibrations;
  double lognormal_clip = 0.01;
  long train_days = 0;
  std::vector<int> train_years;
};

std::string bundle_to_json(const ModelBundle& bundle);
ModelBundle bundle_from_json(const std::string& text);

}  // namespace storarb

#endif  // STORARB_BACKTEST_HPP
