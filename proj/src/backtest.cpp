#include "storarb/backtest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "storarb/errors.hpp"

namespace storarb {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kBudgetCap = 1048576.0;  // 2^20
constexpr double kLossThreshold = -1e-6;

// Runs fn(0..n-1) on a small worker pool.  Results must be written to
// per-index slots; the first exception in index order is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Decision solve_set(const UncertaintyModel& set, const StorageSpec& spec, const SolverOptions& solver) {
  Decision d;
  RobustSolution sol;
  if (const auto* poly = std::get_if<PolyhedralSet>(&set)) {
    sol = solve_robust(
        reformulate_polyhedral(build_feasible_set(spec, poly->horizon(), poly->center), *poly), solver);
  } else {
    const auto& ell = std::get<EllipsoidalSet>(set);
    sol = solve_robust(
        reformulate_ellipsoidal(build_feasible_set(spec, ell.horizon(), ell.center), ell), solver);
  }
  d.schedule = std::move(sol.schedule);
  d.worst_case = sol.gamma;
  return d;
}

}  // namespace

const char* to_string(StrategyId id) {
  switch (id) {
    case StrategyId::PolyQuantile:
      return "PolyQuantile";
    case StrategyId::PolyMeanStd:
      return "PolyMeanStd";
    case StrategyId::EllipMinVol:
      return "EllipMinVol";
    case StrategyId::EllipCov:
      return "EllipCov";
    case StrategyId::ChanceNormal:
      return "ChanceNormal";
    case StrategyId::ChanceLogNormal:
      return "ChanceLogNormal";
  }
  return "?";
}

StrategyId parse_strategy(const std::string& name) {
  for (StrategyId id : kAllStrategies) {
    if (name == to_string(id)) return id;
  }
  throw std::invalid_argument(fmt::format("unknown strategy '{}'", name));
}

bool is_robust(StrategyId id) {
  return id != StrategyId::ChanceNormal && id != StrategyId::ChanceLogNormal;
}

FittedModels fit_models(const MatrixXd& train, double lognormal_clip, const MveeOptions& mvee_options) {
  FittedModels m;
  m.stats = estimate_hourly_stats(train);
  m.covariance = build_ellip_cov(train, 1.0);
  m.min_volume = mvee(train, mvee_options).set;
  m.normal = {m.stats.mean, m.stats.stddev};
  m.lognormal = fit_lognormal(train, lognormal_clip);
  return m;
}

UncertaintyModel robust_set(StrategyId strategy, double budget, const FittedModels& models) {
  switch (strategy) {
    case StrategyId::PolyQuantile:
      return build_poly_quantile(models.stats, std::min(budget, 1.0));
    case StrategyId::PolyMeanStd:
      return build_poly_mean_std(models.stats, budget);
    case StrategyId::EllipMinVol:
      return scale_ellipsoid(models.min_volume, budget);
    case StrategyId::EllipCov:
      return scale_ellipsoid(models.covariance, budget);
    default:
      throw std::invalid_argument(fmt::format("{} has no uncertainty set", to_string(strategy)));
  }
}

Decision decide(StrategyId strategy, double budget, const FittedModels& models,
                const StorageSpec& spec, const BacktestOptions& options) {
  Decision d;
  if (is_robust(strategy)) {
    d = solve_set(robust_set(strategy, budget, models), spec, options.solver);
  } else if (strategy == StrategyId::ChanceNormal) {
    const auto rp = reformulate_chance_normal(
        build_feasible_set(spec, models.horizon(), models.normal.mean), models.normal, budget);
    RobustSolution sol = solve_robust(rp, options.solver);
    d.schedule = std::move(sol.schedule);
    d.worst_case = sol.gamma;
  } else {
    const FeasibleSet fs =
        build_feasible_set(spec, models.horizon(), models.lognormal.price_mean());
    LogNormalSolution sol =
        solve_chance_lognormal(fs, models.lognormal, budget, options.lognormal, options.solver);
    d.schedule = std::move(sol.schedule);
    d.worst_case = sol.gamma;
    d.converged = sol.converged;
  }
  d.budget = budget;
  return d;
}

Calibration calibrate_budget(StrategyId strategy, const FittedModels& models,
                             const StorageSpec& spec, const BacktestOptions& options) {
  Calibration cal;
  cal.strategy = strategy;
  if (!is_robust(strategy)) {
    cal.gamma_zero = decide(strategy, confidence_for(0.0), models, spec, options).worst_case;
    ++cal.solves;
    cal.degenerate = cal.gamma_zero <= 1e-7;
    return cal;
  }

  // guarantee at r and the rate at which it falls with r for that schedule
  struct Eval {
    double gamma, slope;
  };
  const UncertaintyModel unit = robust_set(strategy, 1.0, models);
  const UncertaintyModel point = robust_set(strategy, 0.0, models);
  auto eval = [&](double r) {
    const Decision d = decide(strategy, r, models, spec, options);
    ++cal.solves;
    const VectorXd x = d.schedule.net();
    return Eval{d.worst_case, inner_worst_case(x, point).value - inner_worst_case(x, unit).value};
  };

  const Eval zero = eval(0.0);
  cal.gamma_zero = zero.gamma;
  const double thresh = 1e-7 * (1.0 + std::abs(zero.gamma));
  if (zero.gamma <= thresh) {
    cal.degenerate = true;
    cal.r_max = strategy == StrategyId::PolyQuantile ? 1.0 : 0.0;
    return cal;
  }
  if (strategy == StrategyId::PolyQuantile) {
    cal.r_max = 1.0;
    return cal;
  }

  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  Eval at_lo = zero;
  for (int it = 0; it < 200; ++it) {
    bool newton = false;
    double r;
    if (at_lo.slope > 0.0) {
      r = lo + at_lo.gamma / at_lo.slope;
      newton = true;
    } else {
      r = std::isinf(hi) ? std::max(1.0, 2.0 * lo) : 0.5 * (lo + hi);
    }
    if (!(r > lo && r < hi)) {
      newton = false;
      r = std::isinf(hi) ? std::max(1.0, 2.0 * lo) : 0.5 * (lo + hi);
    }
    if (r >= kBudgetCap) {
      r = kBudgetCap;
      newton = false;
    }
    const Eval e = eval(r);
    if (e.gamma <= thresh) {
      hi = r;
      // a Newton step from the profitable side never overshoots the root
      if (newton || hi - lo <= 1e-10 * hi) break;
    } else {
      if (r >= kBudgetCap) {
        hi = kBudgetCap;
        break;
      }
      lo = r;
      at_lo = e;
    }
  }
  cal.r_max = std::isinf(hi) ? kBudgetCap : hi;
  return cal;
}

FrontierPoint evaluate(const Decision& decision, double gamma, const MatrixXd& test) {
  if (test.rows() == 0) throw std::invalid_argument("no test days to evaluate");
  if (test.cols() != decision.schedule.horizon()) {
    throw std::invalid_argument("test days do not match the schedule horizon");
  }
  const VectorXd profits = test * decision.schedule.net();
  FrontierPoint p;
  p.gamma = gamma;
  p.worst_case = decision.worst_case;
  p.budget = decision.budget;
  p.test_days = static_cast<long>(test.rows());
  p.expected_profit = profits.mean();
  p.loss_days = static_cast<long>((profits.array() < kLossThreshold).count());
  const double n = static_cast<double>(p.test_days);
  p.risk_days_per_year = static_cast<double>(p.loss_days) * 365.0 / n;
  p.nonneg_ratio = 1.0 - static_cast<double>(p.loss_days) / n;
  return p;
}

FrontierPoint run_strategy(StrategyId strategy, double gamma, const FittedModels& models,
                           const Calibration& calibration, const StorageSpec& spec,
                           const MatrixXd& test, const BacktestOptions& options) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
  const double budget = is_robust(strategy) ? gamma * calibration.r_max : confidence_for(gamma);
  try {
    return evaluate(decide(strategy, budget, models, spec, options), gamma, test);
  } catch (const SolverError& e) {
    throw SolverError(e.status(),
                      fmt::format("{} at gamma {}: {}", to_string(strategy), gamma, e.what()));
  }
}

std::vector<FrontierPoint> build_frontier(StrategyId strategy, const std::vector<double>& grid,
                                          const FittedModels& models,
                                          const Calibration& calibration, const StorageSpec& spec,
                                          const MatrixXd& test, const BacktestOptions& options) {
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  std::vector<FrontierPoint> out(sorted.size());
  parallel_for(sorted.size(), options.threads, [&](std::size_t i) {
    out[i] = run_strategy(strategy, sorted[i], models, calibration, spec, test, options);
  });
  return out;
}

std::vector<Calibration> calibrate_all(const std::vector<StrategyId>& strategies,
                                       const FittedModels& models, const StorageSpec& spec,
                                       const BacktestOptions& options) {
  std::vector<Calibration> out(strategies.size());
  parallel_for(strategies.size(), options.threads, [&](std::size_t i) {
    try {
      out[i] = calibrate_budget(strategies[i], models, spec, options);
    } catch (const SolverError& e) {
      throw SolverError(e.status(), fmt::format("calibrating {}: {}", to_string(strategies[i]), e.what()));
    }
  });
  return out;
}

BacktestReport compare_all(std::vector<StrategyId> strategies, std::vector<double> grid,
                           const FittedModels& models, const std::vector<Calibration>& calibrations,
                           const StorageSpec& spec, const MatrixXd& test,
                           const BacktestOptions& options) {
  if (strategies.empty()) throw std::invalid_argument("no strategies selected");
  std::sort(strategies.begin(), strategies.end());
  strategies.erase(std::unique(strategies.begin(), strategies.end()), strategies.end());
  std::sort(grid.begin(), grid.end());

  BacktestReport report;
  report.spec = spec;
  report.gamma_grid = grid;
  for (StrategyId s : strategies) {
    const auto it = std::find_if(calibrations.begin(), calibrations.end(),
                                 [&](const Calibration& c) { return c.strategy == s; });
    if (it == calibrations.end()) {
      throw std::invalid_argument(fmt::format("no calibration for {}", to_string(s)));
    }
    report.strategies.push_back({s, *it, std::vector<FrontierPoint>(grid.size())});
  }
  const std::size_t cells = strategies.size() * grid.size();
  parallel_for(cells, options.threads, [&](std::size_t k) {
    StrategyFrontier& f = report.strategies[k / grid.size()];
    f.points[k % grid.size()] =
        run_strategy(f.strategy, grid[k % grid.size()], models, f.calibration, spec, test, options);
  });
  report.dataset.test_days = static_cast<long>(test.rows());
  return report;
}

namespace {
// keeps solver noise around zero from printing as -0.000000
double tidy(double v) { return std::abs(v) < 5e-7 ? 0.0 : v; }
}  // namespace

void write_frontier_csv(std::ostream& out, const BacktestReport& report) {
  out << "strategy,gamma,worst_case,expected_profit,risk_days_per_year,nonneg_ratio\n";
  for (const auto& f : report.strategies) {
    for (const auto& p : f.points) {
      out << fmt::format("{},{},{:.6f},{:.6f},{:.6f},{:.6f}\n", to_string(f.strategy), p.gamma,
                         tidy(p.worst_case), tidy(p.expected_profit), p.risk_days_per_year,
                         p.nonneg_ratio);
    }
  }
}

}  // namespace storarb
