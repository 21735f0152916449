// Acceptance run: one PASS/FAIL line per criterion, with wall time against
// the allowed budget.  Exit status is non-zero if any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "oracles.hpp"
#include "storarb/backtest.hpp"
#include "storarb/errors.hpp"
#include "storarb/synthetic.hpp"

using namespace storarb;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  double seconds = -1.0;  // overrides the measured wall time when set
};

bool criterion(int id, double limit_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, fmt::format("threw: {}", e.what())};
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (o.seconds >= 0.0) secs = o.seconds;
  const bool in_time = secs < limit_s;
  const bool pass = o.pass && in_time;
  std::cout << fmt::format("criterion {}: {} ({:.2f} s, limit {:g} s{}) {}\n", id,
                           pass ? "PASS" : "FAIL", secs, limit_s, in_time ? "" : ", too slow",
                           o.detail)
            << std::flush;
  return pass;
}

struct Split {
  MatrixXd train, test;
};

Split synthetic_split(bool drop_dst) {
  SyntheticOptions o = default_synthetic_options();
  o.drop_dst_hour = drop_dst;
  const auto days = group_days(generate_synthetic(o)).days;
  const Dataset d = split_by_years(days, {2019, 2020, 2021}, {2022, 2023});
  return {day_matrix(d.train_days), day_matrix(d.test_days)};
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

VectorXd sample_in(const UncertaintyModel& set, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  if (const auto* box = std::get_if<PolyhedralSet>(&set)) {
    const VectorXd lo = box->box_lower(), hi = box->box_upper();
    VectorXd out(lo.size());
    for (Eigen::Index t = 0; t < lo.size(); ++t) out(t) = lo(t) + u(rng) * (hi(t) - lo(t));
    return out;
  }
  const auto& ell = std::get<EllipsoidalSet>(set);
  VectorXd dir(ell.shape.cols());
  for (auto& d : dir) d = n(rng);
  const double radius = std::pow(u(rng), 1.0 / static_cast<double>(dir.size()));
  return ell.center + ell.shape * (radius / dir.norm() * dir);
}

// 1. At zero budget the mean-centred strategies solve the same program.
Outcome reduction_identity(const Split& data) {
  const FittedModels models = fit_models(data.train);
  const StorageSpec spec;
  std::vector<FrontierPoint> pts;
  for (StrategyId id : {StrategyId::PolyMeanStd, StrategyId::EllipCov, StrategyId::ChanceNormal}) {
    Calibration cal;
    cal.strategy = id;
    cal.r_max = 1.0;  // irrelevant at zero budget
    pts.push_back(run_strategy(id, 0.0, models, cal, spec, data.test));
  }
  double worst = 0.0;
  for (const auto& p : pts) {
    worst = std::max({worst, rel_diff(p.worst_case, pts[0].worst_case),
                      rel_diff(p.expected_profit, pts[0].expected_profit)});
  }
  return {worst <= 1e-6, fmt::format("PolyMeanStd/EllipCov/ChanceNormal at budget 0: guarantee "
                                     "{:.4f}, expected profit {:.4f}, max relative spread {:.1e}",
                                     pts[0].worst_case, pts[0].expected_profit, worst)};
}

// 2. Guarantees are exact worst cases and hold for sampled prices in the set.
Outcome robust_certification(const Split& data) {
  const FittedModels models = fit_models(data.train);
  const StorageSpec spec;
  std::mt19937_64 rng(2024);
  double worst_gap = 0.0, worst_beat = 0.0;
  int cells = 0;
  for (StrategyId id : kAllStrategies) {
    if (!is_robust(id)) continue;
    const Calibration cal = calibrate_budget(id, models, spec);
    for (double g : kDefaultGrid) {
      const double r = g * cal.r_max;
      const Decision d = decide(id, r, models, spec);
      const UncertaintyModel set = robust_set(id, r, models);
      const VectorXd x = d.schedule.net();
      worst_gap = std::max(worst_gap, std::abs(inner_worst_case(x, set).value - d.worst_case));
      for (int k = 0; k < 10000; ++k) {
        worst_beat = std::max(worst_beat, d.worst_case - sample_in(set, rng).dot(x));
      }
      ++cells;
    }
  }
  return {worst_gap <= 1e-6 && worst_beat <= 1e-6,
          fmt::format("{} cells: max |inner worst case - guarantee| {:.1e}, max shortfall of "
                      "1e4 in-set samples {:.1e}",
                      cells, worst_gap, std::max(worst_beat, 0.0))};
}

// 3. Guarantees fall with the budget and vanish at the calibrated limit.
Outcome monotone_frontier(const Split& data) {
  const FittedModels models = fit_models(data.train);
  const StorageSpec spec;
  bool ok = true;
  std::string detail;
  for (StrategyId id : kAllStrategies) {
    if (!is_robust(id)) continue;
    const Calibration cal = calibrate_budget(id, models, spec);
    const auto pts = build_frontier(id, kDefaultGrid, models, cal, spec, data.test);
    double rise = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      rise = std::max(rise, pts[i].worst_case - pts[i - 1].worst_case);
    }
    const double last = pts.back().worst_case;
    ok = ok && rise <= 1e-6 && std::abs(last) <= 1e-3;
    detail += fmt::format("{} {:.2f}->{:.1e}{}; ", to_string(id), pts.front().worst_case, last,
                          rise > 1e-6 ? fmt::format(" (rises {:.1e})", rise) : "");
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

// Lognormal quantile by bisection on its CDF, Phi(log(x)) via erfc.
double lognormal_quantile(double mu, double sigma, double p) {
  double lo = 1e-12, hi = 1e6;
  for (int i = 0; i < 200; ++i) {
    const double mid = std::sqrt(lo * hi);
    const double cdf = 0.5 * std::erfc(-(std::log(mid) - mu) / (sigma * std::numbers::sqrt2));
    (cdf < p ? lo : hi) = mid;
  }
  return std::sqrt(lo * hi);
}

// 4. Chance guarantees hold with the stated probability.
Outcome chance_validity(const Split& data) {
  const FittedModels models = fit_models(data.train);
  const StorageSpec spec;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  bool ok = true;
  std::string detail;
  for (double conf : {0.6, 0.8, 0.95}) {
    const Decision d = decide(StrategyId::ChanceNormal, conf, models, spec);
    const VectorXd x = d.schedule.net();
    long hits = 0;
    const long draws = 100000;
    VectorXd price(models.horizon());
    for (long k = 0; k < draws; ++k) {
      for (Eigen::Index t = 0; t < price.size(); ++t) {
        price(t) = models.normal.mean(t) + models.normal.stddev(t) * n(rng);
      }
      hits += price.dot(x) >= d.worst_case ? 1 : 0;
    }
    const double freq = static_cast<double>(hits) / draws;
    ok = ok && freq >= conf - 0.01;
    detail += fmt::format("P(profit >= guarantee) {:.4f} at {}; ", freq, conf);
  }

  // one hour, sell 1 MWh: the guarantee is the 10% quantile of the price
  StorageSpec toy;
  toy.power = 1.0;
  toy.energy = 1.0;
  toy.initial_soc = 1.0;
  toy.efficiency = 1.0;
  toy.terminal = TerminalPolicy::Free;
  const LogNormalModel model{VectorXd::Zero(1), VectorXd::Constant(1, 0.5), 0.01};
  SolverOptions tight;
  tight.tol = 1e-9;
  const LogNormalSolution sol = solve_chance_lognormal(
      build_feasible_set(toy, 1, model.price_mean()), model, 0.9, {}, tight);
  const double exact = lognormal_quantile(0.0, 0.5, 0.1);
  ok = ok && std::abs(sol.gamma - exact) <= 1e-2;
  detail += fmt::format("lognormal toy {:.5f} vs exact quantile {:.5f}", sol.gamma, exact);
  return {ok, detail};
}

// 5. The LP matches a dynamic programme over a 0.01 grid.  Instances use
// ratings for which every vertex of the feasible set lies on the grid
// (eta P and P / eta multiples of 0.01), so the grid optimum is exact.
Outcome foresight_oracle() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> price(-20.0, 100.0);
  std::uniform_int_distribution<int> pick(0, 2), tenth(20, 100), coin(0, 1);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    StorageSpec spec;
    switch (pick(rng)) {
      case 0:
        spec.efficiency = 0.9;
        spec.power = 0.9 * (1 + coin(rng));
        break;
      case 1:
        spec.efficiency = 0.8;
        spec.power = 0.4 * (1 + trial % 6);
        break;
      default:
        spec.efficiency = 1.0;
        spec.power = 0.1 * tenth(rng) / 4.0;
        spec.power = std::round(spec.power * 100.0) / 100.0;
    }
    spec.energy = 0.1 * tenth(rng);
    spec.initial_soc = std::round(spec.energy * 10.0 * std::uniform_real_distribution<double>(0, 1)(rng)) / 10.0;
    spec.terminal = coin(rng) ? TerminalPolicy::EqualInitial : TerminalPolicy::Free;
    VectorXd prices(3);
    for (auto& p : prices) p = price(rng);
    SolverOptions tight;
    tight.tol = 1e-9;
    const double lp = solve_perfect_foresight(spec, prices, tight).profit;
    worst = std::max(worst, std::abs(lp - oracle::grid_foresight(spec, prices, 0.01)));
  }
  return {worst <= 1e-3, fmt::format("50 instances, max |LP - grid search| {:.1e} $", worst)};
}

// 6. Minimum-volume ellipses contain their points and match an independent
// barrier solve of the primal problem.
Outcome mvee_check() {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<int> count(6, 40);
  double worst_area = 0.0, worst_excess = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int m = count(rng);
    const double angle = std::numbers::pi * n(rng);
    const double sx = 1.0 + 3.0 * std::abs(n(rng)), sy = 0.3 + std::abs(n(rng));
    MatrixXd pts(m, 2);
    for (int i = 0; i < m; ++i) {
      const double a = sx * n(rng), b = sy * n(rng);
      pts(i, 0) = 5.0 + std::cos(angle) * a - std::sin(angle) * b;
      pts(i, 1) = -2.0 + std::sin(angle) * a + std::cos(angle) * b;
    }
    const MveeResult r = mvee(pts);
    const MatrixXd Qinv = r.set.shape.inverse();
    for (int i = 0; i < m; ++i) {
      const double norm = (Qinv * (pts.row(i).transpose() - r.set.center)).norm();
      worst_excess = std::max(worst_excess, norm - 1.0);
    }
    const double area = std::numbers::pi * std::abs(r.set.shape.determinant());
    worst_area = std::max(worst_area, std::abs(area / oracle::barrier_ellipse_area(pts) - 1.0));
  }
  return {worst_excess <= 1e-6 && worst_area <= 0.01,
          fmt::format("20 clouds, max radial excess {:.1e}, max relative area error {:.2e}",
                      std::max(worst_excess, 0.0), worst_area)};
}

// 7. Full frontier over 730 test days, twice, byte for byte.
Outcome end_to_end(const Split& data) {
  auto once = [&] {
    const auto start = std::chrono::steady_clock::now();
    const FittedModels models = fit_models(data.train);
    const std::vector<StrategyId> all(kAllStrategies.begin(), kAllStrategies.end());
    const auto cals = calibrate_all(all, models, StorageSpec{});
    BacktestReport report = compare_all(all, kDefaultGrid, models, cals, StorageSpec{}, data.test);
    report.dataset = {"synthetic", data.train.rows(), data.test.rows(), {2019, 2020, 2021}, {2022, 2023}};
    std::ostringstream csv;
    write_frontier_csv(csv, report);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const std::string text = csv.str();
    return std::make_tuple(report_to_json(report) + text, secs,
                           std::count(text.begin(), text.end(), '\n') - 1);
  };
  const auto [a, secs, rows] = once();
  const std::string b = std::get<0>(once());
  const bool ok = a == b && rows == 36 && data.test.rows() == 730;
  return {ok,
          fmt::format("{} test days, {} rows, timed over the first run, rerun {}",
                      data.test.rows(), rows, a == b ? "byte-identical" : "DIFFERS"),
          secs};
}

// 8. Wider-spread year: higher profit and more loss days; a small budget
// costs little expected profit.
Outcome spread_years(const MatrixXd& train, const MatrixXd& year_a, const MatrixXd& year_b,
                     const MatrixXd& both, int a, int b) {
  const FittedModels models = fit_models(train);
  const StorageSpec spec;
  const std::vector<StrategyId> all(kAllStrategies.begin(), kAllStrategies.end());
  const auto cals = calibrate_all(all, models, spec);
  bool ok = true;
  std::string detail;
  for (std::size_t s = 0; s < all.size(); ++s) {
    const StrategyId id = all[s];
    double profit_a = 0, profit_b = 0, risk_a = 0, risk_b = 0, zero = 0, small = 0;
    int active = 0;
    for (double g : kDefaultGrid) {
      const double budget = is_robust(id) ? g * cals[s].r_max : confidence_for(g);
      const Decision d = decide(id, budget, models, spec);
      const FrontierPoint pb = evaluate(d, g, both);
      if (g == 0.0) zero = pb.expected_profit;
      if (std::abs(g - 0.2) < 1e-12) small = pb.expected_profit;
      // an idle schedule earns nothing in either year
      if (d.schedule.net().cwiseAbs().maxCoeff() <= 1e-6) continue;
      const FrontierPoint pa = evaluate(d, g, year_a), pbb = evaluate(d, g, year_b);
      profit_a += pa.expected_profit;
      profit_b += pbb.expected_profit;
      risk_a += pa.risk_days_per_year;
      risk_b += pbb.risk_days_per_year;
      ++active;
    }
    const double drop = (zero - small) / std::abs(zero);
    const bool this_ok = active > 0 && profit_a > profit_b && risk_a > risk_b && drop <= 0.15;
    ok = ok && this_ok;
    detail += fmt::format("{}{} {}/{} profit {:.0f}>{:.0f} risk {:.1f}>{:.1f} drop@0.2 {:.1f}%; ",
                          this_ok ? "" : "!", to_string(id), a, b, profit_a / active,
                          profit_b / active, risk_a / active, risk_b / active, 100.0 * drop);
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

Outcome conditional_market_data() {
  const char* path = std::getenv("STORARB_NYISO_CSV");
  std::vector<PriceDay> days;
  std::set<int> train_years;
  std::string label;
  int a = 2022, b = 2023;
  if (path != nullptr && *path != '\0') {
    days = group_days(read_price_csv(path)).days;
    train_years = {2014, 2015, 2016, 2017, 2018, 2019, 2020, 2021};
    label = fmt::format("[market data {}] ", path);
  } else {
    days = group_days(generate_synthetic(default_synthetic_options())).days;
    train_years = {2019, 2020, 2021};
    label = "[synthetic proxy, STORARB_NYISO_CSV not set] ";
  }
  const MatrixXd train = day_matrix(split_by_years(days, train_years, {}).train_days);
  const MatrixXd year_a = day_matrix(split_by_years(days, train_years, {a}).test_days);
  const MatrixXd year_b = day_matrix(split_by_years(days, train_years, {b}).test_days);
  const MatrixXd both = day_matrix(split_by_years(days, train_years, {a, b}).test_days);
  if (year_a.rows() == 0 || year_b.rows() == 0) {
    return {false, label + "missing test years"};
  }
  Outcome o = spread_years(train, year_a, year_b, both, a, b);
  o.detail = label + o.detail;
  return o;
}

}  // namespace

int main() {
  const Split data = synthetic_split(true);
  const Split full_years = synthetic_split(false);
  int failed = 0;
  failed += !criterion(1, 1.0, [&] { return reduction_identity(data); });
  failed += !criterion(2, 30.0, [&] { return robust_certification(data); });
  failed += !criterion(3, 60.0, [&] { return monotone_frontier(data); });
  failed += !criterion(4, 60.0, [&] { return chance_validity(data); });
  failed += !criterion(5, 30.0, [] { return foresight_oracle(); });
  failed += !criterion(6, 30.0, [] { return mvee_check(); });
  failed += !criterion(7, 60.0, [&] { return end_to_end(full_years); });
  failed += !criterion(8, 120.0, [] { return conditional_market_data(); });
  std::cout << (failed == 0 ? "all criteria passed\n" : fmt::format("{} criteria failed\n", failed));
  return failed == 0 ? 0 : 1;
}
