#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include "storarb/errors.hpp"
#include "storarb/market_data.hpp"

namespace storarb::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char* kCacheFile = "days.json";
constexpr const char* kDiagnosticsFile = "diagnostics.json";
constexpr const char* kBundleFile = "models.json";
constexpr const char* kFrontierFile = "frontier.csv";
constexpr const char* kReportFile = "report.json";
constexpr const char* kPlotFile = "plot_frontier.py";

// Bad configuration values; reported like bad data.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::Io, fmt::format("cannot open {} '{}'", what, path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError(DataError::Kind::Io, fmt::format("cannot write '{}'", path.string()));
}

std::string plot_script() {
  return R"py(# Expected profit against risk days per strategy, from frontier.csv.
import csv
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = pathlib.Path(__file__).resolve().parent
with open(here / "frontier.csv", newline="") as f:
    rows = list(csv.DictReader(f))

fig, ax = plt.subplots(figsize=(7, 5))
for name in dict.fromkeys(r["strategy"] for r in rows):
    pts = [r for r in rows if r["strategy"] == name]
    risk = [float(r["risk_days_per_year"]) for r in pts]
    profit = [float(r["expected_profit"]) for r in pts]
    ax.plot(risk, profit, marker="o", label=name)
    for r, x, y in zip(pts, risk, profit):
        ax.annotate(r["gamma"], (x, y), fontsize=7, xytext=(3, 3), textcoords="offset points")
ax.set_xlabel("days with negative profit per year")
ax.set_ylabel("expected profit ($/day)")
ax.legend()
ax.grid(alpha=0.3)
fig.tight_layout()
fig.savefig(here / "frontier.png", dpi=150)
)py";
}

StorageSpec storage_from(const json& j, StorageSpec spec) {
  for (const auto& [key, value] : j.items()) {
    if (key == "power") {
      spec.power = value;
    } else if (key == "energy") {
      spec.energy = value;
    } else if (key == "efficiency") {
      spec.efficiency = value;
    } else if (key == "initial_soc") {
      spec.initial_soc = value;
    } else if (key == "terminal") {
      spec.terminal = parse_terminal_policy(value);
    } else {
      throw ConfigError(fmt::format("unknown storage field '{}'", key));
    }
  }
  return spec;
}

std::vector<StrategyId> strategies_from(const std::vector<std::string>& names) {
  std::vector<StrategyId> out;
  for (const auto& n : names) out.push_back(parse_strategy(n));
  return out;
}

std::string join_years(const std::vector<int>& years) {
  return fmt::format("{}", fmt::join(years, ","));
}

std::vector<PriceDay> load_cache(const RunConfig& config) {
  const fs::path path = fs::path(config.output_dir) / kCacheFile;
  if (!fs::exists(path)) {
    throw DataError(DataError::Kind::Io,
                    fmt::format("no day cache at '{}'; run ingest first", path.string()));
  }
  std::istringstream in(read_file(path, "day cache"));
  return read_day_cache(in);
}

// solver noise around zero should not print as -0.00
double tidy(double v) { return std::abs(v) < 5e-7 ? 0.0 : v; }

std::set<int> year_set(const std::vector<int>& years) { return {years.begin(), years.end()}; }

BacktestOptions backtest_options(const RunConfig& config) {
  BacktestOptions o;
  o.solver.tol = config.solver_tol;
  o.threads = config.threads;
  return o;
}

int cmd_ingest(const RunConfig& config, std::ostream& out) {
  const auto records = read_price_csv(config.data_path);
  const DayGrouping grouping = group_days(records);
  fs::create_directories(config.output_dir);
  std::ostringstream cache;
  write_day_cache(cache, grouping.days, grouping.dropped);
  write_file(fs::path(config.output_dir) / kCacheFile, cache.str());
  write_file(fs::path(config.output_dir) / kDiagnosticsFile, diagnostics_json(grouping) + "\n");
  out << fmt::format("read {} hourly prices from {}\n", records.size(), config.data_path);
  out << fmt::format("kept {} days, dropped {} incomplete days\n", grouping.days.size(),
                     grouping.dropped);
  out << fmt::format("wrote {}\n", (fs::path(config.output_dir) / kCacheFile).string());
  return kOk;
}

int cmd_calibrate(const RunConfig& config, std::ostream& out) {
  const auto days = load_cache(config);
  const Dataset data = split_by_years(days, year_set(config.train_years), {});
  const Eigen::MatrixXd train = day_matrix(data.train_days);

  ModelBundle bundle;
  bundle.models = fit_models(train, config.lognormal_clip);
  bundle.spec = config.storage;
  bundle.lognormal_clip = config.lognormal_clip;
  bundle.train_days = static_cast<long>(train.rows());
  bundle.train_years = config.train_years;
  bundle.calibrations = calibrate_all({kAllStrategies.begin(), kAllStrategies.end()}, bundle.models,
                                      config.storage, backtest_options(config));
  fs::create_directories(config.output_dir);
  const fs::path path = fs::path(config.output_dir) / kBundleFile;
  write_file(path, bundle_to_json(bundle));

  out << fmt::format("fitted six models on {} training days ({})\n", train.rows(),
                     join_years(config.train_years));
  bool degenerate = false;
  for (const auto& c : bundle.calibrations) {
    const std::string budget =
        is_robust(c.strategy) ? fmt::format("r_max {:.6f}", c.r_max) : "conf 0.5 + 0.499 g";
    out << fmt::format("  {:<16} {:<22} zero-budget guarantee {:10.4f}{}\n", to_string(c.strategy),
                       budget, c.gamma_zero, c.degenerate ? "  DEGENERATE" : "");
    degenerate = degenerate || c.degenerate;
  }
  out << fmt::format("wrote {}\n", path.string());
  if (degenerate) {
    out << "training prices leave no guaranteed profit; calibration is degenerate\n";
    return kDegenerate;
  }
  return kOk;
}

int cmd_frontier(const RunConfig& config, std::ostream& out) {
  const auto days = load_cache(config);
  const fs::path bundle_path = fs::path(config.output_dir) / kBundleFile;
  if (!fs::exists(bundle_path)) {
    throw DataError(DataError::Kind::Io,
                    fmt::format("no model bundle at '{}'; run calibrate first", bundle_path.string()));
  }
  const ModelBundle bundle = bundle_from_json(read_file(bundle_path, "model bundle"));
  if (bundle.train_years != config.train_years || !(bundle.spec == config.storage) ||
      bundle.lognormal_clip != config.lognormal_clip) {
    throw DataError(DataError::Kind::Io,
                    fmt::format("'{}' was calibrated for other training years or storage "
                                "settings; rerun calibrate",
                                bundle_path.string()));
  }
  const Dataset data =
      split_by_years(days, year_set(config.train_years), year_set(config.test_years));
  if (data.test_days.empty()) {
    throw DataError(DataError::Kind::EmptyTrainSet,
                    fmt::format("no test days in years {}", join_years(config.test_years)));
  }
  const Eigen::MatrixXd test = day_matrix(data.test_days);

  BacktestReport report = compare_all(config.strategies, config.gamma_grid, bundle.models,
                                      bundle.calibrations, config.storage, test, backtest_options(config));
  report.dataset = {config.dataset_name, bundle.train_days, static_cast<long>(test.rows()),
                    config.train_years, config.test_years};

  fs::create_directories(config.output_dir);
  std::ostringstream csv;
  write_frontier_csv(csv, report);
  write_file(fs::path(config.output_dir) / kFrontierFile, csv.str());
  write_file(fs::path(config.output_dir) / kReportFile, report_to_json(report));
  write_file(fs::path(config.output_dir) / kPlotFile, plot_script());

  out << fmt::format("{} test days ({}), {} strategies x {} budgets\n", test.rows(),
                     join_years(config.test_years), report.strategies.size(),
                     report.gamma_grid.size());
  out << fmt::format("  {:<16} {:>5} {:>12} {:>12} {:>10}\n", "strategy", "gamma", "worst case",
                     "expected", "risk/yr");
  for (const auto& f : report.strategies) {
    for (const auto& p : f.points) {
      out << fmt::format("  {:<16} {:>5.2f} {:>12.2f} {:>12.2f} {:>10.2f}\n", to_string(f.strategy),
                         p.gamma, tidy(p.worst_case), tidy(p.expected_profit), p.risk_days_per_year);
    }
  }
  out << fmt::format("wrote {}, {}, {} in {}\n", kFrontierFile, kReportFile, kPlotFile,
                     config.output_dir);
  return kOk;
}

}  // namespace

void RunConfig::check() const {
  storage.check();
  if (train_years.empty()) throw std::invalid_argument("train_years is empty");
  if (gamma_grid.empty()) throw std::invalid_argument("gamma_grid is empty");
  for (double g : gamma_grid) {
    if (!(g >= 0.0 && g <= 1.0)) throw std::invalid_argument(fmt::format("gamma {} outside [0, 1]", g));
  }
  if (!std::is_sorted(gamma_grid.begin(), gamma_grid.end()) ||
      std::adjacent_find(gamma_grid.begin(), gamma_grid.end()) != gamma_grid.end()) {
    throw std::invalid_argument("gamma_grid must be strictly ascending");
  }
  if (strategies.empty()) throw std::invalid_argument("no strategies selected");
  if (!(lognormal_clip > 0.0)) throw std::invalid_argument("lognormal_clip must be positive");
  if (!(solver_tol > 0.0 && solver_tol < 1e-3)) throw std::invalid_argument("solver_tol must lie in (0, 1e-3)");
}

RunConfig read_config(const std::string& path) {
  const json j = [&] {
    try {
      return json::parse(read_file(path, "config"));
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("config '{}' is not valid JSON: {}", path, e.what()));
    }
  }();
  if (!j.is_object()) throw ConfigError(fmt::format("config '{}' must be a JSON object", path));
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    return fs::path(p).is_absolute() ? p : (base / p).lexically_normal().string();
  };
  RunConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "data_path") {
        c.data_path = resolve(value);
      } else if (key == "dataset_name") {
        c.dataset_name = value;
      } else if (key == "train_years") {
        c.train_years = value.get<std::vector<int>>();
      } else if (key == "test_years") {
        c.test_years = value.get<std::vector<int>>();
      } else if (key == "storage") {
        c.storage = storage_from(value, c.storage);
      } else if (key == "gamma_grid") {
        c.gamma_grid = value.get<std::vector<double>>();
      } else if (key == "strategies") {
        c.strategies = strategies_from(value.get<std::vector<std::string>>());
      } else if (key == "lognormal_clip") {
        c.lognormal_clip = value;
      } else if (key == "solver_tol") {
        c.solver_tol = value;
      } else if (key == "output_dir") {
        c.output_dir = resolve(value);
      } else if (key == "threads") {
        c.threads = value;
      } else {
        throw ConfigError(fmt::format("unknown config field '{}'", key));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config '{}': {}", path, e.what()));
  }
  return c;
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["data_path"] = c.data_path;
  j["dataset_name"] = c.dataset_name;
  j["train_years"] = c.train_years;
  j["test_years"] = c.test_years;
  j["storage"] = {{"power", c.storage.power},
                  {"energy", c.storage.energy},
                  {"efficiency", c.storage.efficiency},
                  {"initial_soc", c.storage.initial_soc},
                  {"terminal", to_string(c.storage.terminal)}};
  j["gamma_grid"] = c.gamma_grid;
  json names = json::array();
  for (StrategyId s : c.strategies) names.push_back(to_string(s));
  j["strategies"] = std::move(names);
  j["lognormal_clip"] = c.lognormal_clip;
  j["solver_tol"] = c.solver_tol;
  j["output_dir"] = c.output_dir;
  j["threads"] = c.threads;
  return j.dump(2) + "\n";
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust energy-storage arbitrage: ingest prices, calibrate, build frontiers."};
  app.name("storarb");
  app.require_subcommand(1, 1);

  std::string config_path, out_dir, data_path, terminal;
  std::vector<int> train_years, test_years;
  std::vector<double> gamma_grid;
  std::vector<std::string> strategies;
  double power = 0, energy = 0, efficiency = 0, initial_soc = 0, clip = 0, tol = 0;
  unsigned threads = 0;

  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--out", out_dir, "output directory (overrides output_dir)");
  auto* o_data = app.add_option("--data", data_path, "hourly price CSV (overrides data_path)");
  auto* o_train = app.add_option("--train-years", train_years, "comma-separated years")->delimiter(',');
  auto* o_test = app.add_option("--test-years", test_years, "comma-separated years")->delimiter(',');
  auto* o_grid = app.add_option("--gamma-grid", gamma_grid, "comma-separated budgets in [0, 1]")
                     ->delimiter(',');
  auto* o_strat = app.add_option("--strategies", strategies, "comma-separated strategy names")
                      ->delimiter(',');
  auto* o_power = app.add_option("--power", power, "power rating, MW");
  auto* o_energy = app.add_option("--energy", energy, "energy capacity, MWh");
  auto* o_eff = app.add_option("--efficiency", efficiency, "one-way efficiency");
  auto* o_soc = app.add_option("--initial-soc", initial_soc, "initial state of charge, MWh");
  auto* o_term = app.add_option("--terminal", terminal, "EqualInitial or Free");
  auto* o_clip = app.add_option("--lognormal-clip", clip, "price floor for the lognormal fit");
  auto* o_tol = app.add_option("--solver-tol", tol, "conic solver tolerance");
  auto* o_threads = app.add_option("--threads", threads, "worker threads (0: all cores)");

  auto* ingest = app.add_subcommand("ingest", "parse the price CSV into a day cache");
  auto* calibrate = app.add_subcommand("calibrate", "fit models and calibrate budgets");
  auto* frontier = app.add_subcommand("frontier", "backtest every strategy over the budget grid");
  for (auto* sub : {ingest, calibrate, frontier}) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    RunConfig config = config_path.empty() ? RunConfig{} : read_config(config_path);
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (*o_data) config.data_path = data_path;
    if (*o_train) config.train_years = train_years;
    if (*o_test) config.test_years = test_years;
    if (*o_grid) config.gamma_grid = gamma_grid;
    if (*o_strat) config.strategies = strategies_from(strategies);
    if (*o_power) config.storage.power = power;
    if (*o_energy) config.storage.energy = energy;
    if (*o_eff) config.storage.efficiency = efficiency;
    if (*o_soc) config.storage.initial_soc = initial_soc;
    if (*o_term) config.storage.terminal = parse_terminal_policy(terminal);
    if (*o_clip) config.lognormal_clip = clip;
    if (*o_tol) config.solver_tol = tol;
    if (*o_threads) config.threads = threads;
    try {
      config.check();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }

    if (ingest->parsed()) return cmd_ingest(config, out);
    if (calibrate->parsed()) return cmd_calibrate(config, out);
    return cmd_frontier(config, out);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kDataError;
  } catch (const SolverError& e) {
    err << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const std::invalid_argument& e) {
    // names from flags (strategy, terminal policy) and inconsistent inputs
    err << "configuration error: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace storarb::cli
