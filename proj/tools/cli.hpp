// The storarb command line: ingest | calibrate | frontier.
#ifndef STORARB_TOOLS_CLI_HPP
#define STORARB_TOOLS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "storarb/backtest.hpp"

namespace storarb::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDataError = 2,
  kDegenerate = 3,
  kSolverFailure = 4,
};

struct RunConfig {
  std::string data_path = "data/synthetic_prices.csv";
  std::string dataset_name = "synthetic";
  std::vector<int> train_years = {2019, 2020, 2021};
  std::vector<int> test_years = {2022, 2023};
  StorageSpec storage;
  std::vector<double> gamma_grid = kDefaultGrid;
  std::vector<StrategyId> strategies = {kAllStrategies.begin(), kAllStrategies.end()};
  double lognormal_clip = 0.01;
  double solver_tol = 1e-9;
  std::string output_dir = "out";
  unsigned threads = 0;

  /// Throws std::invalid_argument on out-of-range or unsorted fields.
  void check() const;
};

/// Reads a JSON config.  Relative paths inside it are taken relative to the
/// config file's directory.  Unknown keys are rejected.
RunConfig read_config(const std::string& path);
std::string config_to_json(const RunConfig& config);

/// Runs the command line and returns the process exit code.  Progress goes to
/// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace storarb::cli

#endif  // STORARB_TOOLS_CLI_HPP
