// JSON documents for backtest reports and fitted model bundles.
#include <fmt/format.h>
#include <json.hpp>

#include "storarb/backtest.hpp"
#include "storarb/errors.hpp"

namespace storarb {
namespace {

using json = nlohmann::ordered_json;
using Eigen::MatrixXd;
using Eigen::VectorXd;

json vec_json(const VectorXd& v) { return std::vector<double>(v.begin(), v.end()); }

VectorXd vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
  return rows;
}

MatrixXd mat_from(const json& j) {
  MatrixXd m(static_cast<Eigen::Index>(j.size()), j.empty() ? 0 : static_cast<Eigen::Index>(j[0].size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const VectorXd row = vec_from(j[static_cast<std::size_t>(i)]);
    if (row.size() != m.cols()) throw std::invalid_argument("ragged matrix in JSON document");
    m.row(i) = row.transpose();
  }
  return m;
}

json spec_json(const StorageSpec& s) {
  return {{"power", s.power},
          {"energy", s.energy},
          {"efficiency", s.efficiency},
          {"initial_soc", s.initial_soc},
          {"terminal", to_string(s.terminal)}};
}

StorageSpec spec_from(const json& j) {
  StorageSpec s;
  s.power = j.at("power");
  s.energy = j.at("energy");
  s.efficiency = j.at("efficiency");
  s.initial_soc = j.at("initial_soc");
  s.terminal = parse_terminal_policy(j.at("terminal"));
  return s;
}

json calibration_json(const Calibration& c) {
  json j = {{"strategy", to_string(c.strategy)}};
  if (is_robust(c.strategy)) {
    j["r_max"] = c.r_max;
  } else {
    j["confidence_map"] = {{"offset", 0.5}, {"slope", 0.499}};
  }
  j["gamma_zero"] = c.gamma_zero;
  j["degenerate"] = c.degenerate;
  j["solves"] = c.solves;
  return j;
}

Calibration calibration_from(const json& j) {
  Calibration c;
  c.strategy = parse_strategy(j.at("strategy"));
  c.r_max = j.value("r_max", 0.0);
  c.gamma_zero = j.at("gamma_zero");
  c.degenerate = j.at("degenerate");
  c.solves = j.at("solves");
  return c;
}

void check_header(const json& j, const char* format) {
  if (j.value("format", "") != format || j.value("version", 0) != 1) {
    throw DataError(DataError::Kind::Io, fmt::format("not a version-1 {} document", format));
  }
}

template <typename Fn>
auto parse_document(const std::string& text, Fn fn) {
  try {
    return fn(json::parse(text));
  } catch (const json::exception& e) {
    throw DataError(DataError::Kind::Io, fmt::format("invalid JSON document: {}", e.what()));
  }
}

}  // namespace

std::string report_to_json(const BacktestReport& r) {
  json j;
  j["format"] = "storarb-report";
  j["version"] = 1;
  j["dataset"] = {{"name", r.dataset.name},
                  {"train_days", r.dataset.train_days},
                  {"test_days", r.dataset.test_days},
                  {"train_years", r.dataset.train_years},
                  {"test_years", r.dataset.test_years}};
  j["storage"] = spec_json(r.spec);
  j["gamma_grid"] = r.gamma_grid;
  json strategies = json::array();
  for (const auto& f : r.strategies) {
    json points = json::array();
    for (const auto& p : f.points) {
      points.push_back({{"gamma", p.gamma},
                        {"budget", p.budget},
                        {"worst_case", p.worst_case},
                        {"expected_profit", p.expected_profit},
                        {"risk_days_per_year", p.risk_days_per_year},
                        {"nonneg_ratio", p.nonneg_ratio},
                        {"loss_days", p.loss_days},
                        {"test_days", p.test_days}});
    }
    strategies.push_back({{"strategy", to_string(f.strategy)},
                          {"calibration", calibration_json(f.calibration)},
                          {"points", std::move(points)}});
  }
  j["strategies"] = std::move(strategies);
  return j.dump(2) + "\n";
}

BacktestReport report_from_json(const std::string& text) {
  return parse_document(text, [](const json& j) {
    check_header(j, "storarb-report");
    BacktestReport r;
    const json& ds = j.at("dataset");
    r.dataset.name = ds.at("name");
    r.dataset.train_days = ds.at("train_days");
    r.dataset.test_days = ds.at("test_days");
    r.dataset.train_years = ds.at("train_years").get<std::vector<int>>();
    r.dataset.test_years = ds.at("test_years").get<std::vector<int>>();
    r.spec = spec_from(j.at("storage"));
    r.gamma_grid = j.at("gamma_grid").get<std::vector<double>>();
    for (const json& s : j.at("strategies")) {
      StrategyFrontier f;
      f.strategy = parse_strategy(s.at("strategy"));
      f.calibration = calibration_from(s.at("calibration"));
      for (const json& p : s.at("points")) {
        FrontierPoint pt;
        pt.gamma = p.at("gamma");
        pt.budget = p.at("budget");
        pt.worst_case = p.at("worst_case");
        pt.expected_profit = p.at("expected_profit");
        pt.risk_days_per_year = p.at("risk_days_per_year");
        pt.nonneg_ratio = p.at("nonneg_ratio");
        pt.loss_days = p.at("loss_days");
        pt.test_days = p.at("test_days");
        f.points.push_back(pt);
      }
      r.strategies.push_back(std::move(f));
    }
    return r;
  });
}

std::string bundle_to_json(const ModelBundle& b) {
  const FittedModels& m = b.models;
  json j;
  j["format"] = "storarb-models";
  j["version"] = 1;
  j["train_days"] = b.train_days;
  j["train_years"] = b.train_years;
  j["storage"] = spec_json(b.spec);
  j["horizon"] = m.horizon();
  json sorted = json::array();
  for (const auto& s : m.stats.sorted) sorted.push_back(vec_json(s));
  // one record per strategy
  j["models"] = json::array({
      {{"kind", "PolyQuantile"}, {"sorted_samples", std::move(sorted)}},
      {{"kind", "PolyMeanStd"}, {"mean", vec_json(m.stats.mean)}, {"std", vec_json(m.stats.stddev)}},
      {{"kind", "EllipMinVol"}, {"center", vec_json(m.min_volume.center)}, {"shape", mat_json(m.min_volume.shape)}},
      {{"kind", "EllipCov"}, {"center", vec_json(m.covariance.center)}, {"shape", mat_json(m.covariance.shape)}},
      {{"kind", "ChanceNormal"}, {"mean", vec_json(m.normal.mean)}, {"std", vec_json(m.normal.stddev)}},
      {{"kind", "ChanceLogNormal"},
       {"log_mean", vec_json(m.lognormal.log_mean)},
       {"log_std", vec_json(m.lognormal.log_std)},
       {"clip", m.lognormal.clip}},
  });
  json cals = json::array();
  for (const auto& c : b.calibrations) cals.push_back(calibration_json(c));
  j["calibrations"] = std::move(cals);
  return j.dump(1) + "\n";
}

ModelBundle bundle_from_json(const std::string& text) {
  return parse_document(text, [](const json& j) {
    check_header(j, "storarb-models");
    ModelBundle b;
    b.train_days = j.at("train_days");
    b.train_years = j.at("train_years").get<std::vector<int>>();
    b.spec = spec_from(j.at("storage"));
    FittedModels& m = b.models;
    for (const json& rec : j.at("models")) {
      const std::string kind = rec.at("kind");
      if (kind == "PolyQuantile") {
        for (const json& s : rec.at("sorted_samples")) m.stats.sorted.push_back(vec_from(s));
      } else if (kind == "PolyMeanStd") {
        m.stats.mean = vec_from(rec.at("mean"));
        m.stats.stddev = vec_from(rec.at("std"));
      } else if (kind == "EllipMinVol") {
        m.min_volume = {vec_from(rec.at("center")), mat_from(rec.at("shape"))};
      } else if (kind == "EllipCov") {
        m.covariance = {vec_from(rec.at("center")), mat_from(rec.at("shape"))};
      } else if (kind == "ChanceNormal") {
        m.normal = {vec_from(rec.at("mean")), vec_from(rec.at("std"))};
      } else if (kind == "ChanceLogNormal") {
        m.lognormal = {vec_from(rec.at("log_mean")), vec_from(rec.at("log_std")), rec.at("clip")};
      } else {
        throw DataError(DataError::Kind::Io, fmt::format("unknown model kind '{}'", kind));
      }
    }
    m.stats.count = m.stats.sorted.empty() ? 0 : m.stats.sorted.front().size();
    b.lognormal_clip = m.lognormal.clip;
    for (const json& c : j.at("calibrations")) b.calibrations.push_back(calibration_from(c));
    const Eigen::Index T = j.at("horizon");
    if (m.stats.mean.size() != T || static_cast<Eigen::Index>(m.stats.sorted.size()) != T ||
        m.min_volume.center.size() != T || m.covariance.center.size() != T ||
        m.lognormal.log_mean.size() != T) {
      throw DataError(DataError::Kind::Io, "model bundle is missing a model or has mixed horizons");
    }
    return b;
  });
}

}  // namespace storarb
