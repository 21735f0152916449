#include "storarb/storage.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "storarb/errors.hpp"

namespace storarb {

const char* to_string(TerminalPolicy policy) {
  return policy == TerminalPolicy::EqualInitial ? "EqualInitial" : "Free";
}

TerminalPolicy parse_terminal_policy(const std::string& text) {
  if (text == "EqualInitial") return TerminalPolicy::EqualInitial;
  if (text == "Free") return TerminalPolicy::Free;
  throw std::invalid_argument(fmt::format("unknown terminal policy '{}'", text));
}

void StorageSpec::check() const {
  if (!(power > 0.0) || !std::isfinite(power)) throw std::invalid_argument("power rating must be > 0");
  if (!(energy > 0.0) || !std::isfinite(energy)) {
    throw std::invalid_argument("energy capacity must be > 0");
  }
  if (!(efficiency > 0.0 && efficiency <= 1.0)) {
    throw std::invalid_argument("efficiency must lie in (0, 1]");
  }
  if (!(initial_soc >= 0.0 && initial_soc <= energy)) {
    throw std::invalid_argument("initial state of charge must lie in [0, E]");
  }
}

double schedule_violation(const StorageSpec& spec, const Schedule& s) {
  double v = 0.0;
  const auto bound = [&](const Eigen::VectorXd& u, double hi) {
    for (Eigen::Index t = 0; t < u.size(); ++t) v = std::max({v, -u(t), u(t) - hi});
  };
  bound(s.discharge, spec.power);
  bound(s.charge, spec.power);
  bound(s.soc, spec.energy);
  double prev = spec.initial_soc;
  for (Eigen::Index t = 0; t < s.horizon(); ++t) {
    const double flow = -s.discharge(t) / spec.efficiency + s.charge(t) * spec.efficiency;
    v = std::max(v, std::abs(s.soc(t) - prev - flow));
    prev = s.soc(t);
  }
  if (spec.terminal == TerminalPolicy::EqualInitial && s.horizon() > 0) {
    v = std::max(v, std::abs(s.soc(s.horizon() - 1) - spec.initial_soc));
  }
  return v;
}

void FeasibleSet::append_net_terms(std::vector<std::pair<Eigen::Index, double>>& terms,
                                   const Eigen::VectorXd& coef) const {
  for (Eigen::Index t = 0; t < horizon; ++t) {
    if (coef(t) == 0.0) continue;
    terms.emplace_back(discharge[static_cast<std::size_t>(t)], coef(t));
    terms.emplace_back(charge[static_cast<std::size_t>(t)], -coef(t));
  }
}

void FeasibleSet::add_net_objective(const Eigen::VectorXd& coef) {
  for (Eigen::Index t = 0; t < horizon; ++t) {
    builder.add_objective(discharge[static_cast<std::size_t>(t)], coef(t));
    builder.add_objective(charge[static_cast<std::size_t>(t)], -coef(t));
  }
}

Schedule FeasibleSet::extract(const Eigen::VectorXd& primal) const {
  Schedule s;
  s.discharge.resize(horizon);
  s.charge.resize(horizon);
  s.soc.resize(horizon);
  for (Eigen::Index t = 0; t < horizon; ++t) {
    const auto i = static_cast<std::size_t>(t);
    s.discharge(t) = primal(discharge[i]);
    s.charge(t) = primal(charge[i]);
    s.soc(t) = primal(soc[i]);
  }
  return s;
}

FeasibleSet build_feasible_set(const StorageSpec& spec, Eigen::Index horizon,
                               const Eigen::VectorXd& nominal_prices) {
  spec.check();
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  if (nominal_prices.size() != horizon) {
    throw std::invalid_argument(fmt::format("expected {} nominal prices, got {}", horizon,
                                            nominal_prices.size()));
  }
  FeasibleSet fs;
  fs.spec = spec;
  fs.horizon = horizon;
  ProgramBuilder& pb = fs.builder;
  for (Eigen::Index t = 0; t < horizon; ++t) {
    const bool forced = nominal_prices(t) < 0.0;
    fs.discharge.push_back(pb.add_variables(fmt::format("p[{}]", t), 1,
                                            forced ? ConeKind::Free : ConeKind::NonNegative));
    if (forced) fs.forced_zero.push_back(t);
  }
  const Eigen::Index b0 = pb.add_variables("b", horizon, ConeKind::NonNegative);
  const Eigen::Index e0 = pb.add_variables("e", horizon, ConeKind::NonNegative);
  for (Eigen::Index t = 0; t < horizon; ++t) {
    fs.charge.push_back(b0 + t);
    fs.soc.push_back(e0 + t);
  }

  for (Eigen::Index t = 0; t < horizon; ++t) {
    const auto i = static_cast<std::size_t>(t);
    if (std::find(fs.forced_zero.begin(), fs.forced_zero.end(), t) != fs.forced_zero.end()) {
      pb.add_equality({{fs.discharge[i], 1.0}}, 0.0);
    } else {
      pb.add_upper_bound(fs.discharge[i], spec.power);
    }
    pb.add_upper_bound(fs.charge[i], spec.power);
    pb.add_upper_bound(fs.soc[i], spec.energy);
  }
  // e_t - e_{t-1} + p_t / eta - b_t eta = 0, with e_{-1} = e0
  for (Eigen::Index t = 0; t < horizon; ++t) {
    const auto i = static_cast<std::size_t>(t);
    std::vector<std::pair<Eigen::Index, double>> row = {
        {fs.soc[i], 1.0}, {fs.discharge[i], 1.0 / spec.efficiency}, {fs.charge[i], -spec.efficiency}};
    if (t > 0) row.emplace_back(fs.soc[i - 1], -1.0);
    pb.add_equality(row, t == 0 ? spec.initial_soc : 0.0);
    ++fs.soc_equalities;
  }
  if (spec.terminal == TerminalPolicy::EqualInitial) {
    pb.add_equality({{fs.soc.back(), 1.0}}, spec.initial_soc);
    ++fs.terminal_equalities;
  }
  return fs;
}

ForesightResult solve_perfect_foresight(const StorageSpec& spec, const Eigen::VectorXd& prices,
                                        const SolverOptions& options) {
  FeasibleSet fs = build_feasible_set(spec, prices.size(), prices);
  fs.add_net_objective(prices);
  const ConicProgram prog = fs.builder.build();
  const Solution sol = solve(prog, options);
  if (!sol.optimal()) {
    throw SolverError(sol.status, fmt::format("perfect-foresight LP: {} ({})",
                                              to_string(sol.status), sol.message));
  }
  ForesightResult out;
  out.schedule = fs.extract(sol.primal);
  out.profit = sol.objective_value;
  return out;
}

double realized_profit(const Schedule& schedule, const Eigen::VectorXd& prices) {
  if (prices.size() != schedule.horizon()) {
    throw std::invalid_argument(fmt::format("schedule covers {} hours but {} prices were given",
                                            schedule.horizon(), prices.size()));
  }
  return prices.dot(schedule.net());
}

void write_schedule_csv(std::ostream& out, const Schedule& schedule) {
  out << "hour,p,b,e\n";
  for (Eigen::Index t = 0; t < schedule.horizon(); ++t) {
    out << fmt::format("{},{},{},{}\n", t, schedule.discharge(t), schedule.charge(t),
                       schedule.soc(t));
  }
}

}  // namespace storarb
