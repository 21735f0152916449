#include "storarb/conic.hpp"

#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

namespace storarb {

const char* to_string(ConeKind kind) {
  switch (kind) {
    case ConeKind::Free:
      return "Free";
    case ConeKind::NonNegative:
      return "NonNegative";
    case ConeKind::SecondOrder:
      return "SecondOrder";
  }
  return "?";
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal:
      return "Optimal";
    case SolveStatus::Infeasible:
      return "Infeasible";
    case SolveStatus::Unbounded:
      return "Unbounded";
    case SolveStatus::NumericalFailure:
      return "NumericalFailure";
  }
  return "?";
}

void ConicProgram::check() const {
  const Eigen::Index n = objective.size();
  if (equalities.cols() != n && equalities.rows() > 0) {
    throw std::invalid_argument(
        fmt::format("equality matrix has {} columns, expected {}", equalities.cols(), n));
  }
  if (equalities.rows() != rhs.size()) {
    throw std::invalid_argument(fmt::format("equality matrix has {} rows but rhs has {} entries",
                                            equalities.rows(), rhs.size()));
  }
  Eigen::Index covered = 0;
  for (const auto& block : cones) {
    if (block.size <= 0) throw std::invalid_argument("empty cone block");
    if (block.kind == ConeKind::SecondOrder && block.size < 2) {
      throw std::invalid_argument("second-order cone block needs dimension >= 2");
    }
    covered += block.size;
  }
  if (covered != n) {
    throw std::invalid_argument(
        fmt::format("cone blocks cover {} variables, program has {}", covered, n));
  }
  if (!names.empty() && static_cast<Eigen::Index>(names.size()) != n) {
    throw std::invalid_argument("variable name map does not match variable count");
  }
  if (!objective.allFinite() || !rhs.allFinite() || !equalities.allFinite()) {
    throw std::invalid_argument("program data contains non-finite values");
  }
}

Eigen::Index ProgramBuilder::add_variables(const std::string& name, Eigen::Index count,
                                           ConeKind kind) {
  if (kind == ConeKind::SecondOrder) {
    throw std::invalid_argument("use add_second_order_cone for second-order blocks");
  }
  if (count <= 0) throw std::invalid_argument("variable block must be non-empty");
  const Eigen::Index first = num_variables();
  blocks_.push_back({kind, count});
  for (Eigen::Index i = 0; i < count; ++i) {
    names_.push_back(count == 1 ? name : fmt::format("{}[{}]", name, i));
    objective_.push_back(0.0);
  }
  return first;
}

Eigen::Index ProgramBuilder::add_second_order_cone(const std::string& name, Eigen::Index dim) {
  if (dim < 2) throw std::invalid_argument("second-order cone needs dimension >= 2");
  const Eigen::Index first = num_variables();
  blocks_.push_back({ConeKind::SecondOrder, dim});
  for (Eigen::Index i = 0; i < dim; ++i) {
    names_.push_back(fmt::format("{}[{}]", name, i));
    objective_.push_back(0.0);
  }
  return first;
}

void ProgramBuilder::set_objective(Eigen::Index var, double coef) {
  objective_.at(static_cast<std::size_t>(var)) = coef;
}

void ProgramBuilder::add_objective(Eigen::Index var, double coef) {
  objective_.at(static_cast<std::size_t>(var)) += coef;
}

Eigen::Index ProgramBuilder::add_equality(
    std::span<const std::pair<Eigen::Index, double>> terms, double rhs) {
  for (const auto& [idx, coef] : terms) {
    if (idx < 0 || idx >= num_variables()) {
      throw std::out_of_range(fmt::format("equality references unknown variable {}", idx));
    }
  }
  rows_.emplace_back(terms.begin(), terms.end());
  row_rhs_.push_back(rhs);
  return num_equalities() - 1;
}

Eigen::Index ProgramBuilder::add_equality(
    std::initializer_list<std::pair<Eigen::Index, double>> terms, double rhs) {
  return add_equality(std::span<const std::pair<Eigen::Index, double>>(terms.begin(), terms.size()),
                      rhs);
}

Eigen::Index ProgramBuilder::add_upper_bound(Eigen::Index var, double bound) {
  const Eigen::Index slack =
      add_variables(fmt::format("slack({})", names_.at(static_cast<std::size_t>(var))), 1,
                    ConeKind::NonNegative);
  add_equality({{var, 1.0}, {slack, 1.0}}, bound);
  return slack;
}

ConicProgram ProgramBuilder::build() const {
  ConicProgram prog;
  const Eigen::Index n = num_variables();
  const Eigen::Index m = num_equalities();
  prog.objective = Eigen::Map<const Eigen::VectorXd>(objective_.data(), n);
  prog.equalities = Eigen::MatrixXd::Zero(m, n);
  prog.rhs.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (const auto& [idx, coef] : rows_[static_cast<std::size_t>(r)]) {
      prog.equalities(r, idx) += coef;
    }
    prog.rhs(r) = row_rhs_[static_cast<std::size_t>(r)];
  }
  for (const auto& block : blocks_) {
    if (block.kind != ConeKind::SecondOrder && !prog.cones.empty() &&
        prog.cones.back().kind == block.kind) {
      prog.cones.back().size += block.size;
    } else {
      prog.cones.push_back(block);
    }
  }
  prog.names = names_;
  return prog;
}

ResidualReport validate(const ConicProgram& prog, const Solution& sol, double tol) {
  ResidualReport report;
  if (!sol.optimal() || sol.primal.size() != prog.num_variables()) {
    report.flagged = true;
    return report;
  }
  const Eigen::VectorXd& x = sol.primal;
  if (prog.num_equalities() > 0) {
    report.max_equality_residual =
        (prog.equalities * x - prog.rhs).lpNorm<Eigen::Infinity>();
  }
  Eigen::Index offset = 0;
  for (const auto& block : prog.cones) {
    const auto seg = x.segment(offset, block.size);
    double violation = 0.0;
    if (block.kind == ConeKind::NonNegative) {
      violation = std::max(0.0, -seg.minCoeff());
    } else if (block.kind == ConeKind::SecondOrder) {
      violation = std::max(0.0, seg.tail(block.size - 1).norm() - seg(0));
    }
    report.max_cone_violation = std::max(report.max_cone_violation, violation);
    offset += block.size;
  }
  report.recomputed_objective = prog.objective.dot(x);
  report.objective_error = std::abs(report.recomputed_objective - sol.objective_value);

  const double rhs_scale = 1.0 + (prog.rhs.size() > 0 ? prog.rhs.norm() : 0.0);
  const double x_scale = 1.0 + x.lpNorm<Eigen::Infinity>();
  const double obj_scale = 1.0 + std::abs(report.recomputed_objective);
  const double limit = 10.0 * tol;
  report.flagged = report.max_equality_residual > limit * rhs_scale ||
                   report.max_cone_violation > limit * x_scale ||
                   report.objective_error > limit * obj_scale;
  return report;
}

void write_program_text(std::ostream& out, const ConicProgram& prog) {
  out << fmt::format("variables {} equalities {}\n", prog.num_variables(),
                     prog.num_equalities());
  out << "cones";
  for (const auto& block : prog.cones) out << ' ' << to_string(block.kind) << '(' << block.size << ')';
  out << '\n';
  if (!prog.names.empty()) {
    out << "names";
    for (const auto& name : prog.names) out << ' ' << name;
    out << '\n';
  }
  out << "maximize";
  for (Eigen::Index j = 0; j < prog.num_variables(); ++j) out << fmt::format(" {:.17g}", prog.objective(j));
  out << '\n';
  for (Eigen::Index r = 0; r < prog.num_equalities(); ++r) {
    for (Eigen::Index j = 0; j < prog.num_variables(); ++j) {
      out << fmt::format("{:.17g} ", prog.equalities(r, j));
    }
    out << fmt::format("| {:.17g}\n", prog.rhs(r));
  }
}

}  // namespace storarb
