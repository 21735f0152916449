// Standard-form conic programs over products of free, nonnegative and
// second-order cones, with a dense interior-point solver and an independent
// residual validator.
#ifndef STORARB_CONIC_HPP
#define STORARB_CONIC_HPP

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace storarb {

enum class ConeKind { Free, NonNegative, SecondOrder };

const char* to_string(ConeKind kind);

/// A contiguous run of variables belonging to one cone.  For SecondOrder
/// blocks the first coordinate is the scalar bound: x0 >= ||x[1:]||.
struct ConeBlock {
  ConeKind kind = ConeKind::Free;
  Eigen::Index size = 0;

  friend bool operator==(const ConeBlock&, const ConeBlock&) = default;
};

/// maximize  c'x  subject to  A x = b,  x in K1 x K2 x ...
///
/// The cone blocks partition the variable vector in index order.
struct ConicProgram {
  Eigen::VectorXd objective;
  Eigen::MatrixXd equalities;
  Eigen::VectorXd rhs;
  std::vector<ConeBlock> cones;
  std::vector<std::string> names;

  Eigen::Index num_variables() const { return objective.size(); }
  Eigen::Index num_equalities() const { return equalities.rows(); }

  /// Throws std::invalid_argument when dimensions or cone blocks are
  /// inconsistent.
  void check() const;
};

/// Incremental construction of a ConicProgram.  Variables are appended in
/// blocks; adjacent Free/NonNegative blocks of the same kind are merged when
/// the program is built.
class ProgramBuilder {
 public:
  /// Appends `count` variables of a Free or NonNegative kind and returns the
  /// index of the first one.
  Eigen::Index add_variables(const std::string& name, Eigen::Index count, ConeKind kind);

  /// Appends one second-order cone of dimension `dim` (bound + dim-1 body).
  Eigen::Index add_second_order_cone(const std::string& name, Eigen::Index dim);

  void set_objective(Eigen::Index var, double coef);
  void add_objective(Eigen::Index var, double coef);

  /// Adds the row  sum coef_i x_{idx_i} = rhs  and returns its row index.
  Eigen::Index add_equality(std::span<const std::pair<Eigen::Index, double>> terms, double rhs);
  Eigen::Index add_equality(std::initializer_list<std::pair<Eigen::Index, double>> terms,
                            double rhs);

  /// Adds  x_var <= bound  through a fresh nonnegative slack variable.
  Eigen::Index add_upper_bound(Eigen::Index var, double bound);

  Eigen::Index num_variables() const { return static_cast<Eigen::Index>(names_.size()); }
  Eigen::Index num_equalities() const { return static_cast<Eigen::Index>(row_rhs_.size()); }

  ConicProgram build() const;

 private:
  std::vector<ConeBlock> blocks_;
  std::vector<std::string> names_;
  std::vector<double> objective_;
  std::vector<std::vector<std::pair<Eigen::Index, double>>> rows_;
  std::vector<double> row_rhs_;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

const char* to_string(SolveStatus status);

struct SolverOptions {
  double tol = 1e-8;
  int max_iterations = 100;
};

struct Solution {
  SolveStatus status = SolveStatus::NumericalFailure;
  /// Populated iff status == Optimal.
  Eigen::VectorXd primal;
  double objective_value = 0.0;
  int iterations = 0;
  std::string message;

  bool optimal() const { return status == SolveStatus::Optimal; }
};

/// Solves the program to relative accuracy `options.tol`: on Optimal the
/// primal and dual residuals are below tol (relative to the data norms) and
/// the duality gap is below tol * (1 + |objective|).
Solution solve(const ConicProgram& prog, const SolverOptions& options = {});

struct ResidualReport {
  double max_equality_residual = 0.0;
  double max_cone_violation = 0.0;
  double objective_error = 0.0;
  double recomputed_objective = 0.0;
  bool flagged = false;
};

/// Recomputes residuals of `sol` from the program data alone.  Any residual
/// exceeding 10 * tol (scaled by the magnitude of the data) is flagged.
ResidualReport validate(const ConicProgram& prog, const Solution& sol, double tol = 1e-8);

/// Plain-text dump: dimensions, cone blocks, objective, then one row per
/// equality in the form "a_1 ... a_n | rhs".
void write_program_text(std::ostream& out, const ConicProgram& prog);

}  // namespace storarb

#endif  // STORARB_CONIC_HPP
