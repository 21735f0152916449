// Primal-dual interior-point method for ConicProgram.
//
// The program  max c'x, Ax = b, x in K  is handled in the inequality form
//
//   minimize  -c'x   s.t.  A x = b,  G x + s = 0,  s in K'
//
// with G = -S (S selects the non-free variables) and K' the product of the
// non-free cones.  Iterates follow the homogeneous self-dual embedding with
// Nesterov-Todd scaling and a Mehrotra predictor-corrector step, so
// infeasibility and unboundedness are detected through certificates instead
// of a phase-one problem.
//
// Slack and dual cone variables are kept in scaled form: a scaling W (a cone
// automorphism) and lambda with  W^{-T} s = W z = lambda.  Each step is taken
// in the scaled space, where lambda is well centred, and W is then updated
// multiplicatively.  Recomputing W from s and z directly loses the small
// eigenvalues of second-order cone scalings once iterates approach the
// boundary.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <fmt/format.h>

#include "storarb/conic.hpp"

namespace storarb {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Multiple of tol an iterate may miss by when the solver cannot make progress.
constexpr double kReducedAccuracy = 100.0;

struct Cone {
  ConeKind kind;
  Index offset;      // into s / z / lambda
  Index size;
  Index var_offset;  // into x
};

// NonNegative cones use the diagonal w; second-order cones a dense W and its
// inverse M.
struct ConeScaling {
  VectorXd w;
  MatrixXd W;
  MatrixXd M;
};

double soc_residual(const Eigen::Ref<const VectorXd>& u) {
  const double tail = u.tail(u.size() - 1).norm();
  return (u(0) - tail) * (u(0) + tail);
}

class Cones {
 public:
  explicit Cones(const ConicProgram& prog) {
    Index var = 0;
    for (const auto& block : prog.cones) {
      if (block.kind != ConeKind::Free) {
        cones_.push_back({block.kind, dim_, block.size, var});
        dim_ += block.size;
        degree_ += block.kind == ConeKind::NonNegative ? static_cast<int>(block.size) : 1;
      }
      var += block.size;
    }
    scaling_.resize(cones_.size());
  }

  Index dim() const { return dim_; }
  int degree() const { return degree_; }
  const std::vector<Cone>& list() const { return cones_; }
  const ConeScaling& scaling(std::size_t k) const { return scaling_[k]; }

  // (G x)_i = -x_{var(i)}
  VectorXd apply_G(const VectorXd& x) const {
    VectorXd out(dim_);
    for (const auto& c : cones_) out.segment(c.offset, c.size) = -x.segment(c.var_offset, c.size);
    return out;
  }

  VectorXd apply_Gt(const VectorXd& z, Index n) const {
    VectorXd out = VectorXd::Zero(n);
    for (const auto& c : cones_) out.segment(c.var_offset, c.size) = -z.segment(c.offset, c.size);
    return out;
  }

  VectorXd identity() const {
    VectorXd e = VectorXd::Zero(dim_);
    for (const auto& c : cones_) {
      if (c.kind == ConeKind::NonNegative) {
        e.segment(c.offset, c.size).setOnes();
      } else {
        e(c.offset) = 1.0;
      }
    }
    return e;
  }

  double min_eig(const VectorXd& u) const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& c : cones_) {
      const auto seg = u.segment(c.offset, c.size);
      if (c.kind == ConeKind::NonNegative) {
        m = std::min(m, seg.minCoeff());
      } else {
        m = std::min(m, seg(0) - seg.tail(c.size - 1).norm());
      }
    }
    return m;
  }

  // Jordan product u o v.
  VectorXd circ(const VectorXd& u, const VectorXd& v) const {
    VectorXd out(dim_);
    for (const auto& c : cones_) {
      const auto us = u.segment(c.offset, c.size);
      const auto vs = v.segment(c.offset, c.size);
      if (c.kind == ConeKind::NonNegative) {
        out.segment(c.offset, c.size) = us.cwiseProduct(vs);
      } else {
        out(c.offset) = us.dot(vs);
        out.segment(c.offset + 1, c.size - 1) =
            us(0) * vs.tail(c.size - 1) + vs(0) * us.tail(c.size - 1);
      }
    }
    return out;
  }

  // Solves lambda o x = r for x.
  VectorXd circ_solve(const VectorXd& lambda, const VectorXd& r) const {
    VectorXd out(dim_);
    for (const auto& c : cones_) {
      const auto l = lambda.segment(c.offset, c.size);
      const auto rs = r.segment(c.offset, c.size);
      if (c.kind == ConeKind::NonNegative) {
        out.segment(c.offset, c.size) = rs.cwiseQuotient(l);
      } else {
        const double l0 = l(0);
        const auto l1 = l.tail(c.size - 1);
        const double det = soc_residual(l);
        const double x0 = (l0 * rs(0) - l1.dot(rs.tail(c.size - 1))) / det;
        out(c.offset) = x0;
        out.segment(c.offset + 1, c.size - 1) = (rs.tail(c.size - 1) - x0 * l1) / l0;
      }
    }
    return out;
  }

  // Sets W to the Nesterov-Todd scaling of (s, z) and returns lambda = W z.
  VectorXd init_scaling(const VectorXd& s, const VectorXd& z) {
    VectorXd lambda(dim_);
    for (std::size_t k = 0; k < cones_.size(); ++k) {
      const Cone& c = cones_[k];
      ConeScaling& sc = scaling_[k];
      const auto ss = s.segment(c.offset, c.size);
      const auto zs = z.segment(c.offset, c.size);
      if (c.kind == ConeKind::NonNegative) {
        sc.w = (ss.array() / zs.array()).sqrt().matrix();
        lambda.segment(c.offset, c.size) = (ss.array() * zs.array()).sqrt().matrix();
      } else {
        MatrixXd W, M;
        nt_scaling(ss, zs, W, M);
        lambda.segment(c.offset, c.size) = W * zs;
        sc.W = std::move(W);
        sc.M = std::move(M);
      }
    }
    return lambda;
  }

  // Given scaled iterates s~ = W^{-T} s, z~ = W z, composes W with the NT
  // scaling of (s~, z~) and returns the new lambda.
  VectorXd compose_scaling(const VectorXd& s_scaled, const VectorXd& z_scaled) {
    VectorXd lambda(dim_);
    for (std::size_t k = 0; k < cones_.size(); ++k) {
      const Cone& c = cones_[k];
      ConeScaling& sc = scaling_[k];
      const auto ss = s_scaled.segment(c.offset, c.size);
      const auto zs = z_scaled.segment(c.offset, c.size);
      if (c.kind == ConeKind::NonNegative) {
        sc.w = sc.w.cwiseProduct((ss.array() / zs.array()).sqrt().matrix());
        lambda.segment(c.offset, c.size) = (ss.array() * zs.array()).sqrt().matrix();
      } else {
        MatrixXd Wt, Mt;
        nt_scaling(ss, zs, Wt, Mt);
        lambda.segment(c.offset, c.size) = Wt * zs;
        sc.W = Wt * sc.W;
        sc.M = sc.M * Mt;
      }
    }
    return lambda;
  }

  // s = W' lambda
  VectorXd unscale_s(const VectorXd& lambda) const {
    VectorXd out(dim_);
    for (std::size_t k = 0; k < cones_.size(); ++k) {
      const Cone& c = cones_[k];
      const auto ls = lambda.segment(c.offset, c.size);
      if (c.kind == ConeKind::NonNegative) {
        out.segment(c.offset, c.size) = scaling_[k].w.cwiseProduct(ls);
      } else {
        out.segment(c.offset, c.size) = scaling_[k].W.transpose() * ls;
      }
    }
    return out;
  }

  // z = W^{-1} lambda
  VectorXd unscale_z(const VectorXd& lambda) const {
    VectorXd out(dim_);
    for (std::size_t k = 0; k < cones_.size(); ++k) {
      const Cone& c = cones_[k];
      const auto ls = lambda.segment(c.offset, c.size);
      if (c.kind == ConeKind::NonNegative) {
        out.segment(c.offset, c.size) = ls.cwiseQuotient(scaling_[k].w);
      } else {
        out.segment(c.offset, c.size) = scaling_[k].M * ls;
      }
    }
    return out;
  }

  // W' v
  VectorXd apply_Wt(const VectorXd& v) const {
    VectorXd out(dim_);
    for (std::size_t k = 0; k < cones_.size(); ++k) {
      const Cone& c = cones_[k];
      const auto vs = v.segment(c.offset, c.size);
      if (c.kind == ConeKind::NonNegative) {
        out.segment(c.offset, c.size) = scaling_[k].w.cwiseProduct(vs);
      } else {
        out.segment(c.offset, c.size) = scaling_[k].W.transpose() * vs;
      }
    }
    return out;
  }

  // W^{-T} v
  VectorXd apply_Mt(const VectorXd& v) const {
    VectorXd out(dim_);
    for (std::size_t k = 0; k < cones_.size(); ++k) {
      const Cone& c = cones_[k];
      const auto vs = v.segment(c.offset, c.size);
      if (c.kind == ConeKind::NonNegative) {
        out.segment(c.offset, c.size) = vs.cwiseQuotient(scaling_[k].w);
      } else {
        out.segment(c.offset, c.size) = scaling_[k].M.transpose() * vs;
      }
    }
    return out;
  }

  // W^{-1} v
  VectorXd apply_M(const VectorXd& v) const { return unscale_z(v); }

  // Largest alpha keeping u + alpha du in the cone product.
  double max_step(const VectorXd& u, const VectorXd& du) const {
    double alpha = std::numeric_limits<double>::infinity();
    for (const auto& c : cones_) {
      const auto us = u.segment(c.offset, c.size);
      const auto ds = du.segment(c.offset, c.size);
      if (c.kind == ConeKind::NonNegative) {
        for (Index i = 0; i < c.size; ++i) {
          if (ds(i) < 0.0) alpha = std::min(alpha, -us(i) / ds(i));
        }
        continue;
      }
      const Index q = c.size;
      const double a = ds(0) * ds(0) - ds.tail(q - 1).squaredNorm();
      const double b = us(0) * ds(0) - us.tail(q - 1).dot(ds.tail(q - 1));
      const double cc = std::max(soc_residual(us), 0.0);
      // smallest positive root of a t^2 + 2 b t + cc
      double root = std::numeric_limits<double>::infinity();
      const double disc = b * b - a * cc;
      if (std::abs(a) <= 1e-300) {
        if (b < 0.0) root = -cc / (2.0 * b);
      } else if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double qq = -(b + (b >= 0.0 ? sq : -sq));
        if (qq / a > 0.0) root = std::min(root, qq / a);
        if (qq != 0.0 && cc / qq > 0.0) root = std::min(root, cc / qq);
      }
      if (ds(0) < 0.0) root = std::min(root, -us(0) / ds(0));
      alpha = std::min(alpha, root);
    }
    return alpha;
  }

 private:
  // Symmetric NT scaling W = beta (2 v v' - J) with W z = W^{-1} s.
  static void nt_scaling(const Eigen::Ref<const VectorXd>& s, const Eigen::Ref<const VectorXd>& z,
                         MatrixXd& W, MatrixXd& M) {
    const Index q = s.size();
    const double s_norm = std::sqrt(std::max(soc_residual(s), std::numeric_limits<double>::min()));
    const double z_norm = std::sqrt(std::max(soc_residual(z), std::numeric_limits<double>::min()));
    const VectorXd s_bar = s / s_norm;
    const VectorXd z_bar = z / z_norm;
    const double gamma = std::sqrt(0.5 * (1.0 + s_bar.dot(z_bar)));
    VectorXd w_bar(q);
    w_bar(0) = (s_bar(0) + z_bar(0)) / (2.0 * gamma);
    w_bar.tail(q - 1) = (s_bar.tail(q - 1) - z_bar.tail(q - 1)) / (2.0 * gamma);
    const double beta = std::sqrt(s_norm / z_norm);
    // v is the Jordan square root of w_bar
    VectorXd v = w_bar;
    v(0) += 1.0;
    v /= std::sqrt(2.0 * (w_bar(0) + 1.0));
    VectorXd jv = v;
    jv.tail(q - 1) *= -1.0;
    MatrixXd J = MatrixXd::Identity(q, q);
    J.bottomRightCorner(q - 1, q - 1) *= -1.0;
    W = beta * (2.0 * v * v.transpose() - J);
    M = (2.0 * jv * jv.transpose() - J) / beta;
  }

  std::vector<Cone> cones_;
  std::vector<ConeScaling> scaling_;
  Index dim_ = 0;
  int degree_ = 0;
};

// KKT system
//   A'dy + G'dz = r1,   A dx = r2,   G dx - W'W dz = r3
// solved in the scaled variable dz~ = W dz, with G~ = W^{-T} G:
//   [ 0   A'  G~' ] [dx ]   [r1        ]
//   [ A   0   0   ] [dy ] = [r2        ]
//   [ G~  0   -I  ] [dz~]   [W^{-T} r3 ]
// Eliminating dz~ would square the conditioning of W, which ruins the
// directions on degenerate problems.  A small static regularisation is
// removed again by iterative refinement against the unscaled residual.
class Kkt {
 public:
  Kkt(const ConicProgram& prog, const Cones& cones)
      : n_(prog.num_variables()),
        p_(prog.num_equalities()),
        m_(cones.dim()),
        A_(prog.equalities),
        cones_(cones) {
    const Index N = n_ + p_ + m_;
    K_ = MatrixXd::Zero(N, N);
    K_.block(0, n_, n_, p_) = prog.equalities.transpose();
    K_.block(n_, 0, p_, n_) = prog.equalities;
    K_.bottomRightCorner(m_, m_) = -MatrixXd::Identity(m_, m_);
    reg_ = VectorXd::Zero(N);
    reg_.head(n_).setConstant(kRegularisation);
    reg_.segment(n_, p_).setConstant(-kRegularisation);
  }

  void factor() {
    const Index zrow = n_ + p_;
    for (std::size_t k = 0; k < cones_.list().size(); ++k) {
      const Cone& c = cones_.list()[k];
      const ConeScaling& sc = cones_.scaling(k);
      auto lower = K_.block(zrow + c.offset, c.var_offset, c.size, c.size);
      auto upper = K_.block(c.var_offset, zrow + c.offset, c.size, c.size);
      if (c.kind == ConeKind::NonNegative) {
        lower.setZero();
        lower.diagonal() = -sc.w.cwiseInverse();
      } else {
        lower = -sc.M.transpose();
      }
      upper = lower.transpose();
    }
    MatrixXd Kreg = K_;
    Kreg.diagonal() += reg_;
    lu_.compute(Kreg);
  }

  void solve(const VectorXd& r1, const VectorXd& r2, const VectorXd& r3, VectorXd& dx,
             VectorXd& dy, VectorXd& dz_scaled) const {
    scaled_solve(r1, r2, cones_.apply_Mt(r3), dx, dy, dz_scaled);
    const double scale = 1.0 + std::max({r1.lpNorm<Eigen::Infinity>(),
                                         r2.size() ? r2.lpNorm<Eigen::Infinity>() : 0.0,
                                         r3.size() ? r3.lpNorm<Eigen::Infinity>() : 0.0});
    VectorXd cx, cy, cz;
    for (int it = 0; it < kRefinementSteps; ++it) {
      const VectorXd dz = cones_.apply_M(dz_scaled);
      const VectorXd e1 = r1 - A_.transpose() * dy - cones_.apply_Gt(dz, n_);
      const VectorXd e2 = r2 - A_ * dx;
      const VectorXd e3 = r3 - cones_.apply_G(dx) + cones_.apply_Wt(dz_scaled);
      double err = e1.lpNorm<Eigen::Infinity>();
      if (e2.size()) err = std::max(err, e2.lpNorm<Eigen::Infinity>());
      if (e3.size()) err = std::max(err, e3.lpNorm<Eigen::Infinity>());
      if (!std::isfinite(err) || err <= 1e-15 * scale) break;
      scaled_solve(e1, e2, cones_.apply_Mt(e3), cx, cy, cz);
      dx += cx;
      dy += cy;
      dz_scaled += cz;
    }
  }

 private:
  static constexpr double kRegularisation = 1e-11;
  static constexpr int kRefinementSteps = 4;

  void scaled_solve(const VectorXd& r1, const VectorXd& r2, const VectorXd& r3_scaled,
                    VectorXd& dx, VectorXd& dy, VectorXd& dz_scaled) const {
    VectorXd rhs(n_ + p_ + m_);
    rhs << r1, r2, r3_scaled;
    const VectorXd sol = lu_.solve(rhs);
    dx = sol.head(n_);
    dy = sol.segment(n_, p_);
    dz_scaled = sol.tail(m_);
  }

  Index n_;
  Index p_;
  Index m_;
  const MatrixXd& A_;
  const Cones& cones_;
  MatrixXd K_;
  VectorXd reg_;
  Eigen::PartialPivLU<MatrixXd> lu_;
};

void shift_into_cone(const Cones& cones, VectorXd& u) {
  const double alpha = -cones.min_eig(u);
  if (alpha >= -1e-8) u += (1.0 + std::max(alpha, 0.0)) * cones.identity();
}

}  // namespace

Solution solve(const ConicProgram& prog, const SolverOptions& options) {
  prog.check();
  Solution result;
  const Index n = prog.num_variables();
  const Index p = prog.num_equalities();
  const MatrixXd& A = prog.equalities;
  const VectorXd& b = prog.rhs;
  const VectorXd c = -prog.objective;  // internal problem minimizes

  Cones cones(prog);
  const Index m = cones.dim();
  const VectorXd zero_m = VectorXd::Zero(m);
  const double tol = options.tol;
  Kkt kkt(prog, cones);

  // Initial point from two least-squares type systems with identity scaling.
  VectorXd x, y, s, z;
  {
    cones.init_scaling(cones.identity(), cones.identity());
    kkt.factor();
    VectorXd zs;
    kkt.solve(VectorXd::Zero(n), b, zero_m, x, y, zs);
    s = -zs;
    shift_into_cone(cones, s);
    VectorXd x2;
    kkt.solve(-c, VectorXd::Zero(p), zero_m, x2, y, z);
    shift_into_cone(cones, z);
  }
  VectorXd lambda = cones.init_scaling(s, z);
  double tau = 1.0;
  double kappa = 1.0;

  const double b_scale = std::max(1.0, b.size() > 0 ? b.norm() : 0.0);
  const double c_scale = std::max(1.0, c.norm());
  const int degree = cones.degree();

  // Degenerate optima can make the last few steps inaccurate; the best iterate
  // is kept and accepted if it meets a relaxed tolerance.
  VectorXd best_x;
  double best_merit = std::numeric_limits<double>::infinity();

  auto finish = [&](SolveStatus status, std::string msg) {
    if (status == SolveStatus::NumericalFailure && best_merit <= kReducedAccuracy) {
      status = SolveStatus::Optimal;
      x = best_x;
      tau = 1.0;
      msg = fmt::format("reduced accuracy ({:.1f} x tol) after {}", best_merit, msg);
    }
    result.status = status;
    result.message = std::move(msg);
    if (status == SolveStatus::Optimal) {
      result.primal = x / tau;
      result.objective_value = prog.objective.dot(result.primal);
    } else {
      result.primal.resize(0);
      result.objective_value = 0.0;
    }
    return result;
  };

  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    result.iterations = iter;
    s = cones.unscale_s(lambda);
    z = cones.unscale_z(lambda);
    if (!x.allFinite() || !z.allFinite() || !s.allFinite() || !std::isfinite(tau)) {
      return finish(SolveStatus::NumericalFailure, "non-finite iterate");
    }
    const VectorXd Ax = A * x;
    const VectorXd Gx = cones.apply_G(x);
    const VectorXd Aty = A.transpose() * y;
    const VectorXd Gtz = cones.apply_Gt(z, n);
    const VectorXd rx = Aty + Gtz + c * tau;
    const VectorXd ry = -Ax + b * tau;
    const VectorXd rz = s + Gx;
    const double cx = c.dot(x);
    const double by = b.size() > 0 ? b.dot(y) : 0.0;
    const double rtau = kappa + cx + by;
    const double sz = lambda.squaredNorm();

    const double pres = std::max((Ax / tau - b).norm() / b_scale, rz.norm() / tau);
    const double dres = rx.norm() / tau / c_scale;
    const double pcost = cx / tau;
    const double dcost = -by / tau;
    const double gap = std::max(sz / (tau * tau), std::abs(pcost - dcost));
    if (pres <= tol && dres <= tol && gap <= tol * (1.0 + std::abs(pcost))) {
      return finish(SolveStatus::Optimal, fmt::format("converged in {} iterations", iter));
    }
    const double merit = std::max({pres, dres, gap / (1.0 + std::abs(pcost))}) / tol;
    if (merit < best_merit) {
      best_merit = merit;
      best_x = x / tau;
    }
    if (by < 0.0 && (Aty + Gtz).norm() / (-by) <= tol) {
      return finish(SolveStatus::Infeasible, "primal infeasibility certificate");
    }
    if (cx < 0.0 && std::max(Ax.norm(), rz.norm()) / (-cx) <= tol) {
      return finish(SolveStatus::Unbounded, "dual infeasibility certificate");
    }
    if (iter == options.max_iterations) break;

    const double mu = (sz + tau * kappa) / (degree + 1);
    kkt.factor();

    VectorXd x1, y1, z1;
    kkt.solve(-c, b, zero_m, x1, y1, z1);
    // c'x1 + b'y1 = -||W z1||^2; the right-hand form avoids cancellation.
    const double denom = -z1.squaredNorm() - kappa / tau;

    struct Direction {
      VectorXd dx, dy, dz, ds;  // dz, ds scaled
      double dtau = 0.0, dkappa = 0.0;
    };
    auto direction = [&](double eta, const VectorXd& es, double dkappa_rhs) {
      Direction d;
      VectorXd x2, y2, z2;
      kkt.solve(-eta * rx, eta * ry, -cones.apply_Wt(es) - eta * rz, x2, y2, z2);
      const double num = -eta * rtau - dkappa_rhs / tau - (c.dot(x2) + (p > 0 ? b.dot(y2) : 0.0));
      d.dtau = num / denom;
      d.dx = x2 + d.dtau * x1;
      d.dy = y2 + d.dtau * y1;
      d.dz = z2 + d.dtau * z1;
      d.ds = es - d.dz;
      d.dkappa = (dkappa_rhs - kappa * d.dtau) / tau;
      return d;
    };
    auto step_length = [&](const Direction& d) {
      double alpha = std::min(cones.max_step(lambda, d.ds), cones.max_step(lambda, d.dz));
      if (d.dtau < 0.0) alpha = std::min(alpha, -tau / d.dtau);
      if (d.dkappa < 0.0) alpha = std::min(alpha, -kappa / d.dkappa);
      return alpha;
    };

    // Predictor.
    const Direction aff = direction(1.0, -lambda, -tau * kappa);
    const double alpha_aff = std::min(1.0, step_length(aff));
    const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 0.0, 1.0);

    // Corrector.
    const VectorXd ds_rhs = -cones.circ(lambda, lambda) - cones.circ(aff.ds, aff.dz) +
                            sigma * mu * cones.identity();
    const double dkappa_rhs = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
    const Direction d = direction(1.0 - sigma, cones.circ_solve(lambda, ds_rhs), dkappa_rhs);
    const double alpha = std::min(1.0, 0.99 * step_length(d));
    if (!(alpha > 1e-14)) {
      return finish(SolveStatus::NumericalFailure,
                    fmt::format("step length collapsed at iteration {} (pres {:.2e}, dres "
                                "{:.2e}, gap {:.2e})",
                                iter, pres, dres, gap));
    }

    x += alpha * d.dx;
    y += alpha * d.dy;
    tau += alpha * d.dtau;
    kappa += alpha * d.dkappa;
    lambda = cones.compose_scaling(lambda + alpha * d.ds, lambda + alpha * d.dz);

    // The embedding is homogeneous; rescale to keep the iterates bounded.
    const double scale = std::max(tau, kappa);
    if (scale > 1e6 || scale < 1e-6) {
      x /= scale;
      y /= scale;
      lambda /= scale;
      tau /= scale;
      kappa /= scale;
    }
  }
  return finish(SolveStatus::NumericalFailure,
                fmt::format("iteration limit {} reached", options.max_iterations));
}

}  // namespace storarb
