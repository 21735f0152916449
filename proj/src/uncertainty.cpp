#include "storarb/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "storarb/errors.hpp"

namespace storarb {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void require_samples(const MatrixXd& samples) {
  if (samples.rows() < 2) {
    throw DataError(DataError::Kind::TooFewSamples,
                    fmt::format("need at least 2 training days, got {}", samples.rows()));
  }
}

void require_budget(double r) {
  if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument("budget must be finite and >= 0");
}

MatrixXd sym_sqrt(const MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
  const VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double HourlyStats::quantile(Index hour, double q) const {
  const VectorXd& s = sorted.at(static_cast<std::size_t>(hour));
  q = std::clamp(q, 0.0, 1.0);
  const double pos = static_cast<double>(s.size() - 1) * q;
  const auto lo = static_cast<Index>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= s.size()) return s(s.size() - 1);
  return s(lo) + frac * (s(lo + 1) - s(lo));
}

VectorXd HourlyStats::quantiles(double q) const {
  VectorXd out(horizon());
  for (Index t = 0; t < horizon(); ++t) out(t) = quantile(t, q);
  return out;
}

bool PolyhedralSet::contains(const VectorXd& lambda, double tol) const {
  const VectorXd slack = d - D * lambda;
  for (Index i = 0; i < slack.size(); ++i) {
    if (slack(i) < -tol * (1.0 + std::abs(d(i)))) return false;
  }
  return true;
}

bool PolyhedralSet::is_box() const {
  const Index T = horizon();
  if (D.rows() != 2 * T || D.cols() != T) return false;
  MatrixXd expected(2 * T, T);
  expected << MatrixXd::Identity(T, T), -MatrixXd::Identity(T, T);
  return D == expected;
}

VectorXd PolyhedralSet::box_lower() const { return -d.tail(horizon()); }
VectorXd PolyhedralSet::box_upper() const { return d.head(horizon()); }

PolyhedralSet make_box(const VectorXd& lower, const VectorXd& upper, const VectorXd& center) {
  const Index T = lower.size();
  PolyhedralSet set;
  set.D.resize(2 * T, T);
  set.D << MatrixXd::Identity(T, T), -MatrixXd::Identity(T, T);
  set.d.resize(2 * T);
  set.d << upper, -lower;
  set.center = center;
  return set;
}

bool EllipsoidalSet::contains(const VectorXd& lambda, double tol) const {
  const VectorXd diff = lambda - center;
  if (shape.isZero(0.0)) return diff.norm() <= tol * (1.0 + center.norm());
  const VectorXd u = shape.completeOrthogonalDecomposition().solve(diff);
  return (shape * u - diff).norm() <= tol * (1.0 + diff.norm()) && u.norm() <= 1.0 + tol;
}

VectorXd LogNormalModel::price_mean() const {
  return (log_mean.array() + 0.5 * log_std.array().square()).exp().matrix();
}

VectorXd LogNormalModel::price_variance() const {
  const auto s2 = log_std.array().square();
  return (s2.exp() - 1.0).cwiseMax(0.0).matrix().cwiseProduct(
      (2.0 * log_mean.array() + s2).exp().matrix());
}

HourlyStats estimate_hourly_stats(const MatrixXd& samples) {
  require_samples(samples);
  HourlyStats stats;
  const Index m = samples.rows();
  stats.count = m;
  stats.mean = samples.colwise().mean().transpose();
  const MatrixXd centered = samples.rowwise() - stats.mean.transpose();
  stats.stddev = (centered.colwise().squaredNorm() / static_cast<double>(m - 1)).cwiseSqrt().transpose();
  for (Index t = 0; t < samples.cols(); ++t) {
    VectorXd col = samples.col(t);
    std::sort(col.begin(), col.end());
    stats.sorted.push_back(std::move(col));
  }
  return stats;
}

PolyhedralSet build_poly_quantile(const HourlyStats& stats, double g) {
  if (!(g >= 0.0 && g <= 1.0)) throw std::invalid_argument("coverage g must lie in [0, 1]");
  return make_box(stats.quantiles(0.5 - 0.5 * g), stats.quantiles(0.5 + 0.5 * g), stats.median());
}

PolyhedralSet build_poly_mean_std(const HourlyStats& stats, double r) {
  require_budget(r);
  return make_box(stats.mean - r * stats.stddev, stats.mean + r * stats.stddev, stats.mean);
}

MatrixXd ridged_covariance(const MatrixXd& samples) {
  require_samples(samples);
  const VectorXd mean = samples.colwise().mean().transpose();
  const MatrixXd centered = samples.rowwise() - mean.transpose();
  MatrixXd cov = centered.transpose() * centered / static_cast<double>(samples.rows() - 1);
  const double ridge = 1e-8 * cov.trace() / static_cast<double>(cov.rows());
  cov.diagonal().array() += ridge;
  return cov;
}

EllipsoidalSet build_ellip_cov(const MatrixXd& samples, double r) {
  require_budget(r);
  EllipsoidalSet set;
  set.center = samples.colwise().mean().transpose();
  set.shape = r * sym_sqrt(ridged_covariance(samples));
  return set;
}

EllipsoidalSet scale_ellipsoid(const EllipsoidalSet& set, double r) {
  require_budget(r);
  return {set.center, r * set.shape};
}

MveeResult mvee(const MatrixXd& points, const MveeOptions& options) {
  const Index m = points.rows();
  const Index T = points.cols();
  if (m < 1) throw std::invalid_argument("mvee needs at least one point");
  MveeResult result;
  const VectorXd mean = points.colwise().mean().transpose();
  const MatrixXd centered = points.rowwise() - mean.transpose();

  // Work in the span of the centred cloud; directions outside it get the
  // covariance ridge.
  const MatrixXd scatter = centered.transpose() * centered / static_cast<double>(std::max<Index>(m - 1, 1));
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(scatter);
  const double top = std::max(es.eigenvalues().maxCoeff(), 0.0);
  std::vector<Index> range, null;
  for (Index i = 0; i < T; ++i) {
    (top > 0.0 && es.eigenvalues()(i) > 1e-12 * top ? range : null).push_back(i);
  }
  const Index k = static_cast<Index>(range.size());
  MatrixXd U(T, k), N(T, static_cast<Index>(null.size()));
  for (Index i = 0; i < k; ++i) U.col(i) = es.eigenvectors().col(range[static_cast<std::size_t>(i)]);
  for (Index i = 0; i < N.cols(); ++i) N.col(i) = es.eigenvectors().col(null[static_cast<std::size_t>(i)]);
  const double ridge = 1e-8 * scatter.trace() / static_cast<double>(T);

  result.set.center = mean;
  result.set.shape = std::sqrt(ridge) * N * N.transpose();
  if (k == 0) return result;

  // Lifted points q_i = (y_i, 1) in R^{k+1}.
  MatrixXd Qp(m, k + 1);
  Qp.leftCols(k) = centered * U;
  Qp.col(k).setOnes();
  const double d1 = static_cast<double>(k + 1);

  VectorXd u = VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  MatrixXd Minv;
  VectorXd g(m);
  auto recompute = [&]() {
    const MatrixXd M = Qp.transpose() * u.asDiagonal() * Qp;
    Minv = M.ldlt().solve(MatrixXd::Identity(k + 1, k + 1));
    g = (Qp * Minv).cwiseProduct(Qp).rowwise().sum();
  };
  recompute();

  int iter = 0;
  for (;; ++iter) {
    Index j = 0;
    const double gmax = g.maxCoeff(&j);
    Index l = -1;
    double gmin = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < m; ++i) {
      if (u(i) > 0.0 && g(i) < gmin) {
        gmin = g(i);
        l = i;
      }
    }
    const double eps_plus = gmax / d1 - 1.0;
    const double eps_minus = 1.0 - gmin / d1;
    if (eps_plus <= options.tol && eps_minus <= options.tol) break;
    if (iter >= options.max_iterations) {
      throw std::runtime_error(fmt::format(
          "minimum-volume ellipsoid did not converge in {} iterations (violation {:.3e})",
          options.max_iterations, eps_plus));
    }
    // Rank-one update of M = sum u_i q_i q_i' with u <- (1 - a) u + a e_i.
    double a;
    Index i;
    if (eps_plus >= eps_minus) {
      i = j;
      a = (gmax - d1) / (d1 * (gmax - 1.0));
    } else {
      i = l;
      const double beta = std::min((d1 - gmin) / (d1 * (gmin - 1.0)), u(l) / (1.0 - u(l)));
      a = -beta;
    }
    const VectorXd Mq = Minv * Qp.row(i).transpose();
    const double gi = g(i);
    const double t = a / (1.0 - a);
    const double denom = 1.0 + t * gi;
    const VectorXd h = Qp * Mq;
    Minv = (Minv - (t / denom) * Mq * Mq.transpose()) / (1.0 - a);
    g = (g - (t / denom) * h.cwiseAbs2()) / (1.0 - a);
    u *= (1.0 - a);
    u(i) += a;
    if (u(i) < 1e-300) u(i) = 0.0;
    if ((iter + 1) % 500 == 0) recompute();
  }
  result.iterations = iter;

  const MatrixXd Y = Qp.leftCols(k);
  const VectorXd c = Y.transpose() * u;
  const MatrixXd C = Y.transpose() * u.asDiagonal() * Y - c * c.transpose();
  // A = C^{-1} / k; the ellipsoid is (y - c)' A (y - c) <= 1
  MatrixXd A = C.ldlt().solve(MatrixXd::Identity(k, k)) / static_cast<double>(k);
  const MatrixXd Yc = Y.rowwise() - c.transpose();
  const double rho = (Yc * A).cwiseProduct(Yc).rowwise().sum().maxCoeff();
  A /= rho;
  Eigen::SelfAdjointEigenSolver<MatrixXd> ea(A);
  const MatrixXd Qk = ea.eigenvectors() * ea.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
                      ea.eigenvectors().transpose();
  result.set.center = mean + U * c;
  result.set.shape += U * Qk * U.transpose();
  return result;
}

NormalModel fit_normal(const MatrixXd& samples) {
  const HourlyStats stats = estimate_hourly_stats(samples);
  return {stats.mean, stats.stddev};
}

LogNormalModel fit_lognormal(const MatrixXd& samples, double clip) {
  if (!(clip > 0.0)) throw std::invalid_argument("lognormal clip floor must be > 0");
  const HourlyStats stats = estimate_hourly_stats(samples.cwiseMax(clip).array().log().matrix());
  return {stats.mean, stats.stddev, clip};
}

NonPositiveMean::NonPositiveMean(double mean)
    : std::domain_error(fmt::format("weighted lognormal sum has non-positive mean {}", mean)),
      mean_(mean) {}

FwMatch fw_moment_match(const LogNormalModel& model, const VectorXd& x) {
  if (x.size() != model.log_mean.size()) throw std::invalid_argument("weight length mismatch");
  FwMatch out;
  out.mean = model.price_mean().dot(x);
  out.variance = model.price_variance().dot(x.cwiseAbs2());
  if (!(out.mean > 0.0)) throw NonPositiveMean(out.mean);
  const double s2 = std::log1p(out.variance / (out.mean * out.mean));
  out.log_std = std::sqrt(s2);
  out.log_mean = std::log(out.mean) - 0.5 * s2;
  return out;
}

}  // namespace storarb
