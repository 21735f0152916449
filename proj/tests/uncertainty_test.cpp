#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "storarb/errors.hpp"
#include "storarb/uncertainty.hpp"

using namespace storarb;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd column(std::initializer_list<double> v) {
  MatrixXd out(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) out(i++, 0) = x;
  return out;
}

MatrixXd random_samples(Eigen::Index m, Eigen::Index T, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd out(m, T);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double level = 5.0 * n(rng);
    for (Eigen::Index t = 0; t < T; ++t) out(i, t) = 30.0 + 10.0 * std::sin(t) + level + 3.0 * n(rng);
  }
  return out;
}

// Uniform point of the set: box coordinates uniform, ellipsoid via a uniform
// direction and radius.
VectorXd sample_box(const PolyhedralSet& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const VectorXd lo = s.box_lower(), hi = s.box_upper();
  VectorXd out(lo.size());
  for (Eigen::Index t = 0; t < lo.size(); ++t) out(t) = lo(t) + u(rng) * (hi(t) - lo(t));
  return out;
}

VectorXd sample_ellipsoid(const EllipsoidalSet& s, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VectorXd dir(s.shape.cols());
  for (auto& d : dir) d = n(rng);
  dir.normalize();
  return s.center + s.shape * dir * std::pow(u(rng), 1.0 / static_cast<double>(dir.size()));
}

}  // namespace

TEST(HourlyStats, SymmetricSample) {
  const HourlyStats s = estimate_hourly_stats(column({1, 2, 3, 4, 5}));
  EXPECT_DOUBLE_EQ(s.mean(0), 3.0);
  EXPECT_DOUBLE_EQ(s.quantile(0, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(s.quantile(0, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(s.quantile(0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(s.quantile(0, 1.0), 5.0);
  EXPECT_DOUBLE_EQ(s.quantile(0, 0.1), 1.4);
  EXPECT_NEAR(s.stddev(0), std::sqrt(2.5), 1e-15);
}

TEST(HourlyStats, ZeroSpreadAndTooFewDays) {
  EXPECT_EQ(estimate_hourly_stats(column({0, 0})).stddev(0), 0.0);
  EXPECT_THROW(estimate_hourly_stats(column({1})), DataError);
}

TEST(HourlyStats, QuantileMonotone) {
  const HourlyStats s = estimate_hourly_stats(random_samples(37, 24, 1));
  for (Eigen::Index t = 0; t < 24; ++t) {
    double prev = -1e300;
    for (int k = 0; k <= 100; ++k) {
      const double q = s.quantile(t, k / 100.0);
      EXPECT_GE(q, prev);
      prev = q;
    }
  }
}

TEST(PolyQuantile, Examples) {
  const HourlyStats s = estimate_hourly_stats(column({1, 2, 3, 4, 5}));
  const PolyhedralSet g0 = build_poly_quantile(s, 0.0);
  EXPECT_EQ(g0.box_lower()(0), 3.0);
  EXPECT_EQ(g0.box_upper()(0), 3.0);
  const PolyhedralSet g1 = build_poly_quantile(s, 1.0);
  EXPECT_EQ(g1.box_lower()(0), 1.0);
  EXPECT_EQ(g1.box_upper()(0), 5.0);
  const PolyhedralSet half = build_poly_quantile(s, 0.5);
  EXPECT_DOUBLE_EQ(half.box_lower()(0), 2.0);
  EXPECT_DOUBLE_EQ(half.box_upper()(0), 4.0);
  EXPECT_TRUE(half.is_box());
  EXPECT_EQ(half.center(0), 3.0);
}

TEST(PolyMeanStd, Examples) {
  HourlyStats s;
  s.mean = VectorXd::Constant(2, 10.0);
  s.stddev = (VectorXd(2) << 2.0, 0.0).finished();
  EXPECT_EQ(build_poly_mean_std(s, 0.0).box_upper(), s.mean);
  const PolyhedralSet b = build_poly_mean_std(s, 1.5);
  EXPECT_EQ(b.box_lower()(0), 7.0);
  EXPECT_EQ(b.box_upper()(0), 13.0);
  EXPECT_EQ(b.box_lower()(1), 10.0);
  EXPECT_EQ(b.box_upper()(1), 10.0);
}

TEST(EllipCov, TwoDayExample) {
  MatrixXd days(2, 2);
  days << 0, 0, 2, 2;
  const EllipsoidalSet set = build_ellip_cov(days, 1.0);
  EXPECT_TRUE(set.center.isApprox(VectorXd::Ones(2)));
  MatrixXd expected(2, 2);
  expected << 2, 2, 2, 2;
  const MatrixXd cov = ridged_covariance(days);
  EXPECT_NEAR((cov - expected).cwiseAbs().maxCoeff(), 1e-8 * 4.0 / 2.0, 1e-15);
  EXPECT_NEAR((set.shape * set.shape - cov).norm(), 0.0, 1e-12);
  EXPECT_TRUE(build_ellip_cov(days, 0.0).shape.isZero(0.0));
}

TEST(EllipCov, IdenticalDays) {
  MatrixXd days = MatrixXd::Constant(4, 3, 7.0);
  const EllipsoidalSet set = build_ellip_cov(days, 1.0);
  EXPECT_LE(set.shape.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(set.contains(VectorXd::Constant(3, 7.0)));
}

TEST(Mvee, UnitCircleFromFourPoints) {
  MatrixXd pts(4, 2);
  pts << 1, 0, -1, 0, 0, 1, 0, -1;
  const MveeResult r = mvee(pts);
  EXPECT_LE(r.set.center.norm(), 1e-3);
  EXPECT_LE((r.set.shape - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-3);
  // the unit circle has area pi; compare against an independent primal solve
  const double area = M_PI * std::abs(r.set.shape.determinant());
  EXPECT_NEAR(area, oracle::barrier_ellipse_area(pts), 1e-4 * area);
}

TEST(Mvee, IdenticalPoints) {
  const MatrixXd pts = MatrixXd::Constant(5, 3, 2.5);
  const MveeResult r = mvee(pts);
  EXPECT_TRUE(r.set.center.isApprox(VectorXd::Constant(3, 2.5)));
  EXPECT_LE(r.set.shape.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Mvee, CollinearPointsRankOnePlusRidge) {
  MatrixXd pts(3, 2);
  pts << 0, 0, 1, 1, 3, 3;
  const MveeResult r = mvee(pts);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_TRUE(r.set.contains(pts.row(i).transpose(), 1e-9));
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(r.set.shape);
  EXPECT_GT(es.eigenvalues()(1), 1.0);
  EXPECT_LT(es.eigenvalues()(0), 1e-3);
  EXPECT_GT(es.eigenvalues()(0), 0.0);
}

TEST(Mvee, ContainsAllPointsOfRandomCloud) {
  const MatrixXd pts = random_samples(300, 24, 3);
  const MveeResult r = mvee(pts);
  const MatrixXd Qinv = r.set.shape.inverse();
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const double v = (Qinv * (pts.row(i).transpose() - r.set.center)).squaredNorm();
    EXPECT_LE(v, 1.0 + 1e-6);
  }
}

TEST(ScaleEllipsoid, Examples) {
  const EllipsoidalSet unit{VectorXd::Zero(2), MatrixXd::Identity(2, 2)};
  EXPECT_TRUE(scale_ellipsoid(unit, 0.0).shape.isZero(0.0));
  EXPECT_EQ(scale_ellipsoid(unit, 1.0).shape, unit.shape);
  const EllipsoidalSet two = scale_ellipsoid(unit, 2.0);
  EXPECT_TRUE(two.contains(VectorXd::Constant(2, std::sqrt(2.0))));
  EXPECT_FALSE(two.contains(VectorXd::Constant(2, 1.5)));
}

TEST(Nesting, LargerBudgetContainsSmallerSet) {
  const MatrixXd samples = random_samples(60, 24, 7);
  const HourlyStats stats = estimate_hourly_stats(samples);
  const EllipsoidalSet cov = build_ellip_cov(samples, 1.0);
  const EllipsoidalSet vol = mvee(samples).set;
  std::mt19937_64 rng(13);
  for (auto [a, b] : {std::pair{0.2, 0.5}, std::pair{0.5, 0.9}}) {
    const PolyhedralSet q1 = build_poly_quantile(stats, a), q2 = build_poly_quantile(stats, b);
    const PolyhedralSet s1 = build_poly_mean_std(stats, 3 * a), s2 = build_poly_mean_std(stats, 3 * b);
    for (int k = 0; k < 1000; ++k) {
      EXPECT_TRUE(q2.contains(sample_box(q1, rng)));
      EXPECT_TRUE(s2.contains(sample_box(s1, rng)));
      EXPECT_TRUE(scale_ellipsoid(cov, b).contains(sample_ellipsoid(scale_ellipsoid(cov, a), rng), 1e-7));
      EXPECT_TRUE(scale_ellipsoid(vol, b).contains(sample_ellipsoid(scale_ellipsoid(vol, a), rng), 1e-7));
    }
  }
}

TEST(FitLogNormal, Examples) {
  const LogNormalModel m = fit_lognormal(column({1.0, std::exp(2.0)}));
  EXPECT_NEAR(m.log_mean(0), 1.0, 1e-12);
  EXPECT_NEAR(m.log_std(0), std::sqrt(2.0), 1e-12);
  const LogNormalModel c = fit_lognormal(column({4, 4, 4}));
  EXPECT_NEAR(c.log_mean(0), std::log(4.0), 1e-15);
  EXPECT_EQ(c.log_std(0), 0.0);
  const NormalModel n = fit_normal(column({4, 4, 4}));
  EXPECT_EQ(n.mean(0), 4.0);
  EXPECT_EQ(n.stddev(0), 0.0);
  const LogNormalModel clipped = fit_lognormal(column({-10, -10}), 0.01);
  EXPECT_NEAR(clipped.log_mean(0), std::log(0.01), 1e-15);
}

TEST(FwMomentMatch, SingleHourIsIdentity) {
  const LogNormalModel m{VectorXd::Zero(2), (VectorXd(2) << 0.5, 0.3).finished(), 0.01};
  const FwMatch fw = fw_moment_match(m, (VectorXd(2) << 1, 0).finished());
  EXPECT_NEAR(fw.log_mean, 0.0, 1e-14);
  EXPECT_NEAR(fw.log_std, 0.5, 1e-14);
}

TEST(FwMomentMatch, TwoIidHours) {
  const LogNormalModel m{VectorXd::Zero(2), VectorXd::Constant(2, 0.25), 0.01};
  const VectorXd x = VectorXd::Ones(2);
  const FwMatch fw = fw_moment_match(m, x);
  EXPECT_NEAR(fw.log_mean, 0.7085, 1e-3);
  EXPECT_NEAR(fw.log_std, 0.1782, 1e-3);
  // matched lognormal reproduces both moments
  const double mean = std::exp(fw.log_mean + 0.5 * fw.log_std * fw.log_std);
  const double var = (std::exp(fw.log_std * fw.log_std) - 1.0) * mean * mean;
  EXPECT_NEAR(mean, fw.mean, 1e-10);
  EXPECT_NEAR(var, fw.variance, 1e-10);
  // Monte Carlo moments of the sum
  std::mt19937_64 rng(17);
  std::lognormal_distribution<double> ln(0.0, 0.25);
  const int n = 1000000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = ln(rng) + ln(rng);
    s1 += z;
    s2 += z * z;
  }
  const double mc_mean = s1 / n;
  const double mc_var = s2 / n - mc_mean * mc_mean;
  const double mc_sigma2 = std::log1p(mc_var / (mc_mean * mc_mean));
  EXPECT_NEAR(std::sqrt(mc_sigma2), fw.log_std, 1e-2);
  EXPECT_NEAR(std::log(mc_mean) - 0.5 * mc_sigma2, fw.log_mean, 1e-2);
}

TEST(FwMomentMatch, CancellingWeightsHaveNoMatch) {
  const LogNormalModel m{VectorXd::Zero(2), VectorXd::Constant(2, 0.25), 0.01};
  EXPECT_THROW(fw_moment_match(m, (VectorXd(2) << 1, -1).finished()), NonPositiveMean);
}
