// Uncertainty models estimated from training days: quantile and mean-std
// boxes, covariance and minimum-volume ellipsoids, and per-hour normal and
// lognormal fits.  Samples are (m x T) matrices with one day per row.
#ifndef STORARB_UNCERTAINTY_HPP
#define STORARB_UNCERTAINTY_HPP

#include <stdexcept>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace storarb {

struct HourlyStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;              // divisor m - 1
  std::vector<Eigen::VectorXd> sorted;  // per hour, ascending
  Eigen::Index count = 0;

  Eigen::Index horizon() const { return mean.size(); }
  /// Linear interpolation between order statistics at position (m-1) q.
  double quantile(Eigen::Index hour, double q) const;
  Eigen::VectorXd quantiles(double q) const;
  Eigen::VectorXd median() const { return quantiles(0.5); }
};

/// {lambda : D lambda <= d}
struct PolyhedralSet {
  Eigen::MatrixXd D;
  Eigen::VectorXd d;
  Eigen::VectorXd center;

  Eigen::Index horizon() const { return center.size(); }
  bool contains(const Eigen::VectorXd& lambda, double tol = 1e-9) const;
  /// True when D = [I; -I], i.e. the set is the box [-d_lower, d_upper].
  bool is_box() const;
  Eigen::VectorXd box_lower() const;
  Eigen::VectorXd box_upper() const;
};

PolyhedralSet make_box(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                       const Eigen::VectorXd& center);

/// {center + Q u : ||u|| <= 1}
struct EllipsoidalSet {
  Eigen::VectorXd center;
  Eigen::MatrixXd shape;

  Eigen::Index horizon() const { return center.size(); }
  /// Membership through the minimum-norm preimage under Q.
  bool contains(const Eigen::VectorXd& lambda, double tol = 1e-9) const;
};

struct NormalModel {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
};

struct LogNormalModel {
  Eigen::VectorXd log_mean;
  Eigen::VectorXd log_std;
  double clip = 0.01;

  /// Per-hour mean exp(mu + sigma^2 / 2).
  Eigen::VectorXd price_mean() const;
  /// Per-hour variance (exp(sigma^2) - 1) exp(2 mu + sigma^2).
  Eigen::VectorXd price_variance() const;
};

using UncertaintyModel = std::variant<PolyhedralSet, EllipsoidalSet, NormalModel, LogNormalModel>;

/// Throws DataError (TooFewSamples) for fewer than two days.
HourlyStats estimate_hourly_stats(const Eigen::MatrixXd& samples);

/// Box between the per-hour quantiles of levels 0.5 -/+ g/2, centred on the
/// median.
PolyhedralSet build_poly_quantile(const HourlyStats& stats, double g);

/// Box mu_t +/- r sigma_t, centred on the mean.
PolyhedralSet build_poly_mean_std(const HourlyStats& stats, double r);

/// Sample covariance (divisor m - 1) plus a ridge of 1e-8 trace / T.
Eigen::MatrixXd ridged_covariance(const Eigen::MatrixXd& samples);

/// Centre = mean day, Q = r * Sigma^{1/2}.
EllipsoidalSet build_ellip_cov(const Eigen::MatrixXd& samples, double r);

struct MveeOptions {
  double tol = 1e-6;
  int max_iterations = 100000;
};

struct MveeResult {
  EllipsoidalSet set;
  int iterations = 0;
};

/// Minimum-volume enclosing ellipsoid by Khachiyan's algorithm with
/// Todd-Yildirim away steps.  Directions in which the points do not spread
/// get a half-width of sqrt(ridge) with the covariance ridge.  The result is
/// rescaled so that every point lies inside exactly.  Throws
/// std::runtime_error on non-convergence.
MveeResult mvee(const Eigen::MatrixXd& points, const MveeOptions& options = {});

/// (center, r Q)
EllipsoidalSet scale_ellipsoid(const EllipsoidalSet& set, double r);

NormalModel fit_normal(const Eigen::MatrixXd& samples);
LogNormalModel fit_lognormal(const Eigen::MatrixXd& samples, double clip = 0.01);

class NonPositiveMean : public std::domain_error {
 public:
  explicit NonPositiveMean(double mean);
  double mean() const { return mean_; }

 private:
  double mean_;
};

struct FwMatch {
  double log_mean = 0.0;  // mu'
  double log_std = 0.0;   // sigma'
  double mean = 0.0;      // m_Z
  double variance = 0.0;  // v_Z
};

/// Moments of Z = sum x_t lambda_t under independent lognormal hours and the
/// single lognormal with the same mean and variance.  Throws NonPositiveMean
/// when m_Z <= 0.
FwMatch fw_moment_match(const LogNormalModel& model, const Eigen::VectorXd& x);

}  // namespace storarb

#endif  // STORARB_UNCERTAINTY_HPP
