#ifndef STORARB_NORMAL_HPP
#define STORARB_NORMAL_HPP

namespace storarb {

/// Standard normal CDF.
double normal_cdf(double x);

/// Inverse of normal_cdf on (0, 1); throws std::domain_error outside.
double normal_quantile(double p);

}  // namespace storarb

#endif  // STORARB_NORMAL_HPP
