#pragma once

namespace bqr {

double normal_pdf(double x) noexcept;
double normal_cdf(double x) noexcept;
/// Inverse of the standard normal CDF; p must lie in (0,1).
double normal_quantile(double p);

/// CDF of Gamma(shape, scale = 1).
double gamma_cdf(double shape, double x);
/// Quantile of Gamma(shape, scale = 1), found by bracketed root-finding on gamma_cdf.
double gamma_quantile(double shape, double p);

/// Mean of N(mean, sd^2) truncated to [lo, hi].
double truncated_normal_mean(double mean, double sd, double lo, double hi);

}  // namespace bqr
