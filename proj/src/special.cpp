#include "bqr/special.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace bqr {

double normal_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p outside (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>{}, p);
}

double gamma_cdf(double shape, double x) {
  if (!(shape > 0.0)) throw std::domain_error("gamma_cdf: shape must be positive");
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_p(shape, x);
}

double gamma_quantile(double shape, double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("gamma_quantile: p outside (0,1)");
  if (!(shape > 0.0)) throw std::domain_error("gamma_quantile: shape must be positive");
  const auto f = [&](double x) { return gamma_cdf(shape, x) - p; };
  double lo = 0.0;
  double hi = shape + 10.0 * std::sqrt(shape) + 10.0;
  while (f(hi) < 0.0) hi *= 2.0;
  std::uintmax_t max_iter = 200;
  const auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-13 * (1.0 + std::abs(a)); };
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, -p, f(hi), tol, max_iter);
  return 0.5 * (a + b);
}

double truncated_normal_mean(double mean, double sd, double lo, double hi) {
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  const double mass = normal_cdf(b) - normal_cdf(a);
  return mean + sd * (normal_pdf(a) - normal_pdf(b)) / mass;
}

}  // namespace bqr
