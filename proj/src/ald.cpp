#include "bqr/ald.hpp"

#include <cmath>
#include <stdexcept>

namespace bqr {

namespace {

void require_scale(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::domain_error("asymmetric Laplace scale must be positive and finite");
  }
}

}  // namespace

double check_objective(const Dataset& data, QuantileLevel tau, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd r = data.y() - data.X() * beta;
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) total += check_loss(r(i), tau);
  return total;
}

double ald_log_density(double y, double mu, QuantileLevel tau, double sigma) {
  require_scale(sigma);
  return std::log(tau.spread() / sigma) - check_loss(y - mu, tau) / sigma;
}

double ald_cdf(double y, double mu, QuantileLevel tau, double sigma) {
  require_scale(sigma);
  const double t = tau.value();
  const double z = (y - mu) / sigma;
  if (z <= 0.0) return t * std::exp((1.0 - t) * z);
  return 1.0 - (1.0 - t) * std::exp(-t * z);
}

double ald_quantile(double p, double mu, QuantileLevel tau, double sigma) {
  require_scale(sigma);
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("ald_quantile: p outside (0,1)");
  const double t = tau.value();
  if (p <= t) return mu + sigma * std::log(p / t) / (1.0 - t);
  return mu - sigma * std::log((1.0 - p) / (1.0 - t)) / t;
}

}  // namespace bqr
