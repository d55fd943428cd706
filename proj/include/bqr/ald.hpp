#pragma once

#include "bqr/dataset.hpp"

namespace bqr {

/// Check loss u * (tau - 1{u <= 0}).
inline double check_loss(double u, QuantileLevel tau) noexcept {
  return u > 0.0 ? u * tau.value() : u * (tau.value() - 1.0);
}

/// Sum of check losses of y - X beta.
double check_objective(const Dataset& data, QuantileLevel tau, const Eigen::VectorXd& beta);

// Asymmetric Laplace density with location mu and scale sigma. All three throw
// std::domain_error when sigma <= 0.
double ald_log_density(double y, double mu, QuantileLevel tau, double sigma);
double ald_cdf(double y, double mu, QuantileLevel tau, double sigma);
/// Inverse of ald_cdf; p in (0,1).
double ald_quantile(double p, double mu, QuantileLevel tau, double sigma);

}  // namespace bqr
