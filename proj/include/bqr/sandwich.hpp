#pragma once

#include "bqr/dataset.hpp"
#include "bqr/gibbs.hpp"
#include "bqr/interval.hpp"

#include <functional>
#include <optional>
#include <variant>

namespace bqr {

/// Centering of the sandwich likelihood.
enum class Centering {
  Slba,  ///< ALD posterior mean
  Slqr,  ///< classical check-loss estimate
};

struct SandwichInputs {
  Eigen::VectorXd center;
  Eigen::MatrixXd v_n_inv;
  Eigen::MatrixXd s_n;
  std::size_t n = 0;
  QuantileLevel tau{0.5};
  PriorSpec prior;
  Centering centering = Centering::Slba;
};

struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

struct SandwichPosterior {
  Eigen::MatrixXd sigma_n;
  std::variant<GaussianPosterior, Eigen::MatrixXd> form;  ///< closed form, or M x p draws
  Centering centering = Centering::Slba;
};

/// S_n = (1/n) sum_i x_i x_i'.
Eigen::MatrixXd compute_s_n(const Dataset& data);

/// Sigma_n = tau (1 - tau) V_n^{-1} S_n V_n^{-1}. Non-symmetric inputs throw std::invalid_argument.
Eigen::MatrixXd compute_sigma_n(const Eigen::MatrixXd& v_n_inv, const Eigen::MatrixXd& s_n, QuantileLevel tau);

/// Log of the Gaussian sandwich likelihood N(beta; center, Sigma_n / n), normalizer included.
double sandwich_log_likelihood(const SandwichInputs& inputs, const Eigen::VectorXd& beta);

/**
 * Corrected posterior: sandwich likelihood times the normal coefficient prior.
 *
 * Without `mcmc` the conjugate closed form is returned:
 *   precision = n Sigma_n^{-1} + diag(1/prior variance),
 *   mean = cov (n Sigma_n^{-1} center + prior precision * prior mean).
 * With `mcmc` the same target is sampled by random-walk Metropolis and Draws are
 * returned. Throws SingularCovarianceError when Sigma_n has no Cholesky factor.
 */
SandwichPosterior sandwich_posterior(const SandwichInputs& inputs, const std::optional<GibbsConfig>& mcmc = {});

using LogDensity = std::function<double(const Eigen::VectorXd&)>;

struct MetropolisStats {
  double acceptance_rate = 0.0;
  double proposal_scale = 0.0;
};

/**
 * Random-walk Metropolis on sandwich likelihood + arbitrary log prior. The
 * proposal is N(0, s^2 Sigma_n / n); s is adapted during burn-in toward an
 * acceptance rate of 25-45% and frozen afterwards.
 */
Eigen::MatrixXd sample_sandwich_metropolis(const SandwichInputs& inputs, const LogDensity& log_prior,
                                           const GibbsConfig& config, MetropolisStats* stats = nullptr);

/// Closed form: mean +/- z sd. Draws: equal-tailed empirical quantiles.
IntervalSet credible_interval(const SandwichPosterior& posterior, double level);
IntervalSet credible_interval(const Chain& chain, double level);

}  // namespace bqr
