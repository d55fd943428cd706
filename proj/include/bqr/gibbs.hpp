#pragma once

#include "bqr/dataset.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

namespace bqr {

/// Asymmetric Laplace scale held fixed at sigma0.
struct FixedScale {
  double sigma0 = 1.0;
};

/// Asymmetric Laplace scale with a prior, optionally restricted to [lower, upper].
struct RandomScale {
  enum class Family {
    InverseGamma,  ///< density on sigma proportional to sigma^(-shape-1) exp(-rate/sigma)
    Gamma,         ///< density on sigma proportional to sigma^(shape-1) exp(-rate*sigma)
  };
  Family family = Family::InverseGamma;
  double shape = 1.0;
  double rate = 1.0;
  std::optional<std::pair<double, double>> support;

  /// Shape/rate matching a given prior mean and variance of sigma.
  static RandomScale from_moments(Family family, double mean, double variance);
};

using ScaleRule = std::variant<FixedScale, RandomScale>;

/// Independent normal prior on the coefficients plus the scale rule.
struct PriorSpec {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  ScaleRule scale = FixedScale{};

  /// Throws std::invalid_argument unless consistent with p coefficients.
  void validate(std::size_t p) const;

  static PriorSpec normal(Eigen::VectorXd mean, Eigen::VectorXd variance, ScaleRule scale = FixedScale{});
};

struct GibbsConfig {
  std::size_t burn_in = 2000;
  std::size_t n_draws = 1000;
  std::uint64_t seed = 0;
};

struct ChainDiagnostics {
  std::vector<double> ess;          ///< per coefficient
  std::size_t sigma_rejections = 0;  ///< scale proposals outside the support
  std::size_t sigma_clamps = 0;      ///< updates that gave up and clamped
};

struct Chain {
  Eigen::MatrixXd beta_draws;   ///< n_draws x p
  Eigen::VectorXd sigma_draws;  ///< constant under FixedScale
  ChainDiagnostics diagnostics;
};

/// Gaussian full conditional of the coefficients.
struct GaussianConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Numerical failure inside the sampler, tagged with the iteration where it happened.
class SamplerError : public std::runtime_error {
 public:
  SamplerError(const std::string& what, std::size_t iteration)
      : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"), iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

/// Covariance estimate is singular (e.g. a degenerate chain).
class SingularCovarianceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * Full conditional of beta given the exponential latents v under the normal
 * location-scale mixture of the asymmetric Laplace law:
 *   y_i = x_i' beta + theta v_i + psi sqrt(sigma v_i) u_i,
 *   theta = (1 - 2 tau) / (tau (1 - tau)),  psi^2 = 2 / (tau (1 - tau)).
 */
GaussianConditional beta_full_conditional(const Dataset& data, std::span<const double> latent, double sigma,
                                          QuantileLevel tau, const PriorSpec& prior);

/**
 * Gibbs sampler for the asymmetric Laplace posterior.
 *
 * Each sweep draws beta | v, sigma (Gaussian), then 1/v_i | beta, sigma
 * (inverse Gaussian), then sigma | beta, v when the scale is random. An
 * inverse-gamma prior gives an inverse-gamma conditional; a gamma prior gives a
 * GIG conditional. With a support, out-of-range draws are rejected up to 1000
 * times before clamping with a warning. Output is a pure function of the inputs.
 */
Chain run_gibbs(const Dataset& data, QuantileLevel tau, const PriorSpec& prior, const GibbsConfig& config);

/// Posterior summaries used by the sandwich correction.
struct PosteriorSummary {
  Eigen::VectorXd beta_tilde;  ///< posterior mean
  Eigen::MatrixXd post_cov;    ///< draw covariance
  Eigen::MatrixXd v_n_inv;     ///< (n / sigma0_hat) * post_cov
  double sigma0_hat = 1.0;
};

PosteriorSummary summarize_chain(const Chain& chain, const Dataset& data, const PriorSpec& prior);

/// Effective sample size per column (Geyer's initial monotone sequence).
std::vector<double> effective_sample_size(const Eigen::MatrixXd& draws);

/// One row per draw: beta_1..beta_p, sigma.
void write_chain_csv(std::ostream& out, const Chain& chain);

}  // namespace bqr
