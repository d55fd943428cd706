#include "bqr/sandwich.hpp"

#include "bqr/linalg.hpp"
#include "bqr/random.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>

namespace bqr {

Eigen::MatrixXd compute_s_n(const Dataset& data) {
  const Eigen::MatrixXd s = data.X().transpose() * data.X() / static_cast<double>(data.n());
  return 0.5 * (s + s.transpose());
}

Eigen::MatrixXd compute_sigma_n(const Eigen::MatrixXd& v_n_inv, const Eigen::MatrixXd& s_n, QuantileLevel tau) {
  const Eigen::MatrixXd v = require_symmetric(v_n_inv, "V_n^{-1}");
  const Eigen::MatrixXd s = require_symmetric(s_n, "S_n");
  if (v.rows() != s.rows()) throw std::invalid_argument("compute_sigma_n: dimension mismatch");
  const Eigen::MatrixXd sigma = tau.spread() * v * s * v;
  return 0.5 * (sigma + sigma.transpose());
}

namespace {

void validate(const SandwichInputs& in) {
  const auto p = in.center.size();
  if (in.v_n_inv.rows() != p || in.v_n_inv.cols() != p || in.s_n.rows() != p || in.s_n.cols() != p) {
    throw std::invalid_argument("sandwich: dimension mismatch");
  }
  if (in.n == 0) throw std::invalid_argument("sandwich: n must be positive");
  in.prior.validate(static_cast<std::size_t>(p));
}

// Cholesky of Sigma_n / n.
Eigen::LLT<Eigen::MatrixXd> likelihood_factor(const Eigen::MatrixXd& sigma_n, std::size_t n) {
  Eigen::LLT<Eigen::MatrixXd> llt(sigma_n / static_cast<double>(n));
  if (llt.info() != Eigen::Success) {
    throw SingularCovarianceError("sandwich: Cholesky factorization of Sigma_n failed (Sigma_n singular)");
  }
  return llt;
}

double gaussian_log_density(const Eigen::LLT<Eigen::MatrixXd>& cov_factor, const Eigen::VectorXd& diff) {
  const Eigen::VectorXd whitened = cov_factor.matrixL().solve(diff);
  const double log_det = 2.0 * cov_factor.matrixLLT().diagonal().array().log().sum();
  const auto p = static_cast<double>(diff.size());
  return -0.5 * (whitened.squaredNorm() + log_det + p * std::log(2.0 * std::numbers::pi));
}

}  // namespace

double sandwich_log_likelihood(const SandwichInputs& inputs, const Eigen::VectorXd& beta) {
  validate(inputs);
  const Eigen::MatrixXd sigma_n = compute_sigma_n(inputs.v_n_inv, inputs.s_n, inputs.tau);
  return gaussian_log_density(likelihood_factor(sigma_n, inputs.n), beta - inputs.center);
}

SandwichPosterior sandwich_posterior(const SandwichInputs& inputs, const std::optional<GibbsConfig>& mcmc) {
  validate(inputs);
  SandwichPosterior out;
  out.centering = inputs.centering;
  out.sigma_n = compute_sigma_n(inputs.v_n_inv, inputs.s_n, inputs.tau);
  const auto lik = likelihood_factor(out.sigma_n, inputs.n);

  if (mcmc) {
    const PriorSpec& prior = inputs.prior;
    const LogDensity log_prior = [&prior](const Eigen::VectorXd& beta) {
      return -0.5 * ((beta - prior.mean).array().square() / prior.variance.array()).sum();
    };
    out.form = sample_sandwich_metropolis(inputs, log_prior, *mcmc);
    return out;
  }

  const auto p = inputs.center.size();
  const Eigen::MatrixXd lik_precision = lik.solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::VectorXd prior_precision = inputs.prior.variance.cwiseInverse();
  Eigen::MatrixXd precision = lik_precision;
  precision.diagonal() += prior_precision;
  Eigen::LLT<Eigen::MatrixXd> post(0.5 * (precision + precision.transpose()));
  if (post.info() != Eigen::Success) throw SingularCovarianceError("sandwich: posterior precision is singular");

  GaussianPosterior gp;
  gp.cov = post.solve(Eigen::MatrixXd::Identity(p, p));
  gp.cov = 0.5 * (gp.cov + gp.cov.transpose());
  gp.mean = post.solve(lik_precision * inputs.center + prior_precision.cwiseProduct(inputs.prior.mean));
  out.form = std::move(gp);
  return out;
}

Eigen::MatrixXd sample_sandwich_metropolis(const SandwichInputs& inputs, const LogDensity& log_prior,
                                           const GibbsConfig& config, MetropolisStats* stats) {
  validate(inputs);
  if (config.n_draws < 1) throw std::invalid_argument("metropolis: n_draws must be at least 1");
  const Eigen::MatrixXd sigma_n = compute_sigma_n(inputs.v_n_inv, inputs.s_n, inputs.tau);
  const auto lik = likelihood_factor(sigma_n, inputs.n);
  const Eigen::MatrixXd proposal_root = lik.matrixL();
  const auto p = inputs.center.size();

  const auto log_target = [&](const Eigen::VectorXd& beta) {
    return gaussian_log_density(lik, beta - inputs.center) + log_prior(beta);
  };

  Rng rng(config.seed);
  Eigen::VectorXd current = inputs.center;
  double current_lp = log_target(current);
  double scale = 2.38 / std::sqrt(static_cast<double>(p));
  Eigen::VectorXd z(p);
  Eigen::MatrixXd draws(static_cast<Eigen::Index>(config.n_draws), p);

  std::size_t batch_accepts = 0;
  std::size_t batch_size = 0;
  std::size_t kept_accepts = 0;
  const std::size_t total = config.burn_in + config.n_draws;
  for (std::size_t iter = 0; iter < total; ++iter) {
    for (Eigen::Index j = 0; j < p; ++j) z(j) = rng.normal();
    const Eigen::VectorXd proposal = current + scale * (proposal_root * z);
    const double proposal_lp = log_target(proposal);
    const bool accept = std::log(rng.uniform()) < proposal_lp - current_lp;
    if (accept) {
      current = proposal;
      current_lp = proposal_lp;
    }
    if (iter < config.burn_in) {
      batch_accepts += accept ? 1 : 0;
      if (++batch_size == 100) {
        const double rate = static_cast<double>(batch_accepts) / 100.0;
        if (rate < 0.25) scale *= 0.8;
        if (rate > 0.45) scale *= 1.25;
        batch_accepts = 0;
        batch_size = 0;
      }
    } else {
      kept_accepts += accept ? 1 : 0;
      draws.row(static_cast<Eigen::Index>(iter - config.burn_in)) = current.transpose();
    }
  }
  if (stats != nullptr) {
    stats->acceptance_rate = static_cast<double>(kept_accepts) / static_cast<double>(config.n_draws);
    stats->proposal_scale = scale;
  }
  return draws;
}

IntervalSet credible_interval(const SandwichPosterior& posterior, double level) {
  if (const auto* gp = std::get_if<GaussianPosterior>(&posterior.form)) {
    return gaussian_intervals(gp->mean, gp->cov, level);
  }
  return percentile_intervals(std::get<Eigen::MatrixXd>(posterior.form), level);
}

IntervalSet credible_interval(const Chain& chain, double level) {
  return percentile_intervals(chain.beta_draws, level);
}

}  // namespace bqr
