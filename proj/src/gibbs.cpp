#include "bqr/gibbs.hpp"

#include "bqr/linalg.hpp"
#include "bqr/random.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>

namespace bqr {

RandomScale RandomScale::from_moments(Family family, double mean, double variance) {
  if (!(mean > 0.0) || !(variance > 0.0)) throw std::invalid_argument("scale prior moments must be positive");
  RandomScale out;
  out.family = family;
  if (family == Family::InverseGamma) {
    out.shape = 2.0 + mean * mean / variance;
    out.rate = mean * (out.shape - 1.0);
  } else {
    out.shape = mean * mean / variance;
    out.rate = mean / variance;
  }
  return out;
}

void PriorSpec::validate(std::size_t p) const {
  if (static_cast<std::size_t>(mean.size()) != p || static_cast<std::size_t>(variance.size()) != p) {
    throw std::invalid_argument("prior: mean/variance length does not match the design");
  }
  if (!mean.allFinite() || !(variance.array() > 0.0).all() || !variance.allFinite()) {
    throw std::invalid_argument("prior: variances must be positive and finite");
  }
  if (const auto* fixed = std::get_if<FixedScale>(&scale)) {
    if (!(fixed->sigma0 > 0.0) || !std::isfinite(fixed->sigma0)) {
      throw std::invalid_argument("prior: fixed scale must be positive");
    }
  } else {
    const auto& rs = std::get<RandomScale>(scale);
    if (!(rs.shape > 0.0) || !(rs.rate > 0.0)) {
      throw std::invalid_argument("prior: scale prior shape and rate must be positive");
    }
    if (rs.support && !(rs.support->first > 0.0 && rs.support->first < rs.support->second)) {
      throw std::invalid_argument("prior: scale support must satisfy 0 < lower < upper");
    }
  }
}

PriorSpec PriorSpec::normal(Eigen::VectorXd mean, Eigen::VectorXd variance, ScaleRule scale) {
  PriorSpec spec{std::move(mean), std::move(variance), scale};
  spec.validate(static_cast<std::size_t>(spec.mean.size()));
  return spec;
}

namespace {

struct MixtureConstants {
  double theta;
  double psi2;

  explicit MixtureConstants(QuantileLevel tau)
      : theta((1.0 - 2.0 * tau.value()) / tau.spread()), psi2(2.0 / tau.spread()) {}
};

// Precision and linear term of the beta full conditional.
void accumulate_conditional(const Dataset& data, std::span<const double> latent, double sigma,
                            const MixtureConstants& mix, const PriorSpec& prior, Eigen::VectorXd& weights,
                            Eigen::MatrixXd& precision, Eigen::VectorXd& linear) {
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto& y = data.y();
  Eigen::VectorXd adjusted(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = latent[static_cast<std::size_t>(i)];
    weights(i) = 1.0 / (mix.psi2 * sigma * v);
    adjusted(i) = weights(i) * (y(i) - mix.theta * v);
  }
  const Eigen::VectorXd prior_precision = prior.variance.cwiseInverse();
  precision.noalias() = data.X().transpose() * weights.asDiagonal() * data.X();
  precision.diagonal() += prior_precision;
  linear.noalias() = data.X().transpose() * adjusted;
  linear += prior_precision.cwiseProduct(prior.mean);
}

}  // namespace

GaussianConditional beta_full_conditional(const Dataset& data, std::span<const double> latent, double sigma,
                                          QuantileLevel tau, const PriorSpec& prior) {
  prior.validate(data.p());
  if (latent.size() != data.n()) throw std::invalid_argument("latent vector length does not match data");
  for (double v : latent) {
    if (!std::isfinite(v) || !(v > 0.0)) throw std::invalid_argument("latent values must be positive and finite");
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("scale must be positive");

  const MixtureConstants mix(tau);
  const auto p = static_cast<Eigen::Index>(data.p());
  Eigen::VectorXd weights(static_cast<Eigen::Index>(data.n()));
  Eigen::MatrixXd precision(p, p);
  Eigen::VectorXd linear(p);
  accumulate_conditional(data, latent, sigma, mix, prior, weights, precision, linear);

  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw SingularCovarianceError("beta full conditional precision is singular");
  GaussianConditional out;
  out.mean = llt.solve(linear);
  out.cov = llt.solve(Eigen::MatrixXd::Identity(p, p));
  return out;
}

Chain run_gibbs(const Dataset& data, QuantileLevel tau, const PriorSpec& prior, const GibbsConfig& config) {
  prior.validate(data.p());
  if (config.n_draws < 1) throw std::invalid_argument("gibbs: n_draws must be at least 1");

  const MixtureConstants mix(tau);
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto p = static_cast<Eigen::Index>(data.p());
  const auto& X = data.X();
  const auto& y = data.y();
  const double half_n3 = 1.5 * static_cast<double>(n);
  // 1/v_i | beta, sigma ~ IG(mean = ig_mean_factor / |r_i|, shape = ig_shape_factor / sigma)
  const double ig_mean_factor = std::sqrt(mix.theta * mix.theta + 2.0 * mix.psi2);
  const double ig_shape_factor = (mix.theta * mix.theta + 2.0 * mix.psi2) / mix.psi2;

  const auto* random_scale = std::get_if<RandomScale>(&prior.scale);
  double sigma = 1.0;
  if (random_scale == nullptr) {
    sigma = std::get<FixedScale>(prior.scale).sigma0;
  } else if (random_scale->support) {
    sigma = std::clamp(sigma, random_scale->support->first, random_scale->support->second);
  }

  Rng rng(config.seed);
  std::vector<double> latent(static_cast<std::size_t>(n), sigma);
  Eigen::VectorXd weights(n);
  Eigen::MatrixXd precision(p, p);
  Eigen::VectorXd linear(p);
  Eigen::VectorXd z(p);
  Eigen::VectorXd beta(p);
  Eigen::VectorXd residual(n);

  Chain chain;
  chain.beta_draws.resize(static_cast<Eigen::Index>(config.n_draws), p);
  chain.sigma_draws.resize(static_cast<Eigen::Index>(config.n_draws));

  const std::size_t total = config.burn_in + config.n_draws;
  for (std::size_t iter = 0; iter < total; ++iter) {
    accumulate_conditional(data, latent, sigma, mix, prior, weights, precision, linear);
    Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success) throw SamplerError("gibbs: coefficient precision lost definiteness", iter);
    for (Eigen::Index j = 0; j < p; ++j) z(j) = rng.normal();
    beta = llt.solve(linear);
    beta += llt.matrixU().solve(z);
    if (!beta.allFinite()) throw SamplerError("gibbs: non-finite coefficient draw", iter);

    residual.noalias() = y - X * beta;
    const double ig_shape = ig_shape_factor / sigma;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double abs_r = std::abs(residual(i));
      const double ig_mean = abs_r > 0.0 ? ig_mean_factor / abs_r : std::numeric_limits<double>::infinity();
      const double inv_v = sample_inverse_gaussian(ig_mean, ig_shape, rng);
      const double v = 1.0 / inv_v;
      if (!(v > 0.0) || !std::isfinite(v)) throw SamplerError("gibbs: latent update overflowed", iter);
      latent[static_cast<std::size_t>(i)] = v;
    }

    if (random_scale != nullptr) {
      double rate_term = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double v = latent[static_cast<std::size_t>(i)];
        const double e = residual(i) - mix.theta * v;
        rate_term += v + e * e / (2.0 * mix.psi2 * v);
      }
      const auto draw_sigma = [&] {
        if (random_scale->family == RandomScale::Family::InverseGamma) {
          return (random_scale->rate + rate_term) / sample_gamma(random_scale->shape + half_n3, rng);
        }
        return sample_gig(random_scale->shape - half_n3, 2.0 * rate_term, 2.0 * random_scale->rate, rng);
      };
      double proposal = draw_sigma();
      if (random_scale->support) {
        const auto [lo, hi] = *random_scale->support;
        int attempts = 1;
        while ((proposal < lo || proposal > hi) && attempts < 1000) {
          ++chain.diagnostics.sigma_rejections;
          proposal = draw_sigma();
          ++attempts;
        }
        if (proposal < lo || proposal > hi) {
          ++chain.diagnostics.sigma_rejections;
          ++chain.diagnostics.sigma_clamps;
          warn("gibbs: scale draw outside support after 1000 attempts; clamped");
          proposal = std::clamp(proposal, lo, hi);
        }
      }
      if (!(proposal > 0.0) || !std::isfinite(proposal)) throw SamplerError("gibbs: scale update overflowed", iter);
      sigma = proposal;
    }

    if (iter >= config.burn_in) {
      const auto row = static_cast<Eigen::Index>(iter - config.burn_in);
      chain.beta_draws.row(row) = beta.transpose();
      chain.sigma_draws(row) = sigma;
    }
  }
  chain.diagnostics.ess = effective_sample_size(chain.beta_draws);
  return chain;
}

PosteriorSummary summarize_chain(const Chain& chain, const Dataset& data, const PriorSpec& prior) {
  const auto& draws = chain.beta_draws;
  if (draws.rows() == 0) throw std::invalid_argument("summarize_chain: empty chain");
  if (static_cast<std::size_t>(draws.cols()) != data.p()) {
    throw std::invalid_argument("summarize_chain: chain width does not match the design");
  }

  std::set<std::vector<double>> distinct;
  for (Eigen::Index i = 0; i < draws.rows() && distinct.size() <= static_cast<std::size_t>(draws.cols()); ++i) {
    std::vector<double> row(static_cast<std::size_t>(draws.cols()));
    for (Eigen::Index j = 0; j < draws.cols(); ++j) row[static_cast<std::size_t>(j)] = draws(i, j);
    distinct.insert(std::move(row));
  }
  if (distinct.size() < static_cast<std::size_t>(draws.cols()) + 1) {
    throw SingularCovarianceError("summarize_chain: fewer than p+1 distinct draws, covariance is singular");
  }

  PosteriorSummary out;
  out.beta_tilde = draws.colwise().mean().transpose();
  const Eigen::MatrixXd centered = draws.rowwise() - out.beta_tilde.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(draws.rows() - 1);
  out.post_cov = repair_spd(0.5 * (cov + cov.transpose()), "posterior covariance");

  if (const auto* fixed = std::get_if<FixedScale>(&prior.scale)) {
    out.sigma0_hat = fixed->sigma0;
  } else {
    out.sigma0_hat = chain.sigma_draws.mean();
  }
  out.v_n_inv = (static_cast<double>(data.n()) / out.sigma0_hat) * out.post_cov;
  return out;
}

std::vector<double> effective_sample_size(const Eigen::MatrixXd& draws) {
  const Eigen::Index m = draws.rows();
  std::vector<double> ess;
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    const Eigen::VectorXd x = draws.col(j).array() - draws.col(j).mean();
    const double c0 = x.squaredNorm() / static_cast<double>(m);
    if (m < 4 || !(c0 > 0.0)) {
      ess.push_back(static_cast<double>(m));
      continue;
    }
    const auto autocov = [&](Eigen::Index lag) {
      return x.head(m - lag).dot(x.tail(m - lag)) / static_cast<double>(m);
    };
    // Sum of paired autocorrelations, truncated at the first non-positive pair
    // and forced monotone.
    double sum = 0.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; 2 * k + 1 < m; ++k) {
      double pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
      if (pair <= 0.0) break;
      pair = std::min(pair, prev_pair);
      prev_pair = pair;
      sum += pair;
    }
    const double tau_int = std::max(2.0 * sum - 1.0, 1.0 / static_cast<double>(m));
    ess.push_back(static_cast<double>(m) / tau_int);
  }
  return ess;
}

void write_chain_csv(std::ostream& out, const Chain& chain) {
  const auto p = chain.beta_draws.cols();
  for (Eigen::Index j = 0; j < p; ++j) out << "beta" << (j + 1) << ',';
  out << "sigma\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < chain.beta_draws.rows(); ++i) {
    for (Eigen::Index j = 0; j < p; ++j) out << chain.beta_draws(i, j) << ',';
    out << chain.sigma_draws(i) << '\n';
  }
}

}  // namespace bqr
