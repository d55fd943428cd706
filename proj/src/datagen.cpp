#include "bqr/datagen.hpp"

#include "bqr/ald.hpp"
#include "bqr/special.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace bqr {

namespace {

constexpr double kX1Mean = 3.0;
constexpr double kX1Sd = 1.0;
constexpr double kX1Lower = 1.0;
constexpr double kX1Upper = 1000.0;
constexpr double kX2Prob = 0.3;

double integrate(const auto& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

}  // namespace

namespace {

double shift_for(int model_id, double t) {
  switch (model_id) {
    case 1:
    case 4:
      return normal_quantile(t);
    case 2:
      return -std::log1p(-t);
    case 3:
      return gamma_quantile(2.0, t);
    default:
      throw std::invalid_argument("model id must be 1..4, got " + std::to_string(model_id));
  }
}

}  // namespace

ModelSpec::ModelSpec(int model, QuantileLevel level)
    : model_id(model), tau(level), rho_(shift_for(model, level.value())) {}

double quantile_shift(const ModelSpec& spec) { return spec.rho(); }

Eigen::MatrixXd sample_covariates(std::size_t n, Rng& rng) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 3);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = sample_truncated_normal(kX1Mean, kX1Sd, kX1Lower, kX1Upper, rng);
    x(i, 2) = rng.uniform() < kX2Prob ? 1.0 : 0.0;
  }
  return x;
}

double true_quantile(const Eigen::Ref<const Eigen::RowVectorXd>& x_row) {
  if (x_row.size() != 3) throw std::invalid_argument("true_quantile expects (1, x1, x2)");
  return kTrueBeta[0] * x_row(0) + kTrueBeta[1] * x_row(1) + kTrueBeta[2] * x_row(2);
}

namespace {

double draw_response(int model_id, double q, double rho, Rng& rng) {
  switch (model_id) {
    case 1:
      return q + rng.normal() - rho;
    case 2:
      return q - rho + rng.exponential();
    case 3: {
      if (!(q > 0.0)) throw std::domain_error("model 3 needs a positive true quantile");
      // Gamma(2, rate rho/q) = (q/rho) * (E1 + E2)
      return q / rho * (rng.exponential() + rng.exponential());
    }
    case 4:
      return q - rho * std::abs(q) + std::abs(q) * rng.normal();
    default:
      throw std::invalid_argument("unknown model id");
  }
}

}  // namespace

double generate_response(const ModelSpec& spec, const Eigen::Ref<const Eigen::RowVectorXd>& x_row, Rng& rng) {
  return draw_response(spec.model_id, true_quantile(x_row), quantile_shift(spec), rng);
}

Dataset generate_dataset(const ModelSpec& spec, const Eigen::MatrixXd& design, Rng& rng) {
  const double rho = quantile_shift(spec);
  Eigen::VectorXd y(design.rows());
  for (Eigen::Index i = 0; i < design.rows(); ++i) y(i) = draw_response(spec.model_id, true_quantile(design.row(i)), rho, rng);
  return Dataset(std::move(y), design);
}

ScaleDiagnostic compute_cstar(const ModelSpec& spec, const std::optional<std::pair<double, double>>& support) {
  const QuantileLevel tau = spec.tau;
  const double rho = quantile_shift(spec);
  const double mean_x1 = truncated_normal_mean(kX1Mean, kX1Sd, kX1Lower, kX1Upper);
  const double mean_q = kTrueBeta[0] + kTrueBeta[1] * mean_x1 + kTrueBeta[2] * kX2Prob;

  // E[check_loss(W - c)] for the standardized noise W, split at the kink c.
  const auto expected_loss = [&](const auto& density, double lo, double c, double hi) {
    const auto f = [&](double w) { return check_loss(w - c, tau) * density(w); };
    return integrate(f, lo, c) + integrate(f, c, hi);
  };
  const auto std_normal = [](double w) { return normal_pdf(w); };
  const auto gamma2 = [](double w) { return w * std::exp(-w); };
  const auto exp1 = [](double w) { return std::exp(-w); };
  const double inf = std::numeric_limits<double>::infinity();

  ScaleDiagnostic out;
  switch (spec.model_id) {
    case 1:
      out.c_star = expected_loss(std_normal, -inf, rho, inf);
      break;
    case 2:
      out.c_star = expected_loss(exp1, 0.0, rho, inf);
      break;
    case 3:
      // y - q = (q / rho) (G - rho); the check loss is positively homogeneous.
      out.c_star = mean_q / rho * expected_loss(gamma2, 0.0, rho, inf);
      break;
    case 4:
      // y - q = |q| (Z - rho), and q >= 3 on the covariate support.
      out.c_star = mean_q * expected_loss(std_normal, -inf, rho, inf);
      break;
    default:
      throw std::invalid_argument("unknown model id");
  }
  out.sigma0 = support ? std::clamp(out.c_star, support->first, support->second) : out.c_star;
  return out;
}

}  // namespace bqr
