#pragma once

#include "bqr/dataset.hpp"
#include "bqr/random.hpp"

#include <array>
#include <optional>
#include <utility>

namespace bqr {

/// True coefficients (intercept, x1, x2) shared by every simulation model.
inline constexpr std::array<double, 3> kTrueBeta{1.0, 2.0, 3.0};

/**
 * Simulation models whose tau-th conditional quantile is 1 + 2 x1 + 3 x2:
 *   1  q + Z - rho,            Z ~ N(0,1),       rho = Phi^{-1}(tau)
 *   2  q - rho + e,            e ~ Gamma(1,1),   rho = tau-quantile of Gamma(1,1)
 *   3  Gamma(shape 2, rate rho / q),             rho = tau-quantile of Gamma(2,1)
 *   4  N(q - rho |q|, q^2),                      rho = Phi^{-1}(tau)
 */
struct ModelSpec {
  const int model_id;
  const QuantileLevel tau;

  ModelSpec(int model, QuantileLevel level);

  /// The quantile constant rho used by the model.
  double rho() const noexcept { return rho_; }

 private:
  double rho_;
};

double quantile_shift(const ModelSpec& spec);

/// n x 3 design: ones, N(3,1) truncated to [1,1000], Bernoulli(0.3).
Eigen::MatrixXd sample_covariates(std::size_t n, Rng& rng);

double true_quantile(const Eigen::Ref<const Eigen::RowVectorXd>& x_row);

double generate_response(const ModelSpec& spec, const Eigen::Ref<const Eigen::RowVectorXd>& x_row, Rng& rng);

/// Responses for a given design (with intercept column).
Dataset generate_dataset(const ModelSpec& spec, const Eigen::MatrixXd& design, Rng& rng);

struct ScaleDiagnostic {
  double c_star = 0.0;  ///< limiting mean check loss of y - q(x)
  double sigma0 = 0.0;  ///< maximizer of log(tau(1-tau)/s) - c_star/s over the support
};

/// Deterministic (quadrature) evaluation of C* and the pseudo-true scale.
ScaleDiagnostic compute_cstar(const ModelSpec& spec,
                              const std::optional<std::pair<double, double>>& support = std::nullopt);

}  // namespace bqr
