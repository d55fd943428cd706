#pragma once

#include "bqr/dataset.hpp"
#include "bqr/interval.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>

namespace bqr {

/// Frequentist check-loss estimate.
struct QrFit {
  Eigen::VectorXd beta;
  double objective = 0.0;  ///< sum of check losses at beta
  std::size_t pivots = 0;  ///< vertex moves taken by the polish
};

struct QrOptions {
  /// Skip the smoothed IRLS phase and polish from this point instead.
  std::optional<Eigen::VectorXd> warm_start;
};

/**
 * Global minimizer of sum_i check_loss(y_i - x_i' beta).
 *
 * An IRLS pass on the smoothed loss sqrt(r^2 + eps^2)/2 + (tau - 1/2) r, with
 * eps annealed geometrically down to 1e-10 of the residual scale, supplies a
 * starting point. The polish then moves between vertices of the piecewise-linear
 * objective (p observations fitted exactly), taking an exact line search along
 * the steepest descending edge until every edge direction is non-descending,
 * which is the optimality certificate of the underlying linear program.
 */
QrFit fit_classical_qr(const Dataset& data, QuantileLevel tau, const QrOptions& options = {});

/**
 * xy-pair bootstrap with equal-tailed percentile intervals.
 *
 * Resample b draws from the stream Rng(seed).split(b), so results depend only
 * on the arguments. Rank-deficient resamples are redrawn, at most 100 times per
 * replicate, after which std::runtime_error is thrown. Requires B >= 100.
 * Each resample fit is warm-started from `full_fit` (computed here if absent).
 */
IntervalSet bootstrap_intervals(const Dataset& data, QuantileLevel tau, std::size_t replicates,
                                double level, std::uint64_t seed,
                                const std::optional<Eigen::VectorXd>& full_fit = std::nullopt);

/// Default replicate count for bootstrap_intervals.
inline constexpr std::size_t kDefaultBootstrapReplicates = 600;

}  // namespace bqr
