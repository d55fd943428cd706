#pragma once

#include <Eigen/Core>

#include <functional>
#include <string>
#include <string_view>

namespace bqr {

/// Sink for non-fatal numerical warnings; defaults to stderr.
using WarningHandler = std::function<void(std::string_view)>;
void set_warning_handler(WarningHandler handler);
void warn(std::string_view message);

/// Symmetric part of `m`; throws std::invalid_argument if `m` is not symmetric to `tol` (relative).
Eigen::MatrixXd require_symmetric(const Eigen::MatrixXd& m, const char* what, double tol = 1e-9);

/**
 * Returns `m` if it has a Cholesky factor; otherwise adds 1e-10 * trace / p to
 * the diagonal, warns, and retries. Throws SingularCovarianceError when that
 * is not enough.
 */
Eigen::MatrixXd repair_spd(const Eigen::MatrixXd& m, const char* what);

}  // namespace bqr
