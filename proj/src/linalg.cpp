#include "bqr/linalg.hpp"

#include "bqr/gibbs.hpp"

#include <Eigen/Cholesky>

#include <iostream>
#include <mutex>

namespace bqr {

namespace {

std::mutex& handler_mutex() {
  static std::mutex m;
  return m;
}

WarningHandler& handler() {
  static WarningHandler h = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
  return h;
}

}  // namespace

void set_warning_handler(WarningHandler h) {
  std::lock_guard lock(handler_mutex());
  handler() = std::move(h);
}

void warn(std::string_view message) {
  std::lock_guard lock(handler_mutex());
  if (handler()) handler()(message);
}

Eigen::MatrixXd require_symmetric(const Eigen::MatrixXd& m, const char* what, double tol) {
  if (m.rows() != m.cols()) throw std::invalid_argument(std::string(what) + ": matrix is not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol * scale) {
    throw std::invalid_argument(std::string(what) + ": matrix is not symmetric");
  }
  return 0.5 * (m + m.transpose());
}

Eigen::MatrixXd repair_spd(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw SingularCovarianceError(std::string(what) + ": non-finite entries");
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return m;
  const double jitter = 1e-10 * m.trace() / static_cast<double>(m.rows());
  if (jitter > 0.0) {
    Eigen::MatrixXd fixed = m;
    fixed.diagonal().array() += jitter;
    if (Eigen::LLT<Eigen::MatrixXd>(fixed).info() == Eigen::Success) {
      warn(std::string(what) + ": not positive definite, added diagonal jitter");
      return fixed;
    }
  }
  throw SingularCovarianceError(std::string(what) + ": matrix is singular (Cholesky failed)");
}

}  // namespace bqr
