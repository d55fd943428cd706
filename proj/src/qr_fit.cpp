#include "bqr/qr_fit.hpp"

#include "bqr/ald.hpp"
#include "bqr/random.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace bqr {

namespace {

Eigen::VectorXd smoothed_irls(const Dataset& data, QuantileLevel tau) {
  const auto& X = data.X();
  const auto& y = data.y();
  Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
  Eigen::VectorXd r = y - X * beta;
  const double scale = r.cwiseAbs().mean();
  if (!(scale > 0.0)) return beta;

  const Eigen::VectorXd linear = (tau.value() - 0.5) * X.colwise().sum().transpose();
  const double eps_final = 1e-10 * scale;
  Eigen::VectorXd w(r.size());
  for (double eps = scale; eps >= eps_final; eps *= 0.1) {
    for (int inner = 0; inner < 3; ++inner) {
      for (Eigen::Index i = 0; i < r.size(); ++i) w(i) = 0.5 / std::hypot(r(i), eps);
      const Eigen::MatrixXd A = X.transpose() * w.asDiagonal() * X;
      const Eigen::VectorXd b = X.transpose() * w.cwiseProduct(y) + linear;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
      if (ldlt.info() != Eigen::Success) return beta;
      Eigen::VectorXd next = ldlt.solve(b);
      if (!next.allFinite()) return beta;
      beta = std::move(next);
      r = y - X * beta;
    }
  }
  return beta;
}

// p rows with the smallest absolute residual at `beta` that form a nonsingular block.
std::vector<Eigen::Index> pick_basis(const Dataset& data, const Eigen::VectorXd& beta) {
  const auto& X = data.X();
  const Eigen::VectorXd r = (data.y() - X * beta).cwiseAbs();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(r.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return r(a) < r(b); });

  const auto p = X.cols();
  std::vector<Eigen::Index> basis;
  Eigen::MatrixXd rows(0, p);
  for (auto i : order) {
    Eigen::MatrixXd trial(rows.rows() + 1, p);
    trial.topRows(rows.rows()) = rows;
    trial.row(rows.rows()) = X.row(i);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(trial);
    lu.setThreshold(1e-9);
    if (lu.rank() == trial.rows()) {
      rows = std::move(trial);
      basis.push_back(i);
      if (static_cast<Eigen::Index>(basis.size()) == p) break;
    }
  }
  if (static_cast<Eigen::Index>(basis.size()) < p) {
    throw std::invalid_argument("fit_classical_qr: design has no nonsingular p-row subset");
  }
  return basis;
}

struct Breakpoint {
  double t;
  double weight;
  Eigen::Index index;
};

}  // namespace

QrFit fit_classical_qr(const Dataset& data, QuantileLevel tau, const QrOptions& options) {
  const auto& X = data.X();
  const auto& y = data.y();
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const double t = tau.value();

  const Eigen::VectorXd start = options.warm_start ? *options.warm_start : smoothed_irls(data, tau);
  if (start.size() != p) throw std::invalid_argument("fit_classical_qr: warm start has wrong length");
  std::vector<Eigen::Index> basis = pick_basis(data, start);

  const double y_scale = 1.0 + y.cwiseAbs().maxCoeff();
  const double zero_tol = 1e-11 * y_scale;
  const std::size_t max_pivots = 50 * static_cast<std::size_t>(n) + 100;

  Eigen::MatrixXd Xh(p, p);
  Eigen::VectorXd yh(p);
  Eigen::VectorXd beta;
  Eigen::VectorXd r(n);
  Eigen::VectorXd g(p);
  std::vector<Eigen::Index> zero_set;
  std::vector<Breakpoint> breaks;
  breaks.reserve(static_cast<std::size_t>(n));

  std::size_t pivots = 0;
  for (;; ++pivots) {
    for (Eigen::Index k = 0; k < p; ++k) {
      Xh.row(k) = X.row(basis[static_cast<std::size_t>(k)]);
      yh(k) = y(basis[static_cast<std::size_t>(k)]);
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(Xh);
    beta = lu.solve(yh);
    const Eigen::MatrixXd directions = lu.inverse();  // column j moves only basis row j

    r.noalias() = y - X * beta;
    for (auto b : basis) r(b) = 0.0;
    g.setZero();
    zero_set.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(r(i)) <= zero_tol) {
        zero_set.push_back(i);
      } else {
        g += (r(i) > 0.0 ? t : t - 1.0) * X.row(i).transpose();
      }
    }

    // Steepest descending edge.
    double best_slope = -1e-12 * y_scale;
    Eigen::VectorXd best_dir;
    Eigen::Index leaving = -1;
    for (Eigen::Index j = 0; j < p; ++j) {
      for (double sign : {1.0, -1.0}) {
        const Eigen::VectorXd u = sign * directions.col(j);
        double slope = -g.dot(u);
        for (auto i : zero_set) slope += check_loss(-X.row(i).dot(u), tau);
        if (slope < best_slope) {
          best_slope = slope;
          best_dir = u;
          leaving = j;
        }
      }
    }
    if (leaving < 0 || pivots >= max_pivots) break;

    // Exact line search: the slope grows by |a_i| at each breakpoint r_i / a_i.
    const Eigen::VectorXd a = X * best_dir;
    breaks.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(r(i)) <= zero_tol || a(i) == 0.0) continue;
      const double ti = r(i) / a(i);
      if (ti > 0.0) breaks.push_back({ti, std::abs(a(i)), i});
    }
    std::sort(breaks.begin(), breaks.end(), [](const auto& l, const auto& rr) { return l.t < rr.t; });
    double slope = best_slope;
    Eigen::Index entering = -1;
    for (const auto& bp : breaks) {
      slope += bp.weight;
      if (slope >= 0.0) {
        entering = bp.index;
        break;
      }
    }
    if (entering < 0) break;

    basis[static_cast<std::size_t>(leaving)] = entering;
  }

  QrFit fit;
  fit.objective = check_objective(data, tau, beta);
  fit.beta = std::move(beta);
  fit.pivots = pivots;
  return fit;
}

IntervalSet bootstrap_intervals(const Dataset& data, QuantileLevel tau, std::size_t replicates,
                                double level, std::uint64_t seed, const std::optional<Eigen::VectorXd>& full_fit) {
  require_level(level);
  if (replicates < 100) throw std::invalid_argument("bootstrap needs at least 100 replicates");

  const Eigen::VectorXd start = full_fit ? *full_fit : fit_classical_qr(data, tau).beta;
  const std::size_t n = data.n();
  const Rng root(seed);
  Eigen::MatrixXd estimates(static_cast<Eigen::Index>(replicates), static_cast<Eigen::Index>(data.p()));
  std::vector<std::size_t> idx(n);

  for (std::size_t b = 0; b < replicates; ++b) {
    Rng rng = root.split(b);
    bool done = false;
    for (int attempt = 0; attempt <= 100 && !done; ++attempt) {
      for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
      try {
        const Dataset resampled = data.resample(idx);
        QrOptions opts;
        opts.warm_start = start;
        estimates.row(static_cast<Eigen::Index>(b)) = fit_classical_qr(resampled, tau, opts).beta.transpose();
        done = true;
      } catch (const std::invalid_argument&) {
        // rank-deficient resample; draw again
      }
    }
    if (!done) throw std::runtime_error("bootstrap: too many rank-deficient resamples");
  }
  return percentile_intervals(estimates, level);
}

}  // namespace bqr
