#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace bqr::oracle {

namespace {

double loss(double u, double tau) { return u > 0.0 ? tau * u : (tau - 1.0) * u; }

std::vector<double> nodes(const GridAxis& a) {
  if (a.steps < 2 || !(a.hi > a.lo)) throw std::invalid_argument("grid axis needs lo < hi and >= 2 steps");
  std::vector<double> out(a.steps + 1);
  for (std::size_t i = 0; i <= a.steps; ++i) out[i] = a.lo + (a.hi - a.lo) * static_cast<double>(i) / static_cast<double>(a.steps);
  return out;
}

double trapezoid_weight(std::size_t i, std::size_t last) { return (i == 0 || i == last) ? 0.5 : 1.0; }

double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                    double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

GridPosterior grid_posterior(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double tau,
                             const PriorSpec& prior, double sigma, const std::vector<GridAxis>& grid) {
  const std::size_t p = grid.size();
  if (p < 1 || p > 2) throw std::invalid_argument("grid_posterior handles one or two coefficients");
  if (static_cast<std::size_t>(X.cols()) != p || X.rows() != y.size()) throw std::invalid_argument("grid_posterior: shape mismatch");
  if (prior.mean.size() != static_cast<Eigen::Index>(p)) throw std::invalid_argument("grid_posterior: prior dimension");

  const auto a0 = nodes(grid[0]);
  const auto a1 = p == 2 ? nodes(grid[1]) : std::vector<double>{0.0};
  const double cell = (a0[1] - a0[0]) * (p == 2 ? a1[1] - a1[0] : 1.0);
  const double log_ald_const = std::log(tau * (1.0 - tau) / sigma);

  std::vector<double> logf(a0.size() * a1.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a0.size(); ++i) {
    for (std::size_t j = 0; j < a1.size(); ++j) {
      const double b[2] = {a0[i], a1[j]};
      double lf = 0.0;
      for (std::size_t k = 0; k < p; ++k) {
        const double v = prior.variance(static_cast<Eigen::Index>(k));
        const double d = b[k] - prior.mean(static_cast<Eigen::Index>(k));
        lf += -0.5 * std::log(2.0 * std::numbers::pi * v) - d * d / (2.0 * v);
      }
      for (Eigen::Index r = 0; r < y.size(); ++r) {
        double fitted = X(r, 0) * b[0];
        if (p == 2) fitted += X(r, 1) * b[1];
        lf += log_ald_const - loss(y(r) - fitted, tau) / sigma;
      }
      logf[i * a1.size() + j] = lf;
      peak = std::max(peak, lf);
    }
  }

  double total = 0.0;
  double boundary = 0.0;
  double s0 = 0.0, s1 = 0.0, s00 = 0.0, s01 = 0.0, s11 = 0.0;
  for (std::size_t i = 0; i < a0.size(); ++i) {
    for (std::size_t j = 0; j < a1.size(); ++j) {
      double w = std::exp(logf[i * a1.size() + j] - peak) * trapezoid_weight(i, a0.size() - 1);
      const bool edge0 = i == 0 || i + 1 == a0.size();
      bool edge1 = false;
      if (p == 2) {
        w *= trapezoid_weight(j, a1.size() - 1);
        edge1 = j == 0 || j + 1 == a1.size();
      }
      total += w;
      if (edge0 || edge1) boundary += w;
      s0 += w * a0[i];
      s1 += w * a1[j];
      s00 += w * a0[i] * a0[i];
      s01 += w * a0[i] * a1[j];
      s11 += w * a1[j] * a1[j];
    }
  }

  GridPosterior out;
  out.boundary_mass = boundary / total;
  if (out.boundary_mass > 1e-8) {
    throw GridTooSmall("grid too small: boundary mass " + std::to_string(out.boundary_mass));
  }
  out.log_normalizer = peak + std::log(total * cell);
  const double m0 = s0 / total;
  const double m1 = s1 / total;
  if (p == 1) {
    out.mean = Eigen::VectorXd::Constant(1, m0);
    out.cov = Eigen::MatrixXd::Constant(1, 1, s00 / total - m0 * m0);
  } else {
    out.mean = Eigen::Vector2d(m0, m1);
    out.cov.resize(2, 2);
    out.cov << s00 / total - m0 * m0, s01 / total - m0 * m1, s01 / total - m0 * m1, s11 / total - m1 * m1;
  }
  return out;
}

GridPosterior grid_posterior(const Dataset& data, double tau, const PriorSpec& prior, double sigma,
                             const std::vector<GridAxis>& grid) {
  return grid_posterior(data.y(), data.X(), tau, prior, sigma, grid);
}

double check_sum(const Dataset& data, double tau, const Eigen::VectorXd& beta) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < data.X().rows(); ++i) {
    double fitted = 0.0;
    for (Eigen::Index k = 0; k < data.X().cols(); ++k) fitted += data.X()(i, k) * beta(k);
    s += loss(data.y()(i) - fitted, tau);
  }
  return s;
}

Eigen::VectorXd brute_force_qr(const Dataset& data, double tau, const std::vector<GridAxis>& grid, int zoom_levels) {
  const std::size_t p = grid.size();
  if (p < 1 || p > 2 || data.p() != p) throw std::invalid_argument("brute_force_qr handles one or two coefficients");
  std::vector<GridAxis> axes = grid;
  Eigen::VectorXd best(static_cast<Eigen::Index>(p));
  double best_value = std::numeric_limits<double>::infinity();

  for (int level = 0; level <= zoom_levels; ++level) {
    const auto a0 = nodes(axes[0]);
    const auto a1 = p == 2 ? nodes(axes[1]) : std::vector<double>{0.0};
    for (double b0 : a0) {
      for (double b1 : a1) {
        Eigen::VectorXd b(static_cast<Eigen::Index>(p));
        b(0) = b0;
        if (p == 2) b(1) = b1;
        const double v = check_sum(data, tau, b);
        if (v < best_value) {
          best_value = v;
          best = b;
        }
      }
    }
    bool resolved = true;
    for (std::size_t k = 0; k < p; ++k) {
      const double h = (axes[k].hi - axes[k].lo) / static_cast<double>(axes[k].steps);
      resolved = resolved && h < 1e-12 * (1.0 + std::abs(best(static_cast<Eigen::Index>(k))));
    }
    if (resolved) break;
    // Halve the window around the incumbent. A grid argmin of a convex function
    // need not lie next to the true minimizer when the level sets are long and
    // thin, so shrinking gently keeps the minimizer inside the window.
    for (std::size_t k = 0; k < p; ++k) {
      const double half = 0.25 * (axes[k].hi - axes[k].lo);
      axes[k].lo = best(static_cast<Eigen::Index>(k)) - half;
      axes[k].hi = best(static_cast<Eigen::Index>(k)) + half;
    }
  }
  return best;
}

double kolmogorov_sf(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1 ? 1.0 : -1.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_distance: empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

KsResult ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.size() < 100) throw std::invalid_argument("ks_statistic needs at least 100 samples");
  const double rn = std::sqrt(static_cast<double>(samples.size()));
  const double d = ks_distance(std::move(samples), cdf);
  return {d, kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d)};
}

double simpson(const std::function<double(double)>& f, double a, double b, double tol) {
  // A few fixed panels first so a narrow feature cannot hide between three samples.
  constexpr int kPanels = 32;
  double sum = 0.0;
  for (int k = 0; k < kPanels; ++k) {
    const double lo = a + (b - a) * k / kPanels;
    const double hi = a + (b - a) * (k + 1) / kPanels;
    const double fa = f(lo);
    const double fb = f(hi);
    const double fm = f(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    sum += simpson_step(f, lo, hi, fa, fm, fb, whole, tol / kPanels, 40);
  }
  return sum;
}

double simpson_to_infinity(const std::function<double(double)>& f, double a, double tol) {
  const auto g = [&](double t) {
    if (t >= 1.0) return 0.0;
    const double u = 1.0 - t;
    return f(a + t / u) / (u * u);
  };
  return simpson(g, 0.0, 1.0, tol);
}

}  // namespace bqr::oracle
