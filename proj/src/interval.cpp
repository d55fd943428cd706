#include "bqr/interval.hpp"

#include "bqr/special.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bqr {

void require_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("interval level must lie in (0,1)");
}

double sorted_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

IntervalSet percentile_intervals(const Eigen::MatrixXd& draws, double level) {
  require_level(level);
  if (draws.rows() == 0) throw std::invalid_argument("percentile intervals: empty draw set");
  IntervalSet out;
  out.level = level;
  const double tail = 0.5 * (1.0 - level);
  std::vector<double> column(static_cast<std::size_t>(draws.rows()));
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    for (Eigen::Index i = 0; i < draws.rows(); ++i) column[static_cast<std::size_t>(i)] = draws(i, j);
    std::sort(column.begin(), column.end());
    out.lo.push_back(sorted_quantile(column, tail));
    out.hi.push_back(sorted_quantile(column, 1.0 - tail));
  }
  return out;
}

IntervalSet gaussian_intervals(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, double level) {
  require_level(level);
  const double z = normal_quantile(0.5 * (1.0 + level));
  IntervalSet out;
  out.level = level;
  for (Eigen::Index j = 0; j < mean.size(); ++j) {
    const double half = z * std::sqrt(cov(j, j));
    out.lo.push_back(mean(j) - half);
    out.hi.push_back(mean(j) + half);
  }
  return out;
}

}  // namespace bqr
