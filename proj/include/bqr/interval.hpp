#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace bqr {

/// Per-coefficient intervals at a common level.
struct IntervalSet {
  std::vector<double> lo;
  std::vector<double> hi;
  double level = 0.95;

  std::size_t size() const noexcept { return lo.size(); }
  double width(std::size_t j) const { return hi.at(j) - lo.at(j); }
  bool contains(std::size_t j, double value) const { return lo.at(j) <= value && value <= hi.at(j); }
};

/// Linear-interpolation sample quantile of sorted data (h = (m-1) q).
double sorted_quantile(const std::vector<double>& sorted, double q);

/// Equal-tailed empirical intervals, one per column of `draws`.
IntervalSet percentile_intervals(const Eigen::MatrixXd& draws, double level);

/// mean_j +/- z_{(1+level)/2} * sqrt(cov_jj).
IntervalSet gaussian_intervals(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, double level);

void require_level(double level);

}  // namespace bqr
