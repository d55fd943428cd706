#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace bqr {

/// Quantile level, strictly inside (0, 1).
class QuantileLevel {
 public:
  explicit QuantileLevel(double value);

  double value() const noexcept { return value_; }
  /// tau * (1 - tau)
  double spread() const noexcept { return value_ * (1.0 - value_); }

 private:
  double value_;
};

/**
 * Response vector plus design matrix whose first column is the intercept.
 *
 * Construction validates the design: matching dimensions, finite entries, a
 * column of ones in position 0, n >= p and full column rank. Collinear designs
 * throw std::invalid_argument.
 */
class Dataset {
 public:
  Dataset(Eigen::VectorXd y, Eigen::MatrixXd design);

  /// Prepends the intercept column to `covariates`.
  static Dataset with_intercept(Eigen::VectorXd y, const Eigen::MatrixXd& covariates);

  const Eigen::VectorXd& y() const noexcept { return y_; }
  const Eigen::MatrixXd& X() const noexcept { return design_; }
  std::size_t n() const noexcept { return static_cast<std::size_t>(y_.size()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(design_.cols()); }

  /// Rows selected by `indices` (with repetition), validated like any other dataset.
  Dataset resample(const std::vector<std::size_t>& indices) const;

 private:
  Eigen::VectorXd y_;
  Eigen::MatrixXd design_;
};

/// Reads "y,x1,...,xk" CSV with a header row. Lines starting with '#' are skipped.
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv_file(const std::string& path);

/// Writes the inverse of read_dataset_csv (the intercept column is not stored).
void write_dataset_csv(std::ostream& out, const Dataset& data,
                       const std::vector<std::string>& header_comments = {});

}  // namespace bqr
