#include "bqr/dataset.hpp"

#include <Eigen/QR>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace bqr {

QuantileLevel::QuantileLevel(double value) : value_(value) {
  if (!(value > 0.0 && value < 1.0)) {
    std::ostringstream msg;
    msg << "quantile level tau must lie in (0,1), got " << value;
    throw std::invalid_argument(msg.str());
  }
}

Dataset::Dataset(Eigen::VectorXd y, Eigen::MatrixXd design)
    : y_(std::move(y)), design_(std::move(design)) {
  if (design_.rows() != y_.size()) {
    throw std::invalid_argument("dataset: response length does not match design rows");
  }
  if (design_.cols() < 1) {
    throw std::invalid_argument("dataset: design needs at least the intercept column");
  }
  if (design_.rows() < design_.cols()) {
    throw std::invalid_argument("dataset: fewer observations than coefficients");
  }
  if (!y_.allFinite() || !design_.allFinite()) {
    throw std::invalid_argument("dataset: non-finite entries");
  }
  if ((design_.col(0).array() != 1.0).any()) {
    throw std::invalid_argument("dataset: first design column must be identically 1");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design_);
  qr.setThreshold(1e-10);
  if (qr.rank() < design_.cols()) {
    throw std::invalid_argument("dataset: design is rank deficient (collinear covariates)");
  }
}

Dataset Dataset::with_intercept(Eigen::VectorXd y, const Eigen::MatrixXd& covariates) {
  Eigen::MatrixXd design(covariates.rows(), covariates.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(covariates.cols()) = covariates;
  return Dataset(std::move(y), std::move(design));
}

Dataset Dataset::resample(const std::vector<std::size_t>& indices) const {
  const auto m = static_cast<Eigen::Index>(indices.size());
  Eigen::VectorXd y(m);
  Eigen::MatrixXd design(m, design_.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto src = static_cast<Eigen::Index>(indices[static_cast<std::size_t>(i)]);
    y(i) = y_(src);
    design.row(i) = design_.row(src);
  }
  return Dataset(std::move(y), std::move(design));
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  std::vector<std::vector<double>> rows;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    auto fields = split_fields(line);
    if (!have_header) {
      columns = fields.size();
      if (columns < 1) throw std::runtime_error("csv: empty header");
      have_header = true;
      continue;
    }
    if (fields.size() != columns) {
      std::ostringstream msg;
      msg << "csv line " << line_no << ": expected " << columns << " fields, got "
          << fields.size();
      throw std::runtime_error(msg.str());
    }
    std::vector<double> row;
    row.reserve(columns);
    for (const auto& f : fields) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(f, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != f.size()) {
        std::ostringstream msg;
        msg << "csv line " << line_no << ": not a number: '" << f << "'";
        throw std::runtime_error(msg.str());
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) throw std::runtime_error("csv: missing header");

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto k = static_cast<Eigen::Index>(columns) - 1;
  Eigen::VectorXd y(n);
  Eigen::MatrixXd cov(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    y(i) = r[0];
    for (Eigen::Index j = 0; j < k; ++j) cov(i, j) = r[static_cast<std::size_t>(j + 1)];
  }
  return Dataset::with_intercept(std::move(y), cov);
}

Dataset read_dataset_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  return read_dataset_csv(in);
}

void write_dataset_csv(std::ostream& out, const Dataset& data,
                       const std::vector<std::string>& header_comments) {
  for (const auto& c : header_comments) out << "# " << c << '\n';
  out << 'y';
  for (std::size_t j = 1; j < data.p(); ++j) out << ",x" << j;
  out << '\n';
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < data.X().rows(); ++i) {
    out << data.y()(i);
    for (Eigen::Index j = 1; j < data.X().cols(); ++j) out << ',' << data.X()(i, j);
    out << '\n';
  }
}

}  // namespace bqr
