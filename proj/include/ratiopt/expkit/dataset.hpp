#pragma once

// Real-data pipeline: CSV ingestion, column standardization, train/test split, folds and
// k-fold selection of gamma.

#include "ratiopt/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace ratiopt::expkit {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Table {
  std::vector<std::string> header;
  MatrixXd data;  // rows x header.size()

  Index column(const std::string& name) const;
};

/// Comma-separated, header row first, every field numeric ('.' decimal).
Table parse_csv(std::istream& in, const std::string& source = "<stream>");
Table read_csv(const std::string& path);

/// Per-column centering and scaling so that every column has mean 0 and sum of squares 1.
struct Standardizer {
  VectorXd mean, scale;
  double y_mean = 0, y_scale = 1;

  static Standardizer fit(const MatrixXd& M, const VectorXd& y);
  MatrixXd apply(const MatrixXd& M) const;
  VectorXd apply(const VectorXd& y) const;
};

/// Throws DegenerateColumn when a column (or y) is constant.
std::pair<MatrixXd, VectorXd> standardize_columns(const MatrixXd& M, const VectorXd& y);

struct Dataset {
  std::vector<std::string> features;
  MatrixXd A_train;
  VectorXd b_train;
  MatrixXd A_test;
  VectorXd b_test;
  std::vector<std::vector<Index>> fold_indices;  // rows of A_train, partitioning them
};

/// "8:2" -> 0.8, "0.7" -> 0.7. The result must lie in (0, 1).
double parse_ratio(const std::string& text);

/// Shuffles rows, keeps round(ratio N) for training, standardizes the training part and
/// applies the same transform to the test part, then deals the training rows into k folds.
Dataset make_dataset(const Table& table, const std::string& target, double ratio, int k, std::uint64_t seed);

/// 10^(-6 + 5 i / 6), i = 0..6.
std::vector<double> default_gamma_grid();

/// Fits x on the given problem. Any exception counts as a failed fit.
using FitFn = std::function<VectorXd(const MatrixXd& A, const VectorXd& b, double gamma)>;

struct CvResult {
  double gamma = 0;
  std::size_t index = 0;
  std::vector<double> mean_mse;  // per grid entry, +inf when every fold failed or any fold did
};

/// Grid entry with the smallest mean validation MSE over the folds; lowest index wins ties.
CvResult cross_validate_gamma(const Dataset& ds, const std::vector<double>& grid, const FitFn& fit);

}  // namespace ratiopt::expkit
