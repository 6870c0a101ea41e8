#include "ratiopt/expkit/dataset.hpp"

#include "ratiopt/expkit/metrics.hpp"
#include "ratiopt/random.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <sstream>

namespace ratiopt::expkit {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<Index> shuffled(Index n, std::uint64_t seed) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index(0));
  CounterRng rng(seed);
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(idx[std::size_t(i)], idx[std::size_t(j)]);
  }
  return idx;
}

MatrixXd take_rows(const MatrixXd& M, const std::vector<Index>& rows) {
  MatrixXd out(static_cast<Index>(rows.size()), M.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(Index(i)) = M.row(rows[i]);
  return out;
}

VectorXd take_rows(const VectorXd& v, const std::vector<Index>& rows) {
  VectorXd out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(Index(i)) = v(rows[i]);
  return out;
}

}  // namespace

Index Table::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return Index(j);
  throw Error(ErrorCode::InvalidArgument, "no column named '" + name + "'");
}

Table parse_csv(std::istream& in, const std::string& source) {
  Table t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw Error(ErrorCode::Parse, source + ": empty file");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  t.header = split_fields(line);
  for (const auto& h : t.header)
    if (h.empty()) throw Error(ErrorCode::Parse, source + ":" + std::to_string(lineno) + ": empty column name");

  std::vector<double> values;
  Index rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != t.header.size())
      throw Error(ErrorCode::Parse, source + ":" + std::to_string(lineno) + ": expected " +
                                        std::to_string(t.header.size()) + " fields, got " +
                                        std::to_string(fields.size()));
    for (std::size_t j = 0; j < fields.size(); ++j) {
      double v = 0;
      const auto& f = fields[j];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v))
        throw Error(ErrorCode::Parse, source + ":" + std::to_string(lineno) + ": column '" + t.header[j] +
                                          "' is not a finite number: '" + f + "'");
      values.push_back(v);
    }
    ++rows;
  }
  const auto cols = static_cast<Index>(t.header.size());
  t.data = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(values.data(), rows, cols);
  return t;
}

Table read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return parse_csv(in, path);
}

Standardizer Standardizer::fit(const MatrixXd& M, const VectorXd& y) {
  require_size(y, M.rows(), "standardize y");
  if (M.rows() < 2) throw Error(ErrorCode::DegenerateColumn, "need at least two rows to standardize");
  Standardizer st;
  st.mean = M.colwise().mean().transpose();
  st.scale.resize(M.cols());
  for (Index j = 0; j < M.cols(); ++j) {
    const double len = (M.col(j).array() - st.mean(j)).matrix().norm();
    if (!(len > 0)) throw Error(ErrorCode::DegenerateColumn, "column " + std::to_string(j) + " is constant");
    st.scale(j) = len;
  }
  st.y_mean = y.mean();
  st.y_scale = (y.array() - st.y_mean).matrix().norm();
  if (!(st.y_scale > 0)) throw Error(ErrorCode::DegenerateColumn, "response is constant");
  return st;
}

MatrixXd Standardizer::apply(const MatrixXd& M) const {
  if (M.cols() != mean.size()) throw Error(ErrorCode::DimensionMismatch, "standardizer column count");
  return (M.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

VectorXd Standardizer::apply(const VectorXd& y) const { return (y.array() - y_mean) / y_scale; }

std::pair<MatrixXd, VectorXd> standardize_columns(const MatrixXd& M, const VectorXd& y) {
  const Standardizer st = Standardizer::fit(M, y);
  return {st.apply(M), st.apply(y)};
}

double parse_ratio(const std::string& text) {
  double r = 0;
  const auto colon = text.find(':');
  try {
    std::size_t used = 0;
    if (colon == std::string::npos) {
      r = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
    } else {
      const std::string lhs = text.substr(0, colon), rhs = text.substr(colon + 1);
      std::size_t u1 = 0, u2 = 0;
      const double a = std::stod(lhs, &u1), b = std::stod(rhs, &u2);
      if (u1 != lhs.size() || u2 != rhs.size() || !(a >= 0 && b >= 0)) throw std::invalid_argument(text);
      r = a / (a + b);
    }
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::InvalidArgument, "bad split ratio '" + text + "'");
  }
  if (!(r > 0 && r < 1)) throw Error(ErrorCode::InvalidArgument, "split ratio must lie in (0, 1): '" + text + "'");
  return r;
}

Dataset make_dataset(const Table& table, const std::string& target, double ratio, int k, std::uint64_t seed) {
  if (!(ratio > 0 && ratio < 1)) throw Error(ErrorCode::InvalidArgument, "split ratio must lie in (0, 1)");
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "need at least two folds");
  const Index tcol = table.column(target);
  const Index N = table.data.rows();
  const auto n_train = static_cast<Index>(std::llround(ratio * double(N)));
  if (n_train < k || n_train >= N)
    throw Error(ErrorCode::InvalidArgument, "split leaves too few training or test rows");

  Dataset ds;
  std::vector<Index> feature_cols;
  for (Index j = 0; j < Index(table.header.size()); ++j)
    if (j != tcol) {
      feature_cols.push_back(j);
      ds.features.push_back(table.header[std::size_t(j)]);
    }
  if (feature_cols.empty()) throw Error(ErrorCode::InvalidArgument, "no feature columns");
  MatrixXd X(N, Index(feature_cols.size()));
  for (std::size_t j = 0; j < feature_cols.size(); ++j) X.col(Index(j)) = table.data.col(feature_cols[j]);
  const VectorXd y = table.data.col(tcol);

  const auto order = shuffled(N, derive_seed(seed, 4));
  const std::vector<Index> train(order.begin(), order.begin() + n_train), test(order.begin() + n_train, order.end());
  const MatrixXd Xtr = take_rows(X, train);
  const VectorXd ytr = take_rows(y, train);
  const Standardizer st = Standardizer::fit(Xtr, ytr);
  ds.A_train = st.apply(Xtr);
  ds.b_train = st.apply(ytr);
  ds.A_test = st.apply(take_rows(X, test));
  ds.b_test = st.apply(VectorXd(take_rows(y, test)));

  ds.fold_indices.assign(std::size_t(k), {});
  const auto deal = shuffled(n_train, derive_seed(seed, 5));
  for (Index i = 0; i < n_train; ++i) ds.fold_indices[std::size_t(i % k)].push_back(deal[std::size_t(i)]);
  for (auto& f : ds.fold_indices) std::sort(f.begin(), f.end());
  return ds;
}

std::vector<double> default_gamma_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 6; ++i) g.push_back(std::pow(10.0, -6.0 + 5.0 * i / 6.0));
  return g;
}

CvResult cross_validate_gamma(const Dataset& ds, const std::vector<double>& grid, const FitFn& fit) {
  if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty gamma grid");
  const auto k = ds.fold_indices.size();
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "need at least two folds");
  const Index n = ds.A_train.rows();
  const double inf = std::numeric_limits<double>::infinity();

  CvResult out;
  out.mean_mse.assign(grid.size(), 0.0);
  for (std::size_t f = 0; f < k; ++f) {
    const auto& val = ds.fold_indices[f];
    std::vector<char> in_val(static_cast<std::size_t>(n), 0);
    for (Index i : val) in_val[std::size_t(i)] = 1;
    std::vector<Index> rest;
    for (Index i = 0; i < n; ++i)
      if (!in_val[std::size_t(i)]) rest.push_back(i);
    const MatrixXd A_fit = take_rows(ds.A_train, rest), A_val = take_rows(ds.A_train, val);
    const VectorXd b_fit = take_rows(ds.b_train, rest), b_val = take_rows(ds.b_train, val);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      double mse = inf;
      try {
        const VectorXd x = fit(A_fit, b_fit, grid[g]);
        if (x.allFinite()) mse = tmse(A_val, b_val, x);
      } catch (const std::exception&) {
      }
      out.mean_mse[g] += mse / double(k);
    }
  }
  out.index = 0;
  for (std::size_t g = 1; g < grid.size(); ++g)
    if (out.mean_mse[g] < out.mean_mse[out.index]) out.index = g;
  out.gamma = grid[out.index];
  return out;
}

}  // namespace ratiopt::expkit
