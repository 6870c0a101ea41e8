#include "ratiopt/expkit/metrics.hpp"

#include <cmath>
#include <limits>

namespace ratiopt::expkit {

double rerr(const VectorXd& x, const VectorXd& xstar) {
  require_size(x, xstar.size(), "rerr");
  const double den = xstar.norm();
  if (den == 0) throw Error(ErrorCode::ZeroReference, "rerr: reference vector is zero");
  return (x - xstar).norm() / den;
}

double iacc(const VectorXd& x1, const VectorXd& x2) {
  require_size(x2, x1.size(), "iacc");
  if (x1.size() == 0) throw Error(ErrorCode::InvalidArgument, "iacc of empty vectors");
  Index agree = 0;
  for (Index i = 0; i < x1.size(); ++i) agree += (x1(i) != 0) == (x2(i) != 0);
  return double(agree) / double(x1.size());
}

double tmse(const MatrixXd& A_test, const VectorXd& b_test, const VectorXd& x) {
  require_size(x, A_test.cols(), "tmse x");
  require_size(b_test, A_test.rows(), "tmse b");
  if (A_test.rows() == 0) throw Error(ErrorCode::InvalidArgument, "tmse needs at least one test row");
  return (A_test * x - b_test).squaredNorm() / double(A_test.rows());
}

Index nnz(const VectorXd& x) { return (x.array() != 0).count(); }

MatrixXd performance_profile(const MatrixXd& times, const std::vector<double>& taus) {
  const Index P = times.rows(), J = times.cols();
  if (P == 0 || J == 0) throw Error(ErrorCode::InvalidArgument, "performance profile needs problems and solvers");
  for (Index p = 0; p < P; ++p)
    for (Index j = 0; j < J; ++j)
      if (std::isnan(times(p, j)) || !(times(p, j) > 0))
        throw Error(ErrorCode::InvalidArgument, "performance profile metrics must be positive (use +inf for failures)");

  const double inf = std::numeric_limits<double>::infinity();
  MatrixXd ratio(P, J);
  for (Index p = 0; p < P; ++p) {
    const double best = times.row(p).minCoeff();
    for (Index j = 0; j < J; ++j) ratio(p, j) = std::isinf(best) || std::isinf(times(p, j)) ? inf : times(p, j) / best;
  }
  MatrixXd pi(J, static_cast<Index>(taus.size()));
  for (Index j = 0; j < J; ++j)
    for (std::size_t t = 0; t < taus.size(); ++t) {
      Index hit = 0;
      for (Index p = 0; p < P; ++p) hit += ratio(p, j) <= taus[t];
      pi(j, Index(t)) = double(hit) / double(P);
    }
  return pi;
}

}  // namespace ratiopt::expkit
