#pragma once

#include "ratiopt/types.hpp"

#include <vector>

namespace ratiopt::expkit {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// ||x - xstar|| / ||xstar||; ZeroReference when xstar = 0.
double rerr(const VectorXd& x, const VectorXd& xstar);

/// Fraction of coordinates where x1 and x2 agree on being zero or nonzero.
double iacc(const VectorXd& x1, const VectorXd& x2);

/// ||A_test x - b_test||^2 / N_test.
double tmse(const MatrixXd& A_test, const VectorXd& b_test, const VectorXd& x);

/// Number of exactly nonzero entries.
Index nnz(const VectorXd& x);

/// pi(j, t) = fraction of problems p with t_{p,j} / min_j' t_{p,j'} <= taus[t].
/// times is problems x solvers; +inf marks a failure. A problem every solver failed counts
/// as unsolved for all of them.
MatrixXd performance_profile(const MatrixXd& times, const std::vector<double>& taus);

}  // namespace ratiopt::expkit
