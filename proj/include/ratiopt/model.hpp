#pragma once

// Full-space objective F(x) = gamma * ||x||_1/||x||_2 + Phi(x), its pieces, and the
// stationarity / nondegeneracy checks used to certify solver output.

#include "ratiopt/random.hpp"
#include "ratiopt/types.hpp"

#include <cmath>
#include <limits>

namespace ratiopt {

/// ||x||_1 / ||x||_2 with the convention ratio(0) = 1.
template <typename Derived>
typename Derived::Scalar l1_over_l2(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Scalar r = x.norm();
  if (r == Scalar(0)) return Scalar(1);
  return x.template lpNorm<1>() / r;
}

/// sign(x)/r - (a/r^3) x restricted to the support of x (gradient of the ratio on its manifold).
template <typename Derived>
Vector<typename Derived::Scalar> ratio_gradient_on_support(const Eigen::MatrixBase<Derived>& x,
                                                           const Support& support) {
  using Scalar = typename Derived::Scalar;
  const Scalar a = x.template lpNorm<1>();
  const Scalar r = x.norm();
  if (r == Scalar(0)) throw Error(ErrorCode::ZeroVector, "ratio gradient at the origin");
  const Scalar r3 = r * r * r;
  Vector<Scalar> g(support.size());
  for (Index k = 0; k < support.size(); ++k) {
    const Scalar xi = x(support[k]);
    const Scalar s = xi > Scalar(0) ? Scalar(1) : (xi < Scalar(0) ? Scalar(-1) : Scalar(0));
    g(k) = s / r - a / r3 * xi;
  }
  return g;
}

template <typename Scalar>
Matrix<Scalar> gather_columns(const Matrix<Scalar>& A, const Support& support) {
  Matrix<Scalar> out(A.rows(), support.size());
  for (Index k = 0; k < support.size(); ++k) out.col(k) = A.col(support[k]);
  return out;
}

template <typename Derived>
Vector<typename Derived::Scalar> gather(const Eigen::MatrixBase<Derived>& x, const Support& support) {
  Vector<typename Derived::Scalar> out(support.size());
  for (Index k = 0; k < support.size(); ++k) out(k) = x(support[k]);
  return out;
}

/// A x - b, multiplying only the nonzero columns. The reduced problem uses the same
/// gather-then-multiply path, so both see bit-identical residuals.
template <typename Scalar, typename Derived>
Vector<Scalar> residual(const Problem<Scalar>& p, const Eigen::MatrixBase<Derived>& x) {
  require_size(x, p.cols(), "residual");
  const Support supp = Support::of(x);
  if (supp.size() == p.cols()) return p.A * x - p.b;
  if (supp.empty()) return -p.b;
  return gather_columns(p.A, supp) * gather(x, supp) - p.b;
}

template <typename Scalar>
Scalar fidelity_of_residual(Fidelity fidelity, const Vector<Scalar>& res) {
  return fidelity == Fidelity::LeastSquares ? Scalar(0.5) * res.squaredNorm() : res.norm();
}

template <typename Scalar, typename Derived>
Scalar fidelity_value(const Problem<Scalar>& p, const Eigen::MatrixBase<Derived>& x) {
  return fidelity_of_residual(p.fidelity, residual(p, x));
}

/// Gradient of Phi given the residual A x - b.
template <typename Scalar>
Vector<Scalar> fidelity_grad_from_residual(const Problem<Scalar>& p, const Vector<Scalar>& res) {
  if (p.fidelity == Fidelity::LeastSquares) return p.A.transpose() * res;
  const Scalar t = res.norm();
  if (t == Scalar(0))
    throw Error(ErrorCode::SingularResidual, "||Ax - b|| is not differentiable where Ax = b");
  return p.A.transpose() * (res / t);
}

template <typename Scalar, typename Derived>
Vector<Scalar> fidelity_grad(const Problem<Scalar>& p, const Eigen::MatrixBase<Derived>& x) {
  return fidelity_grad_from_residual(p, residual(p, x));
}

template <typename Scalar, typename Derived>
void require_in_cone(const Problem<Scalar>& p, const Eigen::MatrixBase<Derived>& x) {
  if (p.cone == Cone::NonNeg && x.size() > 0 && x.minCoeff() < Scalar(0))
    throw Error(ErrorCode::ConeViolation, "negative entry under the nonnegative cone");
}

template <typename Scalar, typename Derived>
Scalar objective(const Problem<Scalar>& p, const Eigen::MatrixBase<Derived>& x) {
  require_size(x, p.cols(), "objective");
  require_in_cone(p, x);
  return p.gamma * l1_over_l2(x) + fidelity_value(p, x);
}

/// lambda_max(A^T A) by power iteration from a seeded start.
template <typename Scalar>
Scalar lipschitz_estimate(const Problem<Scalar>& p, std::uint64_t seed = 0) {
  if (p.fidelity != Fidelity::LeastSquares)
    throw Error(ErrorCode::UnsupportedFidelity,
                "gradient of ||Ax - b|| has no global Lipschitz constant; supply beta directly");
  const Index n = p.cols();
  CounterRng rng(derive_seed(seed, 0x4C495053ULL));
  Vector<Scalar> v(n);
  for (Index i = 0; i < n; ++i) v(i) = Scalar(rng.normal());
  v.normalize();

  Scalar lambda = 0;
  for (int it = 0; it < 10000; ++it) {
    const Vector<Scalar> av = p.A * v;
    Vector<Scalar> w = p.A.transpose() * av;
    const Scalar next = av.squaredNorm();  // Rayleigh quotient v^T A^T A v
    const Scalar wn = w.norm();
    if (wn == Scalar(0)) return Scalar(0);
    v = w / wn;
    if (it > 0 && std::abs(next - lambda) <= Scalar(1e-13) * next) return std::max(next, wn);
    lambda = next;
  }
  throw Error(ErrorCode::NonConvergence, "power iteration did not settle in 10000 steps");
}

/// KKT residual on the support: ||gamma (sign(x)/r - a x/r^3) + grad Phi(x)||_Lambda.
template <typename Scalar, typename Derived>
Scalar kkt_residual(const Problem<Scalar>& p, const Eigen::MatrixBase<Derived>& x) {
  require_size(x, p.cols(), "kkt_residual");
  const Support supp = Support::of(x);
  if (supp.empty()) throw Error(ErrorCode::ZeroVector, "KKT residual at the origin");
  const Vector<Scalar> res = residual(p, x);
  Vector<Scalar> scaled = res;
  if (p.fidelity == Fidelity::ResidualNorm) {
    const Scalar t = res.norm();
    if (t == Scalar(0)) throw Error(ErrorCode::SingularResidual, "Ax = b in KKT residual");
    scaled /= t;
  }
  const Vector<Scalar> grad_phi = gather_columns(p.A, supp).transpose() * scaled;
  return (p.gamma * ratio_gradient_on_support(x, supp) + grad_phi).norm();
}

/// dist(0, subdifferential of F + indicator of the cone) at x != 0.
template <typename Scalar, typename Derived>
Scalar stationarity_distance(const Problem<Scalar>& p, const Eigen::MatrixBase<Derived>& x) {
  require_size(x, p.cols(), "stationarity_distance");
  const Support supp = Support::of(x);
  if (supp.empty()) throw Error(ErrorCode::ZeroVector, "stationarity distance at the origin");
  const Vector<Scalar> q = fidelity_grad(p, x);
  const Scalar r = x.norm();
  const Vector<Scalar> on = p.gamma * ratio_gradient_on_support(x, supp) + gather(q, supp);
  Scalar off2 = 0;
  for (Index i : supp.complement(p.cols())) {
    Scalar gap;
    if (p.cone == Cone::Free)
      gap = std::max(Scalar(0), std::abs(q(i)) - p.gamma / r);
    else
      gap = std::max(Scalar(0), -(q(i) + p.gamma / r));
    off2 += gap * gap;
  }
  return std::sqrt(on.squaredNorm() + off2);
}

template <typename Scalar>
struct Nondegeneracy {
  bool nondegenerate = false;
  /// Slack of the strict off-support inequality; positive iff nondegenerate, 0 on the boundary.
  Scalar margin = 0;
};

/// Strict relative-interior test at an (approximately) stationary x:
/// Free: ||grad Phi(x)_{off}||_inf < gamma/r;  NonNeg: grad Phi(x)_{off} + gamma/r > 0.
template <typename Scalar, typename Derived>
Nondegeneracy<Scalar> nondegeneracy_check(const Problem<Scalar>& p, const Eigen::MatrixBase<Derived>& x,
                                          Scalar stationarity_tol = Scalar(1e-6)) {
  require_size(x, p.cols(), "nondegeneracy_check");
  const Support supp = Support::of(x);
  if (supp.empty()) throw Error(ErrorCode::ZeroVector, "nondegeneracy at the origin");
  const Scalar kkt = kkt_residual(p, x);
  if (kkt > stationarity_tol)
    throw Error(ErrorCode::NotStationary,
                "KKT residual " + std::to_string(static_cast<double>(kkt)) + " exceeds tolerance");
  const Vector<Scalar> q = fidelity_grad(p, x);
  const Scalar level = p.gamma / x.norm();
  Scalar slack = std::numeric_limits<Scalar>::infinity();
  for (Index i : supp.complement(p.cols())) {
    const Scalar s = p.cone == Cone::Free ? level - std::abs(q(i)) : q(i) + level;
    slack = std::min(slack, s);
  }
  return {slack > Scalar(0), slack};
}

}  // namespace ratiopt
