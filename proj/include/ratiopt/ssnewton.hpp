#pragma once

// Globalized semismooth Newton method on a fixed support.
//
// With u = x restricted to the support (no zero entries), the reduced objective is
//   phi(u) = gamma ||u||_1/||u||_2 + Phi(A_S u),
//   grad phi(u) = gamma (sign(u)/r - a u/r^3) + grad_u Phi,       a = ||u||_1, r = ||u||_2,
// and its generalized Hessian is V - Q with V the fidelity Hessian on the support and
//   Q = gamma/r^3 [ (u s^T + s u^T) - 3a u u^T / r^2 + a I ],   s = sign(u).
// Q has eigenvalues gamma (a -/+ sqrt(4 s r^2 - 3 a^2)) / (2 r^3) on span{u, s} and
// gamma a / r^3 on its orthogonal complement (multiplicity s - 2).

#include "ratiopt/model.hpp"
#include "ratiopt/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <concepts>
#include <cmath>
#include <functional>
#include <limits>

namespace ratiopt {

/// Problem restricted to a support: phi(u) = F(embed(u)).
template <typename Scalar>
struct ReducedProblem {
  Support support;
  Matrix<Scalar> a_cols;  // columns of A on the support, in index order
  Vector<Scalar> b;
  Scalar gamma = 1;
  Fidelity fidelity = Fidelity::LeastSquares;
  Cone cone = Cone::Free;
  Index n = 0;

  ReducedProblem() = default;

  ReducedProblem(const Problem<Scalar>& p, Support s)
      : support(std::move(s)), b(p.b), gamma(p.gamma), fidelity(p.fidelity), cone(p.cone), n(p.cols()) {
    if (support.empty()) throw Error(ErrorCode::EmptySupport, "reduced problem needs a nonempty support");
    if (!support.fits(n)) throw Error(ErrorCode::IndexOutOfRange, "support index beyond column count");
    a_cols = gather_columns(p.A, support);
  }

  Index size() const { return support.size(); }
};

namespace detail {

template <typename Scalar>
void require_interior(const ReducedProblem<Scalar>& rp, const Vector<Scalar>& u) {
  require_size(u, rp.size(), "reduced point");
  for (Index i = 0; i < u.size(); ++i)
    if (u(i) == Scalar(0)) throw Error(ErrorCode::ZeroEntry, "reduced point left the manifold interior");
}

}  // namespace detail

template <typename Scalar>
Scalar phi_value(const ReducedProblem<Scalar>& rp, const VectorArg<Scalar>& u) {
  detail::require_interior(rp, u);
  const Vector<Scalar> res = rp.a_cols * u - rp.b;
  return rp.gamma * u.template lpNorm<1>() / u.norm() + fidelity_of_residual(rp.fidelity, res);
}

template <typename Scalar>
Vector<Scalar> phi_grad(const ReducedProblem<Scalar>& rp, const VectorArg<Scalar>& u) {
  detail::require_interior(rp, u);
  const Scalar a = u.template lpNorm<1>();
  const Scalar r = u.norm();
  Vector<Scalar> res = rp.a_cols * u - rp.b;
  if (rp.fidelity == Fidelity::ResidualNorm) {
    const Scalar t = res.norm();
    if (t == Scalar(0)) throw Error(ErrorCode::SingularResidual, "A_S u = b in reduced gradient");
    res /= t;
  }
  const Vector<Scalar> sgn = u.array().sign().matrix();
  return rp.gamma * (sgn / r - a / (r * r * r) * u) + rp.a_cols.transpose() * res;
}

template <typename Scalar>
struct HessianModel {
  Vector<Scalar> u;
  Scalar a = 0;
  Scalar r = 0;
  Matrix<Scalar> v_block;
  Matrix<Scalar> q_matrix;
  Scalar lambda1 = 0;        // gamma (a - sqrt(4 s r^2 - 3 a^2)) / (2 r^3)
  Scalar lambda2 = 0;        // gamma (a + sqrt(4 s r^2 - 3 a^2)) / (2 r^3)
  Scalar lambda_rest = 0;    // gamma a / r^3, multiplicity s - 2

  Matrix<Scalar> matrix() const { return v_block - q_matrix; }
};

/// Q for a given u and gamma.
template <typename Scalar>
Matrix<Scalar> ratio_curvature(const Vector<Scalar>& u, Scalar gamma) {
  const Scalar a = u.template lpNorm<1>();
  const Scalar r = u.norm();
  const Vector<Scalar> sgn = u.array().sign().matrix();
  Matrix<Scalar> q = u * sgn.transpose() + sgn * u.transpose() - (Scalar(3) * a / (r * r)) * u * u.transpose();
  q.diagonal().array() += a;
  return gamma / (r * r * r) * q;
}

template <typename Scalar>
HessianModel<Scalar> hessian(const ReducedProblem<Scalar>& rp, const VectorArg<Scalar>& u) {
  detail::require_interior(rp, u);
  HessianModel<Scalar> h;
  h.u = u;
  h.a = u.template lpNorm<1>();
  h.r = u.norm();
  const Scalar s = Scalar(u.size());
  if (rp.fidelity == Fidelity::LeastSquares) {
    h.v_block = rp.a_cols.transpose() * rp.a_cols;
  } else {
    const Vector<Scalar> res = rp.a_cols * u - rp.b;
    const Scalar t = res.norm();
    if (t == Scalar(0)) throw Error(ErrorCode::SingularResidual, "A_S u = b in reduced Hessian");
    const Vector<Scalar> g = rp.a_cols.transpose() * (res / t);
    h.v_block = (rp.a_cols.transpose() * rp.a_cols - g * g.transpose()) / t;
  }
  h.q_matrix = ratio_curvature(u, rp.gamma);
  const Scalar r3 = h.r * h.r * h.r;
  const Scalar disc = std::sqrt(std::max(Scalar(0), Scalar(4) * s * h.r * h.r - Scalar(3) * h.a * h.a));
  h.lambda1 = rp.gamma * (h.a - disc) / (Scalar(2) * r3);
  h.lambda2 = rp.gamma * (h.a + disc) / (Scalar(2) * r3);
  h.lambda_rest = rp.gamma * h.a / r3;
  return h;
}

enum class DirectionKind { Inexact, Fallback };

template <typename Scalar>
struct NewtonDirection {
  Vector<Scalar> d;
  DirectionKind kind = DirectionKind::Fallback;
  int cg_iterations = 0;
  Scalar perturbation = 0;  // epsilon_j = ||grad||
};

/// Inexact Newton direction. Conjugate gradients run on the perturbed system
/// M d = -grad, M = H + eps I, eps = ||grad||; an iterate is accepted once
///   ||grad + M d|| <= min(eta, ||grad||) ||grad||   and
///   <grad, d> <= -min(nu, ||grad||) ||d||^2.
/// Otherwise d = -grad / b_scale. CG stops after 10 s iterations or on nonpositive curvature.
template <typename Scalar>
NewtonDirection<Scalar> newton_direction(const Matrix<Scalar>& H, const Vector<Scalar>& grad,
                                         const NewtonConfig& cfg) {
  const Index s = grad.size();
  if (H.rows() != s || H.cols() != s) throw Error(ErrorCode::DimensionMismatch, "Hessian size");
  const Scalar gnorm = grad.norm();
  if (gnorm == Scalar(0)) throw Error(ErrorCode::InvalidArgument, "Newton direction at a zero gradient");
  const Scalar eps = gnorm;
  const Scalar eta_j = std::min(Scalar(cfg.eta), gnorm);
  const Scalar nu_j = std::min(Scalar(cfg.nu), gnorm);
  const Scalar tol = eta_j * gnorm;

  NewtonDirection<Scalar> out;
  out.perturbation = eps;
  auto apply = [&](const Vector<Scalar>& v) -> Vector<Scalar> { return H * v + eps * v; };

  Vector<Scalar> d = Vector<Scalar>::Zero(s);
  Vector<Scalar> r = -grad;
  Vector<Scalar> p = r;
  Scalar rr = r.squaredNorm();
  bool solved = false;
  const int cap = static_cast<int>(10 * s);
  for (int it = 0; it < cap; ++it) {
    const Vector<Scalar> mp = apply(p);
    const Scalar curv = p.dot(mp);
    if (!(curv > Scalar(0))) break;
    const Scalar alpha = rr / curv;
    d += alpha * p;
    r -= alpha * mp;
    ++out.cg_iterations;
    if (r.norm() <= tol) {
      r = -grad - apply(d);  // confirm against the true residual
      if (r.norm() <= tol) {
        solved = true;
        break;
      }
      p = r;
      rr = r.squaredNorm();
      continue;
    }
    const Scalar rr_next = r.squaredNorm();
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  if (solved && grad.dot(d) <= -nu_j * d.squaredNorm()) {
    out.d = std::move(d);
    out.kind = DirectionKind::Inexact;
  } else {
    out.d = -grad / Scalar(cfg.b_scale);
    out.kind = DirectionKind::Fallback;
  }
  return out;
}

template <typename Scalar>
NewtonDirection<Scalar> newton_direction(const ReducedProblem<Scalar>& rp, const Vector<Scalar>& u,
                                         const Vector<Scalar>& grad, const NewtonConfig& cfg) {
  return newton_direction(hessian(rp, u).matrix(), grad, cfg);
}

template <typename Scalar>
struct LineSearchResult {
  Scalar alpha = 1;
  Vector<Scalar> u_next;
  Scalar value = 0;
  int backtracks = 0;
};

/// Backtracking alpha = delta^m, m = 0, 1, ..., until
///   phi(u + alpha d) <= phi(u) + mu alpha <grad, d>
/// and u + alpha d is admissible.
template <typename Scalar, typename Objective, typename Admissible>
  requires std::invocable<Objective&, const Vector<Scalar>&>
LineSearchResult<Scalar> armijo(Objective&& phi, const Vector<Scalar>& u, const Vector<Scalar>& d,
                                const Vector<Scalar>& grad, const NewtonConfig& cfg, Admissible&& admissible) {
  const Scalar slope = grad.dot(d);
  if (!(slope < Scalar(0))) throw Error(ErrorCode::InvalidArgument, "line search needs a descent direction");
  const Scalar phi0 = phi(u);
  LineSearchResult<Scalar> out;
  Scalar alpha = 1;
  for (int m = 0; m <= cfg.max_backtracks; ++m) {
    Vector<Scalar> trial = u + alpha * d;
    if (admissible(trial)) {
      const Scalar val = phi(trial);
      if (val <= phi0 + Scalar(cfg.mu) * alpha * slope) {
        out.alpha = alpha;
        out.u_next = std::move(trial);
        out.value = val;
        out.backtracks = m;
        return out;
      }
    }
    alpha *= Scalar(cfg.delta);
  }
  throw Error(ErrorCode::LineSearchStall,
              "no Armijo step after " + std::to_string(cfg.max_backtracks) + " backtracks");
}

template <typename Scalar, typename Objective>
  requires std::invocable<Objective&, const Vector<Scalar>&>
LineSearchResult<Scalar> armijo(Objective&& phi, const Vector<Scalar>& u, const Vector<Scalar>& d,
                                const Vector<Scalar>& grad, const NewtonConfig& cfg) {
  return armijo(std::forward<Objective>(phi), u, d, grad, cfg, [](const Vector<Scalar>&) { return true; });
}

/// Line search on phi that also rejects steps landing on an exact zero entry
/// (or leaving the positive orthant under the nonnegative cone).
template <typename Scalar>
LineSearchResult<Scalar> armijo(const ReducedProblem<Scalar>& rp, const Vector<Scalar>& u, const Vector<Scalar>& d,
                                const Vector<Scalar>& grad, const NewtonConfig& cfg) {
  const bool nonneg = rp.cone == Cone::NonNeg;
  return armijo(
      [&](const Vector<Scalar>& v) { return phi_value(rp, v); }, u, d, grad, cfg,
      [nonneg](const Vector<Scalar>& v) {
        return nonneg ? (v.array() > Scalar(0)).all() : (v.array() != Scalar(0)).all();
      });
}

namespace detail {

// Near the solution the predicted decrease mu <grad, d> drops below the rounding of phi
// and the value test passes only for vanishing steps. Take the unit step there when
// the value is flat to rounding and the gradient shrinks.
template <typename Scalar>
bool unit_step_below_resolution(const ReducedProblem<Scalar>& rp, const Vector<Scalar>& u, const Vector<Scalar>& d,
                                Scalar phi0, Scalar grad_norm, LineSearchResult<Scalar>& out) {
  const Scalar floor = Scalar(16) * std::numeric_limits<Scalar>::epsilon() * std::max(Scalar(1), std::abs(phi0));
  if (grad_norm * d.norm() > floor) return false;
  Vector<Scalar> trial = u + d;
  const bool ok = rp.cone == Cone::NonNeg ? (trial.array() > Scalar(0)).all() : (trial.array() != Scalar(0)).all();
  if (!ok) return false;
  const Scalar val = phi_value(rp, trial);
  if (!(std::abs(val - phi0) <= floor) || !(phi_grad(rp, trial).norm() < grad_norm)) return false;
  out.alpha = 1;
  out.value = val;
  out.backtracks = 0;
  out.u_next = std::move(trial);
  return true;
}

}  // namespace detail

enum class NewtonStatus { Converged, IterationCap, LineSearchStall };

inline const char* to_string(NewtonStatus s) {
  switch (s) {
    case NewtonStatus::Converged: return "converged";
    case NewtonStatus::IterationCap: return "iteration_cap";
    case NewtonStatus::LineSearchStall: return "line_search_stall";
  }
  return "unknown";
}

template <typename Scalar>
struct NewtonRun {
  Vector<Scalar> u;
  std::vector<Scalar> grad_norm;  // ||grad phi(u^j)||, j = 0..iterations
  std::vector<Scalar> value;      // phi(u^j)
  std::vector<Scalar> step;       // accepted alpha_j
  std::vector<Scalar> relerr;     // ||u^{j+1} - u^j|| / max(||u^j||, ||u^{j+1}||)
  std::vector<DirectionKind> kind;
  int iterations = 0;
  int fallbacks = 0;
  NewtonStatus status = NewtonStatus::IterationCap;
  double wall_seconds = 0;
};

/// Newton iterations until ||grad phi|| <= grad_tol or more than ssn_max steps.
/// A stalled line search ends the run at the current (best) iterate.
template <typename Scalar>
NewtonRun<Scalar> run_ssnewton(const ReducedProblem<Scalar>& rp, const VectorArg<Scalar>& u0, const NewtonConfig& cfg) {
  cfg.validate();
  detail::require_interior(rp, u0);
  const auto t0 = std::chrono::steady_clock::now();
  NewtonRun<Scalar> run;
  run.u = u0;
  Scalar val = phi_value(rp, run.u);
  for (int j = 0;; ++j) {
    const Vector<Scalar> g = phi_grad(rp, run.u);
    const Scalar gn = g.norm();
    run.grad_norm.push_back(gn);
    run.value.push_back(val);
    if (gn <= Scalar(cfg.grad_tol)) {
      run.status = NewtonStatus::Converged;
      break;
    }
    if (j >= cfg.ssn_max) {
      run.status = NewtonStatus::IterationCap;
      break;
    }
    const NewtonDirection<Scalar> dir = newton_direction(rp, run.u, g, cfg);
    try {
      LineSearchResult<Scalar> ls;
      if (!detail::unit_step_below_resolution(rp, run.u, dir.d, val, gn, ls)) ls = armijo(rp, run.u, dir.d, g, cfg);
      run.relerr.push_back((ls.u_next - run.u).norm() / std::max(run.u.norm(), ls.u_next.norm()));
      run.u = std::move(ls.u_next);
      val = ls.value;
      run.step.push_back(ls.alpha);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::LineSearchStall) throw;
      run.status = NewtonStatus::LineSearchStall;
      break;
    }
    run.kind.push_back(dir.kind);
    if (dir.kind == DirectionKind::Fallback) ++run.fallbacks;
    ++run.iterations;
  }
  run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

/// Largest gamma for which V - Q is guaranteed positive definite at u:
///   2 ||u||^2 lambda_min(V) / (3 sqrt(s)).
template <typename Scalar>
Scalar pd_gamma_bound(const Matrix<Scalar>& v_block, const Vector<Scalar>& u) {
  if (v_block.rows() != u.size() || v_block.cols() != u.size())
    throw Error(ErrorCode::DimensionMismatch, "pd_gamma_bound sizes");
  for (Index i = 0; i < u.size(); ++i)
    if (u(i) == Scalar(0)) throw Error(ErrorCode::ZeroEntry, "pd_gamma_bound needs nonzero entries");
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(v_block, Eigen::EigenvaluesOnly);
  const Scalar lmin = es.eigenvalues()(0);
  if (!(lmin > Scalar(0))) throw Error(ErrorCode::NotPositiveDefinite, "fidelity block is not positive definite");
  return Scalar(2) * u.squaredNorm() * lmin / (Scalar(3) * std::sqrt(Scalar(u.size())));
}

}  // namespace ratiopt
