#pragma once

// Splitting iteration for min gamma*||x||_1/||x||_2 + Phi(x) over a cone:
//   x+ = prox_{ratio, beta/gamma}(y - z/beta)
//   y+ = argmin_y Phi(y) + beta/2 ||y - x+ - z/beta||^2
//   z+ = z + beta (x+ - y+)
// plus the same loop with a soft-threshold x-update for the L1 comparator.

#include "ratiopt/model.hpp"
#include "ratiopt/prox.hpp"
#include "ratiopt/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <optional>

namespace ratiopt {

/// Solves (A^T A + beta I) y = A^T b + beta v with a factorization built once.
/// Uses the m x m system beta I + A A^T (Woodbury) when m < n.
template <typename Scalar>
class LeastSquaresYSolver {
 public:
  LeastSquaresYSolver(const Matrix<Scalar>& A, const Vector<Scalar>& b, Scalar beta)
      : A_(A), beta_(beta), woodbury_(A.rows() < A.cols()) {
    if (!(beta > Scalar(0))) throw Error(ErrorCode::FactorizationFailure, "beta must be positive");
    if (!A.allFinite()) throw Error(ErrorCode::FactorizationFailure, "non-finite sensing matrix");
    atb_ = A.transpose() * b;
    if (woodbury_) {
      Matrix<Scalar> k = A * A.transpose();
      k.diagonal().array() += beta;
      llt_.compute(k);
    } else {
      Matrix<Scalar> k = A.transpose() * A;
      k.diagonal().array() += beta;
      llt_.compute(k);
    }
    if (llt_.info() != Eigen::Success)
      throw Error(ErrorCode::FactorizationFailure, "Cholesky factorization failed");
  }

  Vector<Scalar> solve(const Vector<Scalar>& v) const {
    const Vector<Scalar> rhs = atb_ + beta_ * v;
    Vector<Scalar> y = apply_inverse(rhs);
    // One step of iterative refinement on the normal equations.
    const Vector<Scalar> res = rhs - A_.transpose() * (A_ * y) - beta_ * y;
    y += apply_inverse(res);
    return y;
  }

  Scalar beta() const { return beta_; }

 private:
  Vector<Scalar> apply_inverse(const Vector<Scalar>& r) const {
    if (!woodbury_) return llt_.solve(r);
    return (r - A_.transpose() * llt_.solve(A_ * r)) / beta_;
  }

  const Matrix<Scalar>& A_;
  Scalar beta_;
  bool woodbury_;
  Vector<Scalar> atb_;
  Eigen::LLT<Matrix<Scalar>> llt_;
};

/// Solves min_y ||A y - b|| + beta/2 ||y - v||^2 exactly through a thin SVD of A.
///
/// With e = A v - b the residual at the solution is c (A A^T + c I)^{-1} e for the c > 0
/// satisfying ||(A A^T + c I)^{-1} e|| = 1/beta, and y = v - A^T (A A^T + c I)^{-1} e.
/// When no such c exists the solution lies on {A y = b} and is the projection of v.
template <typename Scalar>
class ResidualNormYSolver {
 public:
  ResidualNormYSolver(const Matrix<Scalar>& A, const Vector<Scalar>& b, Scalar beta)
      : A_(A), b_(b), beta_(beta) {
    if (!(beta > Scalar(0))) throw Error(ErrorCode::FactorizationFailure, "beta must be positive");
    if (!A.allFinite()) throw Error(ErrorCode::FactorizationFailure, "non-finite sensing matrix");
    Eigen::BDCSVD<Matrix<Scalar>> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw Error(ErrorCode::FactorizationFailure, "SVD failed");
    const Vector<Scalar>& s = svd.singularValues();
    const Scalar cutoff = (s.size() ? s(0) : Scalar(0)) * Scalar(std::max(A.rows(), A.cols())) *
                          std::numeric_limits<Scalar>::epsilon();
    Index rank = 0;
    while (rank < s.size() && s(rank) > cutoff) ++rank;
    s_ = s.head(rank);
    u_ = svd.matrixU().leftCols(rank);
    v_ = svd.matrixV().leftCols(rank);
    full_row_rank_ = rank == A.rows();
  }

  struct Solution {
    Vector<Scalar> y;
    Scalar subgradient_residual = 0;
    int iterations = 0;
    bool on_singular_set = false;  // A y = b
  };

  Solution solve(const Vector<Scalar>& v, Scalar inner_tol = Scalar(1e-9)) const {
    Solution out;
    const Vector<Scalar> e = A_ * v - b_;
    const Scalar enorm = e.norm();
    if (enorm == Scalar(0)) {
      out.y = v;
      out.on_singular_set = true;
      return out;
    }
    const Vector<Scalar> p = u_.transpose() * e;
    // Weight of the 1/c^2 term: the part of e outside range(A), zero when A has full row rank.
    Scalar p0 = full_row_rank_ ? Scalar(0) : (e - u_ * p).squaredNorm();
    const Scalar floor = Scalar(1024) * std::numeric_limits<Scalar>::epsilon() * enorm;
    if (p0 <= floor * floor) p0 = 0;
    const Vector<Scalar> s2 = s_.array().square();
    auto psi2 = [&](Scalar c) {
      Scalar acc = c > Scalar(0) ? p0 / (c * c) : (p0 > Scalar(0) ? std::numeric_limits<Scalar>::infinity() : Scalar(0));
      for (Index i = 0; i < p.size(); ++i) {
        const Scalar den = s2(i) + c;
        acc += p(i) * p(i) / (den * den);
      }
      return acc;
    };
    const Scalar target = Scalar(1) / beta_;

    if (p0 == Scalar(0) && std::sqrt(psi2(Scalar(0))) <= target) {
      out.y = v - v_ * (p.array() / s_.array()).matrix();
      out.on_singular_set = true;
      return out;
    }

    // g(c) = 1/psi(c) - beta is increasing and close to linear; safeguarded Newton.
    Scalar lo = 0, hi = beta_ * enorm;
    Scalar c = hi;
    int it = 0;
    for (; it < 10000; ++it) {
      const Scalar ps2 = psi2(c);
      const Scalar ps = std::sqrt(ps2);
      const Scalar g = Scalar(1) / ps - beta_;
      if (g == Scalar(0)) break;
      if (g < Scalar(0))
        lo = c;
      else
        hi = c;
      Scalar dps2 = c > Scalar(0) ? -Scalar(2) * p0 / (c * c * c) : Scalar(0);
      for (Index i = 0; i < p.size(); ++i) {
        const Scalar den = s2(i) + c;
        dps2 -= Scalar(2) * p(i) * p(i) / (den * den * den);
      }
      const Scalar dg = -dps2 / (Scalar(2) * ps2 * ps);
      Scalar next = c - g / dg;
      if (!(next > lo && next < hi)) next = lo > Scalar(0) ? std::sqrt(lo * hi) : hi / 2;
      if (std::abs(next - c) <= Scalar(4) * std::numeric_limits<Scalar>::epsilon() * c ||
          hi - lo <= Scalar(4) * std::numeric_limits<Scalar>::epsilon() * hi) {
        c = next;
        break;
      }
      c = next;
    }
    if (it >= 10000) throw Error(ErrorCode::InnerNoConvergence, "residual-norm y-update did not converge");

    out.iterations = it + 1;
    out.y = v - v_ * (s_.array() * p.array() / (s2.array() + c)).matrix();
    const Vector<Scalar> res = A_ * out.y - b_;
    const Scalar t = res.norm();
    if (t == Scalar(0)) {
      out.on_singular_set = true;
      return out;
    }
    out.subgradient_residual = (A_.transpose() * (res / t) + beta_ * (out.y - v)).norm();
    if (out.subgradient_residual > inner_tol)
      throw Error(ErrorCode::InnerNoConvergence,
                  "residual-norm y-update stationarity " +
                      std::to_string(static_cast<double>(out.subgradient_residual)) + " above tolerance");
    return out;
  }

 private:
  const Matrix<Scalar>& A_;
  const Vector<Scalar>& b_;
  Scalar beta_;
  Vector<Scalar> s_;
  Matrix<Scalar> u_, v_;
  bool full_row_rank_ = false;
};

template <typename Scalar>
Vector<Scalar> y_update_least_squares(const Problem<Scalar>& p, std::type_identity_t<Scalar> beta, const VectorArg<Scalar>& v) {
  if (p.fidelity != Fidelity::LeastSquares)
    throw Error(ErrorCode::UnsupportedFidelity, "least-squares y-update needs the squared fidelity");
  require_size(v, p.cols(), "y_update_least_squares");
  return LeastSquaresYSolver<Scalar>(p.A, p.b, beta).solve(v);
}

template <typename Scalar>
Vector<Scalar> y_update_residual_norm(const Problem<Scalar>& p, std::type_identity_t<Scalar> beta,
                                      const VectorArg<Scalar>& v,
                                      std::type_identity_t<Scalar> inner_tol = Scalar(1e-9)) {
  if (p.fidelity != Fidelity::ResidualNorm)
    throw Error(ErrorCode::UnsupportedFidelity, "residual-norm y-update needs the norm fidelity");
  require_size(v, p.cols(), "y_update_residual_norm");
  return ResidualNormYSolver<Scalar>(p.A, p.b, beta).solve(v, inner_tol).y;
}

enum class XUpdate { RatioProx, SoftThreshold };

enum class StopReason { RelErr, IterationCap, Predicate };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::RelErr: return "relerr";
    case StopReason::IterationCap: return "iteration_cap";
    case StopReason::Predicate: return "support_stable";
  }
  return "unknown";
}

template <typename Scalar>
struct AdmmState {
  Vector<Scalar> x, y, z;
  int k = 0;
  std::deque<Support> support_history;  // last T+1 supports of x
  Scalar relerr = std::numeric_limits<Scalar>::infinity();
  Scalar y_residual = std::numeric_limits<Scalar>::quiet_NaN();
};

/// Per-iteration telemetry; entry j describes iterate j+1.
template <typename Scalar>
struct AdmmTrace {
  std::vector<Scalar> relerr;
  std::vector<Scalar> y_residual;
  std::vector<Scalar> kkt_upper_bound;  // (L^2/beta + beta) ||y^k - y^{k+1}||
  std::vector<Scalar> objective;
  std::vector<Scalar> stationarity;     // dist(0, subdifferential) at x^{k+1}; NaN at the origin
  std::vector<Support> support;

  std::size_t size() const { return relerr.size(); }
};

/// ||x_prev - x|| / max(1e-16, ||x||, ||x_prev||).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar relerr(const Eigen::MatrixBase<DerivedA>& x_prev, const Eigen::MatrixBase<DerivedB>& x) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar den = std::max({Scalar(1e-16), x.norm(), x_prev.norm()});
  return (x_prev - x).norm() / den;
}

/// Owns the y-subproblem factorization for one (problem, beta) pair.
template <typename Scalar>
class AdmmEngine {
 public:
  AdmmEngine(const Problem<Scalar>& p, const SolverConfig& cfg, XUpdate mode = XUpdate::RatioProx)
      : p_(p), cfg_(cfg), mode_(mode), beta_(Scalar(cfg.beta)) {
    p.validate();
    cfg.validate();
    if (p.fidelity == Fidelity::LeastSquares) {
      ls_.emplace(p.A, p.b, beta_);
      lipschitz_ = lipschitz_estimate(p, cfg.seed);
    } else {
      rn_.emplace(p.A, p.b, beta_);
      lipschitz_ = std::numeric_limits<Scalar>::quiet_NaN();
    }
  }

  AdmmState<Scalar> initial_state(const Vector<Scalar>& x0) const {
    require_size(x0, p_.cols(), "initial point");
    if (!x0.allFinite()) throw Error(ErrorCode::InvalidArgument, "initial point must be finite");
    AdmmState<Scalar> st;
    st.x = x0;
    st.y = x0;
    st.z = x0;
    return st;
  }

  Vector<Scalar> x_update(const Vector<Scalar>& y, const Vector<Scalar>& z) const {
    const Vector<Scalar> anchor = y - z / beta_;
    if (mode_ == XUpdate::RatioProx)
      return prox_l1_over_l2(ProxQuery<Scalar>{anchor, beta_ / p_.gamma, p_.cone}).x;
    Vector<Scalar> x = soft_threshold(anchor, p_.gamma / beta_);
    if (p_.cone == Cone::NonNeg) x = x.cwiseMax(Scalar(0));
    return x;
  }

  Vector<Scalar> y_update(const Vector<Scalar>& v) const {
    if (ls_) return ls_->solve(v);
    return rn_->solve(v, Scalar(cfg_.inner_tol)).y;
  }

  /// One full x/y/z sweep; appends telemetry when a trace is given.
  void step(AdmmState<Scalar>& st, AdmmTrace<Scalar>* trace = nullptr) const {
    Vector<Scalar> x_next = x_update(st.y, st.z);
    Vector<Scalar> y_next = y_update(x_next + st.z / beta_);
    st.z += beta_ * (x_next - y_next);
    st.y_residual = (st.y - y_next).norm();
    st.relerr = relerr(st.x, x_next);
    st.x = std::move(x_next);
    st.y = std::move(y_next);
    ++st.k;
    st.support_history.push_back(Support::of(st.x));
    while (static_cast<int>(st.support_history.size()) > cfg_.T + 1) st.support_history.pop_front();

    if (trace) {
      trace->relerr.push_back(st.relerr);
      trace->y_residual.push_back(st.y_residual);
      trace->kkt_upper_bound.push_back((lipschitz_ * lipschitz_ / beta_ + beta_) * st.y_residual);
      trace->objective.push_back(objective_value(st.x));
      trace->stationarity.push_back(stationarity_value(st.x));
      trace->support.push_back(st.support_history.back());
    }
  }

  Scalar lipschitz() const { return lipschitz_; }
  const Problem<Scalar>& problem() const { return p_; }
  const SolverConfig& config() const { return cfg_; }

 private:
  Scalar objective_value(const Vector<Scalar>& x) const {
    if (mode_ == XUpdate::SoftThreshold) return p_.gamma * x.template lpNorm<1>() + fidelity_value(p_, x);
    return objective(p_, x);
  }

  Scalar stationarity_value(const Vector<Scalar>& x) const {
    if (mode_ != XUpdate::RatioProx || x.isZero(0)) return std::numeric_limits<Scalar>::quiet_NaN();
    try {
      return stationarity_distance(p_, x);
    } catch (const Error&) {
      return std::numeric_limits<Scalar>::quiet_NaN();
    }
  }

  const Problem<Scalar>& p_;
  SolverConfig cfg_;
  XUpdate mode_;
  Scalar beta_;
  Scalar lipschitz_;
  std::optional<LeastSquaresYSolver<Scalar>> ls_;
  std::optional<ResidualNormYSolver<Scalar>> rn_;
};

/// One sweep with a freshly built factorization. Loops should hold an AdmmEngine instead.
template <typename Scalar>
AdmmState<Scalar> admm_step(const Problem<Scalar>& p, const SolverConfig& cfg, AdmmState<Scalar> st) {
  AdmmEngine<Scalar>(p, cfg).step(st);
  return st;
}

template <typename Scalar>
struct AdmmRun {
  AdmmState<Scalar> state;
  AdmmTrace<Scalar> trace;
  StopReason stop = StopReason::IterationCap;
  double wall_seconds = 0;
};

template <typename Scalar>
using PhasePredicate = std::function<bool(const AdmmState<Scalar>&)>;

namespace detail {

template <typename Scalar>
AdmmRun<Scalar> drive(const AdmmEngine<Scalar>& engine, const Vector<Scalar>& x0,
                      const PhasePredicate<Scalar>& until) {
  const auto t0 = std::chrono::steady_clock::now();
  AdmmRun<Scalar> run;
  run.state = engine.initial_state(x0);
  const SolverConfig& cfg = engine.config();
  while (true) {
    if (run.state.k >= cfg.imax) {
      run.stop = StopReason::IterationCap;
      break;
    }
    engine.step(run.state, &run.trace);
    if (until) {
      if (until(run.state)) {
        run.stop = StopReason::Predicate;
        break;
      }
    } else if (run.state.relerr < Scalar(cfg.rel_tol) && !run.state.x.isZero(0)) {
      // The origin is never a limit of interest; a zero first iterate must not end the run.
      run.stop = StopReason::RelErr;
      break;
    }
  }
  run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

}  // namespace detail

/// Runs the ratio splitting from y0 = z0 = x0 until RelErr < rel_tol (or the cap), or,
/// when `until` is given, until it fires.
template <typename Scalar>
AdmmRun<Scalar> run_admm(const Problem<Scalar>& p, const SolverConfig& cfg, const VectorArg<Scalar>& x0,
                         const PhasePredicate<Scalar>& until = {}) {
  AdmmEngine<Scalar> engine(p, cfg, XUpdate::RatioProx);
  return detail::drive(engine, x0, until);
}

/// Same splitting with the L1 penalty gamma*||x||_1 (soft-threshold x-update).
template <typename Scalar>
AdmmRun<Scalar> run_admm_l1_baseline(const Problem<Scalar>& p, const SolverConfig& cfg,
                                     const VectorArg<Scalar>& x0) {
  AdmmEngine<Scalar> engine(p, cfg, XUpdate::SoftThreshold);
  return detail::drive(engine, x0, {});
}

}  // namespace ratiopt
