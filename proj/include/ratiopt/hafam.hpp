#pragma once

// Two-phase solver: splitting iterations until the support has been identical for T+1
// consecutive iterates, hard shrinkage, then semismooth Newton on the reduced problem.

#include "ratiopt/admm.hpp"
#include "ratiopt/model.hpp"
#include "ratiopt/prox.hpp"
#include "ratiopt/ssnewton.hpp"
#include "ratiopt/types.hpp"

#include <variant>

namespace ratiopt {

/// True iff the last T+1 supports exist and coincide.
template <typename Range>
bool support_stable(const Range& history, int T) {
  if (T < 0) throw Error(ErrorCode::InvalidArgument, "stability window must be nonnegative");
  const auto count = static_cast<std::size_t>(std::distance(std::begin(history), std::end(history)));
  if (count < static_cast<std::size_t>(T) + 1) return false;
  auto it = std::end(history);
  std::advance(it, -(T + 1));
  const Support& first = *it;
  for (; it != std::end(history); ++it)
    if (!(*it == first)) return false;
  return true;
}

inline bool support_stable(std::initializer_list<Support> history, int T) {
  return support_stable(std::vector<Support>(history), T);
}

template <typename Derived>
Vector<typename Derived::Scalar> embed(const Eigen::MatrixBase<Derived>& u, const Support& support, Index n) {
  if (u.size() != support.size()) throw Error(ErrorCode::DimensionMismatch, "embed: |u| differs from |support|");
  if (!support.fits(n)) throw Error(ErrorCode::IndexOutOfRange, "embed: support index beyond n");
  Vector<typename Derived::Scalar> x = Vector<typename Derived::Scalar>::Zero(n);
  for (Index k = 0; k < support.size(); ++k) x(support[k]) = u(k);
  return x;
}

template <typename Derived>
Vector<typename Derived::Scalar> restrict_to(const Eigen::MatrixBase<Derived>& x, const Support& support) {
  if (!support.fits(x.size())) throw Error(ErrorCode::IndexOutOfRange, "restrict: support index beyond n");
  return gather(x, support);
}

struct AbsoluteTau {
  double tau = 0;
};

struct FractionOfL1 {
  double frac = 0;
};

using TauMode = std::variant<AbsoluteTau, FractionOfL1>;

template <typename Scalar>
struct HafamReport {
  Vector<Scalar> x_final;
  Vector<Scalar> x_phase1;  // x^I at the stability exit
  Vector<Scalar> x_hat;     // hard-shrunk x^I
  Support support;          // support of x_hat
  Scalar tau_used = 0;
  int tran_it = 0;
  int total_it = 0;
  bool phase2_skipped = false;
  AdmmRun<Scalar> phase1;
  NewtonRun<Scalar> phase2;
  double wall_seconds = 0;
};

/// Phase I stops once the support is stable over the last T+1 iterates (and nonempty).
template <typename Scalar>
PhasePredicate<Scalar> stability_predicate(int T) {
  return [T](const AdmmState<Scalar>& st) {
    return !st.support_history.empty() && !st.support_history.back().empty() &&
           support_stable(st.support_history, T);
  };
}

template <typename Scalar>
HafamReport<Scalar> run_hafam(const Problem<Scalar>& p, const SolverConfig& cfg, const VectorArg<Scalar>& x0,
                              const TauMode& tau_mode) {
  const auto t0 = std::chrono::steady_clock::now();
  HafamReport<Scalar> rep;
  rep.phase1 = run_admm(p, cfg, x0, stability_predicate<Scalar>(cfg.T));
  rep.x_phase1 = rep.phase1.state.x;
  rep.tran_it = rep.phase1.state.k;

  auto finish = [&] {
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return std::move(rep);
  };

  if (rep.phase1.stop != StopReason::Predicate) {
    rep.phase2_skipped = true;
    rep.x_hat = rep.x_phase1;
    rep.x_final = rep.x_phase1;
    rep.support = Support::of(rep.x_final);
    rep.total_it = rep.tran_it;
    return finish();
  }

  if (const auto* abs = std::get_if<AbsoluteTau>(&tau_mode))
    rep.tau_used = Scalar(abs->tau);
  else
    rep.tau_used = fraction_tau(rep.x_phase1, Scalar(std::get<FractionOfL1>(tau_mode).frac));

  auto [x_hat, support] = hard_shrink_support(rep.x_phase1, rep.tau_used);
  if (support.empty())
    throw Error(ErrorCode::EmptySupportAfterShrink,
                "shrink level " + std::to_string(static_cast<double>(rep.tau_used)) + " removes every entry");
  rep.x_hat = std::move(x_hat);
  rep.support = std::move(support);

  const ReducedProblem<Scalar> rp(p, rep.support);
  rep.phase2 = run_ssnewton(rp, gather(rep.x_hat, rep.support), cfg.newton);
  rep.x_final = embed(rep.phase2.u, rep.support, p.cols());
  rep.total_it = rep.tran_it + rep.phase2.iterations;
  return finish();
}

/// Shrink level taken from cfg.tau.
template <typename Scalar>
HafamReport<Scalar> run_hafam(const Problem<Scalar>& p, const SolverConfig& cfg, const VectorArg<Scalar>& x0) {
  return run_hafam(p, cfg, x0, AbsoluteTau{cfg.tau});
}

}  // namespace ratiopt
