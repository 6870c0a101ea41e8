#pragma once

// Global proximal operator of the L1/L2 ratio and the shrinkage helpers around it.
//
// prox solves  min_{x in cone}  ||x||_1/||x||_2 + (rho/2) ||x - q||^2   (ratio(0) = 1).
//
// A nonzero minimizer keeps the signs of q on its support, and its support is a
// prefix of the indices sorted by decreasing |q|. On a prefix of length k with weights
// w_i = rho |q_i| the stationarity system
//     x = (rho q - sign(q)/r) / (rho - a/r^3),   a = ||x||_1,  r = ||x||_2
// closes in the two scalars (a, r). Writing d = 1/r, mu = mean(w), M2 = sum (w_i - mu)^2
// and N(d) = sqrt(k (mu - d)^2 + M2), it reduces to one equation
//     h(d) = rho N(d) - d (k mu (mu - d) + M2) = 0,   0 < d < min w,
// with |x_i| = (w_i - d) / (d N(d)). h is strictly convex on that interval, so each
// prefix contributes at most two stationary candidates, found by bisection around the
// minimizer of h. Every candidate's objective is available in O(1) from running
// sums, so the whole sweep costs O(n log n) plus a constant per prefix.

#include "ratiopt/model.hpp"
#include "ratiopt/types.hpp"

#include <cmath>
#include <numeric>
#include <utility>

namespace ratiopt {

template <typename Scalar>
struct ProxQuery {
  Vector<Scalar> q;
  Scalar rho = Scalar(1);
  Cone cone = Cone::Free;
};

template <typename Scalar>
struct ProxResult {
  Vector<Scalar> x;
  Scalar value = 0;
  Support support;
  Index candidates_examined = 0;
};

namespace detail {

/// Bisection on a sign change of f over [lo, hi]; runs until the bracket stops shrinking.
template <typename Scalar, typename F>
Scalar bisect(F&& f, Scalar lo, Scalar hi, bool f_lo_positive) {
  for (int it = 0; it < 400; ++it) {
    const Scalar mid = lo + (hi - lo) / 2;
    if (mid <= lo || mid >= hi) break;
    const bool pos = f(mid) > Scalar(0);
    if (pos == f_lo_positive)
      lo = mid;
    else
      hi = mid;
  }
  return lo + (hi - lo) / 2;
}

/// Prefix statistics for the reduced scalar equation.
template <typename Scalar>
struct PrefixStats {
  Scalar k;
  Scalar mu;
  Scalar m2;
  Scalar rho;

  Scalar norm(Scalar d) const { return std::sqrt(k * (mu - d) * (mu - d) + m2); }
  Scalar h(Scalar d) const { return rho * norm(d) - d * (k * mu * (mu - d) + m2); }
  Scalar dh(Scalar d) const {
    return -rho * k * (mu - d) / norm(d) - k * mu * mu + 2 * k * mu * d - m2;
  }
};

/// Roots of h on (0, w_min).
template <typename Scalar>
int prefix_roots(const PrefixStats<Scalar>& st, Scalar w_min, Scalar roots[2]) {
  auto h = [&](Scalar d) { return st.h(d); };
  auto dh = [&](Scalar d) { return st.dh(d); };
  int count = 0;
  const Scalar h_hi = h(w_min);
  Scalar d_star;
  if (dh(w_min) <= Scalar(0)) {
    d_star = w_min;  // h decreasing on the whole interval
  } else if (dh(Scalar(0)) >= Scalar(0)) {
    d_star = Scalar(0);
  } else {
    d_star = bisect(dh, Scalar(0), w_min, false);
  }
  const Scalar h_star = h(d_star);
  if (h_star > Scalar(0)) return 0;
  if (h_star == Scalar(0)) {
    if (d_star > Scalar(0) && d_star < w_min) roots[count++] = d_star;
    return count;
  }
  // h(0) = rho * N(0) > 0 so a left root always exists when h dips below zero.
  if (d_star > Scalar(0)) roots[count++] = bisect(h, Scalar(0), d_star, true);
  if (d_star < w_min && h_hi > Scalar(0)) roots[count++] = bisect(h, d_star, w_min, false);
  return count;
}

}  // namespace detail

/// Global minimizer of ||x||_1/||x||_2 + (rho/2)||x - q||^2 over the cone.
template <typename Scalar>
ProxResult<Scalar> prox_l1_over_l2(const ProxQuery<Scalar>& query) {
  const Vector<Scalar>& q = query.q;
  const Scalar rho = query.rho;
  if (!(rho > Scalar(0))) throw Error(ErrorCode::InvalidArgument, "prox weight rho must be positive");
  if (q.size() < 1) throw Error(ErrorCode::DimensionMismatch, "prox anchor must be non-empty");
  const Index n = q.size();

  std::vector<Index> order;
  order.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const bool eligible = query.cone == Cone::Free ? q(i) != Scalar(0) : q(i) > Scalar(0);
    if (eligible) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](Index i, Index j) { return std::abs(q(i)) > std::abs(q(j)); });
  const Index kmax = static_cast<Index>(order.size());

  // tail(k) = sum of q_i^2 over everything outside the first k sorted candidates,
  // accumulated from the small end to avoid cancellation.
  Scalar outside = 0;
  for (Index i = 0; i < n; ++i) {
    const bool eligible = query.cone == Cone::Free ? q(i) != Scalar(0) : q(i) > Scalar(0);
    if (!eligible) outside += q(i) * q(i);
  }
  Vector<Scalar> tail(kmax + 1);
  tail(kmax) = outside;
  for (Index k = kmax - 1; k >= 0; --k) {
    const Scalar v = q(order[static_cast<std::size_t>(k)]);
    tail(k) = tail(k + 1) + v * v;
  }

  Scalar best_value = Scalar(1) + rho / 2 * tail(0);
  Index best_k = 0;
  Scalar best_d = 0;
  Index examined = 1;

  // Running mean / sum of squared deviations of the weights (Welford).
  auto accumulate = [&](Index k, Scalar& mu, Scalar& m2) {
    const Scalar w = rho * std::abs(q(order[static_cast<std::size_t>(k - 1)]));
    const Scalar delta = w - mu;
    mu += delta / Scalar(k);
    m2 = std::max(Scalar(0), m2 + delta * (w - mu));
    return w;
  };

  Scalar mu = 0, m2 = 0;
  for (Index k = 1; k <= kmax; ++k) {
    const Scalar w = accumulate(k, mu, m2);
    if (k == 1) {
      // Any multiple of e_i has ratio 1, so the best 1-sparse point is q_i e_i.
      ++examined;
      const Scalar value = Scalar(1) + rho / 2 * tail(1);
      if (value < best_value) {
        best_value = value;
        best_k = 1;
      }
      continue;
    }
    const detail::PrefixStats<Scalar> st{Scalar(k), mu, m2, rho};

    Scalar roots[2];
    const int nroots = detail::prefix_roots(st, w, roots);
    for (int t = 0; t < nroots; ++t) {
      const Scalar d = roots[t];
      const Scalar nd = st.norm(d);
      ++examined;
      // |x_i| - |q_i| = alpha * w_i - 1/N  with alpha = 1/(d N) - 1/rho.
      const Scalar alpha = Scalar(1) / (d * nd) - Scalar(1) / rho;
      const Scalar shift = alpha * mu - Scalar(1) / nd;
      const Scalar dist2 = alpha * alpha * m2 + Scalar(k) * shift * shift + tail(k);
      const Scalar value = Scalar(k) * (mu - d) / nd + rho / 2 * dist2;
      if (value < best_value) {
        best_value = value;
        best_k = k;
        best_d = d;
      }
    }
  }

  ProxResult<Scalar> out;
  out.x = Vector<Scalar>::Zero(n);
  out.candidates_examined = examined;
  if (best_k == 1) {
    const Index i = order.front();
    out.x(i) = q(i);
  } else if (best_k > 1) {
    Scalar mu_b = 0, m2_b = 0;
    for (Index k = 1; k <= best_k; ++k) accumulate(k, mu_b, m2_b);
    const detail::PrefixStats<Scalar> st{Scalar(best_k), mu_b, m2_b, rho};
    const Scalar scale = Scalar(1) / (best_d * st.norm(best_d));
    for (Index k = 0; k < best_k; ++k) {
      const Index i = order[static_cast<std::size_t>(k)];
      const Scalar mag = (rho * std::abs(q(i)) - best_d) * scale;
      out.x(i) = q(i) > Scalar(0) ? mag : -mag;
    }
  }
  if (!out.x.allFinite()) throw Error(ErrorCode::NonConvergence, "prox produced a non-finite point");
  out.support = Support::of(out.x);
  out.value = l1_over_l2(out.x) + rho / 2 * (out.x - q).squaredNorm();
  return out;
}

/// Keeps entries with |x_i| > tau at their original magnitude; zeroes the rest.
/// The kept set equals the support of max(|x| - tau, 0) .* x.
template <typename Derived>
std::pair<Vector<typename Derived::Scalar>, Support> hard_shrink_support(
    const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  if (!(tau >= Scalar(0))) throw Error(ErrorCode::InvalidArgument, "shrink level must be nonnegative");
  Vector<Scalar> out = Vector<Scalar>::Zero(x.size());
  std::vector<Index> kept;
  for (Index i = 0; i < x.size(); ++i) {
    if (std::abs(x(i)) > tau) {
      out(i) = x(i);
      kept.push_back(i);
    }
  }
  return {std::move(out), Support(std::move(kept))};
}

template <typename Derived>
Vector<typename Derived::Scalar> soft_threshold(const Eigen::MatrixBase<Derived>& v,
                                                typename Derived::Scalar t) {
  using Scalar = typename Derived::Scalar;
  if (!(t >= Scalar(0))) throw Error(ErrorCode::InvalidArgument, "threshold must be nonnegative");
  return v.unaryExpr([t](Scalar vi) {
    const Scalar m = std::max(std::abs(vi) - t, Scalar(0));
    return vi < Scalar(0) ? -m : m;
  });
}

/// Shrink level covering the smallest entries that together hold less than frac of ||x||_1:
/// sorts |x| ascending and returns the last entry whose prefix sum stays below frac*||x||_1
/// (0 when not even the smallest entry qualifies).
template <typename Derived>
typename Derived::Scalar fraction_tau(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar frac) {
  using Scalar = typename Derived::Scalar;
  if (!(frac >= Scalar(0) && frac < Scalar(1)))
    throw Error(ErrorCode::InvalidArgument, "fraction must lie in [0, 1)");
  const Scalar l1 = x.template lpNorm<1>();
  if (l1 == Scalar(0)) throw Error(ErrorCode::ZeroVector, "fraction_tau of the zero vector");
  std::vector<Scalar> mags(static_cast<std::size_t>(x.size()));
  for (Index i = 0; i < x.size(); ++i) mags[static_cast<std::size_t>(i)] = std::abs(x(i));
  std::sort(mags.begin(), mags.end());
  const Scalar budget = frac * l1;
  Scalar sum = 0, tau = 0;
  for (Scalar m : mags) {
    sum += m;
    if (!(sum < budget)) break;
    tau = m;
  }
  return tau;
}

}  // namespace ratiopt
