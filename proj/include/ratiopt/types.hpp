#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace ratiopt {

using Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Vector parameter whose scalar is fixed by another argument, so expressions convert.
template <typename Scalar>
using VectorArg = std::type_identity_t<Vector<Scalar>>;

/// Feasible set for x: all of R^n or the nonnegative orthant.
enum class Cone { Free, NonNeg };

/// Data-fidelity term: 1/2 ||Ax - b||^2 or ||Ax - b||.
enum class Fidelity { LeastSquares, ResidualNorm };

enum class ErrorCode {
  DimensionMismatch,
  ConeViolation,
  SingularResidual,
  NonConvergence,
  ZeroVector,
  ZeroEntry,
  NotStationary,
  FactorizationFailure,
  InnerNoConvergence,
  LineSearchStall,
  NotPositiveDefinite,
  IndexOutOfRange,
  EmptySupportAfterShrink,
  EmptySupport,
  ZeroReference,
  DegenerateColumn,
  UnsupportedFidelity,
  InvalidArgument,
  Io,
  Parse,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ConeViolation: return "ConeViolation";
    case ErrorCode::SingularResidual: return "SingularResidual";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::ZeroEntry: return "ZeroEntry";
    case ErrorCode::NotStationary: return "NotStationary";
    case ErrorCode::FactorizationFailure: return "FactorizationFailure";
    case ErrorCode::InnerNoConvergence: return "InnerNoConvergence";
    case ErrorCode::LineSearchStall: return "LineSearchStall";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::EmptySupportAfterShrink: return "EmptySupportAfterShrink";
    case ErrorCode::EmptySupport: return "EmptySupport";
    case ErrorCode::ZeroReference: return "ZeroReference";
    case ErrorCode::DegenerateColumn: return "DegenerateColumn";
    case ErrorCode::UnsupportedFidelity: return "UnsupportedFidelity";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Sorted set of column indices. Equality is set equality.
class Support {
 public:
  Support() = default;

  /// Takes indices in any order; duplicates are rejected.
  explicit Support(std::vector<Index> indices) : idx_(std::move(indices)) {
    std::sort(idx_.begin(), idx_.end());
    if (std::adjacent_find(idx_.begin(), idx_.end()) != idx_.end())
      throw Error(ErrorCode::InvalidArgument, "duplicate index in support");
    if (!idx_.empty() && idx_.front() < 0)
      throw Error(ErrorCode::IndexOutOfRange, "negative support index");
  }

  Support(std::initializer_list<Index> indices) : Support(std::vector<Index>(indices)) {}

  /// Indices of the exactly-nonzero entries of x.
  template <typename Derived>
  static Support of(const Eigen::MatrixBase<Derived>& x) {
    Support s;
    for (Index i = 0; i < x.size(); ++i)
      if (x(i) != typename Derived::Scalar(0)) s.idx_.push_back(i);
    return s;
  }

  Index size() const noexcept { return static_cast<Index>(idx_.size()); }
  bool empty() const noexcept { return idx_.empty(); }
  Index operator[](Index k) const { return idx_[static_cast<std::size_t>(k)]; }
  auto begin() const noexcept { return idx_.begin(); }
  auto end() const noexcept { return idx_.end(); }
  const std::vector<Index>& indices() const noexcept { return idx_; }

  bool contains(Index i) const { return std::binary_search(idx_.begin(), idx_.end(), i); }

  /// Checks every index lies in [0, n).
  bool fits(Index n) const { return idx_.empty() || idx_.back() < n; }

  /// Indices of [0, n) not in the support.
  std::vector<Index> complement(Index n) const {
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(std::max<Index>(0, n - size())));
    auto it = idx_.begin();
    for (Index i = 0; i < n; ++i) {
      if (it != idx_.end() && *it == i) {
        ++it;
        continue;
      }
      out.push_back(i);
    }
    return out;
  }

  friend bool operator==(const Support&, const Support&) = default;

 private:
  std::vector<Index> idx_;
};

/// min_x gamma * ||x||_1/||x||_2 + Phi(x) over the cone.
template <typename Scalar>
struct Problem {
  Matrix<Scalar> A;
  Vector<Scalar> b;
  Scalar gamma = Scalar(1);
  Cone cone = Cone::Free;
  Fidelity fidelity = Fidelity::LeastSquares;

  Index rows() const { return A.rows(); }
  Index cols() const { return A.cols(); }

  void validate() const {
    if (A.rows() < 1 || A.cols() < 1)
      throw Error(ErrorCode::DimensionMismatch, "sensing matrix must be non-empty");
    if (b.size() != A.rows())
      throw Error(ErrorCode::DimensionMismatch, "observation length differs from row count");
    if (!(gamma > Scalar(0)))
      throw Error(ErrorCode::InvalidArgument, "gamma must be positive");
    if (!A.allFinite() || !b.allFinite())
      throw Error(ErrorCode::InvalidArgument, "non-finite problem data");
  }

  /// A^T b outside the interior of the cone's polar: A^T b != 0 (Free) or max(A^T b) > 0 (NonNeg).
  /// Without it the origin is the only limit the splitting can reach.
  bool excludes_trivial_limit() const {
    const Vector<Scalar> atb = A.transpose() * b;
    if (cone == Cone::Free) return atb.cwiseAbs().maxCoeff() > Scalar(0);
    return atb.maxCoeff() > Scalar(0);
  }
};

struct NewtonConfig {
  double eta = 1e-3;
  double nu = 1e-8;
  double mu = 1e-8;
  double delta = 0.95;
  double b_scale = 0.1;  // B_j = b_scale * I
  double grad_tol = 1e-11;
  int ssn_max = 2500;
  int max_backtracks = 500;

  void validate() const {
    if (!(mu > 0 && mu < 0.5)) throw Error(ErrorCode::InvalidArgument, "newton mu must lie in (0, 1/2)");
    if (!(eta > 0 && eta < 1)) throw Error(ErrorCode::InvalidArgument, "newton eta must lie in (0, 1)");
    if (!(nu > 0 && nu < 1)) throw Error(ErrorCode::InvalidArgument, "newton nu must lie in (0, 1)");
    if (!(delta > 0 && delta < 1)) throw Error(ErrorCode::InvalidArgument, "newton delta must lie in (0, 1)");
    if (!(b_scale > 0)) throw Error(ErrorCode::InvalidArgument, "newton b_scale must be positive");
    if (ssn_max < 0) throw Error(ErrorCode::InvalidArgument, "ssn_max must be nonnegative");
  }
};

struct SolverConfig {
  double beta = 0.015;
  int T = 5;
  double tau = 0.0;
  int imax = 2000;
  double rel_tol = 1e-8;
  double inner_tol = 1e-9;  // residual-norm y-update tolerance
  NewtonConfig newton{};
  std::uint64_t seed = 0;

  void validate() const {
    if (!(beta > 0)) throw Error(ErrorCode::InvalidArgument, "beta must be positive");
    if (T < 0) throw Error(ErrorCode::InvalidArgument, "T must be nonnegative");
    if (!(tau >= 0)) throw Error(ErrorCode::InvalidArgument, "tau must be nonnegative");
    if (imax < 0) throw Error(ErrorCode::InvalidArgument, "imax must be nonnegative");
    newton.validate();
  }
};

template <typename Derived>
void require_size(const Eigen::MatrixBase<Derived>& x, Index n, const char* what) {
  if (x.size() != n)
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": expected length " + std::to_string(n) + ", got " +
                    std::to_string(x.size()));
}

}  // namespace ratiopt
