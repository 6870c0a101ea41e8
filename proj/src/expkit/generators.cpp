#include "ratiopt/expkit/generators.hpp"

#include "ratiopt/random.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace ratiopt::expkit {

const char* to_string(Family f) { return f == Family::GaussianCorr ? "gaussian" : "odct"; }

Family parse_family(const std::string& s) {
  if (s == "gaussian") return Family::GaussianCorr;
  if (s == "odct") return Family::ODCT;
  throw Error(ErrorCode::InvalidArgument, "unknown matrix family '" + s + "' (gaussian|odct)");
}

void SynthSpec::validate() const {
  if (m < 1 || n < 1) throw Error(ErrorCode::InvalidArgument, "m and n must be positive");
  if (s < 1 || s > n) throw Error(ErrorCode::InvalidArgument, "need 1 <= s <= n");
  if (family == Family::GaussianCorr && !(r > 0 && r < 1))
    throw Error(ErrorCode::InvalidArgument, "correlation r must lie in (0, 1)");
  if (family == Family::ODCT && !(F > 0)) throw Error(ErrorCode::InvalidArgument, "F must be positive");
  if (!(noise_sigma >= 0)) throw Error(ErrorCode::InvalidArgument, "noise sigma must be nonnegative");
  if (!std::isfinite(dynamic_D)) throw Error(ErrorCode::InvalidArgument, "D must be finite");
}

MatrixXd gen_gaussian_corr(Index m, Index n, double r, std::uint64_t seed) {
  if (!(r > 0 && r < 1)) throw Error(ErrorCode::InvalidArgument, "correlation r must lie in (0, 1)");
  CounterRng rng(seed);
  const double a = std::sqrt(1 - r), c = std::sqrt(r);
  MatrixXd A(m, n);
  for (Index i = 0; i < m; ++i) {
    const double z = rng.normal();
    for (Index j = 0; j < n; ++j) A(i, j) = a * rng.normal() + c * z;
  }
  return A;
}

MatrixXd gen_odct(Index m, Index n, double F, std::uint64_t seed) {
  if (!(F > 0)) throw Error(ErrorCode::InvalidArgument, "F must be positive");
  CounterRng rng(seed);
  VectorXd w(m);
  for (Index i = 0; i < m; ++i) w(i) = rng.uniform();
  const double scale = 1 / std::sqrt(double(m));
  MatrixXd A(m, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) A(i, j) = scale * std::cos(2 * std::numbers::pi * w(i) * double(j + 1) / F);
  return A;
}

VectorXd gen_ground_truth(Index n, Index s, double D, std::uint64_t seed) {
  if (s < 1 || s > n) throw Error(ErrorCode::InvalidArgument, "need 1 <= s <= n");
  CounterRng rng(seed);
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index(0));
  for (Index k = 0; k < s; ++k) {
    const auto j = k + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - k)));
    std::swap(perm[std::size_t(k)], perm[std::size_t(j)]);
  }
  const double scale = std::pow(10.0, D);
  VectorXd x = VectorXd::Zero(n);
  for (Index k = 0; k < s; ++k) {
    const double g1 = rng.normal();
    const double g2 = rng.normal();  // never exactly 0: uniforms avoid 1/2
    x(perm[std::size_t(k)]) = (g1 < 0 ? -1.0 : 1.0) * scale * g2;
  }
  return x;
}

SynthInstance make_instance(const SynthSpec& spec) {
  spec.validate();
  SynthInstance in;
  in.spec = spec;
  const std::uint64_t sa = derive_seed(spec.seed, 1);
  in.A = spec.family == Family::GaussianCorr ? gen_gaussian_corr(spec.m, spec.n, spec.r, sa)
                                             : gen_odct(spec.m, spec.n, spec.F, sa);
  in.x_true = gen_ground_truth(spec.n, spec.s, spec.dynamic_D, derive_seed(spec.seed, 2));
  in.b = in.A * in.x_true;
  if (spec.noise_sigma > 0) {
    CounterRng rng(derive_seed(spec.seed, 3));
    for (Index i = 0; i < spec.m; ++i) in.b(i) += spec.noise_sigma * rng.normal();
  }
  return in;
}

}  // namespace ratiopt::expkit
