#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles/finite_diff.hpp"
#include "ratiopt/model.hpp"
#include "ratiopt/random.hpp"

#include <Eigen/Eigenvalues>

#include <random>

using namespace ratiopt;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Problem<double> identity_problem(int n, VectorXd b, double gamma, Cone cone = Cone::Free,
                                 Fidelity f = Fidelity::LeastSquares) {
  return Problem<double>{MatrixXd::Identity(n, n), std::move(b), gamma, cone, f};
}

Problem<double> random_problem(int m, int n, std::uint64_t seed, Fidelity f = Fidelity::LeastSquares) {
  CounterRng rng(seed);
  Problem<double> p;
  p.A.resize(m, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) p.A(i, j) = rng.normal();
  p.b.resize(m);
  for (Index i = 0; i < m; ++i) p.b(i) = rng.normal();
  p.gamma = 0.3;
  p.fidelity = f;
  return p;
}

}  // namespace

TEST_CASE("objective examples") {
  CHECK(objective(identity_problem(2, VectorXd::Zero(2), 1), vec({1, 0})) == doctest::Approx(1.5));
  CHECK(objective(identity_problem(2, VectorXd::Zero(2), 1), vec({1, 1})) ==
        doctest::Approx(std::sqrt(2.0) + 1).epsilon(1e-12));
  CHECK(objective(identity_problem(2, vec({3, 4}), 1), VectorXd::Zero(2)) == doctest::Approx(13.5));
}

TEST_CASE("objective errors") {
  auto p = identity_problem(2, VectorXd::Zero(2), 1, Cone::NonNeg);
  CHECK_THROWS_AS(objective(p, vec({-1, 0})), Error);
  try {
    objective(p, vec({-1, 0}));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConeViolation);
  }
  try {
    objective(p, vec({1, 0, 0}));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("ratio is bounded below by one") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 5000; ++t) {
    VectorXd x(1 + t % 40);
    for (Index i = 0; i < x.size(); ++i) x(i) = nd(gen) * std::pow(10.0, (t % 7) - 3);
    CHECK(l1_over_l2(x) >= 1 - 1e-12);
  }
  CHECK(l1_over_l2(VectorXd::Zero(4)) == 1.0);
}

TEST_CASE("fidelity gradient examples") {
  CHECK(fidelity_grad(identity_problem(2, vec({1, 1}), 1), vec({1, 1})).isZero(0));
  CHECK(fidelity_grad(identity_problem(2, VectorXd::Zero(2), 1), vec({2, -3})) == vec({2, -3}));
  const VectorXd g = fidelity_grad(identity_problem(2, VectorXd::Zero(2), 1, Cone::Free, Fidelity::ResidualNorm),
                                   vec({3, 4}));
  CHECK((g - vec({0.6, 0.8})).norm() < 1e-15);
  auto singular = identity_problem(2, vec({1, 2}), 1, Cone::Free, Fidelity::ResidualNorm);
  try {
    fidelity_grad(singular, vec({1, 2}));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularResidual);
  }
}

TEST_CASE("fidelity gradient against central differences") {
  for (Fidelity f : {Fidelity::LeastSquares, Fidelity::ResidualNorm}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto p = random_problem(6, 9, seed, f);
      CounterRng rng(seed + 100);
      VectorXd x(9);
      for (Index i = 0; i < 9; ++i) x(i) = rng.normal();
      const VectorXd g = fidelity_grad(p, x);
      const VectorXd fd = oracle::central_gradient([&](const VectorXd& v) { return fidelity_value(p, v); }, x, 1e-6);
      CHECK((g - fd).norm() <= 1e-6 * std::max(1.0, g.norm()));
    }
  }
}

TEST_CASE("lipschitz estimate") {
  Problem<double> p{2 * MatrixXd::Identity(3, 3), VectorXd::Ones(3), 1};
  CHECK(lipschitz_estimate(p) == doctest::Approx(4).epsilon(1e-12));

  Problem<double> d{MatrixXd::Zero(2, 2), VectorXd::Ones(2), 1};
  d.A(0, 0) = 1;
  d.A(1, 1) = 3;
  CHECK(lipschitz_estimate(d) == doctest::Approx(9).epsilon(1e-10));

  const auto r = random_problem(20, 50, 17);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(r.A.transpose() * r.A, Eigen::EigenvaluesOnly);
  const double want = es.eigenvalues().maxCoeff();
  CHECK(std::abs(lipschitz_estimate(r, 5) - want) <= 1e-6 * want);
  CHECK(lipschitz_estimate(r, 5) == lipschitz_estimate(r, 5));

  auto rn = r;
  rn.fidelity = Fidelity::ResidualNorm;
  CHECK_THROWS_AS(lipschitz_estimate(rn), Error);
}

TEST_CASE("kkt residual") {
  CHECK(kkt_residual(identity_problem(2, vec({1, 0}), 0.1), vec({1, 0})) == 0.0);
  try {
    kkt_residual(identity_problem(2, vec({1, 0}), 0.1), VectorXd::Zero(2));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroVector);
  }
}

TEST_CASE("kkt residual equals the manifold gradient norm") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto p = random_problem(8, 12, seed);
    CounterRng rng(seed + 7);
    VectorXd x = VectorXd::Zero(12);
    const Support s{1, 4, 5, 9};
    for (Index i : s) x(i) = rng.normal();
    auto phi = [&](const VectorXd& u) {
      VectorXd full = VectorXd::Zero(12);
      for (Index k = 0; k < s.size(); ++k) full(s[k]) = u(k);
      return objective(p, full);
    };
    const VectorXd u = gather(x, s);
    const double fd = oracle::central_gradient(phi, u, 1e-6).norm();
    CHECK(std::abs(kkt_residual(p, x) - fd) <= 1e-6 * std::max(1.0, fd));
  }
}

TEST_CASE("ratio subderivative off the support") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CounterRng rng(seed);
    VectorXd x0 = VectorXd::Zero(8), w = VectorXd::Zero(8);
    for (Index i = 0; i < 4; ++i) x0(i) = rng.normal();
    for (Index i = 4; i < 8; ++i) w(i) = rng.normal();
    const double t = 1e-6;
    const double quotient = (l1_over_l2(x0 + t * w) - l1_over_l2(x0)) / t;
    const double want = w.lpNorm<1>() / x0.norm();
    CHECK(std::abs(quotient - want) <= 1e-3 * want);
  }
}

TEST_CASE("nondegeneracy") {
  const auto free = identity_problem(2, vec({1, 0}), 0.1);
  auto nd = nondegeneracy_check(free, vec({1, 0}));
  CHECK(nd.nondegenerate);
  CHECK(nd.margin == doctest::Approx(0.1));

  // b = (1, g) puts |grad_off| = g exactly at gamma / r with x = e1
  const double gamma = 0.25;
  const auto boundary = identity_problem(2, vec({1, gamma}), gamma);
  nd = nondegeneracy_check(boundary, vec({1, 0}));
  CHECK_FALSE(nd.nondegenerate);
  CHECK(nd.margin == 0.0);

  const auto nonneg = identity_problem(2, vec({1, 0}), 0.1, Cone::NonNeg);
  nd = nondegeneracy_check(nonneg, vec({1, 0}));
  CHECK(nd.nondegenerate);
  CHECK(nd.margin == doctest::Approx(0.1));

  CHECK_THROWS_AS(nondegeneracy_check(free, VectorXd::Zero(2)), Error);
  try {
    nondegeneracy_check(free, vec({3, 0}));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotStationary);
  }
}

TEST_CASE("nondegeneracy margin scales with (c b, c x, c^2 gamma)") {
  const auto p1 = identity_problem(3, vec({2.1, 0.05, -0.1}), 0.3);
  const VectorXd x1 = vec({2, 0, 0});
  REQUIRE(kkt_residual(p1, x1) > 0);  // not exactly stationary; only the off-support part matters
  for (double c : {0.5, 3.0, 10.0}) {
    auto p2 = p1;
    p2.b *= c;
    p2.gamma *= c * c;
    const auto a = nondegeneracy_check(p1, x1, 1.0);
    const auto b = nondegeneracy_check(p2, VectorXd(c * x1), 10.0);
    CHECK(a.nondegenerate == b.nondegenerate);
    CHECK(b.margin == doctest::Approx(c * a.margin).epsilon(1e-12));
  }
}

TEST_CASE("stationarity distance") {
  // stationary with a strict off-support margin
  CHECK(stationarity_distance(identity_problem(2, vec({1, 0.05}), 0.1), vec({1, 0})) == 0.0);
  // off-support gradient beyond gamma/r contributes the excess
  CHECK(stationarity_distance(identity_problem(2, vec({1, 0.3}), 0.1), vec({1, 0})) ==
        doctest::Approx(0.2).epsilon(1e-14));
  CHECK(stationarity_distance(identity_problem(2, vec({1, -0.3}), 0.1, Cone::NonNeg), vec({1, 0})) == 0.0);
}

TEST_CASE("support") {
  const Support s{3, 1};
  CHECK(s.indices() == std::vector<Index>{1, 3});
  CHECK(s.contains(3));
  CHECK_FALSE(s.contains(2));
  CHECK(s.complement(5) == std::vector<Index>{0, 2, 4});
  CHECK(Support::of(vec({0, 2, 0, -1})) == Support{1, 3});
  CHECK_THROWS_AS(Support({1, 1}), Error);
  CHECK(s.fits(4));
  CHECK_FALSE(s.fits(3));
}

TEST_CASE("problem checks") {
  auto p = identity_problem(2, vec({1, 0}), 1);
  CHECK_NOTHROW(p.validate());
  CHECK(p.excludes_trivial_limit());
  p.cone = Cone::NonNeg;
  p.b = vec({-1, 0});
  CHECK_FALSE(p.excludes_trivial_limit());
  p.gamma = 0;
  CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("counter rng") {
  CounterRng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.bits();
    CHECK(x == b.bits());
    CHECK(x != c.bits());
  }
  CounterRng jump(42, 50);
  CounterRng walk(42);
  for (int i = 0; i < 50; ++i) walk.bits();
  CHECK(jump.bits() == walk.bits());

  CounterRng u(1);
  for (int i = 0; i < 10000; ++i) {
    const double v = u.uniform();
    CHECK(v > 0);
    CHECK(v < 1);
    CHECK(u.below(7) < 7);
  }
}

TEST_CASE("normal quantile inverts the normal cdf") {
  for (double p : {1e-12, 1e-6, 0.001, 0.02, 0.3, 0.5, 0.77, 0.975, 0.999999, 1 - 1e-10}) {
    const double z = normal_quantile(p);
    const double back = 0.5 * std::erfc(-z / std::sqrt(2.0));
    CHECK(std::abs(back - p) <= 1e-14 + 1e-12 * std::min(p, 1 - p));
  }
  CHECK(normal_quantile(0.5) == 0.0);
}

TEST_CASE("normal draws have unit moments") {
  CounterRng rng(9);
  double s1 = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s1 += z;
    s2 += z * z;
  }
  CHECK(std::abs(s1 / n) < 0.01);
  CHECK(std::abs(s2 / n - 1) < 0.01);
}
