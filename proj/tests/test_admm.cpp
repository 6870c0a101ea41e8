#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ratiopt/admm.hpp"
#include "ratiopt/random.hpp"

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

MatrixXd randn(Index m, Index n, std::uint64_t seed) {
  CounterRng rng(seed);
  MatrixXd A(m, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) A(i, j) = rng.normal();
  return A;
}

VectorXd randn(Index n, std::uint64_t seed) { return randn(n, 1, seed).col(0); }

// Sparse recovery instance with well-separated nonzeros.
Problem<double> sparse_instance(Index m, Index n, Index s, std::uint64_t seed, double gamma) {
  Problem<double> p;
  p.A = randn(m, n, seed);
  VectorXd x = VectorXd::Zero(n);
  CounterRng rng(seed + 1000);
  for (Index k = 0; k < s; ++k) x((k * 7 + 3) % n) = (rng.uniform() < 0.5 ? -1 : 1) * (1 + rng.uniform());
  p.b = p.A * x;
  p.gamma = gamma;
  return p;
}

}  // namespace

TEST_CASE("least-squares y-update examples") {
  Problem<double> p{MatrixXd::Ones(1, 1), VectorXd::Ones(1), 1};
  CHECK(y_update_least_squares(p, 2.0, VectorXd::Zero(1))(0) == doctest::Approx(1.0 / 3).epsilon(1e-15));

  Problem<double> z{MatrixXd::Zero(1, 1), VectorXd::Zero(1), 1};
  CHECK(y_update_least_squares(z, 0.7, vec({4.2}))(0) == doctest::Approx(4.2).epsilon(1e-15));

  CHECK_THROWS_AS(y_update_least_squares(p, 0.0, VectorXd::Zero(1)), Error);
  Problem<double> bad{MatrixXd::Constant(1, 1, std::nan("")), VectorXd::Ones(1), 1};
  try {
    LeastSquaresYSolver<double>(bad.A, bad.b, 1.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FactorizationFailure);
  }
}

TEST_CASE("least-squares y-update matches a dense solve on both paths") {
  for (auto [m, n] : {std::pair<Index, Index>{10, 40}, {40, 10}}) {
    Problem<double> p{randn(m, n, 1), randn(m, 2), 1};
    const VectorXd v = randn(n, 3);
    const double beta = 0.37;
    const VectorXd y = y_update_least_squares(p, beta, v);
    MatrixXd K = p.A.transpose() * p.A;
    K.diagonal().array() += beta;
    const VectorXd rhs = p.A.transpose() * p.b + beta * v;
    CHECK((K * y - rhs).norm() <= 1e-10 * rhs.norm());
    CHECK((y - K.ldlt().solve(rhs)).norm() <= 1e-10 * y.norm());
  }
}

TEST_CASE("residual-norm y-update examples") {
  Problem<double> p{MatrixXd::Identity(2, 2), vec({1, -2}), 1, Cone::Free, Fidelity::ResidualNorm};
  CHECK((y_update_residual_norm(p, 3.0, vec({1, -2})) - vec({1, -2})).norm() == 0.0);

  Problem<double> q{MatrixXd::Identity(2, 2), VectorXd::Zero(2), 1, Cone::Free, Fidelity::ResidualNorm};
  CHECK((y_update_residual_norm(q, 1.0, vec({3, 4})) - vec({2.4, 3.2})).norm() < 1e-12);

  // below the shrink level the block solution sits on A y = b
  CHECK(y_update_residual_norm(q, 1.0, vec({0.3, 0.4})).norm() < 1e-12);
  CHECK_THROWS_AS(y_update_least_squares(q, 1.0, vec({0, 0})), Error);
}

TEST_CASE("residual-norm y-update approaches v for large beta") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (auto [m, n] : {std::pair<Index, Index>{6, 15}, {15, 6}}) {
      Problem<double> p{randn(m, n, seed), randn(m, seed + 50), 1, Cone::Free, Fidelity::ResidualNorm};
      const VectorXd v = randn(n, seed + 99);
      for (double beta : {1e2, 1e3, 1e4}) {
        const auto sol = ResidualNormYSolver<double>(p.A, p.b, beta).solve(v);
        CHECK((sol.y - v).norm() <= 10 / beta);
        if (!sol.on_singular_set) CHECK(sol.subgradient_residual <= 1e-9);
      }
      // small beta: the stationarity of the returned point is checked independently
      const double beta = 0.05;
      const VectorXd y = y_update_residual_norm(p, beta, v);
      const VectorXd res = p.A * y - p.b;
      if (res.norm() > 1e-10) {
        const VectorXd g = p.A.transpose() * res / res.norm() + beta * (y - v);
        CHECK(g.norm() <= 1e-8);
      } else {
        CHECK(m < n);
      }
    }
  }
}

TEST_CASE("z-update arithmetic") {
  // gamma huge forces x+ = 0; y+ then solves (I + 2I) y = 0 + 2 (x+ + z/2) with A = I, b = 0
  Problem<double> p{MatrixXd::Identity(2, 2), VectorXd::Zero(2), 1e6};
  SolverConfig cfg;
  cfg.beta = 2;
  AdmmEngine<double> engine(p, cfg);
  AdmmState<double> st = engine.initial_state(VectorXd::Zero(2));
  st.z = vec({1, -1});
  const VectorXd z0 = st.z;
  engine.step(st);
  CHECK(st.z == z0 + cfg.beta * (st.x - st.y));
  CHECK(st.k == 1);

  // literal numbers from the z-update rule
  const VectorXd x_next = vec({1, 0}), y_next = vec({0, 0});
  CHECK(VectorXd(VectorXd::Zero(2) + 2.0 * (x_next - y_next)) == vec({2, 0}));
}

TEST_CASE("trivial instance converges to a stationary point") {
  Problem<double> p{MatrixXd::Identity(2, 2), vec({5, 0}), 1e-4};
  SolverConfig cfg;
  cfg.beta = 2.5;
  const auto run = run_admm(p, cfg, VectorXd::Zero(2));
  CHECK(run.stop == StopReason::RelErr);
  CHECK(kkt_residual(p, run.state.x) <= 1e-6);
  CHECK(run.state.k <= cfg.imax + 1);
}

TEST_CASE("iteration cap") {
  Problem<double> p{MatrixXd::Identity(2, 2), vec({5, 0}), 1e-4};
  SolverConfig cfg;
  cfg.beta = 2.5;
  cfg.imax = 0;
  auto run = run_admm(p, cfg, VectorXd::Zero(2));
  CHECK(run.state.k == 0);
  CHECK(run.stop == StopReason::IterationCap);
  cfg.imax = 3;
  cfg.rel_tol = 0;
  run = run_admm(p, cfg, VectorXd::Zero(2));
  CHECK(run.state.k == 3);
  CHECK(run.trace.size() == 3);
}

TEST_CASE("splitting identities hold every iteration") {
  const auto p = sparse_instance(30, 90, 4, 7, 1e-3);
  SolverConfig cfg;
  cfg.beta = 0.05 * p.A.squaredNorm() / p.cols();
  AdmmEngine<double> engine(p, cfg);
  AdmmState<double> st = engine.initial_state(VectorXd::Zero(p.cols()));
  AdmmTrace<double> trace;
  for (int k = 0; k < 200; ++k) {
    engine.step(st, &trace);
    const VectorXd grad_y = p.A.transpose() * (p.A * st.y - p.b);
    CHECK((grad_y - st.z).norm() <= 1e-9 * (1 + st.z.norm()));
    const double dist = trace.stationarity.back();
    if (!std::isnan(dist)) CHECK(dist <= trace.kkt_upper_bound.back() * (1 + 1e-9) + 1e-12);
  }
  CHECK(trace.relerr.size() == trace.objective.size());
  CHECK(trace.support.size() == trace.y_residual.size());
  CHECK(static_cast<int>(st.support_history.size()) <= cfg.T + 1);
}

TEST_CASE("y residual decays on a converged run") {
  const auto p = sparse_instance(40, 120, 5, 11, 1e-3);
  SolverConfig cfg;
  cfg.beta = 0.4;
  const auto run = run_admm(p, cfg, VectorXd::Zero(p.cols()));
  REQUIRE(run.stop == StopReason::RelErr);
  const auto& r = run.trace.y_residual;
  const std::size_t dec = std::max<std::size_t>(1, r.size() / 10);
  double first = 0, last = 0;
  for (std::size_t i = 0; i < dec; ++i) {
    first += r[i];
    last += r[r.size() - 1 - i];
  }
  CHECK(last < first);
}

TEST_CASE("runs are deterministic") {
  const auto p = sparse_instance(20, 60, 3, 5, 1e-3);
  SolverConfig cfg;
  cfg.beta = 1;
  const auto a = run_admm(p, cfg, VectorXd::Zero(60));
  const auto b = run_admm(p, cfg, VectorXd::Zero(60));
  CHECK(a.state.x == b.state.x);
  CHECK(a.trace.relerr == b.trace.relerr);
}

TEST_CASE("nonnegative splitting stays in the cone") {
  auto p = sparse_instance(30, 80, 4, 3, 1e-3);
  p.cone = Cone::NonNeg;
  SolverConfig cfg;
  cfg.beta = 1;
  cfg.imax = 100;
  const auto run = run_admm(p, cfg, VectorXd::Zero(80));
  CHECK(run.state.x.minCoeff() >= 0);
}

TEST_CASE("residual-norm splitting runs") {
  auto p = sparse_instance(30, 80, 4, 13, 1e-2);
  p.fidelity = Fidelity::ResidualNorm;
  p.b += 0.01 * randn(30, 77);
  SolverConfig cfg;
  cfg.beta = 1;
  cfg.imax = 300;
  const auto run = run_admm(p, cfg, VectorXd::Zero(80));
  CHECK(run.state.x.allFinite());
  CHECK(run.trace.size() > 0);
}

TEST_CASE("L1 baseline limits") {
  Problem<double> p{MatrixXd::Identity(3, 3), vec({1, 0, 0}), 10};
  SolverConfig cfg;
  cfg.beta = 1;
  auto run = run_admm_l1_baseline(p, cfg, VectorXd::Zero(3));
  CHECK(run.state.x.isZero(0));

  p.gamma = 1e-9;
  p.b = vec({1, -2, 0.5});
  run = run_admm_l1_baseline(p, cfg, VectorXd::Zero(3));
  CHECK((run.state.x - p.b).norm() < 1e-6);
}

TEST_CASE("L1 baseline satisfies the lasso optimality conditions") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto p = sparse_instance(25, 60, 3, seed, 0.5);
    SolverConfig cfg;
    cfg.beta = 5;
    cfg.rel_tol = 1e-12;
    cfg.imax = 20000;
    const auto run = run_admm_l1_baseline(p, cfg, VectorXd::Zero(60));
    const VectorXd g = p.A.transpose() * (p.A * run.state.x - p.b);
    for (Index i = 0; i < 60; ++i) {
      if (run.state.x(i) == 0) CHECK(std::abs(g(i)) <= p.gamma + 1e-6);
      else CHECK(std::abs(g(i) + p.gamma * (run.state.x(i) > 0 ? 1 : -1)) <= 1e-5);
    }
  }
}

TEST_CASE("relerr") {
  CHECK(relerr(vec({1, 2}), vec({1, 2})) == 0.0);
  CHECK(relerr(VectorXd::Zero(2), VectorXd::Zero(2)) == 0.0);
  CHECK(relerr(vec({0, 0}), vec({3, 4})) == doctest::Approx(1.0));
}
