#include "ratiopt/expkit/studies.hpp"

#include "ratiopt/expkit/metrics.hpp"
#include "ratiopt/random.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace ratiopt::expkit {

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const auto n = std::min<std::size_t>(std::size_t(jobs), count);
  for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

SolverSpec SolverSpec::parse(const std::string& text, int default_T) {
  if (text == "admm") return {SolverKind::Admm, default_T};
  if (text == "admm-l1") return {SolverKind::AdmmL1, default_T};
  if (text == "hafam") return {SolverKind::Hafam, default_T};
  if (text.rfind("hafam", 0) == 0) {
    const std::string tail = text.substr(5);
    if (!tail.empty() && tail.find_first_not_of("0123456789") == std::string::npos)
      return {SolverKind::Hafam, std::stoi(tail)};
  }
  throw Error(ErrorCode::InvalidArgument, "unknown solver '" + text + "' (admm|admm-l1|hafam|hafamN)");
}

std::string SolverSpec::name() const {
  switch (kind) {
    case SolverKind::Admm: return "admm";
    case SolverKind::AdmmL1: return "admm-l1";
    case SolverKind::Hafam: return "hafam" + std::to_string(T);
  }
  return "unknown";
}

VectorXd initial_point(InitKind init, Index n, std::uint64_t seed) {
  if (init == InitKind::Zero) return VectorXd::Zero(n);
  CounterRng rng(derive_seed(seed, 6));
  VectorXd x(n);
  for (Index i = 0; i < n; ++i) x(i) = rng.normal();
  return x;
}

SolveOutcome run_solver(const SolverSpec& solver, const Problem<double>& p, const SolverConfig& cfg,
                        const VectorXd& x0, const TauMode& tau) {
  SolveOutcome out;
  if (solver.kind == SolverKind::Hafam) {
    SolverConfig c = cfg;
    c.T = solver.T;
    auto rep = run_hafam(p, c, x0, tau);
    out.x = rep.x_final;
    out.x_phase1 = rep.x_phase1;
    out.tran_it = rep.tran_it;
    out.total_it = rep.total_it;
    out.converged = !rep.phase2_skipped && rep.phase2.status == NewtonStatus::Converged;
    if (!rep.phase2_skipped && !rep.phase2.relerr.empty())
      out.relerr_final = rep.phase2.relerr.back();
    else
      out.relerr_final = rep.phase1.state.relerr;
    out.wall_seconds = rep.wall_seconds;
    out.hafam = std::move(rep);
    return out;
  }
  auto run = solver.kind == SolverKind::Admm ? run_admm(p, cfg, x0) : run_admm_l1_baseline(p, cfg, x0);
  out.x = run.state.x;
  out.x_phase1 = run.state.x;
  out.tran_it = run.state.k;
  out.total_it = run.state.k;
  out.converged = run.stop == StopReason::RelErr;
  out.relerr_final = run.state.relerr;
  out.wall_seconds = run.wall_seconds;
  out.admm = std::move(run);
  return out;
}

namespace {

std::uint64_t cell_seed(std::uint64_t base, Index m, Index s, int i) {
  return derive_seed(derive_seed(base, std::uint64_t(m) * 100003u + std::uint64_t(s)), std::uint64_t(i));
}

Problem<double> problem_of(const SynthInstance& in, double gamma) {
  Problem<double> p;
  p.A = in.A;
  p.b = in.b;
  p.gamma = gamma;
  return p;
}

double safe_kkt(const Problem<double>& p, const VectorXd& x) {
  try {
    return kkt_residual(p, x);
  } catch (const Error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

std::vector<IdentifyCell> finite_identification_study(const IdentifyConfig& cfg, int jobs) {
  if (cfg.ms.empty() || cfg.ss.empty() || cfg.Ts.empty() || cfg.seeds < 1)
    throw Error(ErrorCode::InvalidArgument, "identification grid is empty");
  const Index m_max = *std::max_element(cfg.ms.begin(), cfg.ms.end());

  struct Task {
    Index m, s;
    int seed;
  };
  std::vector<Task> tasks;
  for (Index m : cfg.ms)
    for (Index s : cfg.ss)
      for (int i = 0; i < cfg.seeds; ++i) tasks.push_back({m, s, i});

  std::vector<std::vector<StudyRow>> results(tasks.size());
  parallel_for(tasks.size(), jobs, [&](std::size_t k) {
    const Task& t = tasks[k];
    SynthSpec spec;
    spec.family = cfg.family;
    spec.r = cfg.r;
    spec.F = cfg.F;
    spec.m = t.m;
    spec.n = cfg.n;
    spec.s = t.s;
    spec.dynamic_D = cfg.D;
    spec.seed = cell_seed(cfg.base_seed, t.m, t.s, t.seed);
    const std::string id = "m" + std::to_string(t.m) + "_s" + std::to_string(t.s);
    auto& rows = results[k];
    try {
      const auto in = make_instance(spec);
      const auto p = problem_of(in, cfg.gamma);
      const VectorXd x0 = VectorXd::Zero(cfg.n);
      const auto admm = run_admm(p, cfg.solver, x0);
      for (int T : cfg.Ts) {
        StudyRow row;
        row.problem_id = id;
        row.solver = "hafam" + std::to_string(T) + "-phase1";
        row.seed = spec.seed;
        try {
          SolverConfig c = cfg.solver;
          c.T = T;
          const auto ph1 = run_admm(p, c, x0, stability_predicate<double>(T));
          row.iacc = iacc(admm.state.x, ph1.state.x);
          row.rerr = rerr(ph1.state.x, in.x_true);
          row.relerr_final = ph1.state.relerr;
          row.kktr = safe_kkt(p, ph1.state.x);
          row.tran_it = ph1.state.k;
          row.total_it = ph1.state.k;
          row.wall_seconds = ph1.wall_seconds;
        } catch (const std::exception& e) {
          row.error = e.what();
        }
        rows.push_back(row);
      }
    } catch (const std::exception& e) {
      for (int T : cfg.Ts) {
        StudyRow row;
        row.problem_id = id;
        row.solver = "hafam" + std::to_string(T) + "-phase1";
        row.seed = spec.seed;
        row.error = e.what();
        rows.push_back(row);
      }
    }
  });

  std::vector<IdentifyCell> cells;
  for (Index m : cfg.ms)
    for (Index s : cfg.ss)
      for (std::size_t ti = 0; ti < cfg.Ts.size(); ++ti) {
        IdentifyCell c;
        c.m = m;
        c.s = s;
        c.T = cfg.Ts[ti];
        c.s_over_m = double(s) / double(m);
        c.m_over_mmax = double(m) / double(m_max);
        double sum = 0;
        for (std::size_t k = 0; k < tasks.size(); ++k) {
          if (tasks[k].m != m || tasks[k].s != s) continue;
          const StudyRow& row = results[k][ti];
          c.rows.push_back(row);
          if (row.error.empty()) {
            sum += row.iacc;
            ++c.completed;
          } else {
            ++c.failures;
          }
        }
        c.mean_iacc = c.completed ? sum / c.completed : std::numeric_limits<double>::quiet_NaN();
        cells.push_back(std::move(c));
      }
  return cells;
}

std::vector<NoisyRun> noisy_study(const NoisyConfig& cfg, int jobs) {
  if (cfg.Ts.empty() || cfg.tau_multiples.empty() || cfg.seeds < 1)
    throw Error(ErrorCode::InvalidArgument, "noisy study grid is empty");
  const std::size_t per_seed = cfg.Ts.size() * cfg.tau_multiples.size();
  std::vector<NoisyRun> runs(std::size_t(cfg.seeds) * per_seed);
  parallel_for(std::size_t(cfg.seeds), jobs, [&](std::size_t i) {
    SynthSpec spec;
    spec.family = cfg.family;
    spec.r = cfg.r;
    spec.F = cfg.F;
    spec.m = cfg.m;
    spec.n = cfg.n;
    spec.s = cfg.s;
    spec.dynamic_D = cfg.D;
    spec.noise_sigma = cfg.sigma;
    spec.seed = cell_seed(cfg.base_seed, cfg.m, cfg.s, int(i));
    const auto in = make_instance(spec);
    const auto p = problem_of(in, cfg.gamma);
    std::size_t slot = i * per_seed;
    for (int T : cfg.Ts)
      for (double mult : cfg.tau_multiples) {
        NoisyRun& r = runs[slot++];
        r.seed = spec.seed;
        r.T = T;
        r.tau = mult * cfg.sigma;
        try {
          SolverConfig c = cfg.solver;
          c.T = T;
          const auto rep = run_hafam(p, c, VectorXd::Zero(cfg.n), AbsoluteTau{r.tau});
          r.rerr = rerr(rep.x_final, in.x_true);
          r.iacc_shrunk = iacc(hard_shrink_support(rep.x_phase1, r.tau).first, in.x_true);
          r.tran_it = rep.tran_it;
          r.total_it = rep.total_it;
        } catch (const std::exception& e) {
          r.error = e.what();
          r.rerr = std::numeric_limits<double>::quiet_NaN();
          r.iacc_shrunk = std::numeric_limits<double>::quiet_NaN();
        }
      }
  });
  return runs;
}

std::vector<ProfileProblem> desk_profile_problems(Index m, Index n, const std::vector<Index>& s_list, double D,
                                                  std::uint64_t base_seed) {
  std::vector<ProfileProblem> out;
  int k = 0;
  auto add = [&](Family fam, double param, const std::string& tag) {
    for (Index s : s_list) {
      ProfileProblem pp;
      pp.spec.family = fam;
      if (fam == Family::GaussianCorr)
        pp.spec.r = param;
      else
        pp.spec.F = param;
      pp.spec.m = m;
      pp.spec.n = n;
      pp.spec.s = s;
      pp.spec.dynamic_D = D;
      pp.spec.seed = derive_seed(base_seed, std::uint64_t(k++));
      pp.id = tag + "_s" + std::to_string(s);
      out.push_back(pp);
    }
  };
  for (double r : {0.7, 0.8, 0.9}) add(Family::GaussianCorr, r, "gauss_r" + std::to_string(int(std::lround(r * 10))));
  for (double F : {5.0, 10.0, 15.0}) add(Family::ODCT, F, "odct_F" + std::to_string(int(F)));
  return out;
}

ProfileResult profile_study(const ProfileConfig& cfg, int jobs) {
  if (cfg.problems.empty() || cfg.solvers.empty())
    throw Error(ErrorCode::InvalidArgument, "profile needs problems and solvers");
  ProfileResult res;
  res.taus = cfg.taus;
  if (res.taus.empty())
    for (int i = 0; i <= 36; ++i) res.taus.push_back(1.0 + 0.25 * i);

  const std::size_t J = cfg.solvers.size();
  res.rows.resize(cfg.problems.size() * J);
  parallel_for(res.rows.size(), jobs, [&](std::size_t k) {
    const auto& pp = cfg.problems[k / J];
    const auto& sol = cfg.solvers[k % J];
    StudyRow& row = res.rows[k];
    row.problem_id = pp.id;
    row.solver = sol.name();
    row.seed = pp.spec.seed;
    try {
      const auto in = make_instance(pp.spec);
      const auto p = problem_of(in, cfg.gamma);
      const auto out = run_solver(sol, p, cfg.solver, VectorXd::Zero(pp.spec.n), AbsoluteTau{cfg.solver.tau});
      row.rerr = rerr(out.x, in.x_true);
      row.relerr_final = out.relerr_final;
      row.kktr = safe_kkt(p, out.x);
      row.iacc = iacc(out.x, in.x_true);
      row.tran_it = out.tran_it;
      row.total_it = out.total_it;
      row.wall_seconds = out.wall_seconds;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });

  const double inf = std::numeric_limits<double>::infinity();
  const double tiny = std::numeric_limits<double>::denorm_min();
  MatrixXd kkt(Index(cfg.problems.size()), Index(J)), cpu(Index(cfg.problems.size()), Index(J));
  for (std::size_t k = 0; k < res.rows.size(); ++k) {
    const StudyRow& row = res.rows[k];
    const bool failed = !row.error.empty() || !std::isfinite(row.kktr);
    kkt(Index(k / J), Index(k % J)) = failed ? inf : std::max(row.kktr, tiny);
    cpu(Index(k / J), Index(k % J)) = failed ? inf : std::max(row.wall_seconds, tiny);
  }
  res.kkt_profile = performance_profile(kkt, res.taus);
  res.cpu_profile = performance_profile(cpu, res.taus);
  return res;
}

RealdataResult realdata_study(const Table& table, const RealdataConfig& cfg, int jobs) {
  if (cfg.solvers.empty()) throw Error(ErrorCode::InvalidArgument, "no solvers requested");
  if (cfg.repetitions < 1) throw Error(ErrorCode::InvalidArgument, "repetitions must be positive");

  std::vector<Dataset> sets;
  for (int rep = 0; rep < cfg.repetitions; ++rep)
    sets.push_back(make_dataset(table, cfg.target, cfg.ratio, cfg.folds, derive_seed(cfg.seed, std::uint64_t(rep))));

  const std::size_t J = cfg.solvers.size();
  RealdataResult res;
  res.rows.resize(sets.size() * J);
  parallel_for(res.rows.size(), jobs, [&](std::size_t k) {
    const int rep = int(k / J);
    const SolverSpec& sol = cfg.solvers[k % J];
    const Dataset& ds = sets[std::size_t(rep)];
    RealdataRow& row = res.rows[k];
    row.solver = sol.name();
    row.rep = rep;
    const TauMode tau = FractionOfL1{cfg.tau_frac};
    auto fit = [&](const MatrixXd& A, const VectorXd& b, double gamma) {
      Problem<double> p;
      p.A = A;
      p.b = b;
      p.gamma = gamma;
      p.fidelity = cfg.fidelity;
      return run_solver(sol, p, cfg.solver, initial_point(cfg.init, A.cols(), cfg.seed), tau).x;
    };
    try {
      row.gamma = cfg.gamma ? *cfg.gamma : cross_validate_gamma(ds, cfg.grid, fit).gamma;
      const auto t1 = std::chrono::steady_clock::now();
      const VectorXd x = fit(ds.A_train, ds.b_train, row.gamma);
      row.cpu = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
      row.tmse = tmse(ds.A_test, ds.b_test, x);
      row.nnz = nnz(x);
    } catch (const std::exception& e) {
      row.error = e.what();
      row.tmse = std::numeric_limits<double>::quiet_NaN();
    }
  });

  for (std::size_t j = 0; j < J; ++j) {
    RealdataSummary s;
    s.solver = cfg.solvers[j].name();
    double sum = 0, sq = 0, nz = 0, cpu = 0;
    for (std::size_t k = j; k < res.rows.size(); k += J) {
      const auto& row = res.rows[k];
      if (!row.error.empty()) continue;
      ++s.completed;
      sum += row.tmse;
      sq += row.tmse * row.tmse;
      nz += double(row.nnz);
      cpu += row.cpu;
    }
    if (s.completed) {
      const double c = s.completed;
      s.tmse_mean = sum / c;
      s.tmse_std = s.completed > 1 ? std::sqrt(std::max(0.0, (sq - c * s.tmse_mean * s.tmse_mean) / (c - 1))) : 0;
      s.nnz_mean = nz / c;
      s.cpu_mean = cpu / c;
    } else {
      s.tmse_mean = s.tmse_std = s.nnz_mean = s.cpu_mean = std::numeric_limits<double>::quiet_NaN();
    }
    res.summary.push_back(s);
  }
  return res;
}

}  // namespace ratiopt::expkit
