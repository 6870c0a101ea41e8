#pragma once

// Solver facade and the experiment drivers: finite identification, noisy hard-shrink sweep,
// performance profiles and the real-data pipeline.

#include "ratiopt/expkit/dataset.hpp"
#include "ratiopt/expkit/generators.hpp"
#include "ratiopt/hafam.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ratiopt::expkit {

/// Runs fn(0..count-1) on `jobs` threads (jobs <= 1: inline, in order).
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

enum class SolverKind { Admm, Hafam, AdmmL1 };

struct SolverSpec {
  SolverKind kind = SolverKind::Hafam;
  int T = 5;  // Hafam only

  /// "admm", "admm-l1", "hafam" (T from config) or "hafamN".
  static SolverSpec parse(const std::string& text, int default_T);
  std::string name() const;
};

enum class InitKind { Zero, Randn };

VectorXd initial_point(InitKind init, Index n, std::uint64_t seed);

struct SolveOutcome {
  VectorXd x;
  VectorXd x_phase1;  // x^I for hafam, x otherwise
  int tran_it = 0;
  int total_it = 0;
  bool converged = false;  // RelErr or Newton gradient test met
  double relerr_final = 0;
  double wall_seconds = 0;
  std::optional<HafamReport<double>> hafam;
  std::optional<AdmmRun<double>> admm;
};

SolveOutcome run_solver(const SolverSpec& solver, const Problem<double>& p, const SolverConfig& cfg,
                        const VectorXd& x0, const TauMode& tau);

/// One line of a study CSV.
struct StudyRow {
  std::string problem_id;
  std::string solver;
  std::uint64_t seed = 0;
  double rerr = 0;
  double relerr_final = 0;
  double kktr = 0;
  double iacc = 0;
  int tran_it = 0;
  int total_it = 0;
  double wall_seconds = 0;
  std::string error;  // nonempty when the run threw
};

// ---- finite identification ---------------------------------------------------------------

struct IdentifyConfig {
  Family family = Family::GaussianCorr;
  double r = 0.8;
  double F = 10;
  Index n = 256;
  std::vector<Index> ms{32, 64};
  std::vector<Index> ss{2, 4, 8};
  std::vector<int> Ts{5, 30};
  int seeds = 10;
  std::uint64_t base_seed = 0;
  double D = 1;
  double gamma = 1e-4;
  SolverConfig solver{};
};

struct IdentifyCell {
  Index m = 0, s = 0;
  int T = 0;
  double s_over_m = 0, m_over_mmax = 0;
  double mean_iacc = 0;  // over completed seeds
  int completed = 0;
  int failures = 0;
  std::vector<StudyRow> rows;
};

/// For each (m, s) and seed: x_hat from standalone ADMM to the RelErr rule, x^I_T from the
/// stability rule; cell value = mean IAcc(x_hat, x^I_T).
std::vector<IdentifyCell> finite_identification_study(const IdentifyConfig& cfg, int jobs = 1);

// ---- noisy data / hard shrinkage ------------------------------------------------------------

struct NoisyConfig {
  Family family = Family::ODCT;
  double r = 0.8;
  double F = 10;
  Index m = 64, n = 1024, s = 6;
  double D = 1;
  double sigma = 0.05;
  std::vector<double> tau_multiples{0, 1, 2, 3};  // tau = multiple * sigma
  std::vector<int> Ts{5, 30};
  int seeds = 10;
  std::uint64_t base_seed = 0;
  double gamma = 1e-4;
  SolverConfig solver{};
};

struct NoisyRun {
  std::uint64_t seed = 0;
  int T = 0;
  double tau = 0;
  double rerr = 0;         // final HAFAM iterate vs x*
  double iacc_shrunk = 0;  // IAcc(HARD(x^I, tau), x*)
  int tran_it = 0, total_it = 0;
  std::string error;
};

std::vector<NoisyRun> noisy_study(const NoisyConfig& cfg, int jobs = 1);

// ---- performance profiles ----------------------------------------------------------------------

struct ProfileProblem {
  std::string id;
  SynthSpec spec;
};

struct ProfileConfig {
  std::vector<ProfileProblem> problems;
  std::vector<SolverSpec> solvers;
  double gamma = 1e-4;
  SolverConfig solver{};
  std::vector<double> taus;  // grid for pi_j(tau); empty -> 1..10 in steps of 0.25
};

/// Desk-scale problem set: Gaussian r in {0.7,0.8,0.9} and O-DCT F in {5,10,15}, s in s_list.
std::vector<ProfileProblem> desk_profile_problems(Index m, Index n, const std::vector<Index>& s_list, double D,
                                                  std::uint64_t base_seed);

struct ProfileResult {
  std::vector<StudyRow> rows;  // problems x solvers, problem-major
  std::vector<double> taus;
  MatrixXd kkt_profile;  // solvers x taus
  MatrixXd cpu_profile;  // solvers x taus
};

ProfileResult profile_study(const ProfileConfig& cfg, int jobs = 1);

// ---- real data -----------------------------------------------------------------------------------

struct RealdataConfig {
  std::string target = "target";
  double ratio = 0.8;
  int repetitions = 1;
  int folds = 10;
  std::vector<double> grid = default_gamma_grid();
  std::vector<SolverSpec> solvers;
  std::optional<double> gamma;  // skip cross-validation when set
  double tau_frac = 0;          // hard shrink by fraction of ||x^I||_1 (hafam)
  InitKind init = InitKind::Zero;
  std::uint64_t seed = 0;
  Fidelity fidelity = Fidelity::LeastSquares;
  SolverConfig solver{};
};

struct RealdataRow {
  std::string solver;
  int rep = 0;
  double gamma = 0;
  double tmse = 0;
  Index nnz = 0;
  double cpu = 0;
  std::string error;
};

struct RealdataSummary {
  std::string solver;
  double tmse_mean = 0, tmse_std = 0, nnz_mean = 0, cpu_mean = 0;
  int completed = 0;
};

struct RealdataResult {
  std::vector<RealdataRow> rows;
  std::vector<RealdataSummary> summary;  // one per solver, input order
};

RealdataResult realdata_study(const Table& table, const RealdataConfig& cfg, int jobs = 1);

}  // namespace ratiopt::expkit
