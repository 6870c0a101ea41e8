#include "ratiopt/cli/app.hpp"

#include "ratiopt/cli/config.hpp"
#include "ratiopt/expkit/dataset.hpp"
#include "ratiopt/expkit/metrics.hpp"
#include "ratiopt/expkit/studies.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace ratiopt::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace ratiopt::expkit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNonConvergence = 2;

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

/// Collects the manifest and writes every output file with its hash.
class Run {
 public:
  Run(std::string command, const Config& cfg) : command_(std::move(command)), cfg_(cfg), started_(utc_now()) {
    hash_ = hex64(fnv1a64(canonical_manifest(command_, cfg_)));
    dir_ = cfg_.str("out");
    fs::create_directories(dir_);
  }

  const std::string& hash() const { return hash_; }

  std::ofstream open_csv(const std::string& name, const std::string& header) {
    const fs::path path = dir_ / name;
    std::ofstream f(path);
    if (!f) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
    f << "# manifest_hash=" << hash_ << "\n" << header << "\n";
    outputs_.push_back(path.string());
    return f;
  }

  void write_json(const std::string& name, json body) {
    const fs::path path = dir_ / name;
    outputs_.push_back(path.string());
    json doc;
    doc["manifest_hash"] = hash_;
    doc["manifest"] = manifest();
    for (auto& [k, v] : body.items()) doc[k] = v;
    std::ofstream f(path);
    if (!f) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
    f << doc.dump(2) << "\n";
  }

 private:
  json manifest() const {
    json m;
    m["command"] = command_;
    json c;
    for (const auto& [k, v] : cfg_.values()) c[k] = v;
    m["config"] = c;
    m["seed"] = cfg_.str("seed");
    m["version"] = kVersion;
    m["started"] = started_;
    m["finished"] = utc_now();
    m["outputs"] = outputs_;
    return m;
  }

  std::string command_;
  const Config& cfg_;
  std::string started_;
  std::string hash_;
  fs::path dir_;
  std::vector<std::string> outputs_;
};

SolverConfig solver_config(const Config& cfg) {
  SolverConfig sc;
  sc.beta = cfg.num("beta");
  sc.T = int(cfg.integer("T"));
  sc.tau = cfg.num("tau");
  sc.imax = int(cfg.integer("imax"));
  sc.rel_tol = cfg.num("rel_tol");
  sc.newton.grad_tol = cfg.num("grad_tol");
  sc.newton.ssn_max = int(cfg.integer("ssn_max"));
  sc.seed = cfg.u64("seed");
  sc.validate();
  return sc;
}

TauMode tau_mode(const Config& cfg) {
  if (!cfg.str("tau_frac").empty()) return FractionOfL1{cfg.num("tau_frac")};
  return AbsoluteTau{cfg.num("tau")};
}

InitKind init_kind(const Config& cfg) {
  const auto& v = cfg.str("init");
  if (v == "zero") return InitKind::Zero;
  if (v == "randn") return InitKind::Randn;
  throw Error(ErrorCode::Parse, "key 'init': expected zero | randn, got '" + v + "'");
}

Fidelity fidelity(const Config& cfg) {
  const auto& v = cfg.str("fidelity");
  if (v == "ls") return Fidelity::LeastSquares;
  if (v == "norm") return Fidelity::ResidualNorm;
  throw Error(ErrorCode::Parse, "key 'fidelity': expected ls | norm, got '" + v + "'");
}

Cone cone(const Config& cfg) {
  const auto& v = cfg.str("cone");
  if (v == "free") return Cone::Free;
  if (v == "nonneg") return Cone::NonNeg;
  throw Error(ErrorCode::Parse, "key 'cone': expected free | nonneg, got '" + v + "'");
}

SynthSpec synth_spec(const Config& cfg) {
  SynthSpec s;
  s.family = parse_family(cfg.str("family"));
  s.r = cfg.num("r");
  s.F = cfg.num("F");
  s.m = Index(cfg.integer("m"));
  s.n = Index(cfg.integer("n"));
  s.s = Index(cfg.integer("s"));
  s.dynamic_D = cfg.num("D");
  s.noise_sigma = cfg.num("sigma");
  s.seed = cfg.u64("seed");
  s.validate();
  return s;
}

template <typename T>
std::vector<T> positive_list(const Config& cfg, const std::string& key) {
  std::vector<T> out;
  for (long long v : cfg.int_list(key)) {
    if (v < 0) throw Error(ErrorCode::Parse, "key '" + key + "': negative entry");
    out.push_back(T(v));
  }
  return out;
}

std::vector<SolverSpec> solver_list(const Config& cfg) {
  std::vector<SolverSpec> out;
  for (const auto& s : cfg.str_list("solvers")) out.push_back(SolverSpec::parse(s, int(cfg.integer("T"))));
  if (out.empty()) throw Error(ErrorCode::Parse, "key 'solvers' is empty");
  return out;
}

int jobs(const Config& cfg) { return std::max(1, int(cfg.integer("jobs"))); }

double safe_kkt(const Problem<double>& p, const VectorXd& x) {
  try {
    return kkt_residual(p, x);
  } catch (const Error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

// ---- solve -----------------------------------------------------------------------------------

int cmd_solve(const Config& cfg, std::ostream& out) {
  Run run("solve", cfg);
  Problem<double> p;
  std::optional<VectorXd> x_true;
  if (cfg.str("source") == "synthetic") {
    auto in = make_instance(synth_spec(cfg));
    p.A = std::move(in.A);
    p.b = std::move(in.b);
    x_true = std::move(in.x_true);
  } else if (cfg.str("source") == "csv") {
    if (cfg.str("data").empty()) throw Error(ErrorCode::Parse, "key 'data' is required for source=csv");
    const Table t = read_csv(cfg.str("data"));
    const Index tc = t.column(cfg.str("target"));
    MatrixXd X(t.data.rows(), t.data.cols() - 1);
    for (Index j = 0, k = 0; j < t.data.cols(); ++j)
      if (j != tc) X.col(k++) = t.data.col(j);
    auto [A, b] = standardize_columns(X, VectorXd(t.data.col(tc)));
    p.A = std::move(A);
    p.b = std::move(b);
  } else {
    throw Error(ErrorCode::Parse, "key 'source': expected synthetic | csv, got '" + cfg.str("source") + "'");
  }
  p.gamma = cfg.num("gamma");
  p.cone = cone(cfg);
  p.fidelity = fidelity(cfg);
  p.validate();

  const SolverConfig sc = solver_config(cfg);
  const SolverSpec solver = SolverSpec::parse(cfg.str("solver"), sc.T);
  const VectorXd x0 = initial_point(init_kind(cfg), p.cols(), sc.seed);
  const SolveOutcome res = run_solver(solver, p, sc, x0, tau_mode(cfg));

  std::string status;
  if (res.hafam) {
    status = res.hafam->phase2_skipped ? "phase1_iteration_cap" : to_string(res.hafam->phase2.status);
  } else {
    status = to_string(res.admm->stop);
  }
  const double kkt = safe_kkt(p, res.x);
  const double re = x_true ? rerr(res.x, *x_true) : std::numeric_limits<double>::quiet_NaN();

  {
    auto f = run.open_csv("series.csv", "phase,iter,relerr,objective,support_size,y_residual,grad_norm,step");
    const AdmmTrace<double>* tr = res.hafam ? &res.hafam->phase1.trace : &res.admm->trace;
    for (std::size_t k = 0; k < tr->size(); ++k)
      f << "admm," << k + 1 << "," << fmt(tr->relerr[k]) << "," << fmt(tr->objective[k]) << ","
        << tr->support[k].size() << "," << fmt(tr->y_residual[k]) << ",nan,nan\n";
    if (res.hafam && !res.hafam->phase2_skipped) {
      const auto& nr = res.hafam->phase2;
      for (std::size_t j = 0; j < nr.grad_norm.size(); ++j)
        f << "newton," << res.hafam->tran_it + int(j) << "," << (j ? fmt(nr.relerr[j - 1]) : "nan") << ","
          << fmt(nr.value[j]) << "," << res.hafam->support.size() << ",nan," << fmt(nr.grad_norm[j]) << ","
          << (j ? fmt(nr.step[j - 1]) : "nan") << "\n";
    }
  }

  json body;
  json result;
  result["solver"] = solver.name();
  result["status"] = status;
  result["converged"] = res.converged;
  result["rerr"] = num(re);
  result["kktr"] = num(kkt);
  result["nnz"] = nnz(res.x);
  result["objective"] = num(objective(p, res.x));
  result["relerr_final"] = num(res.relerr_final);
  result["tran_it"] = res.tran_it;
  result["total_it"] = res.total_it;
  result["wall_seconds"] = res.wall_seconds;
  if (res.hafam) {
    result["support"] = res.hafam->support.indices();
    result["tau_used"] = res.hafam->tau_used;
    result["phase2_iterations"] = res.hafam->phase2.iterations;
    result["phase2_fallbacks"] = res.hafam->phase2.fallbacks;
  }
  if (x_true) result["iacc_truth"] = iacc(res.x, *x_true);
  body["result"] = result;
  std::vector<double> xs(res.x.data(), res.x.data() + res.x.size());
  body["x"] = xs;
  run.write_json("report.json", body);

  out << "solver=" << solver.name() << " status=" << status << " rerr=" << fmt(re) << " kktr=" << fmt(kkt)
      << " nnz=" << nnz(res.x) << " tran_it=" << res.tran_it << " total_it=" << res.total_it
      << " wall_seconds=" << fmt(res.wall_seconds) << " manifest_hash=" << run.hash() << "\n";
  return res.converged ? kExitOk : kExitNonConvergence;
}

// ---- identify --------------------------------------------------------------------------------

const char* kRowHeader = "problem_id,solver,seed,rerr,relerr_final,kktr,iacc,tran_it,total_it,wall_seconds";

void write_row(std::ostream& f, const StudyRow& r) {
  f << r.problem_id << "," << r.solver << "," << r.seed << "," << fmt(r.rerr) << "," << fmt(r.relerr_final) << ","
    << fmt(r.kktr) << "," << fmt(r.iacc) << "," << r.tran_it << "," << r.total_it << "," << fmt(r.wall_seconds)
    << "\n";
}

int cmd_identify(const Config& cfg, std::ostream& out) {
  IdentifyConfig ic;
  ic.family = parse_family(cfg.str("family"));
  ic.r = cfg.num("r");
  ic.F = cfg.num("F");
  ic.n = Index(cfg.integer("n"));
  ic.ms = positive_list<Index>(cfg, "m_list");
  ic.ss = positive_list<Index>(cfg, "s_list");
  ic.Ts = positive_list<int>(cfg, "T_list");
  ic.seeds = int(cfg.integer("seeds"));
  ic.base_seed = cfg.u64("seed");
  ic.D = cfg.num("D");
  ic.gamma = cfg.num("gamma");
  ic.solver = solver_config(cfg);
  if (ic.ms.empty() || ic.ss.empty() || ic.Ts.empty() || ic.seeds < 1)
    throw Error(ErrorCode::InvalidArgument, "identification grid is empty");

  Run run("identify", cfg);
  const auto cells = finite_identification_study(ic, jobs(cfg));
  bool all_done = true;
  json jc = json::array();
  {
    auto f = run.open_csv("identify.csv", "s_over_m,m_over_mmax,m,s,T,mean_iacc,completed,failures");
    auto g = run.open_csv("identify_runs.csv", kRowHeader);
    for (const auto& c : cells) {
      f << fmt(c.s_over_m) << "," << fmt(c.m_over_mmax) << "," << c.m << "," << c.s << "," << c.T << ","
        << fmt(c.mean_iacc) << "," << c.completed << "," << c.failures << "\n";
      for (const auto& r : c.rows) write_row(g, r);
      all_done = all_done && c.failures == 0;
      jc.push_back({{"m", c.m}, {"s", c.s}, {"T", c.T}, {"mean_iacc", num(c.mean_iacc)},
                    {"completed", c.completed}, {"failures", c.failures}});
      out << "m=" << c.m << " s=" << c.s << " T=" << c.T << " mean_iacc=" << fmt(c.mean_iacc)
          << " failures=" << c.failures << "\n";
    }
  }
  run.write_json("identify.json", {{"cells", jc}});
  return all_done ? kExitOk : kExitError;
}

// ---- noisy ----------------------------------------------------------------------------------------

int cmd_noisy(const Config& cfg, std::ostream& out) {
  NoisyConfig nc;
  nc.family = parse_family(cfg.str("family"));
  nc.r = cfg.num("r");
  nc.F = cfg.num("F");
  nc.m = Index(cfg.integer("m"));
  nc.n = Index(cfg.integer("n"));
  nc.s = Index(cfg.integer("s"));
  nc.D = cfg.num("D");
  nc.sigma = cfg.num("sigma");
  nc.tau_multiples = cfg.num_list("tau_mult");
  nc.Ts = positive_list<int>(cfg, "T_list");
  nc.seeds = int(cfg.integer("seeds"));
  nc.base_seed = cfg.u64("seed");
  nc.gamma = cfg.num("gamma");
  nc.solver = solver_config(cfg);

  Run run("noisy", cfg);
  const auto runs = noisy_study(nc, jobs(cfg));
  bool ok = true;
  json js = json::array();
  {
    auto f = run.open_csv("noisy_runs.csv", "seed,T,tau,rerr,iacc_shrunk,tran_it,total_it,error");
    for (const auto& r : runs) {
      f << r.seed << "," << r.T << "," << fmt(r.tau) << "," << fmt(r.rerr) << "," << fmt(r.iacc_shrunk) << ","
        << r.tran_it << "," << r.total_it << "," << (r.error.empty() ? "" : "\"" + r.error + "\"") << "\n";
      ok = ok && r.error.empty();
    }
    auto g = run.open_csv("noisy.csv", "T,tau,mean_rerr,mean_iacc_shrunk,completed");
    for (int T : nc.Ts)
      for (double mult : nc.tau_multiples) {
        double sr = 0, si = 0;
        int c = 0;
        for (const auto& r : runs)
          if (r.T == T && r.tau == mult * nc.sigma && r.error.empty()) {
            sr += r.rerr;
            si += r.iacc_shrunk;
            ++c;
          }
        const double mr = c ? sr / c : std::nan(""), mi = c ? si / c : std::nan("");
        g << T << "," << fmt(mult * nc.sigma) << "," << fmt(mr) << "," << fmt(mi) << "," << c << "\n";
        js.push_back({{"T", T}, {"tau", mult * nc.sigma}, {"mean_rerr", num(mr)}, {"mean_iacc_shrunk", num(mi)},
                      {"completed", c}});
        out << "T=" << T << " tau=" << fmt(mult * nc.sigma) << " mean_rerr=" << fmt(mr)
            << " mean_iacc_shrunk=" << fmt(mi) << "\n";
      }
  }
  run.write_json("noisy.json", {{"summary", js}});
  return ok ? kExitOk : kExitError;
}

// ---- profile ---------------------------------------------------------------------------------------

int cmd_profile(const Config& cfg, std::ostream& out) {
  ProfileConfig pc;
  pc.problems = desk_profile_problems(Index(cfg.integer("m")), Index(cfg.integer("n")),
                                      positive_list<Index>(cfg, "s_list"), cfg.num("D"), cfg.u64("seed"));
  pc.solvers = solver_list(cfg);
  pc.gamma = cfg.num("gamma");
  pc.solver = solver_config(cfg);

  Run run("profile", cfg);
  const auto res = profile_study(pc, jobs(cfg));
  int failures = 0;
  {
    auto f = run.open_csv("profile_runs.csv", kRowHeader);
    for (const auto& r : res.rows) {
      write_row(f, r);
      failures += !r.error.empty();
    }
    for (const auto& [name, mat] : {std::pair{"profile_kkt.csv", &res.kkt_profile}, {"profile_cpu.csv", &res.cpu_profile}}) {
      auto g = run.open_csv(name, "tau,solver,pi");
      for (std::size_t j = 0; j < pc.solvers.size(); ++j)
        for (std::size_t t = 0; t < res.taus.size(); ++t)
          g << fmt(res.taus[t]) << "," << pc.solvers[j].name() << "," << fmt((*mat)(Index(j), Index(t))) << "\n";
    }
  }
  json curves;
  for (std::size_t j = 0; j < pc.solvers.size(); ++j) {
    std::vector<double> k(res.taus.size()), c(res.taus.size());
    for (std::size_t t = 0; t < res.taus.size(); ++t) {
      k[t] = res.kkt_profile(Index(j), Index(t));
      c[t] = res.cpu_profile(Index(j), Index(t));
    }
    curves[pc.solvers[j].name()] = {{"kkt", k}, {"cpu", c}};
    out << "solver=" << pc.solvers[j].name() << " pi_kkt(1)=" << fmt(k.front()) << " pi_cpu(1)=" << fmt(c.front())
        << "\n";
  }
  run.write_json("profile.json", {{"taus", res.taus}, {"curves", curves}, {"failures", failures}});
  return kExitOk;
}

// ---- realdata --------------------------------------------------------------------------------------

int cmd_realdata(const Config& cfg, std::ostream& out) {
  if (cfg.str("data").empty()) throw Error(ErrorCode::Parse, "key 'data' is required");
  const Table table = read_csv(cfg.str("data"));
  RealdataConfig rc;
  rc.target = cfg.str("target");
  rc.ratio = parse_ratio(cfg.str("ratio"));
  rc.repetitions = int(cfg.integer("reps"));
  rc.folds = int(cfg.integer("folds"));
  if (!cfg.str("gamma_grid").empty()) rc.grid = cfg.num_list("gamma_grid");
  if (cfg.origin("gamma") != "default") rc.gamma = cfg.num("gamma");
  rc.solvers = solver_list(cfg);
  rc.tau_frac = cfg.str("tau_frac").empty() ? 0.0 : cfg.num("tau_frac");
  rc.init = init_kind(cfg);
  rc.seed = cfg.u64("seed");
  rc.fidelity = fidelity(cfg);
  rc.solver = solver_config(cfg);

  Run run("realdata", cfg);
  const auto res = realdata_study(table, rc, jobs(cfg));
  bool ok = true;
  json js = json::array();
  {
    auto f = run.open_csv("realdata_runs.csv", "solver,rep,gamma,tmse,nnz,cpu,error");
    for (const auto& r : res.rows) {
      f << r.solver << "," << r.rep << "," << fmt(r.gamma) << "," << fmt(r.tmse) << "," << r.nnz << ","
        << fmt(r.cpu) << "," << (r.error.empty() ? "" : "\"" + r.error + "\"") << "\n";
      ok = ok && r.error.empty();
    }
    auto g = run.open_csv("realdata.csv", "solver,tmse_mean,tmse_std,nnz_mean,cpu_mean,completed");
    for (const auto& s : res.summary) {
      g << s.solver << "," << fmt(s.tmse_mean) << "," << fmt(s.tmse_std) << "," << fmt(s.nnz_mean) << ","
        << fmt(s.cpu_mean) << "," << s.completed << "\n";
      js.push_back({{"solver", s.solver}, {"tmse_mean", num(s.tmse_mean)}, {"tmse_std", num(s.tmse_std)},
                    {"nnz_mean", num(s.nnz_mean)}, {"cpu_mean", num(s.cpu_mean)}, {"completed", s.completed}});
      out << "solver=" << s.solver << " tmse=" << fmt(s.tmse_mean) << " std=" << fmt(s.tmse_std)
          << " nnz=" << fmt(s.nnz_mean) << " cpu=" << fmt(s.cpu_mean) << "\n";
    }
  }
  run.write_json("realdata.json", {{"summary", js}});
  return ok ? kExitOk : kExitError;
}

std::string option_name(const std::string& key) {
  std::string s = key;
  std::replace(s.begin(), s.end(), '_', '-');
  return "--" + s;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"L1/L2-ratio sparse recovery: splitting, support detection and semismooth Newton"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  struct Sub {
    CLI::App* app;
    std::string config_file, preset;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flags;
    std::function<int(const Config&, std::ostream&)> body;
  };
  std::vector<std::unique_ptr<Sub>> subs;
  auto add = [&](const std::string& name, const std::string& help, std::function<int(const Config&, std::ostream&)> body) {
    auto s = std::make_unique<Sub>();
    s->app = app.add_subcommand(name, help);
    s->body = std::move(body);
    s->app->add_option("--config", s->config_file, "key=value configuration file");
    s->app->add_option("--preset", s->preset, "named experiment preset");
    s->app->add_option("--set", s->sets, "override as key=value (repeatable)");
    for (const auto& k : known_keys()) s->app->add_option(option_name(k.name), s->flags[k.name], k.help);
    subs.push_back(std::move(s));
  };
  add("solve", "solve one problem and write report.json + series.csv", cmd_solve);
  add("identify", "finite-identification study (IAcc heatmap)", cmd_identify);
  add("noisy", "hard-shrink sweep on noisy data", cmd_noisy);
  add("profile", "performance profiles over a problem set", cmd_profile);
  add("realdata", "CSV regression pipeline with cross-validated gamma", cmd_realdata);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  for (const auto& s : subs) {
    if (!s->app->parsed()) continue;
    try {
      Config cfg;
      if (!s->preset.empty()) cfg.apply_preset(s->preset);
      if (!s->config_file.empty()) cfg.load_file(s->config_file);
      cfg.apply_env();
      for (const auto& k : known_keys())
        if (s->app->get_option(option_name(k.name))->count() > 0)
          cfg.set(k.name, s->flags[k.name], "flag " + option_name(k.name));
      for (const auto& kv : s->sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::Parse, "--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1), "flag --set");
      }
      return s->body(cfg, out);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitError;
    }
  }
  return kExitError;
}

}  // namespace ratiopt::cli
