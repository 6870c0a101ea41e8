#include "ratiopt/cli/config.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace ratiopt::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

Error bad_value(const std::string& key, const std::string& value, const std::string& want) {
  return Error(ErrorCode::Parse, "key '" + key + "': expected " + want + ", got '" + value + "'");
}

const std::map<std::string, std::vector<std::pair<std::string, std::string>>>& presets() {
  static const std::map<std::string, std::vector<std::pair<std::string, std::string>>> table = {
      {"table1-gaussian",
       {{"family", "gaussian"}, {"r", "0.8"}, {"m", "256"}, {"n", "2048"}, {"s", "12"}, {"D", "1"},
        {"sigma", "0"}, {"gamma", "1e-4"}, {"beta", "0.015"}, {"T", "5"}, {"tau", "0"}, {"solver", "hafam"}}},
      {"table1-odct",
       {{"family", "odct"}, {"F", "10"}, {"m", "256"}, {"n", "2048"}, {"s", "12"}, {"D", "1"}, {"sigma", "0"},
        {"gamma", "1e-4"}, {"beta", "0.015"}, {"T", "5"}, {"tau", "0"}, {"solver", "hafam"}}},
      {"fig2-profiles",
       {{"m", "64"}, {"n", "1024"}, {"D", "2"}, {"s_list", "4,8,12"}, {"gamma", "1e-4"}, {"beta", "1e-7"},
        {"solvers", "admm,hafam5,hafam10,hafam20,hafam30"}}},
      {"sec5b-identify",
       {{"family", "gaussian"}, {"r", "0.8"}, {"n", "256"}, {"m_list", "32,64"}, {"s_list", "2,4,8"},
        {"T_list", "5,30"}, {"seeds", "10"}, {"D", "1"}, {"gamma", "1e-3"}, {"beta", "1e-4"}}},
      {"fig3-noisy",
       {{"family", "odct"}, {"F", "10"}, {"m", "64"}, {"n", "1024"}, {"s", "6"}, {"D", "1"}, {"sigma", "0.05"},
        {"gamma", "1"}, {"beta", "0.1"}, {"T", "5"}, {"T_list", "5,30"}, {"tau", "0.1"}, {"tau_mult", "0,1,2,3"},
        {"seeds", "10"}, {"solver", "hafam"}}},
      {"diabetes-smoke",
       {{"data", "data/diabetes_schema_smoke.csv"}, {"target", "target"}, {"ratio", "8:2"}, {"reps", "10"},
        {"folds", "10"}, {"beta", "0.01"}, {"tau_frac", "0.05"}, {"solvers", "admm,hafam5,admm-l1"}}},
  };
  return table;
}

}  // namespace

const std::vector<KeyInfo>& known_keys() {
  static const std::vector<KeyInfo> keys = {
      {"source", "synthetic", "problem source for solve: synthetic | csv"},
      {"family", "gaussian", "sensing matrix: gaussian (correlated rows) | odct"},
      {"r", "0.8", "column correlation of the gaussian family, in (0,1)"},
      {"F", "10", "coherence parameter of the odct family, > 0"},
      {"m", "64", "rows of A"},
      {"n", "256", "columns of A"},
      {"s", "4", "nonzeros of the ground truth"},
      {"D", "1", "ground-truth scale: values sign(g1) 10^D g2"},
      {"sigma", "0", "observation noise standard deviation"},
      {"data", "", "CSV file for source=csv and realdata"},
      {"target", "target", "response column of the CSV file"},
      {"fidelity", "ls", "data term: ls (1/2||Ax-b||^2) | norm (||Ax-b||)"},
      {"cone", "free", "feasible set: free | nonneg"},
      {"gamma", "1e-4", "weight of the L1/L2 term"},
      {"beta", "0.015", "penalty parameter of the splitting"},
      {"T", "5", "support-stability window (T+1 equal supports)"},
      {"tau", "0", "hard-shrink level after phase I"},
      {"tau_frac", "", "hard-shrink by fraction of ||x^I||_1 instead of tau (empty: off)"},
      {"solver", "hafam", "admm | hafam | hafamN | admm-l1"},
      {"init", "zero", "initial point: zero | randn"},
      {"seed", "0", "seed for instances, splits and random starts"},
      {"imax", "2000", "iteration cap of the splitting"},
      {"rel_tol", "1e-8", "RelErr stopping tolerance"},
      {"grad_tol", "1e-11", "Newton gradient-norm tolerance"},
      {"ssn_max", "2500", "Newton iteration cap"},
      {"jobs", "1", "worker threads for studies (1: bit-exact order)"},
      {"seeds", "10", "instances per cell / sweep"},
      {"m_list", "32,64", "identify: row counts"},
      {"s_list", "2,4,8", "identify/profile: sparsity levels"},
      {"T_list", "5,30", "identify/noisy: stability windows"},
      {"tau_mult", "0,1,2,3", "noisy: tau as multiples of sigma"},
      {"solvers", "admm,hafam5", "profile/realdata: solver list"},
      {"ratio", "8:2", "realdata: train:test split"},
      {"reps", "1", "realdata: repetitions"},
      {"folds", "10", "realdata: cross-validation folds"},
      {"gamma_grid", "", "realdata: comma list (empty: 7 log-spaced values in [1e-6, 1e-1])"},
      {"out", "out", "output directory"},
  };
  return keys;
}

bool is_known_key(const std::string& key) {
  const auto& keys = known_keys();
  return std::any_of(keys.begin(), keys.end(), [&](const KeyInfo& k) { return key == k.name; });
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [name, _] : presets()) out.push_back(name);
  return out;
}

Config::Config() {
  for (const auto& k : known_keys()) {
    values_[k.name] = k.default_value;
    origins_[k.name] = "default";
  }
}

void Config::set(const std::string& key, const std::string& value, const std::string& origin) {
  if (!is_known_key(key)) throw Error(ErrorCode::Parse, "unknown key '" + key + "' (" + origin + ")");
  values_[key] = value;
  origins_[key] = origin;
}

void Config::apply_preset(const std::string& name) {
  const auto it = presets().find(name);
  if (it == presets().end()) {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw Error(ErrorCode::Parse, "unknown preset '" + name + "' (known: " + known + ")");
  }
  for (const auto& [k, v] : it->second) set(k, v, "preset " + name);
}

void Config::load_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::Parse, where + ": expected key = value, got '" + trim(line) + "'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorCode::Parse, where + ": missing key");
    if (!is_known_key(key)) throw Error(ErrorCode::Parse, "unknown key '" + key + "' at " + where);
    set(key, trim(line.substr(eq + 1)), where);
  }
}

void Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  load_text(ss.str(), path);
}

void Config::apply_env() {
  if (const char* v = std::getenv("RATIOPT_SEED"); v && *v) set("seed", v, "env RATIOPT_SEED");
}

const std::string& Config::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCode::Parse, "unknown key '" + key + "'");
  return it->second;
}

const std::string& Config::origin(const std::string& key) const {
  const auto it = origins_.find(key);
  if (it == origins_.end()) throw Error(ErrorCode::Parse, "unknown key '" + key + "'");
  return it->second;
}

double Config::num(const std::string& key) const {
  const std::string& v = raw(key);
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size()) throw bad_value(key, v, "a number");
  return out;
}

long long Config::integer(const std::string& key) const {
  const std::string& v = raw(key);
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size()) throw bad_value(key, v, "an integer");
  return out;
}

std::uint64_t Config::u64(const std::string& key) const {
  const std::string& v = raw(key);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size()) throw bad_value(key, v, "an unsigned integer");
  return out;
}

std::vector<std::string> Config::str_list(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(raw(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> Config::num_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : str_list(key)) {
    double v = 0;
    const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || p != item.data() + item.size()) throw bad_value(key, raw(key), "a comma list of numbers");
    out.push_back(v);
  }
  return out;
}

std::vector<long long> Config::int_list(const std::string& key) const {
  std::vector<long long> out;
  for (const auto& item : str_list(key)) {
    long long v = 0;
    const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || p != item.data() + item.size()) throw bad_value(key, raw(key), "a comma list of integers");
    out.push_back(v);
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[std::size_t(i)] = digits[v & 0xF];
  return s;
}

std::string canonical_manifest(const std::string& command, const Config& cfg) {
  std::string out = "command=" + command + "\n";
  for (const auto& [k, v] : cfg.values()) out += k + "=" + v + "\n";
  return out;
}

}  // namespace ratiopt::cli
