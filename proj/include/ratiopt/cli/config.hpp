#pragma once

// Flat key=value configuration with a fixed key set. Layers are applied in order
// default < preset < file < RATIOPT_SEED < flags; the last writer wins.

#include "ratiopt/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ratiopt::cli {

struct KeyInfo {
  const char* name;
  const char* default_value;
  const char* help;
};

/// Every accepted key, in documentation order.
const std::vector<KeyInfo>& known_keys();
bool is_known_key(const std::string& key);

/// Names of the built-in presets.
std::vector<std::string> preset_names();

class Config {
 public:
  Config();  // all defaults

  /// Throws Error(Parse) naming the key when it is not in known_keys().
  void set(const std::string& key, const std::string& value, const std::string& origin);

  void apply_preset(const std::string& name);
  /// Lines are `key = value`; '#' starts a comment. Errors name the key and line.
  void load_file(const std::string& path);
  void load_text(const std::string& text, const std::string& source);
  /// RATIOPT_SEED, when set and nonempty.
  void apply_env();

  const std::string& raw(const std::string& key) const;
  const std::string& origin(const std::string& key) const;

  std::string str(const std::string& key) const { return raw(key); }
  double num(const std::string& key) const;
  long long integer(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  std::vector<double> num_list(const std::string& key) const;
  std::vector<long long> int_list(const std::string& key) const;
  std::vector<std::string> str_list(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> origins_;
};

/// FNV-1a 64-bit over `data`.
std::uint64_t fnv1a64(const std::string& data);
std::string hex64(std::uint64_t v);

/// Canonical text of a command and its resolved configuration; its hash identifies a run.
std::string canonical_manifest(const std::string& command, const Config& cfg);

}  // namespace ratiopt::cli
