#pragma once
// ============================================================================
// Run configuration: plain-text `key = value` files plus command-line
// overrides, validated against a fixed schema (unknown keys are rejected).
// The effective configuration is a sorted key-value map that commands echo
// into every output header, so each artifact records exactly how it was made.
// ============================================================================

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dopo/core.hpp"
#include "dopo/soliton.hpp"

namespace dopo {

/// Parsed and validated key-value configuration for all CLI commands.
class RunConfig {
 public:
  /// Known keys and their defaults.
  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d = {
        {"mu", "1.2"},
        {"delta1", "1.2"},
        {"sigma", "1"},
        {"kappa", "1"},
        {"branch", "1"},
        {"grid.n", "512"},
        {"grid.length", "40"},
        {"omega.max", "10"},
        {"omega.points", "401"},
        {"omega.eval", "0"},
        {"seed", "1"},
        {"lof.kind", "momentum"},
        {"lof.theta", "0"},
        {"lof.xi", "0"},          // 0 = optimal width (gauss-hermite only)
        {"lof.x0", "0"},
        {"lof.phi", "nan"},       // nan = soliton phase (gauss-hermite only)
        {"lof.optimize", "false"},
        {"lof.dump", "false"},
        {"detector.sigma", "0"},  // 0 = full beam
        {"detector.x0", "0"},
        {"sweep.key", ""},
        {"sweep.from", "0"},
        {"sweep.to", "0"},
        {"sweep.points", "0"},
        {"oracle.dt", "0.001"},
        {"oracle.t_total", "2000"},
        {"oracle.n_traj", "100"},
        {"oracle.stride", "10"},
        {"oracle.seg_len", "8192"},
        {"eigs.modes", ""},
        {"output.dir", "."},
    };
    return d;
  }

  RunConfig() : values_(defaults()) {}

  /// Load `key = value` lines ('#' comments and blank lines allowed).
  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw invalid_argument("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw invalid_argument(path + ":" + std::to_string(lineno) +
                               ": expected key = value");
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
  }

  /// Apply one `key=value` override.
  void set(const std::string& key, const std::string& value) {
    if (values_.find(key) == values_.end())
      throw invalid_argument("unknown configuration key: " + key);
    values_[key] = value;
    explicit_.insert(key);
  }

  /// Apply a `key=value` string (as passed to --set).
  void set_pair(const std::string& pair) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos)
      throw invalid_argument("--set expects key=value, got: " + pair);
    set(trim(pair.substr(0, eq)), trim(pair.substr(eq + 1)));
  }

  bool is_set(const std::string& key) const { return explicit_.count(key) > 0; }

  const std::map<std::string, std::string>& values() const { return values_; }

  // ---- typed accessors ----

  const std::string& get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end())
      throw invalid_argument("unknown configuration key: " + key);
    return it->second;
  }

  double get_double(const std::string& key) const {
    const std::string& s = get(key);
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw invalid_argument("key " + key + ": not a number: '" + s + "'");
    }
  }

  long get_int(const std::string& key) const {
    const std::string& s = get(key);
    try {
      std::size_t pos = 0;
      const long v = std::stol(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw invalid_argument("key " + key + ": not an integer: '" + s + "'");
    }
  }

  std::uint64_t get_seed(const std::string& key) const {
    const std::string& s = get(key);
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw invalid_argument("key " + key + ": not a seed: '" + s + "'");
    }
  }

  bool get_bool(const std::string& key) const {
    const std::string& s = get(key);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw invalid_argument("key " + key + ": expected true/false, got '" + s +
                           "'");
  }

  /// Comma-separated tokens (empty string gives an empty list).
  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(get(key));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = trim(tok);
      if (!tok.empty()) out.push_back(tok);
    }
    return out;
  }

  // ---- model assembly (re-validates physical preconditions) ----

  ModelParams model() const {
    ModelParams p;
    p.mu = get_double("mu");
    p.delta1 = get_double("delta1");
    p.sigma = static_cast<int>(get_int("sigma"));
    p.kappa = get_double("kappa");
    p.validate();
    return p;
  }

  Grid1D grid() const {
    return make_grid(static_cast<int>(get_int("grid.n")),
                     get_double("grid.length"));
  }

  int branch() const {
    const long b = get_int("branch");
    if (b != 1 && b != -1) throw invalid_argument("branch must be +1 or -1");
    return static_cast<int>(b);
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  std::map<std::string, std::string> values_;
  std::set<std::string> explicit_;
};

}  // namespace dopo
