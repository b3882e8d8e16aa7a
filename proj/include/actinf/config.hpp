#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "actinf/csv.hpp"
#include "actinf/error.hpp"

namespace actinf {

/// Flat key=value configuration. Lines starting with '#' are comments.
/// Later assignments replace earlier ones, so command-line overrides are
/// applied with set() after loading the file.
class Config {
 public:
  static const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "alpha",       "batch_points", "batch_size", "beta0",   "beta1",     "data",        "dim",
        "err_col",     "example_trials", "f_col",    "flush_period", "freeze_after", "gamma0", "gamma1",
        "grid_size",   "holdout",     "methods",    "n",       "n_b",       "n_hist",      "nb_grid",
        "nb_max",      "nb_min",      "nb_seq_grid", "noise",  "prob_cols", "problem",     "q",
        "seed",        "seq_init",    "seq_points", "synthetic", "target",  "tau",         "tau_policy",
        "tau_seq",     "theta0",      "theta1",     "threads", "trials",    "x_cols",      "y_col",
        "y_hi",        "y_lo",        "learner",    "ridge_lambda"};
    return keys;
  }

  static Config parse(std::istream& in) {
    Config c;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
      ++no;
      const auto t = std::string(csv::trim(line));
      if (t.empty() || t.front() == '#') continue;
      c.set_assignment(t, "line " + std::to_string(no));
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open config '" + path + "'");
    return parse(in);
  }

  /// "key=value"
  void set_assignment(const std::string& text, const std::string& where = "override") {
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ArgumentError(where + ": expected key=value, got '" + text + "'");
    set(std::string(csv::trim(text.substr(0, eq))), std::string(csv::trim(text.substr(eq + 1))));
  }

  void set(const std::string& key, const std::string& value) {
    if (!known_keys().count(key)) throw ArgumentError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string str(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::optional<std::string> opt(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end() || it->second.empty()) return std::nullopt;
    return it->second;
  }

  double real(const std::string& key, double fallback) const {
    const auto v = opt(key);
    return v ? to_real(key, *v) : fallback;
  }

  std::optional<double> opt_real(const std::string& key) const {
    const auto v = opt(key);
    if (!v) return std::nullopt;
    return to_real(key, *v);
  }

  std::uint64_t integer(const std::string& key, std::uint64_t fallback) const {
    const auto v = opt(key);
    return v ? to_integer(key, *v) : fallback;
  }

  std::optional<std::uint64_t> opt_integer(const std::string& key) const {
    const auto v = opt(key);
    if (!v) return std::nullopt;
    return to_integer(key, *v);
  }

  std::vector<std::string> list(const std::string& key, std::vector<std::string> fallback = {}) const {
    const auto v = opt(key);
    if (!v) return fallback;
    std::vector<std::string> out;
    for (const auto& cell : csv::split_line(*v)) {
      const auto t = std::string(csv::trim(cell));
      if (!t.empty()) out.push_back(t);
    }
    return out;
  }

  std::vector<double> real_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : list(key)) out.push_back(to_real(key, s));
    return out;
  }

  /// Canonical text: sorted key=value lines.
  std::string canonical() const {
    std::string s;
    for (const auto& [k, v] : values_) s += k + "=" + v + "\n";
    return s;
  }

  /// FNV-1a 64 of the canonical text.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical()) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  /// Comment block written at the top of every output file.
  std::string provenance() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash()));
    std::string s = std::string("# config_hash=") + buf + " seed=" + std::to_string(integer("seed", 0)) + "\n";
    for (const auto& [k, v] : values_) s += "# " + k + "=" + v + "\n";
    return s;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static double to_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw ArgumentError("config '" + key + "': not a number: '" + v + "'");
    return out;
  }

  static std::uint64_t to_integer(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
      throw ArgumentError("config '" + key + "': not a nonnegative integer: '" + v + "'");
    return out;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace actinf
