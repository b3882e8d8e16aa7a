#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "actinf/csv.hpp"
#include "actinf/error.hpp"
#include "actinf/rng.hpp"

namespace actinf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One unlabeled (or, in simulation, hidden-labeled) instance.
struct Example {
  Vector x;
  std::optional<double> y;      // label
  std::optional<double> f;      // model prediction f(x)
  std::optional<Vector> probs;  // class probabilities, index = class
  std::optional<double> err;    // predicted |f(x) - y|
};

/// Checks the per-example invariants on probs and err.
inline void validate_example(const Example& e) {
  if (e.probs) {
    const Vector& p = *e.probs;
    if (p.size() < 1) throw DataError("empty probability vector");
    if ((p.array() < 0.0).any() || (p.array() > 1.0).any())
      throw DataError("probability outside [0,1]");
    if (std::abs(p.sum() - 1.0) > 1e-9)
      throw DataError("probabilities do not sum to 1");
  }
  if (e.err && !(*e.err >= 0.0)) throw DataError("negative error estimate");
}

/// Ordered, non-empty collection of examples sharing one covariate dimension.
class Pool {
 public:
  Pool() = default;

  explicit Pool(std::vector<Example> examples) : examples_(std::move(examples)) {
    if (examples_.empty()) throw DataError("pool must contain at least one example");
    const auto d = examples_.front().x.size();
    for (std::size_t i = 0; i < examples_.size(); ++i) {
      if (examples_[i].x.size() != d)
        throw SchemaError("example " + std::to_string(i) +
                          " has covariate dimension " +
                          std::to_string(examples_[i].x.size()) + ", expected " +
                          std::to_string(d));
      validate_example(examples_[i]);
    }
  }

  std::size_t size() const { return examples_.size(); }
  Eigen::Index dim() const { return examples_.empty() ? 0 : examples_.front().x.size(); }
  const Example& operator[](std::size_t i) const { return examples_[i]; }
  const std::vector<Example>& examples() const { return examples_; }
  auto begin() const { return examples_.begin(); }
  auto end() const { return examples_.end(); }

  bool has_predictions() const {
    for (const auto& e : examples_)
      if (!e.f) return false;
    return true;
  }

 private:
  std::vector<Example> examples_;
};

/// Expected-label budget n_b against a pool of n items.
struct Budget {
  double n_b = 0.0;
  std::size_t n = 0;

  Budget() = default;
  Budget(double nb, std::size_t pool_size) : n_b(nb), n(pool_size) {
    if (pool_size == 0) throw ArgumentError("budget: pool size must be positive");
    if (!(nb > 0.0) || nb > static_cast<double>(pool_size))
      throw ArgumentError("budget: need 0 < n_b <= n, got n_b=" +
                          csv::format(nb) + ", n=" + std::to_string(pool_size));
  }

  /// The uniform rule n_b / n.
  double uniform_rate() const { return n_b / static_cast<double>(n); }
};

/// Labels revealed to an estimator; unset where not collected.
using Labels = std::vector<std::optional<double>>;

/// Column mapping used to read a pool from CSV.
struct PoolSchema {
  std::vector<std::string> x_cols;
  std::optional<std::string> y_col;
  std::optional<std::string> f_col;
  std::optional<std::string> err_col;
  std::vector<std::string> prob_cols;
};

namespace detail {

inline void fill_optional_fields(const csv::Table& t, std::size_t r,
                                 Example& e, const std::optional<std::size_t>& f_c,
                                 const std::vector<std::size_t>& p_c,
                                 const std::optional<std::size_t>& err_c) {
  const auto line = t.line_numbers[r];
  const auto& row = t.rows[r];
  if (f_c) e.f = csv::parse_optional(row[*f_c], line, t.header[*f_c]);
  if (!p_c.empty()) {
    std::size_t present = 0;
    for (auto c : p_c) present += row[c].empty() ? 0 : 1;
    if (present == p_c.size()) {
      Vector p(static_cast<Eigen::Index>(p_c.size()));
      for (std::size_t k = 0; k < p_c.size(); ++k)
        p[static_cast<Eigen::Index>(k)] = csv::parse_double(row[p_c[k]], line, t.header[p_c[k]]);
      e.probs = std::move(p);
    } else if (present != 0) {
      throw ParseError(line, "probability columns partially missing");
    }
  }
  if (err_c) e.err = csv::parse_optional(row[*err_c], line, t.header[*err_c]);
  try {
    validate_example(e);
  } catch (const DataError& ex) {
    throw ParseError(line, ex.what());
  }
}

}  // namespace detail

/// Build a pool from an already-parsed table.
inline Pool pool_from_table(const csv::Table& t, const PoolSchema& schema) {
  if (schema.x_cols.empty()) throw SchemaError("schema names no covariate columns");
  std::vector<std::size_t> x_c;
  for (const auto& name : schema.x_cols) x_c.push_back(t.require_column(name));
  std::optional<std::size_t> y_c, f_c, err_c;
  if (schema.y_col) y_c = t.require_column(*schema.y_col);
  if (schema.f_col) f_c = t.require_column(*schema.f_col);
  if (schema.err_col) err_c = t.require_column(*schema.err_col);
  std::vector<std::size_t> p_c;
  for (const auto& name : schema.prob_cols) p_c.push_back(t.require_column(name));
  if (p_c.size() == 1) throw SchemaError("need at least two probability columns");

  std::vector<Example> examples;
  examples.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto line = t.line_numbers[r];
    Example e;
    e.x.resize(static_cast<Eigen::Index>(x_c.size()));
    for (std::size_t k = 0; k < x_c.size(); ++k) {
      const auto& cell = t.rows[r][x_c[k]];
      if (cell.empty()) throw ParseError(line, "missing covariate '" + t.header[x_c[k]] + "'");
      e.x[static_cast<Eigen::Index>(k)] = csv::parse_double(cell, line, t.header[x_c[k]]);
    }
    if (y_c) e.y = csv::parse_optional(t.rows[r][*y_c], line, t.header[*y_c]);
    detail::fill_optional_fields(t, r, e, f_c, p_c, err_c);
    examples.push_back(std::move(e));
  }
  if (examples.empty()) throw DataError("CSV contains no data rows");
  return Pool(std::move(examples));
}

/// Read a pool from a CSV file with a header row. Rows keep file order;
/// empty optional cells stay unset.
inline Pool load_pool(const std::string& path, const PoolSchema& schema) {
  return pool_from_table(csv::read_file(path), schema);
}

/// Write a pool in the layout `schema` describes (x columns, then y, f,
/// err, probability columns when the schema names them).
inline void write_pool(std::ostream& out, const Pool& pool, const PoolSchema& schema) {
  if (static_cast<Eigen::Index>(schema.x_cols.size()) != pool.dim())
    throw SchemaError("schema covariate count does not match pool dimension");
  std::vector<std::string> header = schema.x_cols;
  if (schema.y_col) header.push_back(*schema.y_col);
  if (schema.f_col) header.push_back(*schema.f_col);
  if (schema.err_col) header.push_back(*schema.err_col);
  for (const auto& p : schema.prob_cols) header.push_back(p);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& e : pool) {
    std::string line;
    bool first = true;
    auto put = [&](const std::string& cell) {
      if (!first) line += ',';
      first = false;
      line += cell;
    };
    for (Eigen::Index k = 0; k < e.x.size(); ++k) put(csv::format(e.x[k]));
    if (schema.y_col) put(csv::format(e.y));
    if (schema.f_col) put(csv::format(e.f));
    if (schema.err_col) put(csv::format(e.err));
    for (std::size_t k = 0; k < schema.prob_cols.size(); ++k) {
      const bool have = e.probs && static_cast<std::size_t>(e.probs->size()) == schema.prob_cols.size();
      put(have ? csv::format((*e.probs)[static_cast<Eigen::Index>(k)]) : std::string());
    }
    out << line << '\n';
  }
}

/// Predictions to attach to a pool; optional parts may be empty.
struct PredictionColumns {
  std::vector<double> f;
  std::vector<Vector> probs;   // empty, or one per example
  std::vector<double> err;     // empty, or one per example
};

/// Attach predictions in order. Existing predictions are overwritten.
inline Pool attach_predictions(const Pool& pool, const PredictionColumns& preds) {
  const auto n = pool.size();
  auto check = [n](std::size_t got, const char* what) {
    if (got != n)
      throw DataError(std::string(what) + " count " + std::to_string(got) +
                      " does not match pool size " + std::to_string(n));
  };
  check(preds.f.size(), "prediction");
  if (!preds.probs.empty()) check(preds.probs.size(), "probability");
  if (!preds.err.empty()) check(preds.err.size(), "error-estimate");
  std::vector<Example> out = pool.examples();
  for (std::size_t i = 0; i < n; ++i) {
    out[i].f = preds.f[i];
    if (!preds.probs.empty()) out[i].probs = preds.probs[i];
    if (!preds.err.empty()) out[i].err = preds.err[i];
  }
  return Pool(std::move(out));
}

/// Read predictions from a CSV with column `f` and optional `err` and
/// `p0, p1, ...` columns (or the names given).
inline PredictionColumns load_predictions(const std::string& path,
                                          const std::string& f_col = "f",
                                          const std::optional<std::string>& err_col = "err",
                                          std::vector<std::string> prob_cols = {}) {
  const auto t = csv::read_file(path);
  PredictionColumns out;
  const auto fc = t.require_column(f_col);
  std::optional<std::size_t> ec;
  if (err_col) ec = t.column(*err_col);
  if (prob_cols.empty()) {
    for (int k = 0;; ++k) {
      const auto name = "p" + std::to_string(k);
      if (!t.column(name)) break;
      prob_cols.push_back(name);
    }
    if (prob_cols.size() == 1) prob_cols.clear();
  }
  std::vector<std::size_t> pc;
  for (const auto& p : prob_cols) pc.push_back(t.require_column(p));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto line = t.line_numbers[r];
    out.f.push_back(csv::parse_double(t.rows[r][fc], line, f_col));
    if (ec) out.err.push_back(csv::parse_double(t.rows[r][*ec], line, *err_col));
    if (!pc.empty()) {
      Vector p(static_cast<Eigen::Index>(pc.size()));
      for (std::size_t k = 0; k < pc.size(); ++k)
        p[static_cast<Eigen::Index>(k)] = csv::parse_double(t.rows[r][pc[k]], line, prob_cols[k]);
      out.probs.push_back(std::move(p));
    }
  }
  return out;
}

/// Uniformly random disjoint split; the first part holds round(fraction*n)
/// items (kept within [1, n-1] so both parts are valid pools).
inline std::pair<Pool, Pool> split_pool(const Pool& pool, double fraction, const RngSpec& rng) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ArgumentError("split fraction must lie in (0,1)");
  const auto n = pool.size();
  if (n < 2) throw ArgumentError("split needs at least two examples");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng gen(rng);
  gen.shuffle(order.begin(), order.end());
  auto first_n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  first_n = std::clamp<std::size_t>(first_n, 1, n - 1);
  std::vector<Example> a, b;
  a.reserve(first_n);
  b.reserve(n - first_n);
  for (std::size_t i = 0; i < n; ++i)
    (i < first_n ? a : b).push_back(pool[order[i]]);
  return {Pool(std::move(a)), Pool(std::move(b))};
}

/// Random permutation of a pool (used by sequential trials).
inline Pool permute_pool(const Pool& pool, const RngSpec& rng) {
  std::vector<Example> out = pool.examples();
  Rng gen(rng);
  gen.shuffle(out.begin(), out.end());
  return Pool(std::move(out));
}

/// Reveal labels only where the decision vector selected the item.
inline Labels reveal_labels(const Pool& pool, std::span<const unsigned char> xi) {
  if (xi.size() != pool.size()) throw DataError("decision vector length does not match pool");
  Labels out(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!xi[i]) continue;
    if (!pool[i].y) throw DataError("row " + std::to_string(i + 1) + " selected but has no label");
    out[i] = pool[i].y;
  }
  return out;
}

}  // namespace actinf
