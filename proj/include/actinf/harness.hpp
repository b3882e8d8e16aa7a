#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "actinf/batch.hpp"
#include "actinf/core.hpp"
#include "actinf/csv.hpp"
#include "actinf/error.hpp"
#include "actinf/predictors.hpp"
#include "actinf/sampling.hpp"
#include "actinf/sequential.hpp"
#include "actinf/synthetic.hpp"

namespace actinf {

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m = {"active-batch", "active-seq", "active-seq-finetune", "ppi",
                                             "classical"};
  return m;
}

inline bool is_sequential_method(const std::string& m) { return m == "active-seq" || m == "active-seq-finetune"; }

/// A pool with every label known, plus labeled draws from the same law for
/// training the sequential starting models.
struct ExperimentData {
  Pool pool;
  Labels hidden;
  ProblemSpec problem;
  std::vector<LabeledPoint> historical;
  Vector truth;  // full-pool M-estimate
};

inline ExperimentData make_experiment(SyntheticData d) {
  ExperimentData e{std::move(d.pool), std::move(d.hidden), d.problem, std::move(d.historical), {}};
  e.truth = full_pool_estimate(e.pool, e.hidden, e.problem);
  return e;
}

/// A labeled dataset: `holdout` of its rows become the historical set and
/// the rest the pool.
inline ExperimentData make_experiment(const Pool& labeled, const ProblemSpec& problem, double holdout,
                                      const RngSpec& rng) {
  auto [hist, pool] = split_pool(labeled, holdout, rng);
  ExperimentData e;
  e.problem = problem;
  for (const auto& ex : hist) {
    if (!ex.y) throw DataError("dataset rows need labels");
    e.historical.push_back({ex.x, *ex.y});
  }
  std::vector<Example> rows;
  for (const auto& ex : pool) {
    if (!ex.y) throw DataError("dataset rows need labels");
    e.hidden.push_back(ex.y);
    Example masked = ex;
    masked.y.reset();
    rows.push_back(std::move(masked));
  }
  e.pool = Pool(std::move(rows));
  e.truth = full_pool_estimate(e.pool, e.hidden, e.problem);
  return e;
}

struct HarnessConfig {
  std::vector<std::string> methods = {"active-batch", "ppi", "classical"};
  std::size_t trials = 100;
  std::vector<double> nb_batch;  // empty: batch_points values over [nb_min, nb_max] * n
  std::vector<double> nb_seq;    // empty: seq_points values
  std::size_t batch_points = 20;
  std::size_t seq_points = 10;
  double nb_min = 0.05;
  double nb_max = 0.5;
  double alpha = 0.1;
  double tau_batch = 0.5;
  double tau_seq = 0.5;
  std::size_t batch_size = 100;
  std::size_t flush_period = 100;
  std::optional<std::size_t> freeze_after;
  std::size_t seq_init = 10;
  std::size_t example_trials = 5;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const {
    if (methods.empty()) throw ArgumentError("no methods selected");
    for (const auto& m : methods)
      if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end())
        throw ArgumentError("unknown method '" + m + "'");
    if (trials < 1) throw ArgumentError("trials must be at least 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0,1)");
    if (!(nb_min > 0.0 && nb_min <= nb_max && nb_max <= 1.0))
      throw ArgumentError("need 0 < nb_min <= nb_max <= 1");
    if (batch_points < 1 || seq_points < 1) throw ArgumentError("grids need at least one point");
    if (!(tau_batch >= 0.0 && tau_batch <= 1.0) || !(tau_seq >= 0.0 && tau_seq <= 1.0))
      throw ArgumentError("tau must lie in [0,1]");
    if (batch_size < 1) throw ArgumentError("batch size must be at least 1");
  }

  bool has(const std::string& m) const { return std::find(methods.begin(), methods.end(), m) != methods.end(); }
};

/// `points` uniformly spaced budgets over [lo, hi] * n, rounded to whole labels.
inline std::vector<double> budget_grid(std::size_t n, double lo, double hi, std::size_t points) {
  std::vector<double> g;
  for (std::size_t k = 0; k < points; ++k) {
    const double frac = points == 1 ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
    const double v = std::clamp(std::round(frac * static_cast<double>(n)), 1.0, static_cast<double>(n));
    if (g.empty() || v != g.back()) g.push_back(v);
  }
  return g;
}

struct TrialRecord {
  std::string method;
  double n_b = 0.0;
  std::size_t trial = 0;
  bool ok = false;
  std::string error;
  double estimate = 0.0;
  Interval interval;
  std::size_t n_lab = 0;
  bool covered = false;
};

struct CoverageWidth {
  double coverage = 0.0;
  double mean_width = 0.0;
};

inline CoverageWidth coverage_and_width(std::span<const Interval> intervals, double theta_star) {
  if (intervals.empty()) throw ArgumentError("no intervals to summarize");
  CoverageWidth out;
  for (const auto& iv : intervals) {
    out.coverage += iv.contains(theta_star);
    out.mean_width += iv.width();
  }
  out.coverage /= static_cast<double>(intervals.size());
  out.mean_width /= static_cast<double>(intervals.size());
  return out;
}

struct MethodSummary {
  std::string method;
  double n_b = 0.0;
  std::size_t ok = 0;
  std::size_t failed = 0;
  double coverage = 0.0;
  double mean_width = 0.0;
  double width_sd = 0.0;
  double mean_n_lab = 0.0;
  double n_lab_sd = 0.0;
};

struct TrialResults {
  std::vector<TrialRecord> records;  // ordered by (method, n_b, trial)
  std::vector<MethodSummary> summaries;
  double theta_star = 0.0;
  std::vector<double> nb_batch, nb_seq;

  const MethodSummary* find(const std::string& method, double n_b) const {
    for (const auto& s : summaries)
      if (s.method == method && s.n_b == n_b) return &s;
    return nullptr;
  }

  std::vector<const MethodSummary*> curve(const std::string& method) const {
    std::vector<const MethodSummary*> out;
    for (const auto& s : summaries)
      if (s.method == method) out.push_back(&s);
    return out;
  }
};

namespace detail {

enum StreamKey : std::uint64_t { kActiveStream = 11, kUniformStream = 12, kSeqStream = 13, kSeqFtStream = 14 };

inline std::uint64_t stream_key(const std::string& method) {
  if (method == "active-batch") return kActiveStream;
  if (method == "active-seq") return kSeqStream;
  if (method == "active-seq-finetune") return kSeqFtStream;
  return kUniformStream;  // ppi and classical see the same draws
}

inline Labels reveal(const Labels& hidden, std::span<const unsigned char> xi) {
  Labels out(hidden.size());
  for (std::size_t i = 0; i < hidden.size(); ++i)
    if (xi[i]) out[i] = hidden[i];
  return out;
}

inline SeqModels initial_models(const ExperimentData& data, std::size_t seq_init) {
  const auto k = std::min(seq_init, data.historical.size());
  if (k == 0) throw DataError("sequential methods need historical data to train the starting model");
  const std::span<const LabeledPoint> init(data.historical.data(), k);
  if (data.pool[0].probs) return {Predictor::logistic().fit(init), std::nullopt};
  Predictor p = Predictor::ridge().fit(init);
  std::optional<ErrorModel> err;
  if (k >= 4) err = fit_error_model_cross(p, init);
  return {std::move(p), std::move(err)};
}

struct Job {
  std::string method;
  double n_b;
  std::size_t nb_index;
  std::size_t trial;
};

class TrialRunner {
 public:
  TrialRunner(const ExperimentData& data, const HarnessConfig& cfg) : data_(data), cfg_(cfg) {
    const bool need_u = cfg.has("active-batch");
    if (need_u) {
      std::optional<GlmDirection> dir;
      if (data.problem.is_glm()) dir = plugin_direction(data.pool, data.problem);
      u_ = pool_uncertainty(data.pool, dir);
    }
    if (cfg.has("active-seq") || cfg.has("active-seq-finetune")) models_ = initial_models(data, cfg.seq_init);
  }

  TrialRecord run(const Job& job) const {
    TrialRecord rec;
    rec.method = job.method;
    rec.n_b = job.n_b;
    rec.trial = job.trial;
    const RngSpec rng = RngSpec{cfg_.seed}.child({stream_key(job.method), job.nb_index, job.trial});
    try {
      const InferenceReport r = infer(job, rng);
      const auto j = static_cast<std::size_t>(data_.problem.target);
      rec.estimate = r.theta_hat[data_.problem.target];
      rec.interval = r.intervals[j];
      rec.n_lab = r.n_lab;
      rec.covered = rec.interval.contains(data_.truth[data_.problem.target]);
      rec.ok = std::isfinite(rec.interval.lo) && std::isfinite(rec.interval.hi);
      if (!rec.ok) rec.error = "non-finite interval";
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
    }
    return rec;
  }

 private:
  InferenceReport infer(const Job& job, const RngSpec& rng) const {
    const auto& pool = data_.pool;
    const Budget budget(job.n_b, pool.size());
    if (job.method == "active-batch") {
      const auto plan = batch_plan(u_, budget, cfg_.tau_batch, rng);
      return infer_active(pool, plan, reveal(data_.hidden, plan.xi), data_.problem, cfg_.alpha);
    }
    if (job.method == "ppi" || job.method == "classical") {
      const auto plan = uniform_plan(budget, rng);
      const auto labels = reveal(data_.hidden, plan.xi);
      return job.method == "ppi" ? infer_ppi(pool, plan.xi, labels, data_.problem, budget, cfg_.alpha)
                                 : infer_classical(pool, plan.xi, labels, data_.problem, cfg_.alpha);
    }
    // sequential: re-permute the pool each trial
    Rng perm_gen(rng.child(1));
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    perm_gen.shuffle(order.begin(), order.end());
    std::vector<Example> rows;
    rows.reserve(order.size());
    Labels hidden;
    hidden.reserve(order.size());
    for (auto i : order) {
      rows.push_back(pool[i]);
      hidden.push_back(data_.hidden[i]);
    }
    const Pool permuted(std::move(rows));
    SeqConfig sc{budget, job.method == "active-seq-finetune" ? cfg_.batch_size : kNeverFinetune, cfg_.tau_seq,
                 cfg_.flush_period, cfg_.freeze_after};
    const LabelOracle oracle = [&hidden](std::size_t idx, const Example&) {
      if (!hidden[idx]) throw DataError("label missing for row " + std::to_string(idx + 1));
      return *hidden[idx];
    };
    const Trace trace = run_sequential(permuted, *models_, sc, rng.child(2), oracle, data_.problem);
    return infer_sequential(trace, data_.problem, cfg_.alpha, job.method);
  }

  const ExperimentData& data_;
  const HarnessConfig& cfg_;
  std::vector<double> u_;
  std::optional<SeqModels> models_;
};

/// Runs fn(i) for i in [0, count) on `threads` workers.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  threads = std::max(1u, threads);
  if (threads == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

inline MethodSummary summarize(std::span<const TrialRecord> recs, double theta_star) {
  MethodSummary s;
  s.method = recs.front().method;
  s.n_b = recs.front().n_b;
  std::vector<Interval> iv;
  double nl = 0.0, nl2 = 0.0;
  for (const auto& r : recs) {
    if (!r.ok) {
      ++s.failed;
      continue;
    }
    iv.push_back(r.interval);
    nl += static_cast<double>(r.n_lab);
    nl2 += static_cast<double>(r.n_lab) * static_cast<double>(r.n_lab);
  }
  s.ok = iv.size();
  if (iv.empty()) {
    s.coverage = s.mean_width = s.mean_n_lab = std::nan("");
    return s;
  }
  const auto cw = coverage_and_width(iv, theta_star);
  s.coverage = cw.coverage;
  s.mean_width = cw.mean_width;
  double ss = 0.0;
  for (const auto& i : iv) ss += (i.width() - cw.mean_width) * (i.width() - cw.mean_width);
  const double k = static_cast<double>(iv.size());
  s.width_sd = std::sqrt(ss / k);
  s.mean_n_lab = nl / k;
  s.n_lab_sd = std::sqrt(std::max(0.0, nl2 / k - s.mean_n_lab * s.mean_n_lab));
  return s;
}

}  // namespace detail

/// Monte-Carlo sweep over methods and budgets. Batch methods keep the pool
/// fixed and redraw only the labeling decisions; sequential methods also
/// re-permute the pool every trial. Per-trial failures are recorded and
/// skipped in the summaries. Output does not depend on cfg.threads.
inline TrialResults run_trials(const ExperimentData& data, const HarnessConfig& cfg) {
  cfg.validate();
  TrialResults out;
  const auto n = data.pool.size();
  out.nb_batch = cfg.nb_batch.empty() ? budget_grid(n, cfg.nb_min, cfg.nb_max, cfg.batch_points) : cfg.nb_batch;
  out.nb_seq = cfg.nb_seq.empty() ? budget_grid(n, cfg.nb_min, cfg.nb_max, cfg.seq_points) : cfg.nb_seq;
  for (const auto* g : {&out.nb_batch, &out.nb_seq})
    for (double v : *g)
      if (!(v > 0.0 && v <= static_cast<double>(n))) throw ArgumentError("budget grid values must lie in (0, n]");
  out.theta_star = data.truth[data.problem.target];

  const bool any_batch = cfg.has("active-batch");
  const bool any_seq = cfg.has("active-seq") || cfg.has("active-seq-finetune");
  std::vector<detail::Job> jobs;
  for (const auto& m : known_methods()) {
    if (!cfg.has(m)) continue;
    std::vector<double> grid;
    if (m == "active-batch") {
      grid = out.nb_batch;
    } else if (is_sequential_method(m)) {
      grid = out.nb_seq;
    } else {
      // baselines run on every grid an active method uses
      if (any_batch || !any_seq) grid = out.nb_batch;
      if (any_seq)
        for (double v : out.nb_seq)
          if (std::find(grid.begin(), grid.end(), v) == grid.end()) grid.push_back(v);
      std::sort(grid.begin(), grid.end());
    }
    for (double v : grid) {
      // the stream index is the budget itself so that shared budgets see shared draws
      const auto key = static_cast<std::size_t>(std::llround(v * 1000.0));
      for (std::size_t t = 0; t < cfg.trials; ++t) jobs.push_back({m, v, key, t});
    }
  }

  const detail::TrialRunner runner(data, cfg);
  out.records.resize(jobs.size());
  detail::parallel_for(jobs.size(), cfg.threads, [&](std::size_t i) { out.records[i] = runner.run(jobs[i]); });

  for (std::size_t i = 0; i < out.records.size(); i += cfg.trials)
    out.summaries.push_back(
        detail::summarize(std::span<const TrialRecord>(out.records.data() + i, cfg.trials), out.theta_star));
  return out;
}

struct CurvePoint {
  double n_b = 0.0;
  double width = 0.0;
};

struct SaveRow {
  double n_b = 0.0;
  std::optional<double> save_pct;
  bool flagged = false;  // active curve not monotone; first crossing used
};

/// For each baseline point (n_b, w), the budget n' at which the linearly
/// interpolated active curve reaches width w, reported as
/// (n_b - n') / n_b * 100. Missing when w lies outside the active range.
inline std::vector<SaveRow> budget_save(std::span<const CurvePoint> active, std::span<const CurvePoint> baseline) {
  if (active.empty()) throw ArgumentError("active curve is empty");
  for (std::size_t k = 1; k < active.size(); ++k)
    if (!(active[k].n_b > active[k - 1].n_b)) throw ArgumentError("active curve must be sorted by n_b");
  for (const auto& p : active)
    if (!(p.width > 0.0)) throw ArgumentError("widths must be positive");
  bool monotone = true;
  for (std::size_t k = 1; k < active.size(); ++k)
    if (!(active[k].width < active[k - 1].width)) monotone = false;

  std::vector<SaveRow> out;
  for (const auto& b : baseline) {
    SaveRow row;
    row.n_b = b.n_b;
    row.flagged = !monotone;
    std::optional<double> hit;
    if (active.size() == 1) {
      if (active[0].width == b.width) hit = active[0].n_b;
    }
    for (std::size_t k = 0; !hit && k + 1 < active.size(); ++k) {
      const auto& p = active[k];
      const auto& q = active[k + 1];
      const double lo = std::min(p.width, q.width), hi = std::max(p.width, q.width);
      if (b.width < lo || b.width > hi) continue;
      hit = p.width == q.width ? p.n_b : p.n_b + (b.width - p.width) * (q.n_b - p.n_b) / (q.width - p.width);
    }
    if (hit) row.save_pct = (b.n_b - *hit) / b.n_b * 100.0;
    out.push_back(row);
  }
  return out;
}

inline std::vector<CurvePoint> width_curve(const TrialResults& r, const std::string& method,
                                           std::span<const double> only = {}) {
  std::vector<CurvePoint> c;
  for (const auto* s : r.curve(method)) {
    if (!only.empty() && std::find(only.begin(), only.end(), s->n_b) == only.end()) continue;
    if (s->ok > 0) c.push_back({s->n_b, s->mean_width});
  }
  return c;
}

/// The active method whose savings are reported.
inline std::optional<std::string> primary_active(const HarnessConfig& cfg) {
  for (const char* m : {"active-batch", "active-seq-finetune", "active-seq"})
    if (cfg.has(m)) return std::string(m);
  return std::nullopt;
}

// --- output tables -------------------------------------------------------

inline void write_widths(std::ostream& out, const std::string& provenance, const TrialResults& r) {
  out << provenance << "method,n_b,mean_width,coverage\n";
  for (const auto& s : r.summaries) csv::write_row(out, s.method, s.n_b, s.mean_width, s.coverage);
}

inline void write_savings(std::ostream& out, const std::string& provenance, const TrialResults& r,
                          const HarnessConfig& cfg) {
  out << provenance;
  const auto act = primary_active(cfg);
  std::vector<std::pair<std::string, std::vector<SaveRow>>> tables;
  if (act) {
    const auto& grid = *act == "active-batch" ? r.nb_batch : r.nb_seq;
    const auto a = width_curve(r, *act);
    for (const char* base : {"ppi", "classical"}) {
      if (!cfg.has(base) || a.empty()) continue;
      tables.emplace_back(base, budget_save(a, width_curve(r, base, grid)));
    }
    out << "# active=" << *act << '\n';
    bool flagged = false;
    for (const auto& t : tables)
      for (const auto& row : t.second) flagged |= row.flagged;
    if (flagged) out << "# active width curve is not monotone; first crossing used\n";
  }
  out << "baseline,n_b,save_pct\n";
  for (const auto& [base, rows] : tables)
    for (const auto& row : rows) csv::write_row(out, base, row.n_b, row.save_pct);
}

/// Trials shown in examples.csv: `count` distinct seeded picks, ascending.
inline std::vector<std::size_t> example_trials(std::size_t trials, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> idx(trials);
  for (std::size_t i = 0; i < trials; ++i) idx[i] = i;
  Rng g(RngSpec{seed}.child(0xe7a));
  g.shuffle(idx.begin(), idx.end());
  idx.resize(std::min(count, trials));
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Budget used for examples.csv: the fourth-largest value of the grid
/// (the smallest when the grid is shorter).
inline double example_budget(std::span<const double> grid) {
  std::vector<double> g(grid.begin(), grid.end());
  std::sort(g.begin(), g.end(), std::greater<>());
  return g[std::min<std::size_t>(3, g.size() - 1)];
}

inline void write_examples(std::ostream& out, const std::string& provenance, const TrialResults& r,
                           const HarnessConfig& cfg) {
  out << provenance;
  const bool batch_grid = cfg.has("active-batch") || !(cfg.has("active-seq") || cfg.has("active-seq-finetune"));
  const double nb = example_budget(batch_grid ? r.nb_batch : r.nb_seq);
  const auto picks = example_trials(cfg.trials, cfg.example_trials, cfg.seed);
  out << "# n_b=" << csv::format(nb) << " theta_star=" << csv::format(r.theta_star) << '\n';
  out << "trial,method,estimate,lo,hi\n";
  for (const auto& rec : r.records) {
    if (rec.n_b != nb || !rec.ok) continue;
    if (!std::binary_search(picks.begin(), picks.end(), rec.trial)) continue;
    csv::write_row(out, rec.trial, rec.method, rec.estimate, rec.interval.lo, rec.interval.hi);
  }
}

/// Parses a widths.csv back into per-method curves.
inline std::map<std::string, std::vector<CurvePoint>> read_widths(std::istream& in) {
  const auto t = csv::read(in);
  const auto mc = t.require_column("method"), nc = t.require_column("n_b"), wc = t.require_column("mean_width");
  std::map<std::string, std::vector<CurvePoint>> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto line = t.line_numbers[r];
    const auto w = csv::parse_optional(t.rows[r][wc], line, "mean_width");
    if (!w || !std::isfinite(*w)) continue;
    out[t.rows[r][mc]].push_back({csv::parse_double(t.rows[r][nc], line, "n_b"), *w});
  }
  for (auto& [m, c] : out)
    std::sort(c.begin(), c.end(), [](const CurvePoint& a, const CurvePoint& b) { return a.n_b < b.n_b; });
  return out;
}

}  // namespace actinf
