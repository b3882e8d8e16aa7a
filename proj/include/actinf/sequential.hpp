#pragma once

#include <cstddef>
#include <functional>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "actinf/batch.hpp"
#include "actinf/core.hpp"
#include "actinf/csv.hpp"
#include "actinf/error.hpp"
#include "actinf/predictors.hpp"
#include "actinf/sampling.hpp"

namespace actinf {

inline constexpr std::size_t kNeverFinetune = std::numeric_limits<std::size_t>::max();

struct SeqConfig {
  Budget budget;
  std::size_t batch_size = 100;  // B; kNeverFinetune disables refits
  double tau = 0.5;
  // Every flush_period steps the rule switches to pi = clamp(n_delta) until
  // the accumulated unused budget drops below one label. The same happens
  // once the steps left are no more than n_delta. 0 disables both.
  std::size_t flush_period = 100;
  std::optional<std::size_t> freeze_after;  // no refits after this step

  void validate() const {
    if (batch_size < 1) throw ArgumentError("fine-tune batch size must be at least 1");
    if (!(tau >= 0.0 && tau <= 1.0)) throw ArgumentError("tau must lie in [0,1]");
  }
};

/// The models driving a sequential run. The predictor supplies f_t; if it
/// returns class probabilities those give u_t, otherwise the error model
/// does (projected on h_j for GLMs), otherwise u_t is constant.
struct SeqModels {
  Predictor predictor;
  std::optional<ErrorModel> error_model;
};

struct TraceStep {
  Vector x;
  double f = 0.0;
  double u = 0.0;
  double pi = 0.0;
  bool xi = false;
  std::optional<double> y;
  int model_version = 0;
  bool flush = false;
};

/// Record of a sequential pass. `refit_after` lists the steps (1-based)
/// whose label triggered a refit; the refit model is first used at the
/// following step.
struct Trace {
  std::vector<TraceStep> steps;
  std::size_t batch_size = kNeverFinetune;
  double tau = 0.0;
  std::size_t flush_period = 0;
  double n_b = 0.0;
  std::vector<std::size_t> refit_after;

  std::size_t size() const { return steps.size(); }

  std::size_t n_lab() const {
    std::size_t s = 0;
    for (const auto& st : steps) s += st.xi;
    return s;
  }

  /// n_lab after each step.
  std::vector<std::size_t> label_path() const {
    std::vector<std::size_t> out;
    out.reserve(steps.size());
    std::size_t s = 0;
    for (const auto& st : steps) out.push_back(s += st.xi);
    return out;
  }

  std::vector<double> mean_increments() const {
    std::vector<double> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.xi ? s.f + (*s.y - s.f) / s.pi : s.f);
    return out;
  }
};

/// Thrown when the label oracle fails; carries the steps completed so far.
class SequentialAborted : public DataError {
 public:
  SequentialAborted(const std::string& what, Trace partial)
      : DataError(what), partial_(std::move(partial)) {}
  const Trace& partial_trace() const { return partial_; }

 private:
  Trace partial_;
};

/// Returns the label for pool item `index` (0-based stream position).
using LabelOracle = std::function<double(std::size_t index, const Example& example)>;

namespace detail {

class SeqUncertainty {
 public:
  SeqUncertainty(SeqModels models, ProblemSpec spec) : models_(std::move(models)), spec_(std::move(spec)) {}

  Prediction predict(const Vector& x) const { return models_.predictor.predict(x); }

  double uncertainty(const Vector& x, const Prediction& p) const {
    if (p.probs) return classification_uncertainty(*p.probs);
    if (models_.error_model) {
      const double err = models_.error_model->predict(x);
      return dir_ ? glm_uncertainty(err, x, *dir_) : err;
    }
    return 1.0;
  }

  double mean_uncertainty(const Pool& pool) const {
    double s = 0.0;
    for (const auto& e : pool) s += uncertainty(e.x, predict(e.x));
    return s / static_cast<double>(pool.size());
  }

  int version() const { return models_.predictor.version(); }

  void refit(std::span<const LabeledPoint> batch, const std::vector<Example>& labeled) {
    models_.predictor = models_.predictor.finetune(batch);
    if (models_.error_model) {
      try {
        models_.error_model = fit_error_model_cross(models_.predictor, models_.predictor.buffer());
      } catch (const Error&) {
        // keep the previous error model
      }
    }
    if (spec_.is_glm() && static_cast<Eigen::Index>(labeled.size()) > spec_.dim) {
      try {
        const Pool lp(labeled);
        std::vector<WeightedSample> s;
        for (const auto& e : labeled) s.push_back({e.x, *e.y, 1.0});
        dir_ = glm_direction(lp, spec_, solve_weighted(spec_, s));
      } catch (const Error&) {
        // keep the previous direction
      }
    }
  }

 private:
  SeqModels models_;
  ProblemSpec spec_;
  std::optional<GlmDirection> dir_;
};

}  // namespace detail

/// One pass over `pool` in order: predict with the current model, set
/// pi_t = tau_mix(min(eta_t u_t, n_delta_t) clipped to [0,1]), draw xi_t,
/// query the oracle when selected, and refit once B new labels arrive.
/// eta_t = n_b / (n * mean u_t over the pool), recomputed after each refit.
inline Trace run_sequential(const Pool& pool, SeqModels models, const SeqConfig& cfg, const RngSpec& rng,
                            const LabelOracle& oracle, const ProblemSpec& spec) {
  cfg.validate();
  spec.validate();
  if (cfg.budget.n != pool.size()) throw ArgumentError("budget pool size does not match pool");
  const auto n = pool.size();
  detail::SeqUncertainty model(std::move(models), spec);

  Trace trace;
  trace.batch_size = cfg.batch_size;
  trace.tau = cfg.tau;
  trace.flush_period = cfg.flush_period;
  trace.n_b = cfg.budget.n_b;
  trace.steps.reserve(n);

  auto eta_for = [&]() {
    const double mean_u = model.mean_uncertainty(pool);
    return mean_u > 0.0 ? cfg.budget.n_b / (static_cast<double>(n) * mean_u) : 0.0;
  };
  double eta = eta_for();

  Rng gen(rng);
  std::vector<LabeledPoint> tune;
  std::vector<Example> labeled;
  std::size_t n_lab = 0;
  bool draining = false;

  for (std::size_t t = 1; t <= n; ++t) {
    const Example& ex = pool[t - 1];
    const SequentialBudgetState state{t, n_lab, cfg.budget};
    TraceStep step;
    step.x = ex.x;
    const Prediction pred = model.predict(ex.x);
    step.f = pred.value;
    step.u = model.uncertainty(ex.x, pred);
    step.model_version = model.version();

    if (cfg.flush_period > 0 &&
        (t % cfg.flush_period == 0 || static_cast<double>(n - t + 1) <= state.n_delta()))
      draining = true;
    double base = 0.0;
    if (draining) {
      base = std::clamp(state.n_delta(), 0.0, 1.0);
      step.flush = true;
      if (state.n_delta() <= 1.0) draining = false;
    } else {
      base = sequential_pi(eta, step.u, state);
    }
    step.pi = tau_mix(base, cfg.tau, cfg.budget);
    step.xi = gen.bernoulli(step.pi);

    if (step.xi) {
      try {
        step.y = oracle(t - 1, ex);
      } catch (const std::exception& e) {
        throw SequentialAborted(std::string("label oracle failed at step ") + std::to_string(t) + ": " + e.what(),
                                std::move(trace));
      }
      ++n_lab;
      tune.push_back({ex.x, *step.y});
      Example le = ex;
      le.y = step.y;
      labeled.push_back(std::move(le));
      const bool frozen = cfg.freeze_after && t > *cfg.freeze_after;
      if (cfg.batch_size != kNeverFinetune && tune.size() >= cfg.batch_size && !frozen) {
        try {
          model.refit(tune, labeled);
          trace.refit_after.push_back(t);
          eta = eta_for();
        } catch (const Error&) {
          // keep f_t when the refit fails; labels still count
        }
        tune.clear();
      }
    }
    trace.steps.push_back(std::move(step));
  }
  return trace;
}

namespace detail {

inline std::vector<AipwItem> trace_items(const Trace& trace) {
  std::vector<AipwItem> items(trace.steps.size());
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const auto& s = trace.steps[i];
    items[i] = {&s.x, s.f, s.y, s.pi, s.xi};
  }
  return items;
}

}  // namespace detail

/// argmin (1/n) sum_t [ l(x_t, f_t) + (l(x_t, y_t) - l(x_t, f_t)) xi_t / pi_t ],
/// each step using its own f_t.
inline Vector sequential_estimate(const Trace& trace, const ProblemSpec& spec) {
  const auto items = detail::trace_items(trace);
  return detail::aipw_estimate(spec, items);
}

/// H^-1 V H^-1 from the realized gradient increments at theta_hat.
inline Matrix sequential_covariance(const Trace& trace, const ProblemSpec& spec, const Vector& theta_hat) {
  const auto items = detail::trace_items(trace);
  return detail::aipw_covariance(spec, items, theta_hat);
}

inline InferenceReport infer_sequential(const Trace& trace, const ProblemSpec& spec, double alpha,
                                        std::string method = "active-seq") {
  Vector theta = sequential_estimate(trace, spec);
  Matrix sigma = sequential_covariance(trace, spec, theta);
  return detail::make_report(std::move(method), std::move(theta), std::move(sigma),
                             static_cast<double>(trace.size()), alpha, trace.size(), trace.n_lab());
}

/// Checks that the model version used at every step reflects only refits
/// triggered at earlier steps.
inline bool trace_is_predictable(const Trace& trace) {
  if (trace.steps.empty()) return true;
  const int v0 = trace.steps.front().model_version;
  std::size_t refits = 0;
  for (std::size_t t = 1; t <= trace.steps.size(); ++t) {
    while (refits < trace.refit_after.size() && trace.refit_after[refits] < t) ++refits;
    if (trace.steps[t - 1].model_version != v0 + static_cast<int>(refits)) return false;
  }
  return true;
}

/// One row per step; a leading comment echoes the run configuration.
inline void write_trace(std::ostream& out, const Trace& trace) {
  const Eigen::Index d = trace.steps.empty() ? 0 : trace.steps.front().x.size();
  out << "# batch_size=" << (trace.batch_size == kNeverFinetune ? std::string("inf") : std::to_string(trace.batch_size))
      << " tau=" << csv::format(trace.tau) << " flush_period=" << trace.flush_period
      << " n_b=" << csv::format(trace.n_b) << " refit_after=";
  for (std::size_t i = 0; i < trace.refit_after.size(); ++i) out << (i ? ";" : "") << trace.refit_after[i];
  out << '\n';
  out << "step";
  for (Eigen::Index k = 0; k < d; ++k) out << ",x" << k;
  out << ",f,u,pi,xi,y,version,flush\n";
  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    const auto& s = trace.steps[t];
    out << (t + 1);
    for (Eigen::Index k = 0; k < d; ++k) out << ',' << csv::format(s.x[k]);
    out << ',' << csv::format(s.f) << ',' << csv::format(s.u) << ',' << csv::format(s.pi) << ','
        << (s.xi ? 1 : 0) << ',' << csv::format(s.y) << ',' << s.model_version << ',' << (s.flush ? 1 : 0)
        << '\n';
  }
}

/// Inverse of write_trace (configuration echo is not restored beyond the
/// per-step columns, which are all estimation needs).
inline Trace read_trace(std::istream& in) {
  const auto t = csv::read(in);
  Trace trace;
  std::vector<std::size_t> xc;
  for (int k = 0;; ++k) {
    auto c = t.column("x" + std::to_string(k));
    if (!c) break;
    xc.push_back(*c);
  }
  const auto fc = t.require_column("f"), uc = t.require_column("u"), pc = t.require_column("pi"),
             xic = t.require_column("xi"), yc = t.require_column("y"), vc = t.require_column("version"),
             flc = t.require_column("flush");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto line = t.line_numbers[r];
    TraceStep s;
    s.x.resize(static_cast<Eigen::Index>(xc.size()));
    for (std::size_t k = 0; k < xc.size(); ++k)
      s.x[static_cast<Eigen::Index>(k)] = csv::parse_double(row[xc[k]], line, t.header[xc[k]]);
    s.f = csv::parse_double(row[fc], line, "f");
    s.u = csv::parse_double(row[uc], line, "u");
    s.pi = csv::parse_double(row[pc], line, "pi");
    s.xi = csv::parse_double(row[xic], line, "xi") != 0.0;
    s.y = csv::parse_optional(row[yc], line, "y");
    s.model_version = static_cast<int>(csv::parse_double(row[vc], line, "version"));
    s.flush = csv::parse_double(row[flc], line, "flush") != 0.0;
    trace.steps.push_back(std::move(s));
  }
  return trace;
}

}  // namespace actinf
