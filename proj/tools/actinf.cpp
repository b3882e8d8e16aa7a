// Command-line front end: plan, infer, simulate, sequential, budget-save.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "actinf/actinf.hpp"

namespace fs = std::filesystem;
using namespace actinf;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha, n_b, tau;

  Config build() const {
    Config c = config_path.empty() ? Config{} : Config::load(config_path);
    for (const auto& o : overrides) c.set_assignment(o);
    if (seed) c.set("seed", std::to_string(*seed));
    if (alpha) c.set("alpha", csv::format(*alpha));
    if (n_b) c.set("n_b", csv::format(*n_b));
    if (tau) c.set("tau", csv::format(*tau));
    return c;
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "key=value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.overrides, "config override key=value (repeatable; wins over the file)");
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--alpha", c.alpha, "error level (default 0.1)");
  cmd->add_option("--n-b", c.n_b, "label budget");
  cmd->add_option("--tau", c.tau, "mixing weight with the uniform rule");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write '" + path + "'");
  return out;
}

ProblemSpec problem_from(const Config& c, Eigen::Index dim) {
  const auto kind = c.str("problem", "mean");
  const auto target = static_cast<Eigen::Index>(c.integer("target", 0));
  if (kind == "mean") return ProblemSpec::mean();
  if (kind == "quantile") return ProblemSpec::quantile(c.real("q", 0.5));
  if (kind == "linear") return ProblemSpec::linear(dim, target);
  if (kind == "logistic") return ProblemSpec::logistic(dim, target);
  throw ArgumentError("unknown problem '" + kind + "' (mean, linear, logistic, quantile)");
}

/// Column layout from the config, falling back to conventional names:
/// covariates x, x0, x1, ...; label y; prediction f; error err; p0, p1, ...
PoolSchema schema_from(const Config& c, const csv::Table& t) {
  PoolSchema s;
  s.x_cols = c.list("x_cols");
  if (s.x_cols.empty()) {
    static const std::regex xre("x[0-9]*");
    for (const auto& h : t.header)
      if (std::regex_match(h, xre)) s.x_cols.push_back(h);
  }
  if (s.x_cols.empty()) throw SchemaError("no covariate columns (name them x0, x1, ... or set x_cols)");
  auto pick = [&](const char* key, const char* fallback) -> std::optional<std::string> {
    if (auto v = c.opt(key)) return v;
    if (t.column(fallback)) return std::string(fallback);
    return std::nullopt;
  };
  s.y_col = pick("y_col", "y");
  s.f_col = pick("f_col", "f");
  s.err_col = pick("err_col", "err");
  s.prob_cols = c.list("prob_cols");
  if (s.prob_cols.empty()) {
    for (int k = 0; t.column("p" + std::to_string(k)); ++k) s.prob_cols.push_back("p" + std::to_string(k));
    if (s.prob_cols.size() == 1) s.prob_cols.clear();
  }
  return s;
}

Pool load_pool_with(const Config& c, const std::string& path, const std::string& predictions) {
  const auto t = csv::read_file(path);
  Pool pool = pool_from_table(t, schema_from(c, t));
  if (!predictions.empty())
    pool = attach_predictions(pool, load_predictions(predictions, c.str("f_col", "f"), c.str("err_col", "err"),
                                                     c.list("prob_cols")));
  return pool;
}

std::optional<GlmDirection> direction_for(const Pool& pool, const ProblemSpec& spec) {
  if (!spec.is_glm()) return std::nullopt;
  return plugin_direction(pool, spec);
}

/// Labels from a CSV with columns (row, y), rows 1-based, or a single y
/// column aligned with the pool.
Labels load_labels(const std::string& path, std::size_t n) {
  const auto t = csv::read_file(path);
  Labels out(n);
  const auto yc = t.require_column("y");
  const auto rc = t.column("row");
  if (!rc && t.rows.size() != n)
    throw DataError("labels file has " + std::to_string(t.rows.size()) + " rows, pool has " + std::to_string(n));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto line = t.line_numbers[r];
    std::size_t idx = r;
    if (rc) {
      const double v = csv::parse_double(t.rows[r][*rc], line, "row");
      if (!(v >= 1.0 && v <= static_cast<double>(n) && v == std::floor(v)))
        throw ParseError(line, "row index out of range");
      idx = static_cast<std::size_t>(v) - 1;
    }
    out[idx] = csv::parse_optional(t.rows[r][yc], line, "y");
  }
  return out;
}

double tau_from(const Config& c, const std::function<double()>& tuned) {
  const auto policy = c.str("tau_policy", c.has("tau") ? "fixed" : "default");
  if (policy == "default") return 0.5;
  if (policy == "fixed") {
    if (!c.opt("tau")) throw ArgumentError("tau_policy=fixed needs tau");
    return c.real("tau", 0.5);
  }
  if (policy == "tuned") return tuned();
  throw ArgumentError("unknown tau_policy '" + policy + "' (default, fixed, tuned)");
}

Budget budget_from(const Config& c, std::size_t n) {
  const auto nb = c.opt_real("n_b");
  if (!nb) throw ArgumentError("label budget n_b is required");
  return Budget(*nb, n);
}

// --- plan -----------------------------------------------------------------

struct PlanArgs {
  Common common;
  std::string pool, predictions, history, out = "plan.csv";
};

int cmd_plan(const PlanArgs& a) {
  const Config c = a.common.build();
  const Pool pool = load_pool_with(c, a.pool, a.predictions);
  const ProblemSpec spec = problem_from(c, pool.dim());
  const Budget budget = budget_from(c, pool.size());
  const auto dir = direction_for(pool, spec);
  const auto u = pool_uncertainty(pool, dir);
  const double tau = tau_from(c, [&] {
    if (a.history.empty()) throw ArgumentError("tau_policy=tuned needs --history");
    const Pool hist = load_pool_with(c, a.history, "");
    const auto hu = pool_uncertainty(hist, dir);
    std::vector<HistoricalPoint> pts;
    for (std::size_t i = 0; i < hist.size(); ++i) {
      if (!hist[i].y || !hist[i].f) throw DataError("history row " + std::to_string(i + 1) + " needs y and f");
      pts.push_back({*hist[i].y, *hist[i].f, hu[i]});
    }
    double mean_u = 0.0;
    for (double v : u) mean_u += v;
    mean_u /= static_cast<double>(u.size());
    if (!(mean_u > 0.0)) return tune_tau(pts, budget, default_tau_grid());
    return tune_tau(pts, budget, default_tau_grid(), budget.uniform_rate() / mean_u);
  });
  const auto plan = batch_plan(u, budget, tau, RngSpec{c.integer("seed", 0)});
  if (plan.uniform_fallback) std::cerr << "warning: every uncertainty is zero; using the uniform rule\n";

  auto out = open_out(a.out);
  out << c.provenance();
  out << "# eta=" << csv::format(plan.eta) << " tau=" << csv::format(plan.tau)
      << " expected_labels=" << csv::format(plan.expected_labels()) << " n_lab=" << plan.n_lab
      << " uniform_fallback=" << (plan.uniform_fallback ? 1 : 0) << '\n';
  out << "row,pi,xi\n";
  for (std::size_t i = 0; i < plan.pi.size(); ++i) csv::write_row(out, i + 1, plan.pi[i], int(plan.xi[i]));
  std::cout << "eta=" << csv::format(plan.eta) << " tau=" << csv::format(plan.tau)
            << " expected_labels=" << csv::format(plan.expected_labels()) << " n_lab=" << plan.n_lab << '\n';
  return 0;
}

SamplingPlan read_plan(const std::string& path, std::size_t n) {
  const auto t = csv::read_file(path);
  const auto pc = t.require_column("pi"), xc = t.require_column("xi");
  if (t.rows.size() != n)
    throw DataError("plan has " + std::to_string(t.rows.size()) + " rows, pool has " + std::to_string(n));
  SamplingPlan plan;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto line = t.line_numbers[r];
    const double pi = csv::parse_double(t.rows[r][pc], line, "pi");
    const double xi = csv::parse_double(t.rows[r][xc], line, "xi");
    if (!(pi >= 0.0 && pi <= 1.0)) throw ParseError(line, "pi outside [0,1]");
    if (xi != 0.0 && xi != 1.0) throw ParseError(line, "xi must be 0 or 1");
    plan.pi.push_back(pi);
    plan.xi.push_back(xi != 0.0);
    plan.n_lab += xi != 0.0;
  }
  return plan;
}

// --- infer ----------------------------------------------------------------

struct InferArgs {
  Common common;
  std::string pool, predictions, plan, labels, method = "active", out;
  bool nonasymptotic = false;
};

int cmd_infer(const InferArgs& a) {
  const Config c = a.common.build();
  const Pool pool = load_pool_with(c, a.pool, a.predictions);
  const ProblemSpec spec = problem_from(c, pool.dim());
  const double alpha = c.real("alpha", 0.1);
  const auto plan = read_plan(a.plan, pool.size());
  const Labels all = load_labels(a.labels, pool.size());
  Labels revealed(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!plan.xi[i]) continue;
    if (!all[i]) throw DataError("row " + std::to_string(i + 1) + " was selected but has no label");
    revealed[i] = all[i];
  }

  InferenceReport report;
  if (a.method == "active") {
    report = infer_active(pool, plan, revealed, spec, alpha);
  } else if (a.method == "ppi") {
    const double nb = c.opt_real("n_b").value_or(plan.expected_labels());
    report = infer_ppi(pool, plan.xi, revealed, spec, Budget(nb, pool.size()), alpha);
  } else if (a.method == "classical") {
    report = infer_classical(pool, plan.xi, revealed, spec, alpha);
  } else {
    throw ArgumentError("unknown method '" + a.method + "' (active, ppi, classical)");
  }

  std::ofstream file;
  if (!a.out.empty()) file = open_out(a.out);
  std::ostream& out = a.out.empty() ? std::cout : file;
  out << c.provenance();
  write_report_header(out);
  write_report_rows(out, report);

  if (a.nonasymptotic) {
    if (spec.kind != LossKind::kMean) throw ArgumentError("--nonasymptotic supports the mean only");
    if (a.method != "active") throw ArgumentError("--nonasymptotic applies to the active method");
    const auto y_lo = c.opt_real("y_lo"), y_hi = c.opt_real("y_hi");
    if (!y_lo || !y_hi) throw ArgumentError("--nonasymptotic needs y_lo and y_hi");
    double pi_min = 1.0;
    for (double p : plan.pi)
      if (p > 0.0) pi_min = std::min(pi_min, p);
    const auto inc = active_mean_increments(pool, plan, revealed);
    const auto bet = betting_interval(inc, increment_bounds(*y_lo, *y_hi, pi_min), alpha,
                                      static_cast<std::size_t>(c.integer("grid_size", 1000)));
    if (bet.degenerate) std::cerr << "warning: no candidate mean survived; reporting one grid step around the minimum-wealth point\n";
    csv::write_row(out, std::string(bet.degenerate ? "active-betting-degenerate" : "active-betting"), 0,
                   report.theta_hat[0], bet.interval.lo, bet.interval.hi, report.n, report.n_lab, alpha);
  }
  return 0;
}

// --- simulate -------------------------------------------------------------

HarnessConfig harness_from(const Config& c) {
  HarnessConfig h;
  h.methods = c.list("methods", h.methods);
  h.trials = c.integer("trials", h.trials);
  h.nb_batch = c.real_list("nb_grid");
  h.nb_seq = c.real_list("nb_seq_grid");
  h.batch_points = c.integer("batch_points", h.batch_points);
  h.seq_points = c.integer("seq_points", h.seq_points);
  h.nb_min = c.real("nb_min", h.nb_min);
  h.nb_max = c.real("nb_max", h.nb_max);
  h.alpha = c.real("alpha", h.alpha);
  h.tau_batch = tau_from(c, []() -> double {
    throw ArgumentError("tau_policy=tuned is available in the plan command only");
  });
  h.tau_seq = c.real("tau_seq", 0.5);
  const auto b = c.str("batch_size", "100");
  h.batch_size = b == "inf" ? kNeverFinetune : c.integer("batch_size", 100);
  h.flush_period = c.integer("flush_period", h.flush_period);
  if (auto f = c.opt_integer("freeze_after")) h.freeze_after = *f;
  h.seq_init = c.integer("seq_init", h.seq_init);
  h.example_trials = c.integer("example_trials", h.example_trials);
  h.seed = c.integer("seed", 0);
  h.threads = static_cast<unsigned>(c.integer("threads", 1));
  return h;
}

ExperimentData experiment_from(const Config& c) {
  if (auto path = c.opt("data")) {
    const auto t = csv::read_file(*path);
    const auto schema = schema_from(c, t);
    if (!schema.y_col) throw SchemaError("dataset needs a label column");
    const Pool labeled = pool_from_table(t, schema);
    return make_experiment(labeled, problem_from(c, labeled.dim()), c.real("holdout", 0.1),
                           RngSpec{c.integer("seed", 0)}.child(0xda7a));
  }
  SyntheticSpec s;
  s.kind = parse_synthetic_kind(c.str("synthetic", "binary"));
  s.n = c.integer("n", s.n);
  s.n_hist = c.integer("n_hist", s.n_hist);
  s.beta0 = c.real("beta0", s.beta0);
  s.beta1 = c.real("beta1", s.beta1);
  s.gamma0 = c.real("gamma0", s.gamma0);
  s.gamma1 = c.real("gamma1", s.gamma1);
  s.theta0 = c.real("theta0", s.theta0);
  s.theta1 = c.real("theta1", s.theta1);
  s.noise = c.real("noise", s.noise);
  s.q = c.real("q", s.q);
  return make_experiment(gen_synthetic(s, RngSpec{c.integer("seed", 0)}));
}

struct SimulateArgs {
  Common common;
  std::string out_dir = ".";
  std::optional<unsigned> threads;
};

int cmd_simulate(const SimulateArgs& a) {
  Config c = a.common.build();
  const HarnessConfig h = [&] {
    auto h = harness_from(c);
    if (a.threads) h.threads = *a.threads;  // not echoed: output is independent of it
    return h;
  }();
  h.validate();
  const ExperimentData data = experiment_from(c);
  const TrialResults r = run_trials(data, h);

  fs::create_directories(a.out_dir);
  const auto prov = c.provenance();
  {
    auto out = open_out((fs::path(a.out_dir) / "widths.csv").string());
    write_widths(out, prov, r);
  }
  {
    auto out = open_out((fs::path(a.out_dir) / "savings.csv").string());
    write_savings(out, prov, r, h);
  }
  {
    auto out = open_out((fs::path(a.out_dir) / "examples.csv").string());
    write_examples(out, prov, r, h);
  }
  std::size_t failed = 0;
  for (const auto& rec : r.records)
    if (!rec.ok) {
      if (failed < 5)
        std::cerr << "trial " << rec.trial << " (" << rec.method << ", n_b=" << csv::format(rec.n_b)
                  << ") failed: " << rec.error << '\n';
      ++failed;
    }
  if (failed) std::cerr << failed << " of " << r.records.size() << " trials failed and were skipped\n";
  return 0;
}

// --- sequential -----------------------------------------------------------

struct SequentialArgs {
  Common common;
  std::string pool, labels, train, out = "trace.csv", report;
};

int cmd_sequential(const SequentialArgs& a) {
  const Config c = a.common.build();
  const Pool pool = load_pool_with(c, a.pool, "");
  const ProblemSpec spec = problem_from(c, pool.dim());
  const Budget budget = budget_from(c, pool.size());
  const Labels labels = load_labels(a.labels, pool.size());

  const auto tt = csv::read_file(a.train);
  const Pool train_pool = pool_from_table(tt, schema_from(c, tt));
  std::vector<LabeledPoint> train;
  for (std::size_t i = 0; i < train_pool.size(); ++i) {
    if (!train_pool[i].y) throw DataError("training row " + std::to_string(i + 1) + " has no label");
    train.push_back({train_pool[i].x, *train_pool[i].y});
  }
  const auto learner = c.str("learner", spec.kind == LossKind::kLogistic ? "logistic" : "ridge");
  SeqModels models{Predictor::ridge(), std::nullopt};
  if (learner == "logistic") {
    models.predictor = Predictor::logistic().fit(train);
  } else if (learner == "ridge") {
    models.predictor = Predictor::ridge(c.opt_real("ridge_lambda")).fit(train);
    if (train.size() >= 4) models.error_model = fit_error_model_cross(models.predictor, train);
  } else {
    throw ArgumentError("unknown learner '" + learner + "' (ridge, logistic)");
  }

  SeqConfig sc;
  sc.budget = budget;
  const auto b = c.str("batch_size", "100");
  sc.batch_size = b == "inf" ? kNeverFinetune : c.integer("batch_size", 100);
  sc.tau = tau_from(c, []() -> double { throw ArgumentError("tau_policy=tuned is not available here"); });
  sc.flush_period = c.integer("flush_period", 100);
  if (auto f = c.opt_integer("freeze_after")) sc.freeze_after = *f;

  const LabelOracle oracle = [&labels](std::size_t idx, const Example&) {
    if (!labels[idx]) throw DataError("no label for row " + std::to_string(idx + 1));
    return *labels[idx];
  };
  auto write = [&](const Trace& trace) {
    auto out = open_out(a.out);
    out << c.provenance();
    write_trace(out, trace);
  };
  Trace trace;
  try {
    trace = run_sequential(pool, models, sc, RngSpec{c.integer("seed", 0)}, oracle, spec);
  } catch (const SequentialAborted& e) {
    write(e.partial_trace());
    throw;
  }
  write(trace);

  const auto report = infer_sequential(trace, spec, c.real("alpha", 0.1));
  std::ofstream file;
  if (!a.report.empty()) file = open_out(a.report);
  std::ostream& out = a.report.empty() ? std::cout : file;
  out << c.provenance();
  write_report_header(out);
  write_report_rows(out, report);
  return 0;
}

// --- budget-save ----------------------------------------------------------

struct SaveArgs {
  Common common;
  std::string widths, active, out;
};

int cmd_budget_save(const SaveArgs& a) {
  const Config c = a.common.build();
  std::ifstream in(a.widths);
  if (!in) throw DataError("cannot open '" + a.widths + "'");
  const auto curves = read_widths(in);
  std::string act = a.active;
  if (act.empty())
    for (const char* m : {"active-batch", "active-seq-finetune", "active-seq"})
      if (curves.count(m)) {
        act = m;
        break;
      }
  if (act.empty() || !curves.count(act)) throw DataError("widths file has no active method curve");
  const auto& ac = curves.at(act);

  std::ofstream file;
  if (!a.out.empty()) file = open_out(a.out);
  std::ostream& out = a.out.empty() ? std::cout : file;
  out << c.provenance() << "# active=" << act << '\n' << "baseline,n_b,save_pct\n";
  for (const char* base : {"ppi", "classical"}) {
    const auto it = curves.find(base);
    if (it == curves.end()) continue;
    std::vector<CurvePoint> bc;
    for (const auto& p : it->second)
      if (std::any_of(ac.begin(), ac.end(), [&](const CurvePoint& q) { return q.n_b == p.n_b; })) bc.push_back(p);
    if (bc.empty()) bc = it->second;
    for (const auto& row : budget_save(ac, bc)) csv::write_row(out, std::string(base), row.n_b, row.save_pct);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active statistical inference: sampling plans, estimates, and simulations"};
  app.require_subcommand(1);

  PlanArgs plan;
  auto* p = app.add_subcommand("plan", "compute labeling probabilities and draw decisions");
  add_common(p, plan.common);
  p->add_option("--pool", plan.pool, "pool CSV")->required()->check(CLI::ExistingFile);
  p->add_option("--predictions", plan.predictions, "predictions CSV (f, err, p0, p1, ...)")->check(CLI::ExistingFile);
  p->add_option("--history", plan.history, "labeled CSV with predictions, for tau_policy=tuned")
      ->check(CLI::ExistingFile);
  p->add_option("--out", plan.out, "plan CSV to write");

  InferArgs infer;
  auto* i = app.add_subcommand("infer", "estimate and build confidence intervals from a plan and labels");
  add_common(i, infer.common);
  i->add_option("--pool", infer.pool, "pool CSV")->required()->check(CLI::ExistingFile);
  i->add_option("--predictions", infer.predictions, "predictions CSV")->check(CLI::ExistingFile);
  i->add_option("--plan", infer.plan, "plan CSV from the plan command")->required()->check(CLI::ExistingFile);
  i->add_option("--labels", infer.labels, "labels CSV (row, y)")->required()->check(CLI::ExistingFile);
  i->add_option("--method", infer.method, "active, ppi or classical");
  i->add_flag("--nonasymptotic", infer.nonasymptotic, "add a betting interval row (mean only)");
  i->add_option("--out", infer.out, "report CSV (default stdout)");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Monte-Carlo comparison of methods over a budget grid");
  add_common(s, sim.common);
  s->add_option("--out-dir", sim.out_dir, "directory for widths.csv, savings.csv, examples.csv");
  s->add_option("--threads", sim.threads, "worker threads for trials");

  SequentialArgs seq;
  auto* q = app.add_subcommand("sequential", "stream the pool, querying labels from a file");
  add_common(q, seq.common);
  q->add_option("--pool", seq.pool, "pool CSV (stream order)")->required()->check(CLI::ExistingFile);
  q->add_option("--labels", seq.labels, "labels CSV acting as the oracle")->required()->check(CLI::ExistingFile);
  q->add_option("--train", seq.train, "labeled CSV for the starting model")->required()->check(CLI::ExistingFile);
  q->add_option("--out", seq.out, "trace CSV to write");
  q->add_option("--report", seq.report, "report CSV (default stdout)");

  SaveArgs save;
  auto* b = app.add_subcommand("budget-save", "recompute budget savings from widths.csv");
  add_common(b, save.common);
  b->add_option("--widths", save.widths, "widths.csv from simulate")->required()->check(CLI::ExistingFile);
  b->add_option("--active", save.active, "active method to compare");
  b->add_option("--out", save.out, "savings CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::kConfig);
  }

  try {
    if (p->parsed()) return cmd_plan(plan);
    if (i->parsed()) return cmd_infer(infer);
    if (s->parsed()) return cmd_simulate(sim);
    if (q->parsed()) return cmd_sequential(seq);
    if (b->parsed()) return cmd_budget_save(save);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
