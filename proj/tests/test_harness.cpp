#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "actinf/harness.hpp"

using namespace actinf;

TEST(BudgetSave, IdenticalCurvesSaveNothing) {
  const std::vector<CurvePoint> c{{100, 1.0}, {200, 0.7}, {300, 0.5}};
  for (const auto& row : budget_save(c, c)) {
    ASSERT_TRUE(row.save_pct.has_value());
    EXPECT_NEAR(*row.save_pct, 0.0, 1e-12);
    EXPECT_FALSE(row.flagged);
  }
}

TEST(BudgetSave, HalfBudgetCurve) {
  std::vector<CurvePoint> base, act;
  for (int k = 1; k <= 10; ++k) {
    const double nb = 100.0 * k;
    base.push_back({nb, 1.0 / std::sqrt(nb)});
    act.push_back({nb / 2, 1.0 / std::sqrt(nb)});
  }
  for (const auto& row : budget_save(act, base)) {
    ASSERT_TRUE(row.save_pct.has_value());
    EXPECT_NEAR(*row.save_pct, 50.0, 1e-9);
  }
}

TEST(BudgetSave, PiecewiseInterpolation) {
  const std::vector<CurvePoint> act{{40, 1.1}, {60, 0.9}}, base{{100, 1.0}};
  const auto rows = budget_save(act, base);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_NEAR(*rows[0].save_pct, 50.0, 1e-12);
}

TEST(BudgetSave, OutOfRangeAndNonMonotone) {
  const std::vector<CurvePoint> act{{40, 1.1}, {60, 0.9}};
  EXPECT_FALSE(budget_save(act, std::vector<CurvePoint>{{100, 0.5}})[0].save_pct.has_value());
  const std::vector<CurvePoint> bumpy{{10, 1.0}, {20, 0.6}, {30, 0.8}, {40, 0.4}};
  const auto rows = budget_save(bumpy, std::vector<CurvePoint>{{100, 0.7}});
  EXPECT_TRUE(rows[0].flagged);
  EXPECT_NEAR(*rows[0].save_pct, 100.0 - 17.5, 1e-12);  // first crossing at n_b = 17.5
  const std::vector<CurvePoint> unsorted{{20, 1.0}, {10, 0.5}};
  EXPECT_THROW(budget_save(unsorted, act), ArgumentError);
}

TEST(CoverageAndWidth, Examples) {
  const std::vector<Interval> hit(5, Interval{1.0, 3.0});
  const auto a = coverage_and_width(hit, 2.0);
  EXPECT_EQ(a.coverage, 1.0);
  EXPECT_EQ(a.mean_width, 2.0);
  const auto b = coverage_and_width(hit, 10.0);
  EXPECT_EQ(b.coverage, 0.0);
  const std::vector<Interval> mixed{{0, 1}, {2, 3}, {0.5, 2.5}, {-1, 0}};
  EXPECT_DOUBLE_EQ(coverage_and_width(mixed, 0.75).coverage, 0.5);
  EXPECT_DOUBLE_EQ(coverage_and_width(mixed, 0.75).mean_width, 1.25);
}

TEST(GenSynthetic, Examples) {
  SyntheticSpec s;
  s.kind = SyntheticKind::kHeteroLinear;
  s.n = 200;
  s.n_hist = 50;
  const auto a = gen_synthetic(s, RngSpec{1});
  EXPECT_EQ(a.theta_star, (Vector(2) << 2.0, -1.0).finished());
  const auto b = gen_synthetic(s, RngSpec{1});
  for (std::size_t i = 0; i < a.pool.size(); ++i) {
    EXPECT_EQ(a.pool[i].x, b.pool[i].x);
    EXPECT_EQ(a.pool[i].f, b.pool[i].f);
    EXPECT_EQ(a.hidden[i], b.hidden[i]);
    EXPECT_FALSE(a.pool[i].y.has_value());
  }
  SyntheticSpec flat;
  flat.beta1 = 0.0;
  EXPECT_DOUBLE_EQ(gen_synthetic(flat, RngSpec{2}).theta_star[0], 0.5);
}

TEST(GenSynthetic, AnalyticTruthsMatchMonteCarlo) {
  Rng g(RngSpec{3});
  const int m = 400000;
  double s = 0.0;
  for (int i = 0; i < m; ++i) s += detail::sigmoid(0.3 + 4 * g.uniform(-1, 1));
  EXPECT_NEAR(binary_mean(0.3, 4), s / m, 2e-3);
  for (double q : {0.1, 0.5, 0.9}) {
    const double med = uniform_product_quantile(q);
    int below = 0;
    for (int i = 0; i < m; ++i) below += g.uniform(0, 2 * g.uniform()) <= med;
    EXPECT_NEAR(static_cast<double>(below) / m, q, 3e-3) << q;
  }
}

TEST(GenSynthetic, QuantileErrorIsExpectedAbsoluteResidual) {
  SyntheticSpec s;
  s.kind = SyntheticKind::kQuantileTarget;
  s.q = 0.3;
  s.n = 20000;
  const auto d = gen_synthetic(s, RngSpec{4});
  // E|Y - f| / X should equal q^2 + (1 - q)^2 on average
  double ratio = 0.0;
  for (std::size_t i = 0; i < d.pool.size(); ++i) ratio += std::abs(*d.hidden[i] - *d.pool[i].f) / d.pool[i].x[0];
  EXPECT_NEAR(ratio / d.pool.size(), 0.09 + 0.49, 0.01);
  EXPECT_NEAR(*d.pool[7].err, d.pool[7].x[0] * 0.58, 1e-12);
}

TEST(BudgetGrid, RoundsAndDeduplicates) {
  const auto g = budget_grid(1000, 0.05, 0.5, 10);
  ASSERT_EQ(g.size(), 10u);
  EXPECT_EQ(g.front(), 50.0);
  EXPECT_EQ(g.back(), 500.0);
  EXPECT_EQ(budget_grid(10, 0.01, 0.02, 5), std::vector<double>{1.0});
  EXPECT_EQ(example_budget(g), g[6]);
  const std::vector<double> two{5, 7};
  EXPECT_EQ(example_budget(two), 5.0);
}

namespace {

ExperimentData small_binary() {
  SyntheticSpec s;
  s.n = 400;
  s.n_hist = 40;
  return make_experiment(gen_synthetic(s, RngSpec{5}));
}

HarnessConfig small_config() {
  HarnessConfig c;
  c.methods = {"active-batch", "active-seq-finetune", "ppi", "classical"};
  c.trials = 6;
  c.batch_points = 3;
  c.seq_points = 2;
  c.nb_min = 0.1;
  c.nb_max = 0.3;
  c.batch_size = 20;
  c.seed = 99;
  return c;
}

std::string all_tables(const TrialResults& r, const HarnessConfig& c) {
  std::ostringstream out;
  write_widths(out, "", r);
  write_savings(out, "", r, c);
  write_examples(out, "", r, c);
  return out.str();
}

}  // namespace

TEST(RunTrials, DeterministicAndThreadIndependent) {
  const auto data = small_binary();
  auto c = small_config();
  const auto a = run_trials(data, c);
  const auto b = run_trials(data, c);
  c.threads = 4;
  const auto p = run_trials(data, c);
  EXPECT_EQ(all_tables(a, c), all_tables(b, c));
  EXPECT_EQ(all_tables(a, c), all_tables(p, c));
  ASSERT_EQ(a.records.size(), p.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].estimate, p.records[i].estimate);
    EXPECT_EQ(a.records[i].interval.lo, p.records[i].interval.lo);
  }
}

TEST(RunTrials, SingleTrialIsDeterministic) {
  const auto data = small_binary();
  auto c = small_config();
  c.trials = 1;
  EXPECT_EQ(all_tables(run_trials(data, c), c), all_tables(run_trials(data, c), c));
}

TEST(RunTrials, SummariesAreConsistent) {
  const auto data = small_binary();
  auto c = small_config();
  c.seq_points = 4;
  const auto r = run_trials(data, c);
  EXPECT_EQ(r.theta_star, data.truth[0]);
  for (const auto& s : r.summaries) {
    EXPECT_EQ(s.ok + s.failed, c.trials);
    EXPECT_GE(s.coverage, 0.0);
    EXPECT_LE(s.coverage, 1.0);
  }
  // baselines run on the union of both grids
  EXPECT_EQ(r.nb_batch.size(), 3u);
  EXPECT_EQ(r.nb_seq.size(), 4u);
  EXPECT_EQ(r.curve("ppi").size(), 5u);
  EXPECT_NE(r.find("active-batch", r.nb_batch[1]), nullptr);
}

TEST(RunTrials, PpiAndClassicalShareDecisions) {
  const auto data = small_binary();
  auto c = small_config();
  c.methods = {"ppi", "classical"};
  const auto r = run_trials(data, c);
  std::vector<std::size_t> ppi, cls;
  for (const auto& rec : r.records) (rec.method == "ppi" ? ppi : cls).push_back(rec.n_lab);
  EXPECT_EQ(ppi, cls);
}

TEST(RunTrials, FailedTrialsAreRecordedNotFatal) {
  auto data = small_binary();
  data.hidden[3] = std::nullopt;  // any trial that selects row 4 fails
  auto c = small_config();
  c.methods = {"classical"};
  c.trials = 40;
  c.nb_batch = {200};
  const auto r = run_trials(data, c);
  std::size_t failed = 0;
  for (const auto& rec : r.records)
    if (!rec.ok) {
      ++failed;
      EXPECT_NE(rec.error.find("row 4"), std::string::npos);
    }
  EXPECT_GT(failed, 0u);
  EXPECT_EQ(r.summaries[0].failed, failed);
}

TEST(Widths, RoundTrip) {
  const auto data = small_binary();
  const auto c = small_config();
  const auto r = run_trials(data, c);
  std::stringstream buf;
  write_widths(buf, "# provenance\n", r);
  const auto curves = read_widths(buf);
  const auto direct = width_curve(r, "ppi");
  ASSERT_EQ(curves.at("ppi").size(), direct.size());
  for (std::size_t i = 0; i < direct.size(); ++i) {
    EXPECT_EQ(curves.at("ppi")[i].n_b, direct[i].n_b);
    EXPECT_EQ(curves.at("ppi")[i].width, direct[i].width);
  }
}

TEST(Examples, FiveSeededTrialsAtFourthLargestBudget) {
  const auto picks = example_trials(100, 5, 3);
  EXPECT_EQ(picks.size(), 5u);
  EXPECT_TRUE(std::is_sorted(picks.begin(), picks.end()));
  EXPECT_EQ(picks, example_trials(100, 5, 3));
  EXPECT_EQ(example_trials(3, 5, 3).size(), 3u);
}

TEST(MakeExperiment, HoldoutSplit) {
  std::vector<Example> ex(100);
  for (std::size_t i = 0; i < ex.size(); ++i) {
    ex[i].x = Vector::Constant(1, static_cast<double>(i));
    ex[i].y = static_cast<double>(i % 7);
    ex[i].f = 3.0;
    ex[i].err = 1.0;
  }
  const auto e = make_experiment(Pool(ex), ProblemSpec::mean(), 0.2, RngSpec{1});
  EXPECT_EQ(e.historical.size(), 20u);
  EXPECT_EQ(e.pool.size(), 80u);
  for (const auto& row : e.pool) EXPECT_FALSE(row.y.has_value());
  double m = 0.0;
  for (const auto& h : e.hidden) m += *h;
  EXPECT_DOUBLE_EQ(e.truth[0], m / 80.0);
}
