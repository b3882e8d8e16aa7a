#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "actinf/composite.hpp"
#include "actinf/synthetic.hpp"

using namespace actinf;

TEST(OddsRatio, Examples) {
  EXPECT_DOUBLE_EQ(odds_ratio(0.5, 0.5), 1.0);
  EXPECT_NEAR(odds_ratio(2.0 / 3, 1.0 / 3), 4.0, 1e-14);
  EXPECT_NEAR(odds_ratio(0.5, 1.0 / 3), 2.0, 1e-14);
  EXPECT_THROW(odds_ratio(0.0, 0.5), DegenerateError);
  EXPECT_THROW(odds_ratio(0.5, 1.0), DegenerateError);
}

TEST(OddsRatio, ReciprocalProperty) {
  Rng g(RngSpec{1});
  for (int i = 0; i < 1000; ++i) {
    const double a = g.uniform(0.01, 0.99), b = g.uniform(0.01, 0.99);
    EXPECT_NEAR(odds_ratio(a, b) * odds_ratio(b, a), 1.0, 1e-12);
  }
}

TEST(OddsRatio, LogGradientMatchesFiniteDifferences) {
  Rng g(RngSpec{2});
  for (int i = 0; i < 200; ++i) {
    const double a = g.uniform(0.05, 0.95), b = g.uniform(0.05, 0.95);
    const double h = 1e-6;
    const auto [g1, g0] = log_odds_ratio_gradient(a, b);
    const double fd1 = (std::log(odds_ratio(a + h, b)) - std::log(odds_ratio(a - h, b))) / (2 * h);
    const double fd0 = (std::log(odds_ratio(a, b + h)) - std::log(odds_ratio(a, b - h))) / (2 * h);
    EXPECT_LE(std::abs(fd1 - g1), 1e-6 * std::abs(g1));
    EXPECT_LE(std::abs(fd0 - g0), 1e-6 * std::abs(g0));
  }
}

TEST(OddsRatioInterval, DegenerateWithZeroVariance) {
  const OddsRatioInputs in{2.0 / 3, 1.0 / 3, 0.0, 0.0, 100, 100};
  const auto iv = odds_ratio_interval(in, 0.1);
  EXPECT_NEAR(iv.lo, 4.0, 1e-12);
  EXPECT_NEAR(iv.hi, 4.0, 1e-12);
}

TEST(OddsRatioInterval, SymmetricOnLogScale) {
  const OddsRatioInputs in{0.3, 0.3, 0.2, 0.2, 500, 400};
  const auto iv = odds_ratio_interval(in, 0.1);
  EXPECT_TRUE(iv.contains(1.0));
  EXPECT_NEAR(std::log(iv.lo), -std::log(iv.hi), 1e-12);
}

TEST(OddsRatioInterval, MatchesFormulaAndOrders) {
  const OddsRatioInputs in{0.6, 0.3, 0.2, 0.15, 800, 1200};
  const auto iv = odds_ratio_interval(in, 0.05);
  const double se = std::sqrt(0.2 / (800 * std::pow(0.6 * 0.4, 2)) + 0.15 / (1200 * std::pow(0.3 * 0.7, 2)));
  const double theta = (0.6 / 0.4) / (0.3 / 0.7);
  EXPECT_NEAR(iv.lo, theta * std::exp(-1.959963984540054 * se), 1e-9);
  EXPECT_NEAR(iv.hi, theta * std::exp(1.959963984540054 * se), 1e-9);
  EXPECT_LT(iv.lo, theta);
  EXPECT_GT(iv.lo, 0.0);
  EXPECT_LT(theta, iv.hi);
}

TEST(OddsRatioInterval, InputValidation) {
  EXPECT_THROW(odds_ratio_interval({1.0, 0.5, 0.1, 0.1, 10, 10}, 0.1), DegenerateError);
  EXPECT_THROW(odds_ratio_interval({0.5, 0.5, -0.1, 0.1, 10, 10}, 0.1), ArgumentError);
  EXPECT_THROW(odds_ratio_interval({0.5, 0.5, 0.1, 0.1, 0, 10}, 0.1), ArgumentError);
}

namespace {

struct TwoGroupDraw {
  Pool pool;
  std::vector<unsigned char> group;
  Labels labels;
};

// Group g has P(Y=1|X) = sigmoid(b_g + 3X), X ~ U(-1,1); the model uses
// slope 2 and gives class probabilities.
TwoGroupDraw draw_two_groups(std::size_t n, const RngSpec& spec) {
  const double b[2] = {-0.5, 0.7};
  Rng g(spec);
  TwoGroupDraw out;
  std::vector<Example> ex(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int grp = g.bernoulli(0.4) ? 1 : 0;
    const double x = g.uniform(-1, 1);
    ex[i].x = Vector::Constant(1, x);
    const double p = detail::sigmoid(b[grp] + 2 * x);
    ex[i].f = p;
    Vector probs(2);
    probs << 1 - p, p;
    ex[i].probs = probs;
    out.group.push_back(static_cast<unsigned char>(grp));
    out.labels.push_back(g.bernoulli(detail::sigmoid(b[grp] + 3 * x)) ? 1.0 : 0.0);
  }
  out.pool = Pool(ex);
  return out;
}

}  // namespace

TEST(ActiveOddsRatio, BudgetSplitAndEstimates) {
  const auto d = draw_two_groups(1000, RngSpec{3});
  const auto r = active_odds_ratio(d.pool, d.group, d.labels, 200, 0.5, 0.1, RngSpec{4});
  EXPECT_EQ(r.group0.n + r.group1.n, 1000u);
  EXPECT_GT(r.estimate, 1.0);
  EXPECT_TRUE(r.interval.contains(r.estimate));
  EXPECT_NEAR(static_cast<double>(r.group0.n_lab + r.group1.n_lab), 200.0, 4 * std::sqrt(200.0));
}

TEST(ActiveOddsRatio, CoverageAudit) {
  const double truth = odds_ratio(binary_mean(0.7, 3), binary_mean(-0.5, 3));
  int covered = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const auto d = draw_two_groups(2000, RngSpec{10, static_cast<std::uint64_t>(t)});
    const auto r = active_odds_ratio(d.pool, d.group, d.labels, 400, 0.5, 0.1, RngSpec{11, static_cast<std::uint64_t>(t)});
    covered += r.interval.contains(truth);
  }
  const double cov = static_cast<double>(covered) / trials;
  EXPECT_GE(cov, 0.85);
  EXPECT_LE(cov, 0.95);
}
