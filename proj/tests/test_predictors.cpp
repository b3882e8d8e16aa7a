#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "actinf/predictors.hpp"
#include "actinf/rng.hpp"

using namespace actinf;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) out[i++] = d;
  return out;
}

double cu(std::initializer_list<double> p) {
  const std::vector<double> v(p);
  return classification_uncertainty(std::span<const double>(v));
}

}  // namespace

TEST(ClassificationUncertainty, Examples) {
  EXPECT_DOUBLE_EQ(cu({0.5, 0.5}), 1.0);
  EXPECT_DOUBLE_EQ(cu({1.0, 0.0}), 0.0);
  EXPECT_DOUBLE_EQ(cu({0.25, 0.25, 0.25, 0.25}), 1.0);
  // binary case equals 2 min(p, 1 - p)
  EXPECT_NEAR(cu({0.1, 0.9}), 0.2, 1e-15);
}

TEST(ClassificationUncertainty, Errors) {
  EXPECT_THROW(cu({1.0}), ArgumentError);
  EXPECT_THROW(cu({0.5, 0.6}), ArgumentError);
  EXPECT_THROW(cu({-0.1, 1.1}), ArgumentError);
}

TEST(ClassificationUncertainty, BinaryMatchesTwiceMin) {
  for (double p = 0.0; p <= 1.0; p += 0.01) EXPECT_NEAR(cu({p, 1 - p}), 2 * std::min(p, 1 - p), 1e-12);
}

TEST(ClassificationUncertainty, PermutationInvariant) {
  Rng g(RngSpec{1});
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> p(2 + g.below(5));
    double s = 0.0;
    for (auto& v : p) s += (v = g.uniform());
    for (auto& v : p) v /= s;
    const double base = classification_uncertainty(std::span<const double>(p));
    std::vector<double> q = p;
    g.shuffle(q.begin(), q.end());
    EXPECT_DOUBLE_EQ(classification_uncertainty(std::span<const double>(q)), base);
  }
}

TEST(ClassificationUncertainty, DecreasingInMaxProbability) {
  for (std::size_t k : {2u, 3u, 5u}) {
    double prev = 2.0;
    for (double top = 1.0 / static_cast<double>(k); top <= 1.0; top += 0.01) {
      std::vector<double> p(k, (1 - top) / static_cast<double>(k - 1));
      p[0] = top;
      const double u = classification_uncertainty(std::span<const double>(p));
      EXPECT_LE(u, prev + 1e-12);
      prev = u;
    }
  }
}

TEST(Ridge, ExactLineWithoutPenalty) {
  std::vector<LabeledPoint> d;
  for (int i = 0; i < 10; ++i) d.push_back({vec({double(i)}), 2.0 * i});
  const auto m = Predictor::ridge(0.0).fit(d);
  EXPECT_NEAR(m.predict_value(vec({3})), 6.0, 1e-9);
}

TEST(Ridge, DefaultPenaltyShrinksSlope) {
  std::vector<LabeledPoint> d;
  for (int i = 0; i < 10; ++i) d.push_back({vec({i / 10.0}), 2.0 * i / 10.0});
  const auto m = Predictor::ridge().fit(d);
  const double slope = m.coefficients()[1];
  EXPECT_LT(slope, 2.0);
  EXPECT_GT(slope, 1.9);
}

TEST(Predictor, UnfittedPredictIsStateError) {
  EXPECT_THROW(Predictor::ridge().predict(vec({1})), StateError);
  EXPECT_THROW(Predictor::knearest(0), ArgumentError);
}

TEST(KNearest, OneNeighbourRecoversTrainingLabels) {
  std::vector<LabeledPoint> d{{vec({0, 0}), 1}, {vec({1, 0}), 2}, {vec({0, 5}), 3}};
  const auto m = Predictor::knearest(1).fit(d);
  for (const auto& p : d) EXPECT_EQ(m.predict_value(p.x), p.y);
  EXPECT_EQ(m.predict_value(vec({0.9, 0.2})), 2.0);
  const auto m3 = Predictor::knearest(3).fit(d);
  EXPECT_DOUBLE_EQ(m3.predict_value(vec({0, 0})), 2.0);
}

TEST(Logistic, ProbabilitiesAreConsistent) {
  Rng g(RngSpec{2});
  std::vector<LabeledPoint> d;
  for (int i = 0; i < 200; ++i) {
    const double x = g.uniform(-1, 1);
    d.push_back({vec({x}), g.bernoulli(detail::sigmoid(3 * x)) ? 1.0 : 0.0});
  }
  const auto m = Predictor::logistic().fit(d);
  for (double x : {-1.0, 0.0, 0.4}) {
    const auto p = m.predict(vec({x}));
    ASSERT_TRUE(p.probs.has_value());
    EXPECT_NEAR(p.probs->sum(), 1.0, 1e-15);
    EXPECT_DOUBLE_EQ((*p.probs)[1], p.value);
  }
  EXPECT_GT(m.predict_value(vec({1})), m.predict_value(vec({-1})));
}

TEST(Finetune, EmptyBufferEqualsFreshFit) {
  std::vector<LabeledPoint> d{{vec({0}), 1}, {vec({1}), 2}, {vec({2}), 2.5}};
  const auto fresh = Predictor::ridge().fit(d);
  const auto tuned = Predictor::ridge().finetune(d);
  EXPECT_EQ(fresh.coefficients(), tuned.coefficients());
}

TEST(Finetune, SplitInvariantAndVersioned) {
  std::vector<LabeledPoint> d;
  for (int i = 0; i < 12; ++i) d.push_back({vec({double(i), std::sin(i)}), std::cos(i)});
  const std::span<const LabeledPoint> all(d);
  const auto a = Predictor::ridge().fit(all.first(4)).finetune(all.subspan(4));
  const auto b = Predictor::ridge().fit(all.first(6)).finetune(all.subspan(6, 3)).finetune(all.subspan(9));
  EXPECT_EQ(a.coefficients(), b.coefficients());
  EXPECT_EQ(a.buffer().size(), 12u);
  EXPECT_LT(Predictor::ridge().fit(all.first(4)).version(), a.version());
  EXPECT_LT(a.version(), a.finetune(all.first(1)).version());
  EXPECT_THROW(a.finetune({}), ArgumentError);
}

TEST(Predictor, DeterministicGivenState) {
  std::vector<LabeledPoint> d{{vec({0}), 0}, {vec({1}), 1}, {vec({2}), 1}, {vec({-1}), 0}};
  const auto m = Predictor::logistic().fit(d);
  EXPECT_EQ(m.predict_value(vec({0.5})), m.predict_value(vec({0.5})));
  EXPECT_EQ(m.coefficients(), Predictor::logistic().fit(d).coefficients());
}

TEST(ErrorModel, PerfectPredictorGivesZero) {
  std::vector<ErrorPair> p;
  for (int i = 0; i < 10; ++i) p.push_back({vec({double(i)}), i * 0.5, i * 0.5});
  const auto e = fit_error_model(p);
  for (const auto& q : p) EXPECT_LE(e.predict(q.x), 1e-6);
}

TEST(ErrorModel, LearnsAbsoluteResidualLinearInCovariate) {
  Rng g(RngSpec{3});
  for (int n : {20, 200, 2000}) {
    std::vector<ErrorPair> p;
    for (int i = 0; i < n; ++i) {
      const double x = g.uniform(0, 2);
      const double f = g.normal();
      p.push_back({vec({x}), f, f + (g.bernoulli(0.5) ? x : -x)});
    }
    const auto e = fit_error_model(p, Predictor::ridge(0.0));
    double sse = 0.0;
    for (const auto& q : p) sse += std::pow(e.predict(q.x) - std::abs(q.f - q.y), 2);
    const double rmse = std::sqrt(sse / n);
    EXPECT_LT(rmse, 1e-9);
  }
}

TEST(ErrorModel, NonnegativeEverywhere) {
  std::vector<ErrorPair> p;
  for (int i = 0; i < 10; ++i) p.push_back({vec({double(i)}), 0.0, 10.0 - i});
  const auto e = fit_error_model(p, Predictor::ridge(0.0));
  for (double x = -50; x <= 50; x += 0.5) EXPECT_GE(e.predict(vec({x})), 0.0);
  EXPECT_EQ(e.predict(vec({40})), 0.0);
}

TEST(ErrorModel, CrossFitNeedsFourPoints) {
  std::vector<LabeledPoint> d{{vec({0}), 0}, {vec({1}), 1}, {vec({2}), 1}};
  EXPECT_THROW(fit_error_model_cross(Predictor::ridge(), d), DataError);
}
