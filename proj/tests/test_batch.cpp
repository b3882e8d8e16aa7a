#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "actinf/batch.hpp"

using namespace actinf;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) out[i++] = d;
  return out;
}

Pool with_f(const std::vector<Vector>& xs, const std::vector<double>& f) {
  std::vector<Example> ex(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ex[i].x = xs[i];
    ex[i].f = f[i];
  }
  return Pool(ex);
}

Pool scalar_pool(const std::vector<double>& f) {
  return with_f(std::vector<Vector>(f.size(), vec({0})), f);
}

SamplingPlan plan_of(std::vector<double> pi, std::vector<unsigned char> xi) {
  SamplingPlan p;
  p.pi = std::move(pi);
  p.xi = std::move(xi);
  for (auto v : p.xi) p.n_lab += v;
  return p;
}

Labels all_labels(const std::vector<double>& y) { return Labels(y.begin(), y.end()); }

}  // namespace

TEST(ActiveBatch, WorkedMeanExamples) {
  const auto pool = scalar_pool({1, 3});
  const auto y = all_labels({2, 4});
  EXPECT_DOUBLE_EQ(active_batch_estimate(pool, plan_of({0.5, 1.0}, {1, 1}), y, ProblemSpec::mean())[0], 3.5);
  EXPECT_DOUBLE_EQ(active_batch_estimate(pool, plan_of({0.5, 1.0}, {0, 1}), y, ProblemSpec::mean())[0], 2.5);
}

TEST(ActiveBatch, MissingLabelAndZeroProbability) {
  const auto pool = scalar_pool({1, 3});
  Labels y{2.0, std::nullopt};
  EXPECT_THROW(active_batch_estimate(pool, plan_of({0.5, 1.0}, {1, 1}), y, ProblemSpec::mean()), DataError);
  EXPECT_THROW(active_batch_estimate(pool, plan_of({0.0, 1.0}, {1, 0}), all_labels({2, 4}), ProblemSpec::mean()),
               ArgumentError);
}

TEST(Ppi, WorkedExampleAndPerfectModel) {
  const auto pool = scalar_pool({1, 3});
  const std::vector<unsigned char> xi{1, 0};
  EXPECT_DOUBLE_EQ(ppi_estimate(pool, xi, all_labels({2, 4}), ProblemSpec::mean(), Budget(1, 2))[0], 3.0);
  const auto perfect = scalar_pool({2, 4});
  EXPECT_DOUBLE_EQ(ppi_estimate(perfect, xi, all_labels({2, 4}), ProblemSpec::mean(), Budget(1, 2))[0], 3.0);
  const std::vector<unsigned char> all{1, 1};
  EXPECT_EQ(ppi_estimate(pool, all, all_labels({2, 4}), ProblemSpec::mean(), Budget(2, 2))[0],
            active_batch_estimate(pool, plan_of({1.0, 1.0}, {1, 1}), all_labels({2, 4}), ProblemSpec::mean())[0]);
}

TEST(Classical, MeanOfLabeled) {
  const auto pool = scalar_pool({0, 0, 0});
  const std::vector<unsigned char> xi{1, 0, 1};
  EXPECT_DOUBLE_EQ(classical_estimate(pool, xi, Labels{2.0, std::nullopt, 4.0}, ProblemSpec::mean())[0], 3.0);
  const std::vector<unsigned char> none{0, 0, 0};
  EXPECT_THROW(classical_estimate(pool, none, Labels(3), ProblemSpec::mean()), DataError);
}

TEST(ActiveBatch, UniformRuleEqualsPpiBitForBit) {
  Rng g(RngSpec{1});
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 400;
    std::vector<Vector> xs;
    std::vector<double> f, y;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = g.uniform(-1, 1);
      xs.push_back(vec({1.0, z}));
      f.push_back(0.5 + 0.3 * z);
      y.push_back(g.bernoulli(0.5 + 0.4 * z) ? 1.0 : 0.0);
    }
    const auto pool = with_f(xs, f);
    const Budget b(160, n);
    const auto plan = uniform_plan(b, RngSpec{static_cast<std::uint64_t>(rep)});
    const auto labels = all_labels(y);
    for (const auto& spec : {ProblemSpec::linear(2, 1), ProblemSpec::logistic(2, 1)}) {
      const Vector a = active_batch_estimate(pool, plan, labels, spec);
      const Vector p = ppi_estimate(pool, plan.xi, labels, spec, b);
      EXPECT_EQ(a, p);
    }
    const auto sp = scalar_pool(f);
    EXPECT_EQ(active_batch_estimate(sp, plan, labels, ProblemSpec::mean()),
              ppi_estimate(sp, plan.xi, labels, ProblemSpec::mean(), b));
  }
}

TEST(ActiveBatch, NoModelReducesToHorvitzThompson) {
  Rng g(RngSpec{2});
  const std::size_t n = 40;
  std::vector<double> y(n);
  for (auto& v : y) v = g.normal();
  const Budget b(10, n);
  const auto plan = uniform_plan(b, RngSpec{3});
  double ht = 0.0;
  for (std::size_t i = 0; i < n; ++i) ht += plan.xi[i] ? y[i] / 0.25 : 0.0;
  ht /= n;
  const double got = active_batch_estimate(scalar_pool(std::vector<double>(n, 0.0)), plan, all_labels(y),
                                           ProblemSpec::mean())[0];
  EXPECT_NEAR(got, ht, 1e-12);
}

TEST(IncrementVariance, Examples) {
  const std::vector<double> a{3, 4}, c{2, 2, 2}, one{1};
  EXPECT_DOUBLE_EQ(empirical_increment_variance(a), 0.25);
  EXPECT_EQ(empirical_increment_variance(c), 0.0);
  EXPECT_THROW(empirical_increment_variance(one), DataError);
}

TEST(Wald, Examples) {
  const auto w = wald_interval(0.0, 1.0, 100, 0.1);
  EXPECT_NEAR(w.lo, -0.16449, 1e-4);
  EXPECT_NEAR(w.hi, 0.16449, 1e-4);
  const auto d = wald_interval(1.5, 0.0, 10, 0.1);
  EXPECT_EQ(d.lo, 1.5);
  EXPECT_EQ(d.hi, 1.5);
  EXPECT_NEAR(wald_interval(0.0, 4.0, 100, 0.1).width(), 2 * w.width(), 1e-12);
}

TEST(Sandwich, MeanReducesToIncrementVariance) {
  const auto pool = scalar_pool({1, 3, 0.5});
  const auto plan = plan_of({0.5, 1.0, 0.25}, {1, 1, 0});
  const Labels y{2.0, 4.0, std::nullopt};
  const Matrix s = sandwich_covariance(pool, plan, y, ProblemSpec::mean(), vec({0.0}));
  const auto inc = active_mean_increments(pool, plan, y);
  EXPECT_DOUBLE_EQ(s(0, 0), empirical_increment_variance(inc));
}

TEST(Sandwich, LinearFullyLabeledMatchesHc0) {
  Rng g(RngSpec{4});
  const std::size_t n = 200;
  std::vector<Vector> xs;
  std::vector<double> y;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = g.uniform(0, 1);
    xs.push_back(vec({1.0, z, g.normal()}));
    y.push_back(1 - z + 2 * z * g.normal());
  }
  const auto pool = with_f(xs, std::vector<double>(n, 0.0));
  const auto plan = plan_of(std::vector<double>(n, 1.0), std::vector<unsigned char>(n, 1));
  const auto spec = ProblemSpec::linear(3, 1);
  const Vector theta = active_batch_estimate(pool, plan, all_labels(y), spec);
  const Matrix s = sandwich_covariance(pool, plan, all_labels(y), spec, theta);

  // textbook HC0: (X'X/n)^-1 (sum r^2 x x' / n) (X'X/n)^-1
  Matrix x(n, 3);
  Vector yy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x.row(static_cast<Eigen::Index>(i)) = xs[i].transpose();
    yy[static_cast<Eigen::Index>(i)] = y[i];
  }
  const Matrix xtx = x.transpose() * x / static_cast<double>(n);
  const Vector ols = (x.transpose() * x).fullPivLu().solve(x.transpose() * yy);
  EXPECT_LT((ols - theta).norm(), 1e-10);
  const Vector r = yy - x * ols;
  Matrix meat = Matrix::Zero(3, 3);
  for (std::size_t i = 0; i < n; ++i) meat += r[static_cast<Eigen::Index>(i)] * r[static_cast<Eigen::Index>(i)] * xs[i] * xs[i].transpose();
  meat /= static_cast<double>(n);
  const Matrix bread = xtx.fullPivLu().inverse();
  EXPECT_LT((bread * meat * bread - s).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Sandwich, SymmetricPsdOnRandomPlans) {
  Rng g(RngSpec{5});
  for (int rep = 0; rep < 25; ++rep) {
    const std::size_t n = 80;
    std::vector<Vector> xs;
    std::vector<double> f, y, u;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = g.uniform(-1, 1);
      xs.push_back(vec({1.0, z}));
      y.push_back(g.bernoulli(0.5 + 0.4 * z) ? 1.0 : 0.0);
      f.push_back(0.5 + 0.35 * z);
      u.push_back(g.uniform(0.1, 1));
    }
    const auto pool = with_f(xs, f);
    const auto plan = batch_plan(u, Budget(30, n), 0.5, RngSpec{static_cast<std::uint64_t>(rep)});
    for (const auto& spec : {ProblemSpec::linear(2), ProblemSpec::logistic(2, 1)}) {
      const Vector theta = active_batch_estimate(pool, plan, all_labels(y), spec);
      const Matrix s = sandwich_covariance(pool, plan, all_labels(y), spec, theta);
      EXPECT_EQ(s, s.transpose());
      Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
      EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
    }
  }
}

TEST(ActiveBatch, UnbiasedOverDecisionRandomness) {
  Rng g(RngSpec{6});
  const std::size_t n = 30;
  std::vector<double> f(n), y(n), u(n);
  for (std::size_t i = 0; i < n; ++i) {
    f[i] = g.uniform();
    y[i] = f[i] + g.normal();
    u[i] = g.uniform(0.1, 1.0);
  }
  double truth = 0.0;
  for (double v : y) truth += v / n;
  const auto pool = scalar_pool(f);
  const int reps = 10000;
  double s = 0.0, s2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto plan = batch_plan(u, Budget(8, n), 0.2, RngSpec{7, static_cast<std::uint64_t>(r)});
    const double est = active_batch_estimate(pool, plan, all_labels(y), ProblemSpec::mean())[0];
    s += est;
    s2 += est * est;
  }
  const double mean = s / reps, sd = std::sqrt(s2 / reps - mean * mean);
  EXPECT_LT(std::abs(mean - truth), 4 * sd / std::sqrt(reps));
}

TEST(ActiveBatch, VarianceMatchesDesignFormula) {
  // Var = (1/n^2) sum (y - f)^2 (1 - pi) / pi given the pool.
  const std::vector<double> f{0.2, 0.8, 0.5, 0.1}, y{1.0, 0.0, 1.0, 0.0}, pi{0.3, 0.6, 0.9, 0.2};
  double want = 0.0;
  for (std::size_t i = 0; i < 4; ++i) want += (y[i] - f[i]) * (y[i] - f[i]) * (1 - pi[i]) / pi[i];
  want /= 16.0;
  const auto pool = scalar_pool(f);
  const int reps = 40000;
  double s = 0.0, s2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto xi = draw_decisions(pi, RngSpec{8, static_cast<std::uint64_t>(r)});
    const double est = active_batch_estimate(pool, plan_of(pi, xi), all_labels(y), ProblemSpec::mean())[0];
    s += est;
    s2 += est * est;
  }
  const double var = s2 / reps - (s / reps) * (s / reps);
  EXPECT_NEAR(var / want, 1.0, 0.05);
}

TEST(Reports, IntervalsAndCsv) {
  const auto pool = scalar_pool({1, 3});
  const auto r = infer_active(pool, plan_of({0.5, 1.0}, {1, 1}), all_labels({2, 4}), ProblemSpec::mean(), 0.1);
  EXPECT_DOUBLE_EQ(r.theta_hat[0], 3.5);
  EXPECT_EQ(r.n_lab, 2u);
  ASSERT_EQ(r.intervals.size(), 1u);
  EXPECT_TRUE(r.intervals[0].contains(3.5));
  std::ostringstream out;
  write_report_header(out);
  write_report_rows(out, r);
  EXPECT_EQ(out.str().substr(0, 45), "method,coordinate,estimate,lo,hi,n,n_lab,alph");
  EXPECT_NE(out.str().find("\nactive,0,3.5,"), std::string::npos);
}
