#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "actinf/batch.hpp"
#include "actinf/core.hpp"
#include "actinf/error.hpp"
#include "actinf/normal.hpp"
#include "actinf/sampling.hpp"

namespace actinf {

/// Two estimated group means with their increment variances (not divided
/// by n) and group pool sizes.
struct OddsRatioInputs {
  double mu1_hat = 0.5;
  double mu0_hat = 0.5;
  double var1 = 0.0;
  double var0 = 0.0;
  std::size_t n1 = 0;
  std::size_t n0 = 0;

  void validate() const {
    if (!(mu1_hat > 0.0 && mu1_hat < 1.0) || !(mu0_hat > 0.0 && mu0_hat < 1.0))
      throw DegenerateError("odds ratio needs both means strictly inside (0,1)");
    if (!(var1 >= 0.0) || !(var0 >= 0.0)) throw ArgumentError("variances must be nonnegative");
    if (n1 == 0 || n0 == 0) throw ArgumentError("group sizes must be positive");
  }
};

inline double odds_ratio(double mu1, double mu0) {
  if (!(mu1 > 0.0 && mu1 < 1.0) || !(mu0 > 0.0 && mu0 < 1.0))
    throw DegenerateError("odds ratio needs both means strictly inside (0,1)");
  return (mu1 / (1.0 - mu1)) / (mu0 / (1.0 - mu0));
}

/// Gradient of log odds_ratio with respect to (mu1, mu0).
inline std::pair<double, double> log_odds_ratio_gradient(double mu1, double mu0) {
  odds_ratio(mu1, mu0);
  return {1.0 / (mu1 * (1.0 - mu1)), -1.0 / (mu0 * (1.0 - mu0))};
}

/// Delta-method Wald interval on the log scale, exponentiated.
inline Interval odds_ratio_interval(const OddsRatioInputs& in, double alpha) {
  in.validate();
  const double theta = odds_ratio(in.mu1_hat, in.mu0_hat);
  const auto [g1, g0] = log_odds_ratio_gradient(in.mu1_hat, in.mu0_hat);
  const double se = std::sqrt(in.var1 * g1 * g1 / static_cast<double>(in.n1) +
                              in.var0 * g0 * g0 / static_cast<double>(in.n0));
  const double half = two_sided_z(alpha) * se;
  const double lt = std::log(theta);
  return {std::exp(lt - half), std::exp(lt + half)};
}

struct GroupEstimate {
  double mean = 0.0;
  double variance = 0.0;  // of the increments
  std::size_t n = 0;
  std::size_t n_lab = 0;
  double eta = 0.0;
};

struct OddsRatioResult {
  OddsRatioInputs inputs;
  double estimate = 1.0;
  Interval interval;
  GroupEstimate group1, group0;
};

/// Active mean estimation in each group of a binary split, then the odds
/// ratio of the two means. The budget is shared in proportion to group
/// size and each group is calibrated on its own. `labels[i]` is read only
/// where item i is selected.
inline OddsRatioResult active_odds_ratio(const Pool& pool, std::span<const unsigned char> group,
                                         const Labels& labels, double n_b, double tau, double alpha,
                                         const RngSpec& rng) {
  if (group.size() != pool.size() || labels.size() != pool.size())
    throw ArgumentError("group and label columns must match the pool size");
  std::vector<Example> part[2];
  Labels part_labels[2];
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const int g = group[i] ? 1 : 0;
    part[g].push_back(pool[i]);
    part_labels[g].push_back(labels[i]);
  }
  if (part[0].empty() || part[1].empty()) throw DataError("both groups must be nonempty");
  GroupEstimate est[2];
  for (int g = 0; g < 2; ++g) {
    const Pool sub(part[g]);
    const double share = n_b * static_cast<double>(sub.size()) / static_cast<double>(pool.size());
    const Budget budget(std::min(share, static_cast<double>(sub.size())), sub.size());
    const auto u = pool_uncertainty(sub, std::nullopt);
    const auto plan = batch_plan(u, budget, tau, rng.child(static_cast<std::uint64_t>(g)));
    const auto inc = active_mean_increments(sub, plan, part_labels[g]);
    double m = 0.0;
    for (double v : inc) m += v;
    m /= static_cast<double>(inc.size());
    est[g] = {m, empirical_increment_variance(inc), sub.size(), plan.n_lab, plan.eta};
  }
  OddsRatioResult out;
  out.group1 = est[1];
  out.group0 = est[0];
  out.inputs = {est[1].mean, est[0].mean, est[1].variance, est[0].variance, est[1].n, est[0].n};
  out.estimate = odds_ratio(est[1].mean, est[0].mean);
  out.interval = odds_ratio_interval(out.inputs, alpha);
  return out;
}

}  // namespace actinf
