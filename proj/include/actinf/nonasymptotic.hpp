#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "actinf/batch.hpp"
#include "actinf/error.hpp"

namespace actinf {

/// Almost-sure range of every increment f + (y - f) xi / pi.
struct IncrementBounds {
  double lo = 0.0;
  double hi = 1.0;
};

/// For f, y in [y_lo, y_hi] and pi >= pi_min the increment lies in
/// [y_lo - r / pi_min, y_hi + r / pi_min] with r = y_hi - y_lo.
inline IncrementBounds increment_bounds(double y_lo, double y_hi, double pi_min) {
  if (!(y_lo < y_hi)) throw ArgumentError("label range must satisfy y_lo < y_hi");
  if (!(pi_min > 0.0 && pi_min <= 1.0)) throw ArgumentError("pi_min must lie in (0,1]");
  const double r = (y_hi - y_lo) / pi_min;
  return {y_lo - r, y_hi + r};
}

struct BettingResult {
  Interval interval;
  bool degenerate = false;  // no candidate survived; interval is the min-wealth point +- one grid step
};

namespace detail {

inline std::vector<double> rescale(std::span<const double> increments, const IncrementBounds& b) {
  if (!(b.lo < b.hi)) throw ArgumentError("increment bounds must satisfy lo < hi");
  std::vector<double> z(increments.size());
  const double w = b.hi - b.lo;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double d = increments[i];
    if (!(d >= b.lo - 1e-9 * w && d <= b.hi + 1e-9 * w))
      throw ArgumentError("increment " + std::to_string(i + 1) + " lies outside the stated bounds");
    z[i] = std::clamp((d - b.lo) / w, 0.0, 1.0);
  }
  return z;
}

inline std::vector<double> grid(std::size_t size) {
  if (size < 2) throw ArgumentError("grid needs at least two points");
  std::vector<double> m(size);
  for (std::size_t k = 0; k < size; ++k) m[k] = static_cast<double>(k) / static_cast<double>(size - 1);
  return m;
}

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0,1)");
}

/// Log of the hedged capital (1/2) prod(1 + l (z - m)) + (1/2) prod(1 - l (z - m)).
inline double log_hedged(double log_up, double log_down) {
  const double a = std::max(log_up, log_down);
  return a + std::log(0.5 * std::exp(log_up - a) + 0.5 * std::exp(log_down - a));
}

}  // namespace detail

/// Uncapped bets for observations z in [0,1]:
/// l_s = sqrt(2 log(2/alpha) / (sigma2_{s-1} * s)), where sigma2_{s-1} is a
/// running variance of z_1..z_{s-1} started at 1/4. Entry s-1 depends only
/// on z_1..z_{s-1}.
inline std::vector<double> betting_lambdas(std::span<const double> z, double alpha) {
  detail::check_alpha(alpha);
  std::vector<double> lambda(z.size());
  const double c = 2.0 * std::log(2.0 / alpha);
  double ss = 0.25, sum = 0.0;
  for (std::size_t s = 1; s <= z.size(); ++s) {
    const double sd = static_cast<double>(s);
    const double sigma2 = ss / sd;
    lambda[s - 1] = std::sqrt(c / (sigma2 * sd));
    sum += z[s - 1];
    const double mu = (0.5 + sum) / (sd + 1.0);
    ss += (z[s - 1] - mu) * (z[s - 1] - mu);
  }
  return lambda;
}

namespace detail {

/// Runs the capital process for every grid mean. With `sequence`, returns
/// one interval per prefix using the running maximum of the capital, which
/// makes the intervals nested; otherwise only the terminal interval.
inline std::vector<BettingResult> run_betting(std::span<const double> increments, const IncrementBounds& b,
                                              double alpha, std::size_t grid_size, bool sequence) {
  check_alpha(alpha);
  const auto z = rescale(increments, b);
  const auto m = grid(grid_size);
  const auto lambda = betting_lambdas(z, alpha);
  const double threshold = std::log(1.0 / alpha);
  const double w = b.hi - b.lo;
  const double step = 1.0 / static_cast<double>(grid_size - 1);

  std::vector<double> up(grid_size, 0.0), down(grid_size, 0.0), peak(grid_size, 0.0);
  auto interval_now = [&](bool use_peak) {
    std::size_t first = grid_size, last = 0, argmin = 0;
    double min_wealth = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid_size; ++k) {
      const double lw = use_peak ? peak[k] : log_hedged(up[k], down[k]);
      if (lw < min_wealth) {
        min_wealth = lw;
        argmin = k;
      }
      if (lw < threshold) {
        first = std::min(first, k);
        last = k;
      }
    }
    BettingResult r;
    if (first == grid_size) {
      r.degenerate = true;
      first = last = argmin;
    }
    // one grid step of slack on each side keeps the hull valid between grid points
    const double lo = std::max(0.0, m[first] - step);
    const double hi = std::min(1.0, m[last] + step);
    r.interval = {b.lo + lo * w, b.lo + hi * w};
    return r;
  };

  std::vector<BettingResult> out;
  if (sequence) out.reserve(z.size() + 1);
  if (sequence) out.push_back(interval_now(true));
  for (std::size_t s = 0; s < z.size(); ++s) {
    for (std::size_t k = 0; k < grid_size; ++k) {
      const double l = std::min(0.5 / std::max(m[k], 1.0 - m[k]), lambda[s]);
      const double d = z[s] - m[k];
      up[k] += std::log1p(l * d);
      down[k] += std::log1p(-l * d);
      if (sequence) peak[k] = std::max(peak[k], log_hedged(up[k], down[k]));
    }
    if (sequence) {
      auto r = interval_now(true);
      const auto& prev = out.back().interval;
      r.interval = {std::max(r.interval.lo, prev.lo), std::min(r.interval.hi, prev.hi)};
      if (r.interval.lo > r.interval.hi) r.interval.hi = r.interval.lo;
      out.push_back(r);
    }
  }
  if (!sequence) out.push_back(interval_now(false));
  return out;
}

}  // namespace detail

/// Confidence interval for the mean of bounded increments by test-martingale
/// inversion: a grid mean m survives while the hedged capital process stays
/// below 1/alpha. Returns the hull of survivors on the original scale.
inline BettingResult betting_interval(std::span<const double> increments, const IncrementBounds& bounds,
                                      double alpha, std::size_t grid_size = 1000) {
  return detail::run_betting(increments, bounds, alpha, grid_size, false).front();
}

/// Time-uniform version: entry t is the interval after t increments (entry
/// 0 is the full range). Each entry is contained in the previous one.
inline std::vector<BettingResult> betting_confidence_sequence(std::span<const double> increments,
                                                              const IncrementBounds& bounds, double alpha,
                                                              std::size_t grid_size = 1000) {
  return detail::run_betting(increments, bounds, alpha, grid_size, true);
}

}  // namespace actinf
