#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "actinf/core.hpp"
#include "actinf/error.hpp"
#include "actinf/losses.hpp"
#include "actinf/predictors.hpp"
#include "actinf/rng.hpp"

namespace actinf {

/// Per-item labeling probabilities and the realized decisions.
struct SamplingPlan {
  std::vector<double> pi;
  std::vector<unsigned char> xi;
  double eta = 0.0;
  double tau = 0.0;
  std::size_t n_lab = 0;
  bool uniform_fallback = false;

  double expected_labels() const {
    double s = 0.0;
    for (double p : pi) s += p;
    return s;
  }
};

struct Calibration {
  double eta = 0.0;
  std::vector<double> pi;
};

/// eta = n_b / sum(u), pi_i = min(eta * u_i, 1). Clipping only lowers
/// probabilities, so sum(pi) <= n_b.
inline Calibration calibrate_eta(std::span<const double> u, const Budget& budget) {
  if (u.size() != budget.n) throw ArgumentError("uncertainty count does not match budget pool size");
  double total = 0.0;
  for (double v : u) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError("uncertainties must be finite and nonnegative");
    total += v;
  }
  if (!(total > 0.0)) throw DegenerateError("all uncertainties are zero; fall back to uniform sampling");
  Calibration out;
  out.eta = budget.n_b / total;
  out.pi.resize(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out.pi[i] = std::min(out.eta * u[i], 1.0);
  return out;
}

inline double tau_mix(double pi, double tau, const Budget& budget) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ArgumentError("tau must lie in [0,1]");
  return (1.0 - tau) * pi + tau * budget.uniform_rate();
}

/// (1 - tau) * pi + tau * n_b / n, entrywise.
inline std::vector<double> tau_mix(std::span<const double> pi, double tau, const Budget& budget) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ArgumentError("tau must lie in [0,1]");
  std::vector<double> out(pi.size());
  for (std::size_t i = 0; i < pi.size(); ++i) {
    if (!(pi[i] >= 0.0 && pi[i] <= 1.0)) throw ArgumentError("probabilities must lie in [0,1]");
    out[i] = tau_mix(pi[i], tau, budget);
  }
  return out;
}

inline std::vector<double> default_tau_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(i / 10.0);
  return g;
}

struct HistoricalPoint {
  double y = 0.0;
  double f = 0.0;
  double u = 0.0;
};

/// Grid minimizer of sum_i (y_i - f_i)^2 / pi_tau(x_i) over historical
/// data, where pi_tau mixes min(eta * u, 1) with the uniform rule. When
/// `eta` is not given it is n_b / (n * mean(u_hist)). Ties go to the
/// largest tau.
inline double tune_tau(std::span<const HistoricalPoint> historical, const Budget& budget,
                       std::span<const double> grid, std::optional<double> eta = std::nullopt) {
  if (grid.empty()) throw ArgumentError("tau grid is empty");
  if (historical.empty()) throw ArgumentError("no historical data for tau tuning");
  for (double t : grid)
    if (!(t >= 0.0 && t <= 1.0)) throw ArgumentError("tau grid values must lie in [0,1]");
  double e = eta.value_or(0.0);
  if (!eta.has_value()) {
    double mean_u = 0.0;
    for (const auto& h : historical) mean_u += h.u;
    mean_u /= static_cast<double>(historical.size());
    e = mean_u > 0.0 ? budget.uniform_rate() / mean_u : 0.0;
  }
  const double inf = std::numeric_limits<double>::infinity();
  double best_tau = 0.0, best_obj = inf;
  bool any_finite = false;
  for (double t : grid) {
    double obj = 0.0;
    for (const auto& h : historical) {
      const double r2 = (h.y - h.f) * (h.y - h.f);
      if (r2 == 0.0) continue;
      const double p = tau_mix(std::min(e * h.u, 1.0), t, budget);
      if (p <= 0.0) {
        obj = inf;
        break;
      }
      obj += r2 / p;
    }
    if (obj == inf) continue;
    if (!any_finite || obj < best_obj || (obj == best_obj && t > best_tau)) {
      best_obj = obj;
      best_tau = t;
      any_finite = true;
    }
  }
  if (!any_finite) throw DegenerateError("tau tuning: every grid value leaves a zero probability");
  return best_tau;
}

/// The direction h_j = H^-1 e_j used to project prediction errors for a
/// GLM coordinate. Scalar problems use h = 1.
struct GlmDirection {
  Vector h;
  bool scalar = false;
};

/// h_j from the empirical Hessian (1/n) sum_i hess(x_i) at theta_plug.
inline GlmDirection glm_direction(const Pool& pool, const ProblemSpec& spec, const Vector& theta_plug) {
  spec.validate();
  if (spec.is_scalar()) return {Vector::Ones(1), true};
  if (pool.dim() != spec.dim) throw SchemaError("pool dimension does not match problem");
  Matrix h = Matrix::Zero(spec.dim, spec.dim);
  for (const auto& e : pool) h += loss_hessian(spec, theta_plug, e.x);
  h /= static_cast<double>(pool.size());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h, Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().maxCoeff();
  if (!(top > 0.0) || eig.eigenvalues().minCoeff() <= 1e-12 * top)
    throw SingularError("empirical Hessian is singular");
  const Vector e_j = Vector::Unit(spec.dim, spec.target);
  return {h.ldlt().solve(e_j), false};
}

/// Plug-in direction without labels: theta is fit to the predictions.
inline GlmDirection plugin_direction(const Pool& pool, const ProblemSpec& spec) {
  if (spec.is_scalar()) return {Vector::Ones(1), true};
  std::vector<WeightedSample> s;
  s.reserve(pool.size());
  for (const auto& e : pool) {
    if (!e.f) throw DataError("plug-in direction needs predictions on every row");
    s.push_back({e.x, *e.f, 1.0});
  }
  return glm_direction(pool, spec, solve_weighted(spec, s));
}

/// err * |x' h_j|; for scalar problems just err.
inline double glm_uncertainty(double err, const Vector& x, const GlmDirection& dir) {
  if (dir.scalar) return err;
  if (x.size() != dir.h.size()) throw ArgumentError("covariate dimension does not match direction");
  return err * std::abs(x.dot(dir.h));
}

/// Uncertainty for each pool item: class probabilities when present,
/// otherwise the error estimate projected on `dir`. Items with neither get
/// a DataError.
inline std::vector<double> pool_uncertainty(const Pool& pool, const std::optional<GlmDirection>& dir) {
  std::vector<double> u(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& e = pool[i];
    if (e.probs) {
      u[i] = classification_uncertainty(*e.probs);
    } else if (e.err) {
      u[i] = dir ? glm_uncertainty(*e.err, e.x, *dir) : *e.err;
    } else {
      throw DataError("row " + std::to_string(i + 1) + " has neither probabilities nor an error estimate");
    }
  }
  return u;
}

/// Budget bookkeeping at step t (1-based) of a sequential pass.
struct SequentialBudgetState {
  std::size_t t = 1;
  std::size_t n_lab_prev = 0;  // labels collected in steps 1..t-1
  Budget budget;

  double n_b_t() const { return static_cast<double>(t) * budget.n_b / static_cast<double>(budget.n); }
  double n_delta() const { return n_b_t() - static_cast<double>(n_lab_prev); }
};

/// min(eta_t * u_t, n_delta_t) clipped to [0, 1].
inline double sequential_pi(double eta_t, double u_t, const SequentialBudgetState& state) {
  return std::clamp(std::min(eta_t * u_t, state.n_delta()), 0.0, 1.0);
}

inline std::vector<unsigned char> draw_decisions(std::span<const double> pi, const RngSpec& rng) {
  Rng gen(rng);
  std::vector<unsigned char> xi(pi.size());
  for (std::size_t i = 0; i < pi.size(); ++i) {
    if (!(pi[i] >= 0.0 && pi[i] <= 1.0)) throw ArgumentError("probabilities must lie in [0,1]");
    xi[i] = gen.bernoulli(pi[i]) ? 1 : 0;
  }
  return xi;
}

namespace detail {

inline SamplingPlan finish_plan(std::vector<double> pi, double eta, double tau, const Budget& budget,
                                const RngSpec& rng) {
  SamplingPlan plan;
  plan.xi = draw_decisions(pi, rng);
  plan.pi = std::move(pi);
  plan.eta = eta;
  plan.tau = tau;
  for (auto v : plan.xi) plan.n_lab += v;
  if (plan.expected_labels() > budget.n_b + 1e-9)
    throw NumericalError("sampling plan exceeds the label budget");
  return plan;
}

}  // namespace detail

/// Uniform rule n_b / n for every item.
inline SamplingPlan uniform_plan(const Budget& budget, const RngSpec& rng) {
  return detail::finish_plan(std::vector<double>(budget.n, budget.uniform_rate()), 0.0, 1.0, budget, rng);
}

/// Calibrate to the budget, tau-mix, and draw. All-zero uncertainty falls
/// back to the uniform rule with `uniform_fallback` set.
inline SamplingPlan batch_plan(std::span<const double> u, const Budget& budget, double tau,
                               const RngSpec& rng) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ArgumentError("tau must lie in [0,1]");
  double total = 0.0;
  for (double v : u) total += v;
  if (u.size() == budget.n && total == 0.0) {
    auto plan = uniform_plan(budget, rng);
    plan.uniform_fallback = true;
    return plan;
  }
  auto cal = calibrate_eta(u, budget);
  return detail::finish_plan(tau_mix(cal.pi, tau, budget), cal.eta, tau, budget, rng);
}

}  // namespace actinf
