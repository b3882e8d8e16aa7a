#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "actinf/core.hpp"
#include "actinf/error.hpp"

namespace actinf {

enum class LossKind { kMean, kLinearRegression, kLogistic, kQuantile };

inline const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::kMean: return "mean";
    case LossKind::kLinearRegression: return "linear";
    case LossKind::kLogistic: return "logistic";
    case LossKind::kQuantile: return "quantile";
  }
  return "?";
}

/// An M-estimation target: the loss family, parameter dimension, and the
/// coordinate whose interval is of primary interest.
struct ProblemSpec {
  LossKind kind = LossKind::kMean;
  Eigen::Index dim = 1;
  Eigen::Index target = 0;
  double q = 0.5;  // quantile level, Quantile only

  static ProblemSpec mean() { return {LossKind::kMean, 1, 0, 0.5}; }
  static ProblemSpec linear(Eigen::Index d, Eigen::Index j = 0) {
    return checked({LossKind::kLinearRegression, d, j, 0.5});
  }
  static ProblemSpec logistic(Eigen::Index d, Eigen::Index j = 0) {
    return checked({LossKind::kLogistic, d, j, 0.5});
  }
  static ProblemSpec quantile(double level) {
    return checked({LossKind::kQuantile, 1, 0, level});
  }

  bool is_glm() const {
    return kind == LossKind::kLinearRegression || kind == LossKind::kLogistic;
  }
  /// Mean and Quantile ignore covariates.
  bool is_scalar() const { return !is_glm(); }

  void validate() const {
    if (dim < 1) throw ArgumentError("problem dimension must be positive");
    if (is_scalar() && dim != 1) throw ArgumentError("mean/quantile problems have dimension 1");
    if (target < 0 || target >= dim) throw ArgumentError("target coordinate out of range");
    if (kind == LossKind::kQuantile && !(q > 0.0 && q < 1.0))
      throw ArgumentError("quantile level must lie in (0,1)");
  }

 private:
  static ProblemSpec checked(ProblemSpec s) {
    s.validate();
    return s;
  }
};

/// Solver failure; carries the last iterate and its gradient norm.
class SolverError : public NumericalError {
 public:
  SolverError(const std::string& what, Vector last, double grad_norm)
      : NumericalError(what + " (gradient norm " + csv::format(grad_norm) + ")"),
        last_(std::move(last)),
        grad_norm_(grad_norm) {}

  const Vector& last_iterate() const { return last_; }
  double grad_norm() const { return grad_norm_; }

 private:
  Vector last_;
  double grad_norm_;
};

namespace detail {

inline double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

// log(1 + e^s) without overflow.
inline double softplus(double s) {
  return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
}

inline void check_theta(const ProblemSpec& spec, const Vector& theta) {
  if (theta.size() != spec.dim)
    throw ArgumentError("theta has dimension " + std::to_string(theta.size()) +
                        ", problem expects " + std::to_string(spec.dim));
}

inline void check_x(const ProblemSpec& spec, const Vector& x) {
  if (spec.is_glm() && x.size() != spec.dim)
    throw ArgumentError("covariate dimension " + std::to_string(x.size()) +
                        " does not match problem dimension " + std::to_string(spec.dim));
}

}  // namespace detail

/// Scalar loss value l_theta(x, y).
inline double loss_value(const ProblemSpec& spec, const Vector& theta, const Vector& x, double y) {
  detail::check_theta(spec, theta);
  detail::check_x(spec, x);
  switch (spec.kind) {
    case LossKind::kMean: {
      const double r = y - theta[0];
      return 0.5 * r * r;
    }
    case LossKind::kLinearRegression: {
      const double r = y - x.dot(theta);
      return 0.5 * r * r;
    }
    case LossKind::kLogistic: {
      const double s = x.dot(theta);
      return detail::softplus(s) - y * s;
    }
    case LossKind::kQuantile: {
      const double r = y - theta[0];
      return r > 0.0 ? spec.q * r : (spec.q - 1.0) * r;
    }
  }
  return 0.0;
}

/// Gradient of the loss in theta. For Quantile this is the subgradient:
/// 1-q when y < theta, -q when y > theta, and 0 at a tie.
inline Vector loss_grad(const ProblemSpec& spec, const Vector& theta, const Vector& x, double y) {
  detail::check_theta(spec, theta);
  detail::check_x(spec, x);
  switch (spec.kind) {
    case LossKind::kMean:
      return Vector::Constant(1, theta[0] - y);
    case LossKind::kLinearRegression:
      return (x.dot(theta) - y) * x;
    case LossKind::kLogistic:
      return (detail::sigmoid(x.dot(theta)) - y) * x;
    case LossKind::kQuantile: {
      const double t = theta[0];
      return Vector::Constant(1, y < t ? 1.0 - spec.q : (y > t ? -spec.q : 0.0));
    }
  }
  return {};
}

/// Per-example Hessian. GLM Hessians do not depend on the label.
inline Matrix loss_hessian(const ProblemSpec& spec, const Vector& theta, const Vector& x) {
  detail::check_theta(spec, theta);
  detail::check_x(spec, x);
  switch (spec.kind) {
    case LossKind::kMean:
      return Matrix::Ones(1, 1);
    case LossKind::kLinearRegression:
      return x * x.transpose();
    case LossKind::kLogistic: {
      const double p = detail::sigmoid(x.dot(theta));
      return (p * (1.0 - p)) * (x * x.transpose());
    }
    case LossKind::kQuantile:
      throw ArgumentError("quantile loss has no pointwise Hessian; use density_hessian");
  }
  return {};
}

/// Hessian for the quantile target: a weighted Gaussian kernel density
/// estimate of the label density at theta_hat, with Silverman bandwidth
/// 1.06 * sd * m^(-1/5) where m is the effective sample size.
inline Matrix density_hessian(std::span<const double> labels, std::span<const double> weights,
                              double theta_hat) {
  if (labels.size() != weights.size()) throw ArgumentError("labels and weights differ in length");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ArgumentError("density weights must be nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw DegenerateError("density estimate: zero total weight");
  double sum_sq = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double w = weights[i] / total;
    sum_sq += w * w;
    mean += w * labels[i];
  }
  const double m_eff = 1.0 / sum_sq;
  if (m_eff < 10.0) throw DegenerateError("density estimate: fewer than 10 effective samples");
  double var = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double d = labels[i] - mean;
    var += (weights[i] / total) * d * d;
  }
  const double sd = std::sqrt(var);
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) throw DegenerateError("density estimate: labels have zero spread");
  const double h = 1.06 * sd * std::pow(m_eff, -0.2);
  const double norm = 1.0 / (h * std::sqrt(2.0 * M_PI));
  double density = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double z = (theta_hat - labels[i]) / h;
    density += (weights[i] / total) * norm * std::exp(-0.5 * z * z);
  }
  return Matrix::Constant(1, 1, density);
}

/// One term of a weighted empirical loss. Weights may be negative.
struct WeightedSample {
  Vector x;
  double y = 0.0;
  double w = 1.0;
};

/// Column-oriented weighted data: rows of `x` are covariates.
struct WeightedData {
  Matrix x;  // m x d (d = 1 and ignored for scalar problems)
  Vector y;
  Vector w;

  Eigen::Index rows() const { return y.size(); }
};

struct SolverOptions {
  double grad_tol = 1e-10;
  int max_iter = 100;
  // Accepted when the line search stalls at the floating-point floor.
  double stall_tol = 1e-7;
};

namespace detail {

inline void require_full_rank(const Matrix& x) {
  const Matrix gram = x.transpose() * x;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const double top = ev.maxCoeff();
  if (!(top > 0.0) || ev.minCoeff() <= 1e-12 * top)
    throw SingularError("design matrix does not have full column rank");
}

inline Vector solve_mean(const WeightedData& data) {
  const double wsum = data.w.sum();
  if (!(wsum > 0.0)) throw DegenerateError("weighted mean: total weight is not positive");
  return Vector::Constant(1, data.w.dot(data.y) / wsum);
}

// Exact global minimizer of the weighted pinball objective. The objective
// is piecewise linear with kinks at the labels, so it is minimized at a
// label whenever it is bounded below; among equal minima the smallest
// label is returned.
inline Vector solve_quantile(const WeightedData& data, double q) {
  const auto m = static_cast<std::size_t>(data.rows());
  const double wsum = data.w.sum();
  if (m == 0 || !(wsum > 0.0))
    throw DegenerateError("weighted quantile: total weight is not positive");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return data.y[static_cast<Eigen::Index>(a)] < data.y[static_cast<Eigen::Index>(b)];
  });
  const double s_total = data.w.dot(data.y);
  double scale = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) scale += std::abs(data.w[i] * data.y[i]) + std::abs(data.w[i]);
  double w_le = 0.0, s_le = 0.0;
  double best_val = 0.0, best_theta = 0.0;
  bool have = false;
  for (std::size_t k = 0; k < m;) {
    const double theta = data.y[static_cast<Eigen::Index>(order[k])];
    while (k < m && data.y[static_cast<Eigen::Index>(order[k])] == theta) {
      const auto i = static_cast<Eigen::Index>(order[k]);
      w_le += data.w[i];
      s_le += data.w[i] * data.y[i];
      ++k;
    }
    const double w_gt = wsum - w_le, s_gt = s_total - s_le;
    const double val = (1.0 - q) * (theta * w_le - s_le) + q * (s_gt - theta * w_gt);
    if (!have || val < best_val - 1e-13 * (scale + std::abs(theta) * scale)) {
      best_val = val;
      best_theta = theta;
      have = true;
    }
  }
  return Vector::Constant(1, best_theta);
}

inline Vector solve_linear(const WeightedData& data) {
  require_full_rank(data.x);
  const Matrix a = data.x.transpose() * data.w.asDiagonal() * data.x;
  const Vector b = data.x.transpose() * data.w.cwiseProduct(data.y);
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) throw SingularError("weighted normal equations are singular");
  Vector theta = lu.solve(b);
  // one step of iterative refinement
  theta += lu.solve(b - a * theta);
  return theta;
}

struct LogisticEval {
  double value = 0.0;
  Vector grad;
  Matrix hess;
};

inline LogisticEval logistic_eval(const WeightedData& data, const Vector& theta, bool with_hess) {
  const Vector s = data.x * theta;
  const double m = static_cast<double>(data.rows());
  LogisticEval out;
  Vector resid(data.rows()), curv(data.rows());
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const double p = sigmoid(s[i]);
    out.value += data.w[i] * (softplus(s[i]) - data.y[i] * s[i]);
    resid[i] = data.w[i] * (p - data.y[i]);
    curv[i] = data.w[i] * p * (1.0 - p);
  }
  out.value /= m;
  out.grad = data.x.transpose() * resid / m;
  if (with_hess) out.hess = data.x.transpose() * curv.asDiagonal() * data.x / m;
  return out;
}

inline Vector solve_logistic(const WeightedData& data, const SolverOptions& opt) {
  require_full_rank(data.x);
  Vector theta = Vector::Zero(data.x.cols());
  auto cur = logistic_eval(data, theta, true);
  for (int iter = 0; iter < opt.max_iter; ++iter) {
    const double gnorm = cur.grad.norm();
    if (gnorm <= opt.grad_tol) return theta;
    Vector dir;
    Eigen::LDLT<Matrix> ldlt(cur.hess);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) dir = ldlt.solve(cur.grad);
    if (dir.size() == 0 || !dir.allFinite() || dir.dot(cur.grad) <= 0.0) dir = cur.grad;
    double step = 1.0;
    bool moved = false;
    for (int h = 0; h < 60; ++h, step *= 0.5) {
      const Vector cand = theta - step * dir;
      auto next = logistic_eval(data, cand, false);
      if (next.value <= cur.value) {
        theta = cand;
        cur = logistic_eval(data, theta, true);
        moved = true;
        break;
      }
    }
    if (!moved) {
      if (gnorm <= opt.stall_tol) return theta;
      throw SolverError("logistic Newton line search failed", theta, gnorm);
    }
  }
  const double gnorm = cur.grad.norm();
  if (gnorm <= opt.grad_tol || gnorm <= opt.stall_tol) return theta;
  throw SolverError("logistic Newton did not converge", theta, gnorm);
}

}  // namespace detail

/// Minimizer of sum_i w_i * loss(x_i, y_i) for the given problem.
inline Vector solve_weighted(const ProblemSpec& spec, const WeightedData& data,
                             const SolverOptions& opt = {}) {
  spec.validate();
  if (data.y.size() != data.w.size()) throw ArgumentError("labels and weights differ in length");
  if (data.rows() == 0) throw DataError("no samples to fit");
  if (!data.w.allFinite() || !data.y.allFinite()) throw DataError("non-finite sample");
  switch (spec.kind) {
    case LossKind::kMean:
      return detail::solve_mean(data);
    case LossKind::kQuantile:
      return detail::solve_quantile(data, spec.q);
    case LossKind::kLinearRegression:
    case LossKind::kLogistic:
      if (data.x.rows() != data.rows() || data.x.cols() != spec.dim)
        throw ArgumentError("design matrix shape does not match problem");
      if (!data.x.allFinite()) throw DataError("non-finite covariate");
      return spec.kind == LossKind::kLinearRegression ? detail::solve_linear(data)
                                                      : detail::solve_logistic(data, opt);
  }
  return {};
}

inline Vector solve_weighted(const ProblemSpec& spec, std::span<const WeightedSample> samples,
                             const SolverOptions& opt = {}) {
  WeightedData data;
  const auto m = static_cast<Eigen::Index>(samples.size());
  const Eigen::Index d = spec.is_glm() ? spec.dim : 1;
  data.x.resize(m, d);
  data.y.resize(m);
  data.w.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    if (spec.is_glm()) {
      if (s.x.size() != d) throw ArgumentError("sample covariate dimension mismatch");
      data.x.row(i) = s.x.transpose();
    } else {
      data.x(i, 0) = 1.0;
    }
    data.y[i] = s.y;
    data.w[i] = s.w;
  }
  return solve_weighted(spec, data, opt);
}

/// Gradient of (1/m) sum_i w_i * loss(x_i, y_i); used to audit solutions.
inline Vector weighted_gradient(const ProblemSpec& spec, const WeightedData& data, const Vector& theta) {
  Vector g = Vector::Zero(spec.dim);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const Vector x = spec.is_glm() ? Vector(data.x.row(i).transpose()) : Vector::Ones(1);
    g += data.w[i] * loss_grad(spec, theta, x, data.y[i]);
  }
  return g / static_cast<double>(data.rows());
}

}  // namespace actinf
