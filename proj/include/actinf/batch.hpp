#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "actinf/core.hpp"
#include "actinf/error.hpp"
#include "actinf/losses.hpp"
#include "actinf/normal.hpp"
#include "actinf/sampling.hpp"

namespace actinf {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double v) const { return lo <= v && v <= hi; }
};

/// theta_j +/- z_{1-alpha/2} * sqrt(var_jj / n).
inline Interval wald_interval(double theta_j, double var_jj, double n, double alpha) {
  if (!(var_jj >= 0.0)) throw ArgumentError("variance must be nonnegative");
  if (!(n > 0.0)) throw ArgumentError("sample size must be positive");
  const double half = two_sided_z(alpha) * std::sqrt(var_jj / n);
  return {theta_j - half, theta_j + half};
}

/// (1/n) sum (d_i - mean)^2.
inline double empirical_increment_variance(std::span<const double> increments) {
  const auto n = increments.size();
  if (n < 2) throw DataError("variance needs at least two increments");
  double mean = 0.0;
  for (double d : increments) mean += d;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double d : increments) ss += (d - mean) * (d - mean);
  return ss / static_cast<double>(n);
}

/// One term of an inverse-probability-weighted estimator: the prediction
/// f, the label when collected, and the probability it was collected with.
struct AipwItem {
  const Vector* x = nullptr;
  double f = 0.0;
  std::optional<double> y;
  double pi = 0.0;
  bool xi = false;
};

namespace detail {

inline void check_items(std::span<const AipwItem> items) {
  if (items.empty()) throw DataError("no items to estimate from");
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    if (!it.xi) continue;
    if (!it.y) throw DataError("row " + std::to_string(i + 1) + ": selected for labeling but label is missing");
    if (!(it.pi > 0.0)) throw ArgumentError("row " + std::to_string(i + 1) + ": labeled with zero probability");
  }
}

// f-row with weight 1 - xi/pi and, when labeled, y-row with weight xi/pi.
inline WeightedData aipw_data(const ProblemSpec& spec, std::span<const AipwItem> items) {
  std::size_t rows = 0;
  for (const auto& it : items) {
    const double iw = it.xi ? 1.0 / it.pi : 0.0;
    rows += (1.0 - iw != 0.0) + (it.xi ? 1 : 0);
  }
  WeightedData d;
  const Eigen::Index cols = spec.is_glm() ? spec.dim : 1;
  d.x.resize(static_cast<Eigen::Index>(rows), cols);
  d.y.resize(static_cast<Eigen::Index>(rows));
  d.w.resize(static_cast<Eigen::Index>(rows));
  Eigen::Index r = 0;
  auto put = [&](const AipwItem& it, double y, double w) {
    if (spec.is_glm()) {
      if (it.x->size() != spec.dim) throw SchemaError("covariate dimension does not match problem");
      d.x.row(r) = it.x->transpose();
    } else {
      d.x(r, 0) = 1.0;
    }
    d.y[r] = y;
    d.w[r] = w;
    ++r;
  };
  for (const auto& it : items) {
    const double iw = it.xi ? 1.0 / it.pi : 0.0;
    if (1.0 - iw != 0.0) put(it, it.f, 1.0 - iw);
    if (it.xi) put(it, *it.y, iw);
  }
  return d;
}

inline std::vector<double> mean_increments(std::span<const AipwItem> items) {
  std::vector<double> out(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    out[i] = it.xi ? it.f + (*it.y - it.f) / it.pi : it.f;
  }
  return out;
}

inline Vector aipw_estimate(const ProblemSpec& spec, std::span<const AipwItem> items) {
  spec.validate();
  check_items(items);
  if (spec.kind == LossKind::kMean) {
    double s = 0.0;
    for (double d : mean_increments(items)) s += d;
    return Vector::Constant(1, s / static_cast<double>(items.size()));
  }
  return solve_weighted(spec, aipw_data(spec, items));
}

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline Matrix inverse_spd(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h, Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().maxCoeff();
  if (!(top > 0.0) || eig.eigenvalues().minCoeff() <= 1e-12 * top)
    throw SingularError("empirical Hessian is singular");
  return h.ldlt().solve(Matrix::Identity(h.rows(), h.cols()));
}

// Divisor-n covariance of the rows of g.
inline Matrix row_covariance(const Matrix& g) {
  const Vector mean = g.colwise().mean().transpose();
  const Matrix c = g.rowwise() - mean.transpose();
  return (c.transpose() * c) / static_cast<double>(g.rows());
}

// H^-1 V H^-1 where V is the covariance of the per-item gradient
// increments grad(f) + (grad(y) - grad(f)) xi / pi at theta.
inline Matrix aipw_covariance(const ProblemSpec& spec, std::span<const AipwItem> items, const Vector& theta) {
  spec.validate();
  check_items(items);
  if (items.size() < 2) throw DataError("covariance needs at least two items");
  if (spec.kind == LossKind::kMean) {
    const auto inc = mean_increments(items);
    return Matrix::Constant(1, 1, empirical_increment_variance(inc));
  }
  const auto n = static_cast<Eigen::Index>(items.size());
  const Vector one = Vector::Ones(1);
  Matrix g(n, spec.dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& it = items[static_cast<std::size_t>(i)];
    const Vector& x = spec.is_glm() ? *it.x : one;
    Vector gi = loss_grad(spec, theta, x, it.f);
    if (it.xi) gi += (loss_grad(spec, theta, x, *it.y) - gi) / it.pi;
    g.row(i) = gi.transpose();
  }
  const Matrix v = row_covariance(g);
  Matrix h;
  if (spec.kind == LossKind::kQuantile) {
    std::vector<double> ys, ws;
    for (const auto& it : items)
      if (it.xi) {
        ys.push_back(*it.y);
        ws.push_back(1.0 / it.pi);
      }
    h = density_hessian(ys, ws, theta[0]);
  } else {
    h = Matrix::Zero(spec.dim, spec.dim);
    for (const auto& it : items) h += loss_hessian(spec, theta, *it.x);
    h /= static_cast<double>(n);
  }
  const Matrix hinv = inverse_spd(symmetrize(h));
  return symmetrize(hinv * v * hinv);
}

inline std::vector<AipwItem> batch_items(const Pool& pool, std::span<const double> pi,
                                         std::span<const unsigned char> xi, const Labels& labels) {
  const auto n = pool.size();
  if (pi.size() != n || xi.size() != n || labels.size() != n)
    throw DataError("plan/labels length does not match pool size " + std::to_string(n));
  std::vector<AipwItem> items(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = pool[i];
    if (!e.f) throw DataError("row " + std::to_string(i + 1) + ": missing prediction");
    items[i] = {&e.x, *e.f, labels[i], pi[i], xi[i] != 0};
  }
  return items;
}

}  // namespace detail

/// argmin_theta (1/n) sum_i [ l(x_i, f_i) + (l(x_i, y_i) - l(x_i, f_i)) xi_i / pi_i ].
inline Vector active_batch_estimate(const Pool& pool, const SamplingPlan& plan, const Labels& labels,
                                    const ProblemSpec& spec) {
  const auto items = detail::batch_items(pool, plan.pi, plan.xi, labels);
  return detail::aipw_estimate(spec, items);
}

/// Per-item increments f + (y - f) xi / pi of the mean estimator.
inline std::vector<double> active_mean_increments(const Pool& pool, const SamplingPlan& plan,
                                                  const Labels& labels) {
  const auto items = detail::batch_items(pool, plan.pi, plan.xi, labels);
  detail::check_items(items);
  return detail::mean_increments(items);
}

/// The prediction-powered estimator: the active estimator under the
/// uniform rule pi = n_b / n.
inline Vector ppi_estimate(const Pool& pool, std::span<const unsigned char> xi, const Labels& labels,
                           const ProblemSpec& spec, const Budget& budget) {
  const std::vector<double> pi(pool.size(), budget.uniform_rate());
  const auto items = detail::batch_items(pool, pi, xi, labels);
  return detail::aipw_estimate(spec, items);
}

namespace detail {

inline WeightedData labeled_data(const Pool& pool, std::span<const unsigned char> xi, const Labels& labels,
                                 const ProblemSpec& spec) {
  if (xi.size() != pool.size() || labels.size() != pool.size())
    throw DataError("decisions/labels length does not match pool");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (xi[i]) {
      if (!labels[i]) throw DataError("row " + std::to_string(i + 1) + ": selected for labeling but label is missing");
      idx.push_back(i);
    }
  if (idx.empty()) throw DataError("classical estimate: no labeled items");
  WeightedData d;
  const auto m = static_cast<Eigen::Index>(idx.size());
  d.x.resize(m, spec.is_glm() ? spec.dim : 1);
  d.y.resize(m);
  d.w = Vector::Ones(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto i = idx[static_cast<std::size_t>(r)];
    if (spec.is_glm()) {
      if (pool[i].x.size() != spec.dim) throw SchemaError("covariate dimension does not match problem");
      d.x.row(r) = pool[i].x.transpose();
    } else {
      d.x(r, 0) = 1.0;
    }
    d.y[r] = *labels[i];
  }
  return d;
}

}  // namespace detail

/// M-estimate on the labeled subset only; predictions are not used.
inline Vector classical_estimate(const Pool& pool, std::span<const unsigned char> xi, const Labels& labels,
                                 const ProblemSpec& spec) {
  spec.validate();
  return solve_weighted(spec, detail::labeled_data(pool, xi, labels, spec));
}

/// Sandwich covariance of the active estimator at theta_hat (per-item scale;
/// divide by n for the estimator's covariance).
inline Matrix sandwich_covariance(const Pool& pool, const SamplingPlan& plan, const Labels& labels,
                                  const ProblemSpec& spec, const Vector& theta_hat) {
  const auto items = detail::batch_items(pool, plan.pi, plan.xi, labels);
  return detail::aipw_covariance(spec, items, theta_hat);
}

/// Sandwich covariance of the classical estimator, computed over the
/// labeled subset (per-label scale; divide by n_lab).
inline Matrix classical_covariance(const Pool& pool, std::span<const unsigned char> xi, const Labels& labels,
                                   const ProblemSpec& spec, const Vector& theta_hat) {
  const auto d = detail::labeled_data(pool, xi, labels, spec);
  if (d.rows() < 2) throw DataError("classical covariance needs at least two labels");
  std::vector<AipwItem> items(static_cast<std::size_t>(d.rows()));
  std::vector<Vector> xs(items.size());
  for (Eigen::Index r = 0; r < d.rows(); ++r) {
    const auto i = static_cast<std::size_t>(r);
    xs[i] = d.x.row(r).transpose();
    // Fully labeled with pi = 1: increments reduce to the label gradients.
    items[i] = {&xs[i], d.y[r], d.y[r], 1.0, true};
  }
  return detail::aipw_covariance(spec, items, theta_hat);
}

enum class Method { kActive, kPpi, kClassical };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::kActive: return "active";
    case Method::kPpi: return "ppi";
    case Method::kClassical: return "classical";
  }
  return "?";
}

struct InferenceReport {
  std::string method;
  Vector theta_hat;
  Matrix sigma_hat;
  std::vector<Interval> intervals;  // one per coordinate
  double alpha = 0.1;
  std::size_t n = 0;
  std::size_t n_lab = 0;
};

namespace detail {

inline InferenceReport make_report(std::string method, Vector theta, Matrix sigma, double scale_n,
                                   double alpha, std::size_t n, std::size_t n_lab) {
  InferenceReport r;
  r.method = std::move(method);
  for (Eigen::Index j = 0; j < theta.size(); ++j)
    r.intervals.push_back(wald_interval(theta[j], std::max(0.0, sigma(j, j)), scale_n, alpha));
  r.theta_hat = std::move(theta);
  r.sigma_hat = std::move(sigma);
  r.alpha = alpha;
  r.n = n;
  r.n_lab = n_lab;
  return r;
}

inline std::size_t count_labels(std::span<const unsigned char> xi) {
  std::size_t s = 0;
  for (auto v : xi) s += v;
  return s;
}

}  // namespace detail

inline InferenceReport infer_active(const Pool& pool, const SamplingPlan& plan, const Labels& labels,
                                    const ProblemSpec& spec, double alpha) {
  Vector theta = active_batch_estimate(pool, plan, labels, spec);
  Matrix sigma = sandwich_covariance(pool, plan, labels, spec, theta);
  return detail::make_report("active", std::move(theta), std::move(sigma), static_cast<double>(pool.size()),
                             alpha, pool.size(), detail::count_labels(plan.xi));
}

inline InferenceReport infer_ppi(const Pool& pool, std::span<const unsigned char> xi, const Labels& labels,
                                 const ProblemSpec& spec, const Budget& budget, double alpha) {
  SamplingPlan plan;
  plan.pi.assign(pool.size(), budget.uniform_rate());
  plan.xi.assign(xi.begin(), xi.end());
  plan.tau = 1.0;
  Vector theta = ppi_estimate(pool, xi, labels, spec, budget);
  Matrix sigma = sandwich_covariance(pool, plan, labels, spec, theta);
  return detail::make_report("ppi", std::move(theta), std::move(sigma), static_cast<double>(pool.size()),
                             alpha, pool.size(), detail::count_labels(xi));
}

inline InferenceReport infer_classical(const Pool& pool, std::span<const unsigned char> xi, const Labels& labels,
                                       const ProblemSpec& spec, double alpha) {
  Vector theta = classical_estimate(pool, xi, labels, spec);
  Matrix sigma = classical_covariance(pool, xi, labels, spec, theta);
  const auto n_lab = detail::count_labels(xi);
  return detail::make_report("classical", std::move(theta), std::move(sigma), static_cast<double>(n_lab),
                             alpha, pool.size(), n_lab);
}

inline void write_report_header(std::ostream& out) { out << "method,coordinate,estimate,lo,hi,n,n_lab,alpha\n"; }

/// One CSV row per coordinate.
inline void write_report_rows(std::ostream& out, const InferenceReport& r) {
  for (std::size_t j = 0; j < r.intervals.size(); ++j)
    csv::write_row(out, r.method, j, r.theta_hat[static_cast<Eigen::Index>(j)], r.intervals[j].lo,
                   r.intervals[j].hi, r.n, r.n_lab, r.alpha);
}

}  // namespace actinf
