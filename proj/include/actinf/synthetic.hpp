#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "actinf/core.hpp"
#include "actinf/error.hpp"
#include "actinf/losses.hpp"
#include "actinf/predictors.hpp"
#include "actinf/rng.hpp"

namespace actinf {

enum class SyntheticKind { kBinaryResponse, kHeteroLinear, kQuantileTarget };

inline const char* to_string(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::kBinaryResponse: return "binary";
    case SyntheticKind::kHeteroLinear: return "hetero-linear";
    case SyntheticKind::kQuantileTarget: return "quantile";
  }
  return "?";
}

inline SyntheticKind parse_synthetic_kind(const std::string& s) {
  if (s == "binary") return SyntheticKind::kBinaryResponse;
  if (s == "hetero-linear") return SyntheticKind::kHeteroLinear;
  if (s == "quantile") return SyntheticKind::kQuantileTarget;
  throw ArgumentError("unknown synthetic kind '" + s + "' (binary, hetero-linear, quantile)");
}

/// Families:
///  binary         X ~ U(-1,1), P(Y=1|X) = sigmoid(beta0 + beta1 X); the
///                 model predicts sigmoid(gamma0 + gamma1 X).
///  hetero-linear  x = (1, Z), Z ~ U(0,1), Y = theta0 + theta1 Z + noise Z eps;
///                 f is ridge on the historical draws, err a cross-fitted
///                 error model.
///  quantile       X ~ U(0,1), Y | X ~ U(0, 2X); f = 2qX and err is the
///                 exact E|Y - f| given X.
struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::kBinaryResponse;
  std::size_t n = 2000;
  std::size_t n_hist = 1000;
  double beta0 = 0.0, beta1 = 4.0;
  double gamma0 = 0.0, gamma1 = 4.0;
  double theta0 = 2.0, theta1 = -1.0;
  double noise = 2.0;
  double q = 0.5;

  ProblemSpec problem() const {
    switch (kind) {
      case SyntheticKind::kBinaryResponse: return ProblemSpec::mean();
      case SyntheticKind::kHeteroLinear: return ProblemSpec::linear(2, 0);
      case SyntheticKind::kQuantileTarget: return ProblemSpec::quantile(q);
    }
    return ProblemSpec::mean();
  }

  void validate() const {
    if (n < 2) throw ArgumentError("synthetic pool needs n >= 2");
    if (kind == SyntheticKind::kHeteroLinear && n_hist < 8)
      throw ArgumentError("hetero-linear needs at least 8 historical draws");
    if (!(noise >= 0.0)) throw ArgumentError("noise must be nonnegative");
    if (!(q > 0.0 && q < 1.0)) throw ArgumentError("quantile level must lie in (0,1)");
  }
};

/// A generated pool. Labels are kept out of the pool itself; estimators see
/// them only through `hidden` at the selected positions.
struct SyntheticData {
  Pool pool;
  Labels hidden;
  Vector theta_star;  // population value, known without sampling
  ProblemSpec problem;
  std::vector<LabeledPoint> historical;
};

/// E[sigmoid(b0 + b1 X)] for X ~ U(-1, 1).
inline double binary_mean(double beta0, double beta1) {
  if (beta1 == 0.0) return detail::sigmoid(beta0);
  return (detail::softplus(beta0 + beta1) - detail::softplus(beta0 - beta1)) / (2.0 * beta1);
}

/// q-quantile of Y = U(0, 2X), X ~ U(0,1): P(Y <= m) = a (1 - log a) with
/// a = m / 2, solved by bisection.
inline double uniform_product_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) throw ArgumentError("quantile level must lie in (0,1)");
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double a = 0.5 * (lo + hi);
    (a * (1.0 - std::log(a)) < q ? lo : hi) = a;
  }
  return lo + hi;  // m = 2a
}

namespace detail {

struct Draw {
  Vector x;
  double y = 0.0;
};

inline Draw draw_one(const SyntheticSpec& s, Rng& g) {
  Draw d;
  switch (s.kind) {
    case SyntheticKind::kBinaryResponse: {
      const double x = g.uniform(-1.0, 1.0);
      d.x = Vector::Constant(1, x);
      d.y = g.bernoulli(sigmoid(s.beta0 + s.beta1 * x)) ? 1.0 : 0.0;
      break;
    }
    case SyntheticKind::kHeteroLinear: {
      const double z = g.uniform();
      d.x = Vector(2);
      d.x << 1.0, z;
      d.y = s.theta0 + s.theta1 * z + s.noise * z * g.normal();
      break;
    }
    case SyntheticKind::kQuantileTarget: {
      const double x = g.uniform();
      d.x = Vector::Constant(1, x);
      d.y = g.uniform(0.0, 2.0 * x);
      break;
    }
  }
  return d;
}

}  // namespace detail

inline SyntheticData gen_synthetic(const SyntheticSpec& spec, const RngSpec& rng) {
  spec.validate();
  SyntheticData out;
  out.problem = spec.problem();

  Rng hist_gen(rng.child(1));
  out.historical.reserve(spec.n_hist);
  for (std::size_t i = 0; i < spec.n_hist; ++i) {
    auto d = detail::draw_one(spec, hist_gen);
    out.historical.push_back({std::move(d.x), d.y});
  }

  std::optional<Predictor> model;
  std::optional<ErrorModel> errors;
  if (spec.kind == SyntheticKind::kHeteroLinear) {
    model = Predictor::ridge().fit(out.historical);
    errors = fit_error_model_cross(*model, out.historical);
  }

  Rng pool_gen(rng.child(0));
  std::vector<Example> ex;
  ex.reserve(spec.n);
  out.hidden.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    auto d = detail::draw_one(spec, pool_gen);
    Example e;
    e.x = std::move(d.x);
    switch (spec.kind) {
      case SyntheticKind::kBinaryResponse: {
        const double p = detail::sigmoid(spec.gamma0 + spec.gamma1 * e.x[0]);
        e.f = p;
        Vector probs(2);
        probs << 1.0 - p, p;
        e.probs = std::move(probs);
        break;
      }
      case SyntheticKind::kHeteroLinear:
        e.f = model->predict_value(e.x);
        e.err = errors->predict(e.x);
        break;
      case SyntheticKind::kQuantileTarget:
        e.f = 2.0 * spec.q * e.x[0];
        e.err = e.x[0] * (spec.q * spec.q + (1.0 - spec.q) * (1.0 - spec.q));
        break;
    }
    out.hidden.push_back(d.y);
    ex.push_back(std::move(e));
  }
  out.pool = Pool(std::move(ex));

  switch (spec.kind) {
    case SyntheticKind::kBinaryResponse:
      out.theta_star = Vector::Constant(1, binary_mean(spec.beta0, spec.beta1));
      break;
    case SyntheticKind::kHeteroLinear:
      out.theta_star = Vector(2);
      out.theta_star << spec.theta0, spec.theta1;
      break;
    case SyntheticKind::kQuantileTarget:
      out.theta_star = Vector::Constant(1, uniform_product_quantile(spec.q));
      break;
  }
  return out;
}

/// The M-estimate on every (x, y) in the pool, used as ground truth when the
/// pool is held fixed across trials.
inline Vector full_pool_estimate(const Pool& pool, const Labels& labels, const ProblemSpec& spec) {
  if (labels.size() != pool.size()) throw ArgumentError("label count does not match pool");
  std::vector<WeightedSample> s;
  s.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!labels[i]) throw DataError("full-pool estimate needs every label (row " + std::to_string(i + 1) + ")");
    s.push_back({pool[i].x, *labels[i], 1.0});
  }
  return solve_weighted(spec, s);
}

}  // namespace actinf
