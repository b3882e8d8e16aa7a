#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "actinf/core.hpp"
#include "actinf/error.hpp"
#include "actinf/losses.hpp"

namespace actinf {

/// K/(K-1) * (1 - max_k p_k). Zero for a confident prediction, one for a
/// uniform one.
inline double classification_uncertainty(std::span<const double> probs) {
  const auto k = probs.size();
  if (k < 2) throw ArgumentError("classification uncertainty needs at least two classes");
  double sum = 0.0, top = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("probability outside [0,1]");
    sum += p;
    top = std::max(top, p);
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ArgumentError("probabilities do not sum to 1");
  const double kd = static_cast<double>(k);
  return std::clamp(kd / (kd - 1.0) * (1.0 - top), 0.0, 1.0);
}

inline double classification_uncertainty(const Vector& probs) {
  return classification_uncertainty(std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size())));
}

struct LabeledPoint {
  Vector x;
  double y = 0.0;
};

struct Prediction {
  double value = 0.0;
  std::optional<Vector> probs;  // LogisticLearner only: (P(y=0), P(y=1))
};

enum class PredictorKind { kRidge, kLogistic, kKNearest };

/// Built-in stand-ins for a black-box model. Immutable: fitting returns a
/// new value. The training buffer is kept so that finetune can refit on
/// everything seen so far.
class Predictor {
 public:
  /// Ridge regression with an unpenalized intercept. Without an explicit
  /// lambda the penalty is 1e-3 * (training size).
  static Predictor ridge(std::optional<double> lambda = std::nullopt) {
    Predictor p(PredictorKind::kRidge);
    p.lambda_ = lambda;
    return p;
  }
  /// L2-penalized logistic regression on labels in [0, 1].
  static Predictor logistic(double lambda = 1.0) {
    Predictor p(PredictorKind::kLogistic);
    p.lambda_ = lambda;
    return p;
  }
  static Predictor knearest(int k) {
    if (k < 1) throw ArgumentError("k-nearest needs k >= 1");
    Predictor p(PredictorKind::kKNearest);
    p.k_ = k;
    return p;
  }

  PredictorKind kind() const { return kind_; }
  bool fitted() const { return fitted_; }
  int version() const { return version_; }
  const std::vector<LabeledPoint>& buffer() const { return buffer_; }
  const Vector& coefficients() const { return coef_; }

  /// Fresh fit on `data`, replacing any training buffer.
  Predictor fit(std::span<const LabeledPoint> data) const {
    Predictor out = unfitted_copy();
    out.buffer_.assign(data.begin(), data.end());
    out.refit();
    return out;
  }

  /// Append `batch` to the training buffer and refit on the whole buffer.
  Predictor finetune(std::span<const LabeledPoint> batch) const {
    if (batch.empty()) throw ArgumentError("finetune batch is empty");
    Predictor out = *this;
    out.buffer_.insert(out.buffer_.end(), batch.begin(), batch.end());
    out.refit();
    return out;
  }

  Prediction predict(const Vector& x) const {
    if (!fitted_) throw StateError("predict called on an unfitted model");
    if (x.size() != dim_)
      throw ArgumentError("predict: covariate dimension " + std::to_string(x.size()) +
                          ", model expects " + std::to_string(dim_));
    Prediction out;
    switch (kind_) {
      case PredictorKind::kRidge:
        out.value = coef_[0] + coef_.tail(dim_).dot(x);
        break;
      case PredictorKind::kLogistic: {
        const double p = detail::sigmoid(coef_[0] + coef_.tail(dim_).dot(x));
        out.value = p;
        Vector probs(2);
        probs << 1.0 - p, p;
        out.probs = std::move(probs);
        break;
      }
      case PredictorKind::kKNearest:
        out.value = knn_predict(x);
        break;
    }
    return out;
  }

  double predict_value(const Vector& x) const { return predict(x).value; }

 private:
  explicit Predictor(PredictorKind kind) : kind_(kind) {}

  Predictor unfitted_copy() const {
    Predictor p(kind_);
    p.lambda_ = lambda_;
    p.k_ = k_;
    p.version_ = version_;
    return p;
  }

  void refit() {
    if (buffer_.empty()) throw DataError("cannot fit a model on zero examples");
    dim_ = buffer_.front().x.size();
    for (const auto& pt : buffer_)
      if (pt.x.size() != dim_) throw SchemaError("training points differ in dimension");
    switch (kind_) {
      case PredictorKind::kRidge: fit_ridge(); break;
      case PredictorKind::kLogistic: fit_logistic(); break;
      case PredictorKind::kKNearest: break;
    }
    fitted_ = true;
    ++version_;
  }

  Matrix design() const {
    const auto n = static_cast<Eigen::Index>(buffer_.size());
    Matrix phi(n, dim_ + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      phi(i, 0) = 1.0;
      phi.row(i).tail(dim_) = buffer_[static_cast<std::size_t>(i)].x.transpose();
    }
    return phi;
  }

  Vector targets() const {
    Vector y(static_cast<Eigen::Index>(buffer_.size()));
    for (std::size_t i = 0; i < buffer_.size(); ++i) y[static_cast<Eigen::Index>(i)] = buffer_[i].y;
    return y;
  }

  void fit_ridge() {
    const Matrix phi = design();
    const Vector y = targets();
    const double lambda = lambda_.value_or(1e-3 * static_cast<double>(buffer_.size()));
    Matrix a = phi.transpose() * phi;
    a.diagonal().tail(dim_).array() += lambda;
    Eigen::FullPivLU<Matrix> lu(a);
    if (!lu.isInvertible()) throw SingularError("ridge: degenerate design");
    coef_ = lu.solve(phi.transpose() * y);
  }

  void fit_logistic() {
    const Matrix phi = design();
    const Vector y = targets();
    for (Eigen::Index i = 0; i < y.size(); ++i)
      if (!(y[i] >= 0.0 && y[i] <= 1.0)) throw DataError("logistic learner needs labels in [0,1]");
    const double lambda = lambda_.value_or(1.0);
    Vector pen = Vector::Constant(dim_ + 1, lambda);
    pen[0] = 1e-3 * lambda;
    auto objective = [&](const Vector& b) {
      const Vector s = phi * b;
      double v = 0.0;
      for (Eigen::Index i = 0; i < s.size(); ++i) v += detail::softplus(s[i]) - y[i] * s[i];
      return v + 0.5 * b.dot(pen.cwiseProduct(b));
    };
    Vector b = Vector::Zero(dim_ + 1);
    double cur = objective(b);
    for (int iter = 0; iter < 100; ++iter) {
      const Vector s = phi * b;
      Vector r(s.size()), c(s.size());
      for (Eigen::Index i = 0; i < s.size(); ++i) {
        const double p = detail::sigmoid(s[i]);
        r[i] = p - y[i];
        c[i] = p * (1.0 - p);
      }
      const Vector g = phi.transpose() * r + pen.cwiseProduct(b);
      if (g.norm() <= 1e-10) break;
      Matrix h = phi.transpose() * c.asDiagonal() * phi;
      h.diagonal() += pen;
      const Vector dir = h.ldlt().solve(g);
      double step = 1.0;
      bool moved = false;
      for (int k = 0; k < 50; ++k, step *= 0.5) {
        const Vector cand = b - step * dir;
        const double val = objective(cand);
        if (val <= cur) {
          b = cand;
          cur = val;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    if (!b.allFinite()) throw NumericalError("logistic learner diverged");
    coef_ = std::move(b);
  }

  double knn_predict(const Vector& x) const {
    const auto n = buffer_.size();
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) dist[i] = {(buffer_[i].x - x).squaredNorm(), i};
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(k_), n);
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += buffer_[dist[i].second].y;
    return s / static_cast<double>(k);
  }

  PredictorKind kind_;
  std::optional<double> lambda_;
  int k_ = 1;
  bool fitted_ = false;
  int version_ = 0;
  Eigen::Index dim_ = 0;
  Vector coef_;
  std::vector<LabeledPoint> buffer_;
};

/// Predicts |f(x) - y|; outputs are clamped at zero.
class ErrorModel {
 public:
  ErrorModel() : base_(Predictor::ridge()) {}
  explicit ErrorModel(Predictor fitted) : base_(std::move(fitted)) {
    if (!base_.fitted()) throw StateError("error model needs a fitted predictor");
  }

  double predict(const Vector& x) const { return std::max(0.0, base_.predict_value(x)); }
  const Predictor& base() const { return base_; }
  int version() const { return base_.version(); }

 private:
  Predictor base_;
};

struct ErrorPair {
  Vector x;
  double f = 0.0;
  double y = 0.0;
};

/// Train `learner` on targets |f(x) - y|.
inline ErrorModel fit_error_model(std::span<const ErrorPair> pairs,
                                  const Predictor& learner = Predictor::ridge()) {
  if (pairs.size() < 2) throw DataError("error model needs at least two pairs");
  std::vector<LabeledPoint> data;
  data.reserve(pairs.size());
  for (const auto& p : pairs) data.push_back({p.x, std::abs(p.f - p.y)});
  return ErrorModel(learner.fit(data));
}

/// Error model trained on out-of-fold residuals: the buffer is split into
/// two interleaved folds, `predictor` is refit on each fold and scored on
/// the other, and the error model is fit on all held-out residuals.
inline ErrorModel fit_error_model_cross(const Predictor& predictor, std::span<const LabeledPoint> buffer,
                                        const Predictor& learner = Predictor::ridge()) {
  if (buffer.size() < 4) throw DataError("cross-fitted error model needs at least four points");
  std::vector<LabeledPoint> fold[2];
  for (std::size_t i = 0; i < buffer.size(); ++i) fold[i % 2].push_back(buffer[i]);
  std::vector<ErrorPair> pairs;
  pairs.reserve(buffer.size());
  for (int k = 0; k < 2; ++k) {
    const Predictor m = predictor.fit(fold[1 - k]);
    for (const auto& pt : fold[k]) pairs.push_back({pt.x, m.predict_value(pt.x), pt.y});
  }
  return fit_error_model(pairs, learner);
}

}  // namespace actinf
