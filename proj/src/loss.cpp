#include "etfc/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "etfc/error.hpp"

namespace etfc {

namespace {

void check_label(int c, const Matrix& W) {
  if (c < 0 || c >= W.cols()) {
    throw DimensionError("label " + std::to_string(c) + " outside [0, " + std::to_string(W.cols()) + ")");
  }
}

void check_dims(const Vector& h, const Matrix& W) {
  if (h.size() != W.rows()) {
    throw DimensionError("feature dimension " + std::to_string(h.size()) +
                         " does not match classifier rows " + std::to_string(W.rows()));
  }
}

Vector logits(const Vector& h, const Matrix& W) {
  check_dims(h, W);
  Vector z = W.transpose() * h;
  if (!z.allFinite()) throw NumericError("non-finite logit");
  return z;
}

Vector softmax_from_logits(const Vector& z) {
  Vector p = (z.array() - z.maxCoeff()).exp().matrix();
  p /= p.sum();
  return p;
}

void check_column(const FixedClassifier& classifier, int c) {
  if (c < 0 || c >= classifier.num_classes()) {
    throw DimensionError("class " + std::to_string(c) + " outside [0, " +
                         std::to_string(classifier.num_classes()) + ")");
  }
}

}  // namespace

Vector softmax_probs(const Vector& h, const Matrix& W) { return softmax_from_logits(logits(h, W)); }

double ce_loss(const Feature& h, const Matrix& W) {
  check_label(h.label, W);
  const Vector z = logits(h.values, W);
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  return lse - z[h.label];
}

Vector ce_grad_feature(const Feature& h, const Matrix& W) {
  check_label(h.label, W);
  Vector p = softmax_probs(h.values, W);
  p[h.label] -= 1.0;
  return W * p;
}

Vector ce_grad_classifier(const FeatureBatch& batch, const Matrix& W, int k) {
  if (batch.empty()) throw DomainError("ce_grad_classifier: empty batch");
  check_label(k, W);
  Vector grad = Vector::Zero(W.rows());
  for (int i : batch.class_order()) {
    const Vector h = batch.feature(i);
    const Vector p = softmax_probs(h, W);
    const double coeff = p[k] - (batch.label(i) == k ? 1.0 : 0.0);
    grad += coeff * h;
  }
  return grad;
}

PullPush decompose_pull_push_feature(const Feature& h, const Matrix& W) {
  check_label(h.label, W);
  const Vector p = softmax_probs(h.values, W);
  PullPush out;
  out.pull = (1.0 - p[h.label]) * W.col(h.label);
  out.push = Vector::Zero(W.rows());
  for (Eigen::Index k = 0; k < W.cols(); ++k) {
    if (k != h.label) out.push -= p[k] * W.col(k);
  }
  return out;
}

PullPush decompose_pull_push_classifier(const FeatureBatch& batch, const Matrix& W, int k) {
  if (batch.empty()) throw DomainError("decompose_pull_push_classifier: empty batch");
  check_label(k, W);
  PullPush out{Vector::Zero(W.rows()), Vector::Zero(W.rows())};
  for (int i : batch.class_order()) {
    const Vector h = batch.feature(i);
    const Vector p = softmax_probs(h, W);
    if (batch.label(i) == k) {
      out.pull += (1.0 - p[k]) * h;
    } else {
      out.push -= p[k] * h;
    }
  }
  return out;
}

double dr_loss_column(const Vector& h, const Vector& w_c, double e_h) {
  if (!(e_h > 0.0)) throw DomainError("dr_loss: E_H must be positive");
  if (h.size() != w_c.size()) throw DimensionError("dr_loss: dimension mismatch");
  const double target = w_c.norm() * std::sqrt(e_h);
  if (!(target > 0.0)) throw DegenerateError("dr_loss: zero-length classifier column");
  const double r = w_c.dot(h) - target;
  return r * r / (2.0 * target);
}

Vector dr_grad_column(const Vector& h, const Vector& w_c, double e_h) {
  if (!(e_h > 0.0)) throw DomainError("dr_grad: E_H must be positive");
  if (h.size() != w_c.size()) throw DimensionError("dr_grad: dimension mismatch");
  const double target = w_c.norm() * std::sqrt(e_h);
  if (!(target > 0.0)) throw DegenerateError("dr_grad: zero-length classifier column");
  return (w_c.dot(h) / target - 1.0) * w_c;
}

double dr_loss(const Vector& h, const FixedClassifier& classifier, int c, double e_h) {
  check_column(classifier, c);
  return dr_loss_column(h, classifier.scaled_columns.col(c), e_h);
}

Vector dr_grad(const Vector& h, const FixedClassifier& classifier, int c, double e_h) {
  check_column(classifier, c);
  return dr_grad_column(h, classifier.scaled_columns.col(c), e_h);
}

double cosine(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw DegenerateError("cosine of a zero-norm vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

}  // namespace etfc
