#pragma once

#include "etfc/etf.hpp"
#include "etfc/types.hpp"

namespace etfc {

/// Negative CE gradient split into its same-class ("pull") and other-class
/// ("push") contributions: pull + push = -gradient.
struct PullPush {
  Vector pull;
  Vector push;
};

/// Softmax over the logits W^T h with max-logit subtraction.
/// Throws NumericError when a logit is non-finite.
Vector softmax_probs(const Vector& h, const Matrix& W);

/// -log p_c(h), evaluated as logsumexp(W^T h) - h^T w_c.
double ce_loss(const Feature& h, const Matrix& W);

/// -(1 - p_c) w_c + sum_{k != c} p_k w_k.
Vector ce_grad_feature(const Feature& h, const Matrix& W);

/// Summed (not averaged) gradient of the batch CE loss with respect to
/// column k. Accumulates in class-major order. Throws DomainError on an
/// empty batch.
Vector ce_grad_classifier(const FeatureBatch& batch, const Matrix& W, int k);

PullPush decompose_pull_push_feature(const Feature& h, const Matrix& W);
PullPush decompose_pull_push_classifier(const FeatureBatch& batch, const Matrix& W, int k);

/// Dot-regression loss against a single classifier column w_c:
///   (w_c^T h - |w_c| sqrt(e_h))^2 / (2 |w_c| sqrt(e_h)).
/// With uniform lengths |w_c| = sqrt(E_W); with per-class lengths the column's
/// own length stands in for sqrt(E_W).
double dr_loss_column(const Vector& h, const Vector& w_c, double e_h);

/// Exact gradient of dr_loss_column: (w_c^T h / (|w_c| sqrt(e_h)) - 1) w_c.
Vector dr_grad_column(const Vector& h, const Vector& w_c, double e_h);

double dr_loss(const Vector& h, const FixedClassifier& classifier, int c, double e_h);
Vector dr_grad(const Vector& h, const FixedClassifier& classifier, int c, double e_h);

/// Cosine of the angle between two vectors; throws DegenerateError if either
/// has zero norm.
double cosine(const Vector& a, const Vector& b);

}  // namespace etfc
