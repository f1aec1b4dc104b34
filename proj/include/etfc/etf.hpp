#pragma once

#include <cstdint>

#include "etfc/types.hpp"

namespace etfc {

/// A d x K simplex equiangular tight frame with unit-norm columns whose
/// pairwise cosines all equal -1/(K-1).
struct EtfFrame {
  int dim = 0;
  int num_classes = 0;
  Matrix columns;
  std::uint64_t rotation_seed = 0;
};

/// An ETF whose column k is rescaled to length lengths[k].
struct FixedClassifier {
  EtfFrame frame;
  Vector lengths;
  Matrix scaled_columns;

  int dim() const noexcept { return frame.dim; }
  int num_classes() const noexcept { return frame.num_classes; }
  /// True when every length equals lengths[0] (relative tolerance 1e-12).
  bool uniform_lengths() const noexcept;
  /// E_W for a uniform-length classifier, i.e. lengths[0]^2.
  double energy() const noexcept { return lengths.size() ? lengths[0] * lengths[0] : 0.0; }
};

struct GramReport {
  Matrix gram;
  double max_deviation = 0.0;
  int worst_row = 0;
  int worst_col = 0;
  bool pass = false;
};

/// K orthonormal columns in R^d from Gaussian draws, sign-fixed so each
/// column's first nonzero entry is positive. Throws DimensionError if d < K.
Matrix random_semi_orthogonal(int d, int K, std::uint64_t seed);

/// Target Gram matrix K/(K-1) I - 1/(K-1) 11^T.
Matrix etf_gram_target(int K);

/// Builds M = sqrt(K/(K-1)) U (I - 11^T/K). For d = K-1 the centered simplex
/// is expressed in a random orthonormal basis of R^{K-1} instead.
/// Throws DimensionError when d < K-1 or K < 2.
EtfFrame generate_etf(int d, int K, std::uint64_t seed);

GramReport verify_etf(const EtfFrame& frame, double tol = 1e-9);

/// Throws DomainError for a non-positive length, DimensionError for a size mismatch.
FixedClassifier scale_classifier(const EtfFrame& frame, const Vector& lengths);

/// Uniform lengths sqrt(e_w) for every class.
FixedClassifier scale_classifier_uniform(const EtfFrame& frame, double e_w);

}  // namespace etfc
