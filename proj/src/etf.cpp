#include "etfc/etf.hpp"

#include <cmath>
#include <random>
#include <string>

#include "etfc/error.hpp"

namespace etfc {

namespace {

void fix_column_signs(Matrix& q) {
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
      if (q(r, c) != 0.0) {
        if (q(r, c) < 0.0) q.col(c) *= -1.0;
        break;
      }
    }
  }
}

Matrix centering(int K) {
  return Matrix::Identity(K, K) - Matrix::Constant(K, K, 1.0 / K);
}

}  // namespace

Matrix random_semi_orthogonal(int d, int K, std::uint64_t seed) {
  if (K < 1 || d < K) {
    throw DimensionError("random_semi_orthogonal: need d >= K >= 1, got d=" + std::to_string(d) +
                         ", K=" + std::to_string(K));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(d, K);
  // Column-major draw order keeps each column's entries contiguous in the stream.
  for (int c = 0; c < K; ++c)
    for (int r = 0; r < d; ++r) g(r, c) = normal(rng);

  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, K);
  fix_column_signs(q);
  return q;
}

Matrix etf_gram_target(int K) {
  const double off = -1.0 / (K - 1);
  Matrix t = Matrix::Constant(K, K, off);
  t.diagonal().setConstant(1.0);
  return t;
}

EtfFrame generate_etf(int d, int K, std::uint64_t seed) {
  if (K < 2) throw DimensionError("generate_etf: need K >= 2, got K=" + std::to_string(K));
  if (d < K - 1) {
    throw DimensionError("generate_etf: d=" + std::to_string(d) + " < K-1=" + std::to_string(K - 1) +
                         "; maximal equiangular separation is unachievable");
  }
  const double scale = std::sqrt(static_cast<double>(K) / (K - 1));
  EtfFrame frame;
  frame.dim = d;
  frame.num_classes = K;
  frame.rotation_seed = seed;

  if (d >= K) {
    frame.columns = scale * random_semi_orthogonal(d, K, seed) * centering(K);
    return frame;
  }

  // d == K-1: orthonormal basis of the complement of the all-ones vector,
  // then a random rotation within R^{K-1}.
  const Matrix center = centering(K);
  Eigen::HouseholderQR<Matrix> qr(center.leftCols(K - 1));
  Matrix basis = qr.householderQ() * Matrix::Identity(K, K - 1);
  const Matrix coords = basis.transpose() * (scale * center);
  const Matrix rotation = random_semi_orthogonal(K - 1, K - 1, seed);
  frame.columns = rotation * coords;
  return frame;
}

GramReport verify_etf(const EtfFrame& frame, double tol) {
  GramReport report;
  const int K = frame.num_classes;
  if (K < 2 || frame.columns.cols() != K || frame.columns.rows() != frame.dim) {
    report.pass = false;
    report.max_deviation = std::numeric_limits<double>::infinity();
    return report;
  }
  report.gram = frame.columns.transpose() * frame.columns;
  const Matrix target = etf_gram_target(K);
  double worst = -1.0;
  for (int j = 0; j < K; ++j) {
    for (int i = 0; i < K; ++i) {
      const double dev = std::abs(report.gram(i, j) - target(i, j));
      if (!(dev <= worst)) {
        worst = dev;
        report.worst_row = i;
        report.worst_col = j;
      }
    }
  }
  report.max_deviation = worst;
  report.pass = worst <= tol;
  return report;
}

bool FixedClassifier::uniform_lengths() const noexcept {
  if (lengths.size() == 0) return false;
  const double ref = lengths[0];
  for (Eigen::Index k = 1; k < lengths.size(); ++k) {
    if (std::abs(lengths[k] - ref) > 1e-12 * std::abs(ref)) return false;
  }
  return true;
}

FixedClassifier scale_classifier(const EtfFrame& frame, const Vector& lengths) {
  if (lengths.size() != frame.num_classes) {
    throw DimensionError("scale_classifier: expected " + std::to_string(frame.num_classes) +
                         " lengths, got " + std::to_string(lengths.size()));
  }
  for (Eigen::Index k = 0; k < lengths.size(); ++k) {
    if (!(lengths[k] > 0.0) || !std::isfinite(lengths[k])) {
      throw DomainError("scale_classifier: length " + std::to_string(k) + " must be positive");
    }
  }
  FixedClassifier clf;
  clf.frame = frame;
  clf.lengths = lengths;
  clf.scaled_columns = frame.columns * lengths.asDiagonal();
  return clf;
}

FixedClassifier scale_classifier_uniform(const EtfFrame& frame, double e_w) {
  if (!(e_w > 0.0)) throw DomainError("scale_classifier_uniform: E_W must be positive");
  return scale_classifier(frame, Vector::Constant(frame.num_classes, std::sqrt(e_w)));
}

}  // namespace etfc
