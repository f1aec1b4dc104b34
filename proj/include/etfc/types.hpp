#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace etfc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class LossKind { CE, DR };

const char* to_string(LossKind kind) noexcept;
LossKind parse_loss_kind(const std::string& text);

/// One labeled feature vector.
struct Feature {
  Vector values;
  int label = 0;
};

/// Labeled feature vectors stored column-wise (d x N) with their labels.
/// Batch reductions iterate samples in class-major order (see class_order()).
class FeatureBatch {
 public:
  FeatureBatch() = default;
  /// Throws DimensionError on a label/column count mismatch or a label outside [0, K).
  FeatureBatch(Matrix features, std::vector<int> labels, int num_classes);

  int dim() const noexcept { return static_cast<int>(features_.rows()); }
  int size() const noexcept { return static_cast<int>(labels_.size()); }
  int num_classes() const noexcept { return num_classes_; }
  bool empty() const noexcept { return labels_.empty(); }

  const Matrix& features() const noexcept { return features_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  auto feature(int i) const { return features_.col(i); }
  int label(int i) const { return labels_[static_cast<std::size_t>(i)]; }

  std::vector<int> class_counts() const;
  /// Sample indices sorted by (class, original index).
  const std::vector<int>& class_order() const noexcept { return order_; }

 private:
  Matrix features_;
  std::vector<int> labels_;
  int num_classes_ = 0;
  std::vector<int> order_;
};

}  // namespace etfc
