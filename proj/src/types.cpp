#include "etfc/types.hpp"

#include <algorithm>
#include <numeric>

#include "etfc/error.hpp"

namespace etfc {

const char* to_string(LossKind kind) noexcept {
  return kind == LossKind::CE ? "ce" : "dr";
}

LossKind parse_loss_kind(const std::string& text) {
  if (text == "ce" || text == "CE") return LossKind::CE;
  if (text == "dr" || text == "DR") return LossKind::DR;
  throw ConfigError("unknown loss kind '" + text + "' (expected ce or dr)");
}

FeatureBatch::FeatureBatch(Matrix features, std::vector<int> labels, int num_classes)
    : features_(std::move(features)), labels_(std::move(labels)), num_classes_(num_classes) {
  if (num_classes_ < 1) throw DimensionError("FeatureBatch: num_classes must be positive");
  if (static_cast<Eigen::Index>(labels_.size()) != features_.cols()) {
    throw DimensionError("FeatureBatch: " + std::to_string(labels_.size()) + " labels for " +
                         std::to_string(features_.cols()) + " feature columns");
  }
  for (int y : labels_) {
    if (y < 0 || y >= num_classes_) {
      throw DimensionError("FeatureBatch: label " + std::to_string(y) + " outside [0, " +
                           std::to_string(num_classes_) + ")");
    }
  }
  if (!features_.allFinite()) throw NumericError("FeatureBatch: non-finite feature entry");
  order_.resize(labels_.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::stable_sort(order_.begin(), order_.end(),
                   [this](int a, int b) { return labels_[a] < labels_[b]; });
}

std::vector<int> FeatureBatch::class_counts() const {
  std::vector<int> counts(static_cast<std::size_t>(num_classes_), 0);
  for (int y : labels_) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

}  // namespace etfc
