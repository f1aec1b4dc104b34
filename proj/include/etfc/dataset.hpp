#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "etfc/types.hpp"

namespace etfc {

struct SyntheticDatasetSpec {
  int num_classes = 10;
  int input_dim = 32;
  int n_max = 500;
  double imbalance_ratio = 0.01;  // tau = n_min / n_max
  double separation = 1.0;
  double noise = 0.25;
  int test_per_class = 100;
  std::uint64_t seed = 0;
};

/// Inputs stored d_in x N, samples grouped by class.
struct Dataset {
  Matrix inputs;
  std::vector<int> labels;
  int num_classes = 0;

  int size() const noexcept { return static_cast<int>(labels.size()); }
  int input_dim() const noexcept { return static_cast<int>(inputs.rows()); }
  std::vector<int> class_counts() const;
};

/// n_k = round(n_max tau^{k/(K-1)}). Throws ConfigError when a count rounds to 0.
std::vector<int> imbalanced_counts(int n_max, double tau, int K);

struct DatasetPair {
  Dataset train;
  Dataset test;
  Matrix centers;  // d_in x K
};

/// Isotropic Gaussian clouds around separation * (simplex ETF in R^{d_in}).
/// The test set holds test_per_class samples of every class.
DatasetPair make_imbalanced_dataset(const SyntheticDatasetSpec& spec);

/// "label,x0,...,x{d-1}" with a header row.
std::string dataset_to_csv(const Dataset& data);
/// num_classes <= 0 infers K as max label + 1.
Dataset dataset_from_csv(const std::string& text, int num_classes = 0);

}  // namespace etfc
