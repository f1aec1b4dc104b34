#include "etfc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "etfc/csv.hpp"
#include "etfc/error.hpp"
#include "etfc/etf.hpp"
#include "etfc/seed.hpp"

namespace etfc {

std::vector<int> Dataset::class_counts() const {
  std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

std::vector<int> imbalanced_counts(int n_max, double tau, int K) {
  if (K < 2) throw ConfigError("imbalanced_counts: need at least two classes");
  if (n_max < 1) throw ConfigError("imbalanced_counts: n_max must be positive");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("imbalanced_counts: imbalance ratio must lie in (0, 1]");
  std::vector<int> counts(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const double n = std::round(n_max * std::pow(tau, static_cast<double>(k) / (K - 1)));
    if (n < 1.0) {
      throw ConfigError("imbalanced_counts: class " + std::to_string(k) + " rounds to zero samples");
    }
    counts[static_cast<std::size_t>(k)] = static_cast<int>(n);
  }
  return counts;
}

namespace {

Dataset sample_clouds(const Matrix& centers, const std::vector<int>& counts, double noise, std::uint64_t seed) {
  const int d = static_cast<int>(centers.rows());
  const int K = static_cast<int>(centers.cols());
  Dataset out;
  out.num_classes = K;
  int total = 0;
  for (int n : counts) total += n;
  out.inputs.resize(d, total);
  out.labels.reserve(static_cast<std::size_t>(total));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  int col = 0;
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < counts[static_cast<std::size_t>(k)]; ++i, ++col) {
      for (int r = 0; r < d; ++r) out.inputs(r, col) = centers(r, k) + noise * normal(rng);
      out.labels.push_back(k);
    }
  }
  return out;
}

}  // namespace

DatasetPair make_imbalanced_dataset(const SyntheticDatasetSpec& spec) {
  const int K = spec.num_classes;
  if (spec.input_dim < K - 1) {
    throw ConfigError("make_imbalanced_dataset: input_dim must be at least num_classes - 1");
  }
  if (!(spec.separation > 0.0) || !(spec.noise > 0.0)) {
    throw ConfigError("make_imbalanced_dataset: separation and noise must be positive");
  }
  if (spec.test_per_class < 1) throw ConfigError("make_imbalanced_dataset: test_per_class must be positive");
  const std::vector<int> counts = imbalanced_counts(spec.n_max, spec.imbalance_ratio, K);
  DatasetPair out;
  out.centers = spec.separation * generate_etf(spec.input_dim, K, derive_seed(spec.seed, "centers")).columns;
  out.train = sample_clouds(out.centers, counts, spec.noise, derive_seed(spec.seed, "train"));
  out.test = sample_clouds(out.centers, std::vector<int>(static_cast<std::size_t>(K), spec.test_per_class),
                           spec.noise, derive_seed(spec.seed, "test"));
  return out;
}

std::string dataset_to_csv(const Dataset& data) {
  std::vector<std::string> header{"label"};
  for (int r = 0; r < data.input_dim(); ++r) header.push_back("x" + std::to_string(r));
  csv::Writer w(header);
  for (int i = 0; i < data.size(); ++i) {
    std::vector<std::string> row{std::to_string(data.labels[static_cast<std::size_t>(i)])};
    for (int r = 0; r < data.input_dim(); ++r) row.push_back(csv::format_double(data.inputs(r, i)));
    w.add_row(std::move(row));
  }
  return w.str();
}

Dataset dataset_from_csv(const std::string& text, int num_classes) {
  const csv::Table t = csv::parse(text);
  if (t.header.empty() || t.header.front() != "label") throw IoError("dataset_from_csv: first column must be 'label'");
  const int d = static_cast<int>(t.header.size()) - 1;
  if (d < 1) throw IoError("dataset_from_csv: no feature columns");
  Dataset out;
  out.inputs.resize(d, static_cast<Eigen::Index>(t.rows.size()));
  int max_label = -1;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    int y = 0;
    try {
      y = std::stoi(row[0]);
    } catch (const std::exception&) {
      throw IoError("dataset_from_csv: bad label on row " + std::to_string(i + 1));
    }
    if (y < 0) throw IoError("dataset_from_csv: negative label on row " + std::to_string(i + 1));
    max_label = std::max(max_label, y);
    out.labels.push_back(y);
    for (int r = 0; r < d; ++r) out.inputs(r, static_cast<Eigen::Index>(i)) = csv::parse_double(row[static_cast<std::size_t>(r) + 1]);
  }
  out.num_classes = num_classes > 0 ? num_classes : max_label + 1;
  if (max_label >= out.num_classes) throw IoError("dataset_from_csv: label exceeds the class count");
  return out;
}

}  // namespace etfc
