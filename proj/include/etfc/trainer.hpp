#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "etfc/dataset.hpp"
#include "etfc/etf.hpp"
#include "etfc/mlp.hpp"
#include "etfc/nc_metrics.hpp"
#include "etfc/types.hpp"

namespace etfc {

enum class TrainLoss { CE, WeightedCE, DR };
enum class FeatureNorm { None, Sphere, LengthReg };
enum class ClassifierKind { Learnable, FixedEtf };

const char* to_string(TrainLoss v) noexcept;
const char* to_string(FeatureNorm v) noexcept;
const char* to_string(ClassifierKind v) noexcept;
TrainLoss parse_train_loss(const std::string& s);
FeatureNorm parse_feature_norm(const std::string& s);
ClassifierKind parse_classifier_kind(const std::string& s);

struct TrainConfig {
  std::string regime = "custom";
  int epochs = 60;
  int batch_size = 64;
  double learning_rate = 0.1;
  std::vector<int> milestones{48, 54};
  double decay = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  ClassifierKind classifier = ClassifierKind::Learnable;
  TrainLoss loss = TrainLoss::CE;
  FeatureNorm normalization = FeatureNorm::None;
  double length_reg = 0.0;  // lambda for FeatureNorm::LengthReg
  /// DR only: per-class classifier lengths N/(K n_k) instead of uniform ones.
  bool class_weighted_lengths = true;
  double e_h = 1.0;
  double e_w = 1.0;
  std::vector<int> hidden{64, 64};
  int feature_dim = 16;
  bool rectify_output = false;
  std::uint64_t seed = 0;

  /// Throws ConfigError for inconsistent settings (milestones, DR without a
  /// fixed classifier, ...).
  void validate() const;
};

/// The four ablation regimes: "learnable_ce", "learnable_wce", "etf_ce", "etf_dr".
TrainConfig regime_preset(const std::string& name, int epochs);
const std::vector<std::string>& regime_names();

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double learning_rate = 0.0;
  double bal_acc = 0.0;
  NcReport train;
  NcReport test;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;

  std::string to_csv() const;
  /// Mean over the final quarter of epochs of (cos_ff_std + cos_fc_std) / 2
  /// on train features.
  double final_quarter_panel_std() const;
};

struct EvalResult {
  std::vector<double> per_class;
  double balanced = 0.0;
};

struct TrainResult {
  Mlp model;
  Matrix classifier;  // d x K; scaled ETF in fixed mode
  Matrix initial_classifier;
  TrainLog log;
};

/// Features the loss sees: backbone output, sphere-normalized if configured.
Matrix extract_features(const Mlp& model, const Matrix& inputs, const TrainConfig& config);

/// Argmax-logit prediction (lowest index on ties); balanced accuracy is the
/// mean of per-class accuracies. Throws DomainError for a class with no samples.
EvalResult evaluate(const Mlp& model, const Dataset& data, const Matrix& classifier, const TrainConfig& config);

/// Minibatch SGD with momentum and step decay. A fixed classifier is never
/// updated. Throws NumericError carrying the epoch on a non-finite loss.
TrainResult train(const DatasetPair& data, const TrainConfig& config);

/// Batch loss and its gradients with respect to the (pre-normalization)
/// features and the classifier; exposed for gradient checks.
struct LossGrad {
  double loss = 0.0;
  Matrix grad_features;
  Matrix grad_classifier;
};
LossGrad batch_loss(const Matrix& raw_features, const std::vector<int>& labels, const Matrix& classifier,
                    const Vector& sample_weights, const TrainConfig& config);

}  // namespace etfc
