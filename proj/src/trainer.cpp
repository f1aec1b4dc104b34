#include "etfc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "etfc/csv.hpp"
#include "etfc/error.hpp"
#include "etfc/loss.hpp"
#include "etfc/seed.hpp"

namespace etfc {

const char* to_string(TrainLoss v) noexcept {
  switch (v) {
    case TrainLoss::CE: return "ce";
    case TrainLoss::WeightedCE: return "wce";
    case TrainLoss::DR: return "dr";
  }
  return "?";
}

const char* to_string(FeatureNorm v) noexcept {
  switch (v) {
    case FeatureNorm::None: return "none";
    case FeatureNorm::Sphere: return "sphere";
    case FeatureNorm::LengthReg: return "length_reg";
  }
  return "?";
}

const char* to_string(ClassifierKind v) noexcept {
  return v == ClassifierKind::Learnable ? "learnable" : "fixed_etf";
}

TrainLoss parse_train_loss(const std::string& s) {
  if (s == "ce") return TrainLoss::CE;
  if (s == "wce") return TrainLoss::WeightedCE;
  if (s == "dr") return TrainLoss::DR;
  throw ConfigError("unknown loss '" + s + "' (expected ce, wce or dr)");
}

FeatureNorm parse_feature_norm(const std::string& s) {
  if (s == "none") return FeatureNorm::None;
  if (s == "sphere") return FeatureNorm::Sphere;
  if (s == "length_reg") return FeatureNorm::LengthReg;
  throw ConfigError("unknown normalization '" + s + "' (expected none, sphere or length_reg)");
}

ClassifierKind parse_classifier_kind(const std::string& s) {
  if (s == "learnable") return ClassifierKind::Learnable;
  if (s == "fixed_etf") return ClassifierKind::FixedEtf;
  throw ConfigError("unknown classifier '" + s + "' (expected learnable or fixed_etf)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  for (std::size_t i = 0; i < milestones.size(); ++i) {
    if (milestones[i] < 1 || milestones[i] >= epochs) throw ConfigError("milestones must lie in [1, epochs)");
    if (i && milestones[i] <= milestones[i - 1]) throw ConfigError("milestones must be strictly increasing");
  }
  if (loss == TrainLoss::DR && classifier != ClassifierKind::FixedEtf) {
    throw ConfigError("the dr loss needs classifier fixed_etf");
  }
  if (normalization == FeatureNorm::LengthReg && !(length_reg > 0.0)) {
    throw ConfigError("length_reg normalization needs a positive length_reg");
  }
  if (!(e_h > 0.0) || !(e_w > 0.0)) throw ConfigError("e_h and e_w must be positive");
  if (feature_dim < 1) throw ConfigError("feature_dim must be positive");
  for (int h : hidden) {
    if (h < 1) throw ConfigError("hidden widths must be positive");
  }
}

const std::vector<std::string>& regime_names() {
  static const std::vector<std::string> names{"learnable_ce", "learnable_wce", "etf_ce", "etf_dr"};
  return names;
}

TrainConfig regime_preset(const std::string& name, int epochs) {
  TrainConfig c;
  c.regime = name;
  c.epochs = epochs;
  c.milestones.clear();
  const int m1 = static_cast<int>(0.8 * epochs);
  const int m2 = static_cast<int>(0.9 * epochs);
  if (m1 >= 1 && m1 < epochs) c.milestones.push_back(m1);
  if (m2 > m1 && m2 < epochs) c.milestones.push_back(m2);
  if (name == "learnable_ce") {
    c.classifier = ClassifierKind::Learnable;
    c.loss = TrainLoss::CE;
  } else if (name == "learnable_wce") {
    c.classifier = ClassifierKind::Learnable;
    c.loss = TrainLoss::WeightedCE;
    c.learning_rate = 0.02;
  } else if (name == "etf_ce") {
    c.classifier = ClassifierKind::FixedEtf;
    c.loss = TrainLoss::CE;
  } else if (name == "etf_dr") {
    c.classifier = ClassifierKind::FixedEtf;
    c.loss = TrainLoss::DR;
    c.normalization = FeatureNorm::Sphere;
  } else {
    throw ConfigError("unknown regime '" + name + "'");
  }
  return c;
}

namespace {

NcReport nan_report() {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  NcReport r;
  r.sigma_w_trace = r.cos_ff_avg = r.cos_ff_std = r.cos_fc_avg = r.cos_fc_std = nan;
  r.self_duality = r.duality_gap = r.nc4 = nan;
  return r;
}

NcReport report_or_nan(const Matrix& features, const std::vector<int>& labels, const Matrix& W, int K) {
  try {
    return compute_nc_report(FeatureBatch(features, labels, K), W);
  } catch (const DegenerateError&) {
    return nan_report();
  }
}

int argmax_lowest(const Eigen::Ref<const Vector>& z) {
  int best = 0;
  for (Eigen::Index k = 1; k < z.size(); ++k) {
    if (z[k] > z[best]) best = static_cast<int>(k);
  }
  return best;
}

}  // namespace

std::string TrainLog::to_csv() const {
  std::vector<std::string> header{"epoch", "loss", "bal_acc"};
  for (const char* split : {"train_", "test_"})
    for (const auto& f : NcReport::field_names()) header.push_back(split + f);
  csv::Writer w(header);
  for (const auto& e : epochs) {
    std::vector<std::string> row{std::to_string(e.epoch), csv::format_double(e.loss), csv::format_double(e.bal_acc)};
    for (double v : e.train.values()) row.push_back(csv::format_double(v));
    for (double v : e.test.values()) row.push_back(csv::format_double(v));
    w.add_row(std::move(row));
  }
  return w.str();
}

double TrainLog::final_quarter_panel_std() const {
  if (epochs.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t n = epochs.size();
  const std::size_t start = n - std::max<std::size_t>(1, n / 4);
  double sum = 0.0;
  for (std::size_t i = start; i < n; ++i) sum += 0.5 * (epochs[i].train.cos_ff_std + epochs[i].train.cos_fc_std);
  return sum / static_cast<double>(n - start);
}

Matrix extract_features(const Mlp& model, const Matrix& inputs, const TrainConfig& config) {
  Matrix H = model.forward(inputs);
  if (config.normalization == FeatureNorm::Sphere) H = normalize_columns(H, config.e_h);
  return H;
}

EvalResult evaluate(const Mlp& model, const Dataset& data, const Matrix& classifier, const TrainConfig& config) {
  const int K = data.num_classes;
  if (classifier.cols() != K || classifier.rows() != model.output_dim()) {
    throw DimensionError("evaluate: classifier shape does not match the model and dataset");
  }
  const Matrix Z = classifier.transpose() * extract_features(model, data.inputs, config);
  std::vector<int> hits(static_cast<std::size_t>(K), 0);
  const std::vector<int> counts = data.class_counts();
  for (int i = 0; i < data.size(); ++i) {
    const int y = data.labels[static_cast<std::size_t>(i)];
    if (argmax_lowest(Z.col(i)) == y) ++hits[static_cast<std::size_t>(y)];
  }
  EvalResult out;
  for (int k = 0; k < K; ++k) {
    const int n = counts[static_cast<std::size_t>(k)];
    if (n == 0) throw DomainError("evaluate: class " + std::to_string(k) + " has no samples");
    out.per_class.push_back(static_cast<double>(hits[static_cast<std::size_t>(k)]) / n);
  }
  out.balanced = std::accumulate(out.per_class.begin(), out.per_class.end(), 0.0) / K;
  return out;
}

LossGrad batch_loss(const Matrix& raw, const std::vector<int>& labels, const Matrix& W, const Vector& weights,
                    const TrainConfig& config) {
  const Eigen::Index B = raw.cols();
  if (static_cast<Eigen::Index>(labels.size()) != B || weights.size() != B) {
    throw DimensionError("batch_loss: labels and weights must match the batch");
  }
  if (W.rows() != raw.rows()) throw DimensionError("batch_loss: classifier rows differ from feature dim");
  const bool sphere = config.normalization == FeatureNorm::Sphere;
  const Matrix H = sphere ? normalize_columns(raw, config.e_h) : raw;
  LossGrad out;
  Matrix gH(H.rows(), B);
  out.grad_classifier = Matrix::Zero(W.rows(), W.cols());
  if (config.loss == TrainLoss::DR) {
    for (Eigen::Index i = 0; i < B; ++i) {
      const auto w = W.col(labels[static_cast<std::size_t>(i)]);
      out.loss += weights[i] * dr_loss_column(H.col(i), w, config.e_h);
      gH.col(i) = weights[i] / B * dr_grad_column(H.col(i), w, config.e_h);
    }
  } else {
    Matrix Z = W.transpose() * H;
    for (Eigen::Index i = 0; i < B; ++i) {
      const int c = labels[static_cast<std::size_t>(i)];
      auto z = Z.col(i);
      const double m = z.maxCoeff();
      z.array() = (z.array() - m).exp();
      const double s = z.sum();
      out.loss += weights[i] * (std::log(s) - std::log(z[c]));
      z /= s;
      z[c] -= 1.0;
      z *= weights[i] / B;
    }
    gH = W * Z;
    out.grad_classifier = H * Z.transpose();
  }
  out.loss /= B;
  if (config.normalization == FeatureNorm::LengthReg) {
    for (Eigen::Index i = 0; i < B; ++i) {
      const double r = raw.col(i).squaredNorm() - config.e_h;
      out.loss += config.length_reg * r * r / B;
      gH.col(i) += (4.0 * config.length_reg * r / B) * raw.col(i);
    }
  }
  out.grad_features = sphere ? normalize_columns_backward(raw, gH, config.e_h) : gH;
  return out;
}

TrainResult train(const DatasetPair& data, const TrainConfig& config) {
  config.validate();
  const Dataset& tr = data.train;
  const int K = tr.num_classes;
  const int N = tr.size();
  if (N == 0) throw DomainError("train: empty training set");
  const std::vector<int> counts = tr.class_counts();

  TrainResult res;
  std::vector<int> widths{tr.input_dim()};
  widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
  widths.push_back(config.feature_dim);
  res.model = Mlp(widths, config.rectify_output);
  res.model.init(derive_seed(config.seed, "model"));

  const bool learnable = config.classifier == ClassifierKind::Learnable;
  if (learnable) {
    std::mt19937_64 rng(derive_seed(config.seed, "classifier"));
    std::normal_distribution<double> normal;
    res.classifier.resize(config.feature_dim, K);
    const double s = 1.0 / std::sqrt(static_cast<double>(config.feature_dim));
    for (Eigen::Index c = 0; c < K; ++c)
      for (Eigen::Index r = 0; r < config.feature_dim; ++r) res.classifier(r, c) = s * normal(rng);
  } else {
    const EtfFrame frame = generate_etf(config.feature_dim, K, derive_seed(config.seed, "etf"));
    const bool per_class = config.loss == TrainLoss::DR && config.class_weighted_lengths;
    res.classifier = per_class ? scale_classifier(frame, class_weights(counts, N, K)).scaled_columns
                               : scale_classifier_uniform(frame, config.e_w).scaled_columns;
  }
  res.initial_classifier = res.classifier;

  Vector class_w = Vector::Ones(K);
  if (config.loss == TrainLoss::WeightedCE) class_w = class_weights(counts, N, K);

  MlpGradients velocity = res.model.zero_gradients();
  Matrix w_velocity = Matrix::Zero(res.classifier.rows(), res.classifier.cols());
  std::vector<int> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, "shuffle"));

  for (int epoch = 0; epoch < config.epochs; ++epoch) try {
    double lr = config.learning_rate;
    for (int m : config.milestones) {
      if (epoch >= m) lr *= config.decay;
    }
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (int start = 0; start < N; start += config.batch_size) {
      const int B = std::min(config.batch_size, N - start);
      Matrix X(tr.input_dim(), B);
      std::vector<int> y(static_cast<std::size_t>(B));
      Vector sw(B);
      for (int j = 0; j < B; ++j) {
        const int idx = order[static_cast<std::size_t>(start + j)];
        X.col(j) = tr.inputs.col(idx);
        y[static_cast<std::size_t>(j)] = tr.labels[static_cast<std::size_t>(idx)];
        sw[j] = class_w[y[static_cast<std::size_t>(j)]];
      }
      ForwardCache cache;
      const Matrix raw = res.model.forward(X, &cache);
      const LossGrad lg = batch_loss(raw, y, res.classifier, sw, config);
      if (!std::isfinite(lg.loss)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch), epoch);
      }
      epoch_loss += lg.loss * B / N;

      MlpGradients g = res.model.backward(lg.grad_features, cache);
      for (int l = 0; l < res.model.num_layers(); ++l) {
        const auto& L = res.model.layer(l);
        g.weight[static_cast<std::size_t>(l)] += config.weight_decay * L.weight;
        g.bias[static_cast<std::size_t>(l)] += config.weight_decay * L.bias;
      }
      velocity.scale(config.momentum);
      velocity.add(g);
      res.model.apply(velocity, -lr);
      if (learnable) {
        w_velocity = config.momentum * w_velocity + lg.grad_classifier + config.weight_decay * res.classifier;
        res.classifier -= lr * w_velocity;
      }
    }
    if (!res.model.finite() || !res.classifier.allFinite()) {
      throw NumericError("train: parameters diverged at epoch " + std::to_string(epoch), epoch);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = epoch_loss;
    rec.learning_rate = lr;
    rec.train = report_or_nan(extract_features(res.model, tr.inputs, config), tr.labels, res.classifier, K);
    rec.test = report_or_nan(extract_features(res.model, data.test.inputs, config), data.test.labels,
                             res.classifier, K);
    rec.bal_acc = evaluate(res.model, data.test, res.classifier, config).balanced;
    res.log.epochs.push_back(rec);
  } catch (const NumericError& e) {
    // Lower-level failures (non-finite logits, ...) do not know the epoch.
    if (e.step() >= 0) throw;
    throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")", epoch);
  }
  return res;
}

}  // namespace etfc
