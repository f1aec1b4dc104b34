#include "etfc/mlp.hpp"

#include <cmath>
#include <random>

#include <json.hpp>

#include "etfc/error.hpp"

namespace etfc {

namespace {

constexpr double kNormEps = 1e-12;

Matrix relu(const Matrix& Z) { return Z.cwiseMax(0.0); }

}  // namespace

void MlpGradients::scale(double s) {
  for (auto& w : weight) w *= s;
  for (auto& b : bias) b *= s;
}

void MlpGradients::add(const MlpGradients& other, double s) {
  if (other.weight.size() != weight.size()) throw DimensionError("MlpGradients::add: layer count mismatch");
  for (std::size_t i = 0; i < weight.size(); ++i) {
    weight[i] += s * other.weight[i];
    bias[i] += s * other.bias[i];
  }
}

Mlp::Mlp(std::vector<int> widths, bool rectify_output) : widths_(std::move(widths)), rectify_output_(rectify_output) {
  if (widths_.size() < 2) throw DimensionError("Mlp: need at least an input and an output width");
  for (int w : widths_) {
    if (w < 1) throw DimensionError("Mlp: layer widths must be positive");
  }
  for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
    layers_.push_back({Matrix::Zero(widths_[i + 1], widths_[i]), Vector::Zero(widths_[i + 1])});
  }
}

void Mlp::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& L : layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(L.weight.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index c = 0; c < L.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < L.weight.rows(); ++r) L.weight(r, c) = u(rng);
    for (Eigen::Index r = 0; r < L.bias.size(); ++r) L.bias[r] = u(rng);
  }
  ++version_;
}

DenseLayer& Mlp::mutable_layer(int i) {
  ++version_;
  return layers_.at(static_cast<std::size_t>(i));
}

Matrix Mlp::forward(const Matrix& X, ForwardCache* cache) const {
  if (X.rows() != input_dim()) {
    throw DimensionError("Mlp::forward: input has " + std::to_string(X.rows()) + " rows, expected " +
                         std::to_string(input_dim()));
  }
  if (cache) {
    cache->version = version_;
    cache->inputs.clear();
    cache->pre.clear();
  }
  Matrix A = X;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Matrix Z = layers_[i].weight * A;
    Z.colwise() += layers_[i].bias;
    const bool last = i + 1 == layers_.size();
    Matrix next = (!last || rectify_output_) ? relu(Z) : Z;
    if (cache) {
      cache->inputs.push_back(std::move(A));
      cache->pre.push_back(std::move(Z));
    }
    A = std::move(next);
  }
  return A;
}

Vector Mlp::forward(const Vector& x) const { return forward(Matrix(x)).col(0); }

MlpGradients Mlp::backward(const Matrix& grad_out, const ForwardCache& cache) const {
  if (cache.version != version_) throw Error(ErrorCode::CheckFailed, "Mlp::backward: stale forward cache");
  if (cache.inputs.size() != layers_.size() || cache.pre.size() != layers_.size()) {
    throw Error(ErrorCode::CheckFailed, "Mlp::backward: cache does not match the network");
  }
  if (grad_out.rows() != output_dim() || grad_out.cols() != cache.pre.back().cols()) {
    throw DimensionError("Mlp::backward: gradient shape does not match the forward batch");
  }
  MlpGradients g = zero_gradients();
  Matrix delta = grad_out;
  for (std::size_t j = layers_.size(); j-- > 0;) {
    const bool last = j + 1 == layers_.size();
    if (!last || rectify_output_) delta = delta.cwiseProduct((cache.pre[j].array() > 0.0).cast<double>().matrix());
    g.weight[j] = delta * cache.inputs[j].transpose();
    g.bias[j] = delta.rowwise().sum();
    if (j > 0) delta = layers_[j].weight.transpose() * delta;
  }
  return g;
}

MlpGradients Mlp::zero_gradients() const {
  MlpGradients g;
  for (const auto& L : layers_) {
    g.weight.push_back(Matrix::Zero(L.weight.rows(), L.weight.cols()));
    g.bias.push_back(Vector::Zero(L.bias.size()));
  }
  return g;
}

void Mlp::apply(const MlpGradients& step, double s) {
  if (step.weight.size() != layers_.size()) throw DimensionError("Mlp::apply: layer count mismatch");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].weight += s * step.weight[i];
    layers_[i].bias += s * step.bias[i];
  }
  ++version_;
}

bool Mlp::finite() const {
  for (const auto& L : layers_) {
    if (!L.weight.allFinite() || !L.bias.allFinite()) return false;
  }
  return true;
}

std::string Mlp::to_json() const {
  nlohmann::ordered_json j;
  j["widths"] = widths_;
  j["rectify_output"] = rectify_output_;
  auto layers = nlohmann::ordered_json::array();
  for (const auto& L : layers_) {
    nlohmann::ordered_json l;
    std::vector<double> w;
    for (Eigen::Index r = 0; r < L.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < L.weight.cols(); ++c) w.push_back(L.weight(r, c));
    l["weight"] = w;
    l["bias"] = std::vector<double>(L.bias.data(), L.bias.data() + L.bias.size());
    layers.push_back(l);
  }
  j["layers"] = layers;
  return j.dump();
}

Mlp Mlp::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Mlp m(j.at("widths").get<std::vector<int>>(), j.value("rectify_output", false));
    const auto& layers = j.at("layers");
    if (layers.size() != m.layers_.size()) throw ConfigError("Mlp::from_json: layer count mismatch");
    for (std::size_t i = 0; i < m.layers_.size(); ++i) {
      auto& L = m.layers_[i];
      const auto w = layers[i].at("weight").get<std::vector<double>>();
      const auto b = layers[i].at("bias").get<std::vector<double>>();
      if (w.size() != static_cast<std::size_t>(L.weight.size()) || b.size() != static_cast<std::size_t>(L.bias.size())) {
        throw ConfigError("Mlp::from_json: layer " + std::to_string(i) + " has the wrong size");
      }
      std::size_t at = 0;
      for (Eigen::Index r = 0; r < L.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < L.weight.cols(); ++c) L.weight(r, c) = w[at++];
      for (Eigen::Index r = 0; r < L.bias.size(); ++r) L.bias[r] = b[static_cast<std::size_t>(r)];
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("Mlp::from_json: ") + e.what());
  }
}

Vector feature_normalize(const Vector& h, double e_h) {
  if (!(e_h > 0.0)) throw DomainError("feature_normalize: E_H must be positive");
  const double n = h.norm();
  if (!(n > kNormEps)) throw DomainError("feature_normalize: feature norm below 1e-12");
  return h * (std::sqrt(e_h) / n);
}

Vector feature_normalize_backward(const Vector& h, const Vector& g, double e_h) {
  const double n = h.norm();
  if (!(n > kNormEps)) throw DomainError("feature_normalize_backward: feature norm below 1e-12");
  const Vector u = h / n;
  return (std::sqrt(e_h) / n) * (g - u * u.dot(g));
}

Matrix normalize_columns(const Matrix& H, double e_h) {
  Matrix out(H.rows(), H.cols());
  for (Eigen::Index i = 0; i < H.cols(); ++i) out.col(i) = feature_normalize(H.col(i), e_h);
  return out;
}

Matrix normalize_columns_backward(const Matrix& H, const Matrix& G, double e_h) {
  Matrix out(H.rows(), H.cols());
  for (Eigen::Index i = 0; i < H.cols(); ++i) out.col(i) = feature_normalize_backward(H.col(i), G.col(i), e_h);
  return out;
}

Vector class_weights(const std::vector<int>& counts, int N, int K) {
  if (static_cast<int>(counts.size()) != K) throw DimensionError("class_weights: need one count per class");
  Vector w(K);
  for (int k = 0; k < K; ++k) {
    const int n = counts[static_cast<std::size_t>(k)];
    if (n <= 0) throw DomainError("class_weights: class " + std::to_string(k) + " has no samples");
    w[k] = static_cast<double>(N) / (static_cast<double>(K) * n);
  }
  return w;
}

}  // namespace etfc
