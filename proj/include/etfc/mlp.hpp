#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "etfc/types.hpp"

namespace etfc {

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;
};

/// Activations saved by a forward pass. Tied to the parameter version it was
/// produced under; backward rejects it once the parameters have changed.
struct ForwardCache {
  std::uint64_t version = 0;
  std::vector<Matrix> inputs;  // input to each layer, one column per sample
  std::vector<Matrix> pre;     // pre-activation of each layer
};

struct MlpGradients {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;

  void scale(double s);
  void add(const MlpGradients& other, double s = 1.0);
};

/// Fully connected net with rectified hidden layers. The last layer is
/// affine unless rectify_output is set.
class Mlp {
 public:
  Mlp() = default;
  /// widths = {d_in, hidden..., d}. Parameters start at zero.
  explicit Mlp(std::vector<int> widths, bool rectify_output = false);

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void init(std::uint64_t seed);

  int input_dim() const noexcept { return widths_.empty() ? 0 : widths_.front(); }
  int output_dim() const noexcept { return widths_.empty() ? 0 : widths_.back(); }
  int num_layers() const noexcept { return static_cast<int>(layers_.size()); }
  const std::vector<int>& widths() const noexcept { return widths_; }
  bool rectify_output() const noexcept { return rectify_output_; }
  std::uint64_t version() const noexcept { return version_; }

  const DenseLayer& layer(int i) const { return layers_.at(static_cast<std::size_t>(i)); }
  /// Mutable access invalidates outstanding caches.
  DenseLayer& mutable_layer(int i);

  /// X is d_in x B. Fills cache when given.
  Matrix forward(const Matrix& X, ForwardCache* cache = nullptr) const;
  Vector forward(const Vector& x) const;

  /// grad_out is d x B (gradient of the loss w.r.t. each output column).
  /// Throws Error(CheckFailed) when the cache is stale or malformed.
  MlpGradients backward(const Matrix& grad_out, const ForwardCache& cache) const;

  MlpGradients zero_gradients() const;
  /// params += s * step, then bumps the version.
  void apply(const MlpGradients& step, double s);
  bool finite() const;

  std::string to_json() const;
  static Mlp from_json(const std::string& text);

 private:
  std::vector<int> widths_;
  std::vector<DenseLayer> layers_;
  bool rectify_output_ = false;
  std::uint64_t version_ = 1;
};

/// h sqrt(e_h) / |h|. Throws DomainError when |h| <= 1e-12.
Vector feature_normalize(const Vector& h, double e_h);

/// Jacobian-vector product of feature_normalize at h applied to g:
/// sqrt(e_h)/|h| (g - u u^T g) with u = h/|h|.
Vector feature_normalize_backward(const Vector& h, const Vector& g, double e_h);

/// Column-wise versions of the above.
Matrix normalize_columns(const Matrix& H, double e_h);
Matrix normalize_columns_backward(const Matrix& H, const Matrix& G, double e_h);

/// sqrt(E_{w_k}) = N / (K n_k). Throws DomainError for a non-positive count.
Vector class_weights(const std::vector<int>& counts, int N, int K);

}  // namespace etfc
