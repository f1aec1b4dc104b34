#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "etfc/etf.hpp"
#include "etfc/types.hpp"

namespace etfc {

enum class ClassifierMode { Fixed, Learnable };
enum class UpdateMode { FullBatch, Cyclic };

/// Layer-peeled instance. With a fixed ETF classifier this is the decoupled
/// model (features only); otherwise the classifier is a second variable block.
///
/// Features are stored d x N with samples grouped by class (class 0 first).
struct PeeledProblem {
  Matrix features;
  std::vector<int> labels;
  std::vector<int> class_counts;
  Matrix classifier;
  std::optional<FixedClassifier> fixed;
  double e_h = 1.0;
  double e_w = 1.0;

  ClassifierMode mode() const noexcept { return fixed ? ClassifierMode::Fixed : ClassifierMode::Learnable; }
  int dim() const noexcept { return static_cast<int>(classifier.rows()); }
  int num_classes() const noexcept { return static_cast<int>(classifier.cols()); }
  int total() const noexcept { return static_cast<int>(labels.size()); }
  FeatureBatch batch() const { return FeatureBatch(features, labels, num_classes()); }
};

/// Decoupled problem around a fixed classifier. Features start at zero; call
/// init_features. E_W is taken from the classifier (lengths[0]^2).
PeeledProblem make_dlpm_problem(const FixedClassifier& classifier, const std::vector<int>& counts, double e_h);

/// Problem with a learnable classifier whose columns start as Gaussian
/// directions of length sqrt(e_w).
PeeledProblem make_lpm_problem(int d, const std::vector<int>& counts, double e_h, double e_w, std::uint64_t seed);

/// Euclidean projection onto {x : |x|^2 <= e}.
Vector project_ball(const Vector& v, double e);

/// Samples every feature uniformly on the sphere of radius sqrt(E_H). With
/// theorem_regime set, resamples until cos(h, w_label) >= 0.
PeeledProblem init_features(const PeeledProblem& problem, std::uint64_t seed, bool theorem_regime = false);

/// Column k is the optimal feature sqrt(E_H/E_W) w_k for class k.
/// Throws UnsupportedError for non-uniform lengths.
Matrix analytic_optimum(const FixedClassifier& classifier, double e_h);

/// Copy of a decoupled problem with every feature placed at its class optimum.
PeeledProblem place_at_optimum(const PeeledProblem& problem);

/// max |h_{k,i}^T w_k' - sqrt(E_H E_W) (K/(K-1) delta_kk' - 1/(K-1))|.
/// Throws UnsupportedError for a learnable or non-uniform classifier.
double optimality_gap(const PeeledProblem& problem);

/// Mean (1/N) loss over all samples.
double mean_loss(const PeeledProblem& problem, LossKind loss);

struct OptimizerConfig {
  double step_size = 0.5;
  int max_steps = 5000;
  double stop_tol = 1e-3;
  std::uint64_t seed = 0;
  UpdateMode mode = UpdateMode::FullBatch;
};

struct StepRecord {
  int step = 0;
  double loss = 0.0;
  double gap = 0.0;        // NaN for a learnable classifier
  double grad_norm = 0.0;  // RMS projected-gradient norm
  std::vector<double> class_distance;  // mean |h - h*| per class, decoupled only
};

struct Trajectory {
  std::vector<StepRecord> records;
  PeeledProblem final_state;
  bool converged = false;
};

/// Projected gradient descent. Each feature moves along its own sample-loss
/// gradient; a learnable classifier moves along the gradient of the 1/N mean
/// loss. Stops at max_steps, or once the optimality gap (fixed classifier) or
/// projected-gradient norm (learnable) drops below stop_tol.
/// Throws NumericError carrying the step index when an iterate goes non-finite.
Trajectory optimize(PeeledProblem problem, LossKind loss, const OptimizerConfig& config);

struct ProbeResult {
  double min_cosine = 0.0;
  double mean_cosine = 0.0;
  struct Pair {
    int a;
    int b;
    double cosine;
  };
  std::vector<Pair> pairs;
};

/// Pairwise cosines between the listed classifier columns.
/// Throws DomainError for fewer than two indices, DegenerateError for a zero column.
ProbeResult minority_collapse_probe(const Matrix& W, const std::vector<int>& minor_classes);

/// Pairwise cosines of the (uncentered) class means of the problem's features,
/// comparable with minority_collapse_probe on the classifier columns.
ProbeResult feature_mean_probe(const PeeledProblem& problem, const std::vector<int>& classes);

}  // namespace etfc
