#include "etfc/peeled.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "etfc/error.hpp"
#include "etfc/loss.hpp"

namespace etfc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<int> labels_from_counts(const std::vector<int>& counts) {
  std::vector<int> labels;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] < 1) throw DomainError("class " + std::to_string(k) + " needs at least one sample");
    labels.insert(labels.end(), static_cast<std::size_t>(counts[k]), static_cast<int>(k));
  }
  return labels;
}

void project_columns(Matrix& X, double e) {
  const double r = std::sqrt(e);
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    const double n2 = X.col(c).squaredNorm();
    if (n2 > e) X.col(c) *= r / std::sqrt(n2);
  }
}

/// Column-wise softmax of W^T H minus the one-hot labels.
Matrix ce_residual(const Matrix& W, const Matrix& H, const std::vector<int>& labels) {
  Matrix Z = W.transpose() * H;
  for (Eigen::Index i = 0; i < Z.cols(); ++i) {
    auto z = Z.col(i);
    z.array() = (z.array() - z.maxCoeff()).exp();
    z /= z.sum();
    z[labels[static_cast<std::size_t>(i)]] -= 1.0;
  }
  return Z;
}

/// Per-sample feature gradients (d x N) and, when wanted, the 1/N mean-loss
/// gradient with respect to the classifier.
void gradients(const PeeledProblem& p, LossKind loss, const Matrix& H, const Matrix& W, Matrix& grad_h,
               Matrix* grad_w) {
  const int N = static_cast<int>(H.cols());
  if (loss == LossKind::CE) {
    const Matrix R = ce_residual(W, H, p.labels);
    grad_h = W * R;
    if (grad_w) *grad_w = H * R.transpose() / static_cast<double>(N);
    return;
  }
  grad_h.resize(H.rows(), N);
  for (int i = 0; i < N; ++i) {
    grad_h.col(i) = dr_grad_column(H.col(i), W.col(p.labels[static_cast<std::size_t>(i)]), p.e_h);
  }
  if (grad_w) grad_w->setZero(W.rows(), W.cols());
}

double loss_of(const PeeledProblem& p, LossKind loss, const Matrix& H, const Matrix& W) {
  const int N = static_cast<int>(H.cols());
  double total = 0.0;
  if (loss == LossKind::CE) {
    const Matrix Z = W.transpose() * H;
    for (int i = 0; i < N; ++i) {
      const auto z = Z.col(i);
      const double m = z.maxCoeff();
      total += m + std::log((z.array() - m).exp().sum()) - z[p.labels[static_cast<std::size_t>(i)]];
    }
  } else {
    for (int i = 0; i < N; ++i) total += dr_loss_column(H.col(i), W.col(p.labels[static_cast<std::size_t>(i)]), p.e_h);
  }
  return total / N;
}

void require_uniform_fixed(const PeeledProblem& p, const char* what) {
  if (!p.fixed) throw UnsupportedError(std::string(what) + ": requires a fixed ETF classifier");
  if (!p.fixed->uniform_lengths()) {
    throw UnsupportedError(std::string(what) + ": the closed-form optimum needs uniform classifier lengths");
  }
}

double gap_of(const PeeledProblem& p, const Matrix& H) {
  const int K = p.num_classes();
  const double scale = std::sqrt(p.e_h * p.e_w);
  const double on = scale;
  const double off = -scale / (K - 1);
  const Matrix Z = p.fixed->scaled_columns.transpose() * H;
  double gap = 0.0;
  for (Eigen::Index i = 0; i < Z.cols(); ++i) {
    const int c = p.labels[static_cast<std::size_t>(i)];
    for (int k = 0; k < K; ++k) gap = std::max(gap, std::abs(Z(k, i) - (k == c ? on : off)));
  }
  return gap;
}

std::vector<double> class_distances(const PeeledProblem& p, const Matrix& H, const Matrix& optimum) {
  std::vector<double> sum(static_cast<std::size_t>(p.num_classes()), 0.0);
  for (Eigen::Index i = 0; i < H.cols(); ++i) {
    const int c = p.labels[static_cast<std::size_t>(i)];
    sum[static_cast<std::size_t>(c)] += (H.col(i) - optimum.col(c)).norm();
  }
  for (std::size_t k = 0; k < sum.size(); ++k) sum[k] /= p.class_counts[k];
  return sum;
}

}  // namespace

PeeledProblem make_dlpm_problem(const FixedClassifier& classifier, const std::vector<int>& counts, double e_h) {
  if (static_cast<int>(counts.size()) != classifier.num_classes()) {
    throw DimensionError("make_dlpm_problem: " + std::to_string(counts.size()) + " counts for " +
                         std::to_string(classifier.num_classes()) + " classes");
  }
  if (!(e_h > 0.0)) throw DomainError("make_dlpm_problem: E_H must be positive");
  PeeledProblem p;
  p.labels = labels_from_counts(counts);
  p.class_counts = counts;
  p.classifier = classifier.scaled_columns;
  p.fixed = classifier;
  p.e_h = e_h;
  p.e_w = classifier.energy();
  p.features = Matrix::Zero(classifier.dim(), p.total());
  return p;
}

PeeledProblem make_lpm_problem(int d, const std::vector<int>& counts, double e_h, double e_w, std::uint64_t seed) {
  if (d < 1 || counts.size() < 2) throw DimensionError("make_lpm_problem: need d >= 1 and K >= 2");
  if (!(e_h > 0.0) || !(e_w > 0.0)) throw DomainError("make_lpm_problem: E_H and E_W must be positive");
  PeeledProblem p;
  p.labels = labels_from_counts(counts);
  p.class_counts = counts;
  p.e_h = e_h;
  p.e_w = e_w;
  const int K = static_cast<int>(counts.size());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  p.classifier.resize(d, K);
  for (int k = 0; k < K; ++k) {
    Vector w(d);
    do {
      for (int r = 0; r < d; ++r) w[r] = normal(rng);
    } while (w.norm() == 0.0);
    p.classifier.col(k) = w * (std::sqrt(e_w) / w.norm());
  }
  p.features = Matrix::Zero(d, p.total());
  return p;
}

Vector project_ball(const Vector& v, double e) {
  if (!(e > 0.0)) throw DomainError("project_ball: radius^2 must be positive");
  const double n2 = v.squaredNorm();
  if (n2 <= e) return v;
  return v * (std::sqrt(e) / std::sqrt(n2));
}

PeeledProblem init_features(const PeeledProblem& problem, std::uint64_t seed, bool theorem_regime) {
  PeeledProblem p = problem;
  const int d = p.dim();
  const double r = std::sqrt(p.e_h);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector h(d);
  for (int i = 0; i < p.total(); ++i) {
    const auto w = p.classifier.col(p.labels[static_cast<std::size_t>(i)]);
    while (true) {
      for (int j = 0; j < d; ++j) h[j] = normal(rng);
      const double n = h.norm();
      if (n == 0.0) continue;
      h *= r / n;
      if (!theorem_regime || h.dot(w) >= 0.0) break;
    }
    p.features.col(i) = h;
  }
  return p;
}

Matrix analytic_optimum(const FixedClassifier& classifier, double e_h) {
  if (!classifier.uniform_lengths()) {
    throw UnsupportedError("analytic_optimum: the closed-form optimum needs uniform classifier lengths");
  }
  if (!(e_h > 0.0)) throw DomainError("analytic_optimum: E_H must be positive");
  return std::sqrt(e_h / classifier.energy()) * classifier.scaled_columns;
}

PeeledProblem place_at_optimum(const PeeledProblem& problem) {
  require_uniform_fixed(problem, "place_at_optimum");
  PeeledProblem p = problem;
  const Matrix opt = analytic_optimum(*p.fixed, p.e_h);
  for (int i = 0; i < p.total(); ++i) p.features.col(i) = opt.col(p.labels[static_cast<std::size_t>(i)]);
  return p;
}

double optimality_gap(const PeeledProblem& problem) {
  require_uniform_fixed(problem, "optimality_gap");
  return gap_of(problem, problem.features);
}

double mean_loss(const PeeledProblem& problem, LossKind loss) {
  if (loss == LossKind::DR && !problem.fixed) throw UnsupportedError("DR loss needs a fixed ETF classifier");
  return loss_of(problem, loss, problem.features, problem.classifier);
}

Trajectory optimize(PeeledProblem problem, LossKind loss, const OptimizerConfig& config) {
  if (!(config.step_size > 0.0)) throw DomainError("optimize: step_size must be positive");
  if (!(config.stop_tol > 0.0)) throw DomainError("optimize: stop_tol must be positive");
  if (config.max_steps < 0) throw DomainError("optimize: max_steps must be non-negative");
  if (loss == LossKind::DR && !problem.fixed) throw UnsupportedError("DR loss needs a fixed ETF classifier");

  const bool learnable = !problem.fixed;
  const bool has_oracle = problem.fixed && problem.fixed->uniform_lengths();
  const Matrix optimum = has_oracle ? analytic_optimum(*problem.fixed, problem.e_h) : Matrix();
  const double gamma = config.step_size;
  const int N = problem.total();

  Trajectory traj;
  Matrix grad_h;
  Matrix grad_w;
  for (int step = 0;; ++step) {
    Matrix& H = problem.features;
    Matrix& W = problem.classifier;
    gradients(problem, loss, H, W, grad_h, learnable ? &grad_w : nullptr);
    Matrix next_h = H - gamma * grad_h;
    project_columns(next_h, problem.e_h);
    Matrix next_w;
    double moved = (H - next_h).squaredNorm() / N;
    if (learnable) {
      next_w = W - gamma * grad_w;
      project_columns(next_w, problem.e_w);
      moved += (W - next_w).squaredNorm();
    }

    StepRecord rec;
    rec.step = step;
    rec.loss = loss_of(problem, loss, H, W);
    rec.grad_norm = std::sqrt(moved) / gamma;
    rec.gap = has_oracle ? gap_of(problem, H) : kNaN;
    if (has_oracle) rec.class_distance = class_distances(problem, H, optimum);
    if (!std::isfinite(rec.loss)) throw NumericError("optimize: non-finite loss at step " + std::to_string(step), step);
    traj.records.push_back(std::move(rec));

    const auto& last = traj.records.back();
    const double criterion = learnable ? last.grad_norm : (has_oracle ? last.gap : last.grad_norm);
    if (criterion < config.stop_tol) {
      traj.converged = true;
      break;
    }
    if (step == config.max_steps) break;

    if (config.mode == UpdateMode::FullBatch) {
      H = std::move(next_h);
      if (learnable) W = std::move(next_w);
    } else {
      // One cyclic pass: samples in class-major order, each followed by its own
      // classifier update when the classifier is learnable.
      for (int i = 0; i < N; ++i) {
        const int c = problem.labels[static_cast<std::size_t>(i)];
        Vector h = H.col(i);
        Vector g;
        if (loss == LossKind::CE) {
          Vector p = softmax_probs(h, W);
          p[c] -= 1.0;
          g = W * p;
          if (learnable) {
            Matrix gw = h * p.transpose() / static_cast<double>(N);
            W -= gamma * gw;
            project_columns(W, problem.e_w);
          }
        } else {
          g = dr_grad_column(h, W.col(c), problem.e_h);
        }
        H.col(i) = project_ball(h - gamma * g, problem.e_h);
      }
    }
    if (!H.allFinite() || !W.allFinite()) {
      throw NumericError("optimize: numeric divergence at step " + std::to_string(step + 1), step + 1);
    }
  }
  traj.final_state = std::move(problem);
  return traj;
}

ProbeResult minority_collapse_probe(const Matrix& W, const std::vector<int>& minor_classes) {
  if (minor_classes.size() < 2) throw DomainError("minority_collapse_probe: need at least two classes");
  for (int k : minor_classes) {
    if (k < 0 || k >= W.cols()) throw DimensionError("minority_collapse_probe: class index out of range");
    if (W.col(k).norm() == 0.0) throw DegenerateError("minority_collapse_probe: zero-norm column " + std::to_string(k));
  }
  ProbeResult out;
  out.min_cosine = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (std::size_t a = 0; a < minor_classes.size(); ++a) {
    for (std::size_t b = a + 1; b < minor_classes.size(); ++b) {
      const double c = cosine(W.col(minor_classes[a]), W.col(minor_classes[b]));
      out.pairs.push_back({minor_classes[a], minor_classes[b], c});
      out.min_cosine = std::min(out.min_cosine, c);
      sum += c;
    }
  }
  out.mean_cosine = sum / static_cast<double>(out.pairs.size());
  return out;
}

ProbeResult feature_mean_probe(const PeeledProblem& problem, const std::vector<int>& classes) {
  const int K = problem.num_classes();
  Matrix means = Matrix::Zero(problem.dim(), K);
  for (int i = 0; i < problem.total(); ++i) means.col(problem.labels[static_cast<std::size_t>(i)]) += problem.features.col(i);
  for (int k = 0; k < K; ++k) means.col(k) /= problem.class_counts[static_cast<std::size_t>(k)];
  return minority_collapse_probe(means, classes);
}

}  // namespace etfc
