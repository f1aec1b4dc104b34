#include "etfc/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "etfc/error.hpp"
#include "etfc/loss.hpp"
#include "etfc/peeled.hpp"
#include "etfc/seed.hpp"

namespace etfc {

double contraction_ratio(const Vector& h_t, const Vector& h_next, const Vector& h_star) {
  const double before = (h_t - h_star).norm();
  if (before < kAtOptimumGuard) throw AtOptimumSignal("contraction_ratio: iterate is at the optimum");
  return (h_next - h_star).squaredNorm() / (before * before);
}

double dr_eta_bound(double cos_angle) {
  if (!(cos_angle >= -1.0 && cos_angle <= 1.0)) {
    throw DomainError("dr_eta_bound: cosine " + std::to_string(cos_angle) + " outside [-1, 1]");
  }
  return (1.0 + cos_angle) / 2.0;
}

double check_offclass_uniformity(const Vector& h, const FixedClassifier& classifier, int c) {
  const Vector p = softmax_probs(h, classifier.scaled_columns);
  const int K = classifier.num_classes();
  const double expected = (1.0 - p[c]) / (K - 1);
  double worst = 0.0;
  for (int k = 0; k < K; ++k) {
    if (k != c) worst = std::max(worst, std::abs(p[k] - expected));
  }
  return worst;
}

double ce_optimal_step(const Vector& h, const FixedClassifier& classifier, int c, double e_h) {
  const int K = classifier.num_classes();
  const Vector p = softmax_probs(h, classifier.scaled_columns);
  const double cos = cosine(h, classifier.scaled_columns.col(c));
  return (K - 1.0) / K * std::sqrt(e_h / classifier.energy()) * (1.0 - cos) / (1.0 - p[c]);
}

Vector regularity_start(const FixedClassifier& classifier, double e_h, double delta, std::uint64_t seed, int trial,
                        int* label_out) {
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(trial)));
  std::uniform_int_distribution<int> pick(0, classifier.num_classes() - 1);
  const int c = pick(rng);
  if (label_out) *label_out = c;
  const Vector h_star = std::sqrt(e_h / classifier.energy()) * classifier.scaled_columns.col(c);
  std::normal_distribution<double> normal;
  Vector u(h_star.size());
  const Vector axis = h_star.normalized();
  do {
    for (Eigen::Index j = 0; j < u.size(); ++j) u[j] = normal(rng);
    u -= u.dot(axis) * axis;
  } while (u.norm() < 1e-8);
  u.normalize();
  Vector h = h_star + delta * u;
  return h * (std::sqrt(e_h) / h.norm());
}

std::vector<RegularityRecord> run_regularity_experiment(const FixedClassifier& classifier,
                                                        const RegularityConfig& config) {
  if (!classifier.uniform_lengths()) {
    throw UnsupportedError("run_regularity_experiment: needs a uniform-length classifier");
  }
  if (!(config.e_h > 0.0)) throw DomainError("run_regularity_experiment: E_H must be positive");
  if (!(config.delta >= 0.0)) throw DomainError("run_regularity_experiment: delta must be non-negative");
  if (!config.adaptive_step && !(config.gamma > 0.0)) {
    throw DomainError("run_regularity_experiment: gamma must be positive");
  }
  if (config.adaptive_step && config.loss != LossKind::CE) {
    throw UnsupportedError("run_regularity_experiment: the adaptive step rule applies to CE only");
  }

  const double e_h = config.e_h;
  const double scale = std::sqrt(e_h / classifier.energy());
  std::vector<RegularityRecord> out;
  out.reserve(static_cast<std::size_t>(std::max(config.trials, 0)));
  for (int t = 0; t < config.trials; ++t) {
    RegularityRecord rec;
    rec.trial = t;
    rec.delta = config.delta;
    rec.loss = config.loss;
    rec.adaptive_step = config.adaptive_step;
    const Vector h = regularity_start(classifier, e_h, config.delta, config.seed, t, &rec.label);
    const auto w = classifier.scaled_columns.col(rec.label);
    const Vector h_star = scale * w;
    rec.cos_before = cosine(h, w);
    rec.bound = dr_eta_bound(rec.cos_before);
    rec.uniformity_deviation = check_offclass_uniformity(h, classifier, rec.label);

    if ((h - h_star).norm() < kAtOptimumGuard) {
      rec.at_optimum = true;
      rec.gamma = config.adaptive_step ? 0.0 : config.gamma;
      rec.ratio = rec.step_ratio = std::numeric_limits<double>::quiet_NaN();
      rec.norm_sq_after = h.squaredNorm();
      rec.cos_after = rec.cos_before;
      out.push_back(rec);
      continue;
    }

    rec.gamma = config.adaptive_step ? ce_optimal_step(h, classifier, rec.label, e_h) : config.gamma;
    const Vector g = config.loss == LossKind::DR ? dr_grad(h, classifier, rec.label, e_h)
                                                 : ce_grad_feature(Feature{h, rec.label}, classifier.scaled_columns);
    const Vector y = h - rec.gamma * g;
    const Vector next = project_ball(y, e_h);
    if (!next.allFinite()) {
      throw NumericError("run_regularity_experiment: divergence at trial " + std::to_string(t), t);
    }
    rec.ratio = contraction_ratio(h, next, h_star);
    rec.step_ratio = contraction_ratio(h, y, h_star);
    rec.norm_sq_after = next.squaredNorm();
    rec.cos_after = cosine(next, w);
    out.push_back(rec);
  }
  return out;
}

RegularitySummary summarize(const std::vector<RegularityRecord>& records, double e_h) {
  RegularitySummary s;
  s.trials = static_cast<int>(records.size());
  s.max_excess = -std::numeric_limits<double>::infinity();
  s.max_step_excess = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  double sum_step = 0.0;
  for (const auto& r : records) {
    if (r.at_optimum) continue;
    ++s.accepted;
    sum += r.ratio;
    sum_step += r.step_ratio;
    s.max_ratio = std::max(s.max_ratio, r.ratio);
    s.max_excess = std::max(s.max_excess, r.ratio - r.bound);
    s.max_step_excess = std::max(s.max_step_excess, r.step_ratio - r.bound);
    if (std::abs(r.norm_sq_after - e_h) > 1e-9) s.sphere_preserved = false;
    if (r.cos_after < 0.0) s.cos_nonnegative = false;
  }
  if (s.accepted) {
    s.mean_ratio = sum / s.accepted;
    s.mean_step_ratio = sum_step / s.accepted;
  } else {
    s.max_excess = s.max_step_excess = 0.0;
  }
  return s;
}

DominanceResult paired_dominance(const std::vector<RegularityRecord>& dr, const std::vector<RegularityRecord>& ce,
                                 double gate, double tol) {
  if (dr.size() != ce.size()) throw DimensionError("paired_dominance: record sets differ in length");
  DominanceResult out;
  if (!ce.empty()) {
    out.gamma = ce.front().gamma;
    out.adaptive_step = ce.front().adaptive_step;
  }
  for (std::size_t i = 0; i < dr.size(); ++i) {
    const auto& a = dr[i];
    const auto& b = ce[i];
    if (a.trial != b.trial || a.label != b.label) throw DomainError("paired_dominance: records are not paired");
    if (a.at_optimum || b.at_optimum || b.uniformity_deviation >= gate) continue;
    ++out.gated;
    if (b.ratio >= a.ratio - tol) ++out.dominated;
    if (b.step_ratio >= a.step_ratio - tol) ++out.step_dominated;
    out.mean_ce += b.ratio;
    out.mean_dr += a.ratio;
    out.mean_ce_step += b.step_ratio;
    out.mean_dr_step += a.step_ratio;
  }
  if (out.gated) {
    out.mean_ce /= out.gated;
    out.mean_dr /= out.gated;
    out.mean_ce_step /= out.gated;
    out.mean_dr_step /= out.gated;
  }
  return out;
}

}  // namespace etfc
