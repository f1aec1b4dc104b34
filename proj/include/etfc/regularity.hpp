#pragma once

#include <cstdint>
#include <vector>

#include "etfc/etf.hpp"
#include "etfc/types.hpp"

namespace etfc {

/// Below this distance to the optimum a contraction ratio is not defined.
inline constexpr double kAtOptimumGuard = 1e-12;

/// One projected step from a point near the optimum h* = sqrt(E_H/E_W) w_c.
struct RegularityRecord {
  int trial = 0;
  int label = 0;
  double delta = 0.0;
  double gamma = 0.0;
  LossKind loss = LossKind::DR;
  bool adaptive_step = false;  // gamma chosen per trial by ce_optimal_step
  double cos_before = 0.0;
  /// |Proj(h - gamma g) - h*|^2 / |h - h*|^2, the realised contraction.
  double ratio = 0.0;
  /// |h - gamma g - h*|^2 / |h - h*|^2, before projection onto the ball.
  double step_ratio = 0.0;
  double bound = 0.0;  // (1 + cos_before) / 2
  double uniformity_deviation = 0.0;
  double norm_sq_after = 0.0;
  double cos_after = 0.0;
  bool at_optimum = false;
};

/// |h_next - h*|^2 / |h_t - h*|^2. Throws AtOptimumSignal when
/// |h_t - h*| < kAtOptimumGuard.
double contraction_ratio(const Vector& h_t, const Vector& h_next, const Vector& h_star);

/// (1 + cos) / 2. Throws DomainError outside [-1, 1].
double dr_eta_bound(double cos_angle);

/// max_{k != c} |p_k(h) - (1 - p_c(h)) / (K - 1)| under the classifier's logits.
double check_offclass_uniformity(const Vector& h, const FixedClassifier& classifier, int c);

/// Per-point CE step size that minimises the unprojected CE distance bound:
/// (K-1)/K sqrt(E_H/E_W) (1 - cos) / (1 - p_c).
double ce_optimal_step(const Vector& h, const FixedClassifier& classifier, int c, double e_h);

struct RegularityConfig {
  LossKind loss = LossKind::DR;
  double gamma = 1.0;
  bool adaptive_step = false;
  double delta = 0.1;
  int trials = 500;
  std::uint64_t seed = 0;
  double e_h = 1.0;
};

/// Start point for a trial: h* + delta u with u a unit tangent direction at
/// h*, rescaled onto the sphere of radius sqrt(E_H). The same (seed, trial)
/// always gives the same start, so runs with different losses or step sizes
/// are paired.
Vector regularity_start(const FixedClassifier& classifier, double e_h, double delta, std::uint64_t seed, int trial,
                        int* label_out);

/// One projected gradient step per trial. Requires a uniform-length
/// classifier. Throws NumericError carrying the trial index on divergence.
std::vector<RegularityRecord> run_regularity_experiment(const FixedClassifier& classifier,
                                                        const RegularityConfig& config);

struct RegularitySummary {
  int trials = 0;
  int accepted = 0;  // not at the optimum
  double max_ratio = 0.0;
  double mean_ratio = 0.0;
  double mean_step_ratio = 0.0;
  double max_excess = 0.0;  // max(ratio - bound)
  double max_step_excess = 0.0;
  bool sphere_preserved = true;    // |h'|^2 = E_H within 1e-9
  bool cos_nonnegative = true;     // cos(h', w_c) >= 0
};

RegularitySummary summarize(const std::vector<RegularityRecord>& records, double e_h);

/// Paired CE-vs-DR comparison on trials whose start passes the off-class
/// uniformity gate. Both record sets must come from the same seed and delta.
struct DominanceResult {
  double gamma = 0.0;
  bool adaptive_step = false;
  int gated = 0;
  int dominated = 0;            // CE ratio >= DR ratio - tol
  int step_dominated = 0;       // same on unprojected step ratios
  double mean_ce = 0.0;
  double mean_dr = 0.0;
  double mean_ce_step = 0.0;
  double mean_dr_step = 0.0;

  double fraction() const noexcept { return gated ? static_cast<double>(dominated) / gated : 0.0; }
  double step_fraction() const noexcept { return gated ? static_cast<double>(step_dominated) / gated : 0.0; }
};

DominanceResult paired_dominance(const std::vector<RegularityRecord>& dr, const std::vector<RegularityRecord>& ce,
                                 double gate = 1e-3, double tol = 1e-9);

}  // namespace etfc
