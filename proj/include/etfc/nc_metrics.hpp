#pragma once

#include <string>
#include <vector>

#include "etfc/types.hpp"

namespace etfc {

struct ClassMeans {
  Matrix class_means;  // d x K, column k = h_k
  Vector global_mean;  // mean over all samples, not over class means
};

/// Throws DomainError naming the first empty class.
ClassMeans class_and_global_means(const FeatureBatch& batch);

struct Variability {
  Matrix sigma_w;
  double trace = 0.0;
};

/// Sample-weighted average outer product of deviations from the class means.
Variability within_class_variability(const FeatureBatch& batch);

struct MeanStd {
  double avg = 0.0;
  double std = 0.0;  // population std
};

struct CosinePanels {
  MeanStd feat_feat;  // cos(h_c - h_G, h_k - h_G), ordered pairs c != k
  MeanStd feat_clf;   // cos(h_c - h_G, w_k), ordered pairs c != k
};

CosinePanels cosine_panels(const FeatureBatch& batch, const Matrix& W);

/// Mean over c of cos(h_c - h_G, w_c).
double self_duality(const FeatureBatch& batch, const Matrix& W);

enum class GapNormalization {
  UnitFrobenius,   // W / |W|_F and Hbar / |Hbar|_F; result lies in [0, 4]
  SquaredFrobenius  // W / |W|_F^2 and Hbar / |Hbar|_F^2, kept for comparison
};

/// |W~ - H~|_F^2 where Hbar = [h_c - h_G].
double duality_gap(const FeatureBatch& batch, const Matrix& W,
                   GapNormalization norm = GapNormalization::UnitFrobenius);

/// Fraction of samples whose argmax logit equals the nearest class mean
/// (columns of `means`). Ties go to the lowest class index on both sides.
double nc4_agreement(const FeatureBatch& batch, const Matrix& W, const Matrix& means);

struct NcReport {
  double sigma_w_trace = 0.0;
  double cos_ff_avg = 0.0;
  double cos_ff_std = 0.0;
  double cos_fc_avg = 0.0;
  double cos_fc_std = 0.0;
  double self_duality = 0.0;
  double duality_gap = 0.0;
  double nc4 = 0.0;

  static const std::vector<std::string>& field_names();
  std::vector<double> values() const;
  std::string to_json() const;
};

/// Full report with class means recomputed from the batch itself.
NcReport compute_nc_report(const FeatureBatch& batch, const Matrix& W,
                           GapNormalization norm = GapNormalization::UnitFrobenius);

}  // namespace etfc
