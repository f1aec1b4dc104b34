#include "etfc/nc_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <json.hpp>

#include "etfc/error.hpp"

namespace etfc {

namespace {

void check_classifier(const FeatureBatch& batch, const Matrix& W, const char* what) {
  if (W.rows() != batch.dim() || W.cols() != batch.num_classes()) {
    throw DimensionError(std::string(what) + ": classifier is " + std::to_string(W.rows()) + "x" +
                         std::to_string(W.cols()) + ", expected " + std::to_string(batch.dim()) + "x" +
                         std::to_string(batch.num_classes()));
  }
}

double safe_cos(const Vector& a, const Vector& b, const char* what, int c) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    throw DegenerateError(std::string(what) + ": zero-norm vector for class " + std::to_string(c));
  }
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  if (xs.empty()) return out;
  for (double x : xs) out.avg += x;
  out.avg /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - out.avg) * (x - out.avg);
  out.std = std::sqrt(var / static_cast<double>(xs.size()));
  return out;
}

Matrix centered_means(const FeatureBatch& batch) {
  const ClassMeans m = class_and_global_means(batch);
  return m.class_means.colwise() - m.global_mean;
}

}  // namespace

ClassMeans class_and_global_means(const FeatureBatch& batch) {
  const int K = batch.num_classes();
  const std::vector<int> counts = batch.class_counts();
  for (int k = 0; k < K; ++k) {
    if (counts[static_cast<std::size_t>(k)] == 0) {
      throw DomainError("class_and_global_means: class " + std::to_string(k) + " has no samples");
    }
  }
  // Sums are taken relative to a reference sample so that a class whose
  // samples coincide has a mean equal to them bit for bit.
  const auto& order = batch.class_order();
  Matrix ref(batch.dim(), K);
  for (auto it = order.rbegin(); it != order.rend(); ++it) ref.col(batch.label(*it)) = batch.feature(*it);
  const Vector gref = batch.feature(order.front());
  Matrix sums = Matrix::Zero(batch.dim(), K);
  Vector gsum = Vector::Zero(batch.dim());
  for (int i : order) {
    sums.col(batch.label(i)) += batch.feature(i) - ref.col(batch.label(i));
    gsum += batch.feature(i) - gref;
  }
  ClassMeans out;
  out.class_means.resize(batch.dim(), K);
  for (int k = 0; k < K; ++k) out.class_means.col(k) = ref.col(k) + sums.col(k) / counts[static_cast<std::size_t>(k)];
  out.global_mean = gref + gsum / batch.size();
  return out;
}

Variability within_class_variability(const FeatureBatch& batch) {
  const ClassMeans m = class_and_global_means(batch);
  Variability out;
  out.sigma_w = Matrix::Zero(batch.dim(), batch.dim());
  for (int i : batch.class_order()) {
    const Vector dev = batch.feature(i) - m.class_means.col(batch.label(i));
    out.sigma_w.noalias() += dev * dev.transpose();
  }
  out.sigma_w /= batch.size();
  out.trace = std::max(0.0, out.sigma_w.trace());
  return out;
}

CosinePanels cosine_panels(const FeatureBatch& batch, const Matrix& W) {
  check_classifier(batch, W, "cosine_panels");
  const Matrix Hbar = centered_means(batch);
  const int K = batch.num_classes();
  std::vector<double> ff, fc;
  ff.reserve(static_cast<std::size_t>(K * (K - 1)));
  fc.reserve(ff.capacity());
  for (int c = 0; c < K; ++c) {
    for (int k = 0; k < K; ++k) {
      if (c == k) continue;
      ff.push_back(safe_cos(Hbar.col(c), Hbar.col(k), "cosine_panels", c));
      fc.push_back(safe_cos(Hbar.col(c), W.col(k), "cosine_panels", c));
    }
  }
  return {mean_std(ff), mean_std(fc)};
}

double self_duality(const FeatureBatch& batch, const Matrix& W) {
  check_classifier(batch, W, "self_duality");
  const Matrix Hbar = centered_means(batch);
  double sum = 0.0;
  for (int c = 0; c < batch.num_classes(); ++c) sum += safe_cos(Hbar.col(c), W.col(c), "self_duality", c);
  return sum / batch.num_classes();
}

double duality_gap(const FeatureBatch& batch, const Matrix& W, GapNormalization norm) {
  check_classifier(batch, W, "duality_gap");
  const Matrix Hbar = centered_means(batch);
  const double nw = W.norm();
  const double nh = Hbar.norm();
  if (nw == 0.0 || nh == 0.0) throw DegenerateError("duality_gap: zero Frobenius norm");
  const double pw = norm == GapNormalization::UnitFrobenius ? nw : nw * nw;
  const double ph = norm == GapNormalization::UnitFrobenius ? nh : nh * nh;
  return (W / pw - Hbar / ph).squaredNorm();
}

double nc4_agreement(const FeatureBatch& batch, const Matrix& W, const Matrix& means) {
  check_classifier(batch, W, "nc4_agreement");
  if (means.rows() != batch.dim() || means.cols() != batch.num_classes()) {
    throw DimensionError("nc4_agreement: means have the wrong shape");
  }
  if (batch.empty()) return 0.0;
  int agree = 0;
  for (int i = 0; i < batch.size(); ++i) {
    const Vector h = batch.feature(i);
    const Vector logits = W.transpose() * h;
    int best_logit = 0;
    int nearest = 0;
    double best_dist = (h - means.col(0)).squaredNorm();
    for (int k = 1; k < batch.num_classes(); ++k) {
      if (logits[k] > logits[best_logit]) best_logit = k;
      const double dist = (h - means.col(k)).squaredNorm();
      if (dist < best_dist) {
        best_dist = dist;
        nearest = k;
      }
    }
    if (best_logit == nearest) ++agree;
  }
  return static_cast<double>(agree) / batch.size();
}

const std::vector<std::string>& NcReport::field_names() {
  static const std::vector<std::string> names{"sigma_w_trace", "cos_ff_avg", "cos_ff_std", "cos_fc_avg",
                                              "cos_fc_std",    "self_duality", "duality_gap", "nc4"};
  return names;
}

std::vector<double> NcReport::values() const {
  return {sigma_w_trace, cos_ff_avg, cos_ff_std, cos_fc_avg, cos_fc_std, self_duality, duality_gap, nc4};
}

std::string NcReport::to_json() const {
  nlohmann::ordered_json j;
  const auto& names = field_names();
  const auto vals = values();
  for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = vals[i];
  return j.dump();
}

NcReport compute_nc_report(const FeatureBatch& batch, const Matrix& W, GapNormalization norm) {
  NcReport r;
  const ClassMeans m = class_and_global_means(batch);
  r.sigma_w_trace = within_class_variability(batch).trace;
  const CosinePanels panels = cosine_panels(batch, W);
  r.cos_ff_avg = panels.feat_feat.avg;
  r.cos_ff_std = panels.feat_feat.std;
  r.cos_fc_avg = panels.feat_clf.avg;
  r.cos_fc_std = panels.feat_clf.std;
  r.self_duality = self_duality(batch, W);
  r.duality_gap = duality_gap(batch, W, norm);
  r.nc4 = nc4_agreement(batch, W, m.class_means);
  return r;
}

}  // namespace etfc
