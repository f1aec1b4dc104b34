// Independent reference computations used by the tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Vec random_vector(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

inline Mat random_matrix(std::mt19937_64& rng, int r, int c, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Mat m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = g(rng);
  return m;
}

/// Central differences of a scalar function of a flat parameter vector.
inline Vec central_diff(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  Vec g(x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = xp[i];
    xp[i] = orig + h;
    const double fp = f(xp);
    xp[i] = orig - h;
    const double fm = f(xp);
    xp[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double rel_error(const Vec& a, const Vec& b) {
  const double denom = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / denom;
}

/// -log softmax_c(W^T h) in long double without max subtraction tricks beyond
/// what keeps exp finite.
inline double ce_naive(const Vec& h, const Mat& W, int c) {
  const Vec z = W.transpose() * h;
  long double m = z.maxCoeff();
  long double s = 0.0L;
  for (Eigen::Index k = 0; k < z.size(); ++k) s += std::exp(static_cast<long double>(z[k]) - m);
  return static_cast<double>(std::log(s) + m - static_cast<long double>(z[c]));
}

/// Same loss with the logits themselves accumulated in long double. Finite
/// differences of a saturated softmax need this: lse - z_c cancels to well
/// below the rounding error of a double logit.
inline double ce_extended(const Vec& h, const Mat& W, int c) {
  std::vector<long double> z(static_cast<std::size_t>(W.cols()), 0.0L);
  long double m = -INFINITY;
  for (Eigen::Index k = 0; k < W.cols(); ++k) {
    for (Eigen::Index j = 0; j < h.size(); ++j) z[std::size_t(k)] += static_cast<long double>(W(j, k)) * h[j];
    m = std::max(m, z[std::size_t(k)]);
  }
  long double s = 0.0L;
  for (long double v : z) s += std::exp(v - m);
  return static_cast<double>(std::log(s) + m - z[std::size_t(c)]);
}

inline double dr_naive(const Vec& h, const Vec& w, double e_h) {
  const double t = w.norm() * std::sqrt(e_h);
  const double r = w.dot(h) - t;
  return r * r / (2.0 * t);
}

/// Recount of argmax-logit vs nearest-mean agreement, comparing every pair of
/// classes explicitly (lowest index wins ties).
inline double nc4_bruteforce(const Mat& H, const std::vector<int>& labels, const Mat& W, const Mat& means) {
  (void)labels;
  const int K = static_cast<int>(W.cols());
  int agree = 0;
  for (Eigen::Index i = 0; i < H.cols(); ++i) {
    int a = -1, b = -1;
    for (int k = 0; k < K && a < 0; ++k) {
      bool best = true;
      for (int j = 0; j < K; ++j) {
        const double zk = W.col(k).dot(H.col(i)), zj = W.col(j).dot(H.col(i));
        if (zj > zk || (zj == zk && j < k)) best = false;
      }
      if (best) a = k;
    }
    for (int k = 0; k < K && b < 0; ++k) {
      bool best = true;
      for (int j = 0; j < K; ++j) {
        const double dk = (H.col(i) - means.col(k)).squaredNorm(), dj = (H.col(i) - means.col(j)).squaredNorm();
        if (dj < dk || (dj == dk && j < k)) best = false;
      }
      if (best) b = k;
    }
    if (a == b) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(H.cols());
}

}  // namespace oracle
