#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "etfc/error.hpp"
#include "etfc/etf.hpp"
#include "etfc/loss.hpp"
#include "oracles.hpp"

using namespace etfc;

namespace {

Matrix etf_w(int d, int K, std::uint64_t seed = 1) { return generate_etf(d, K, seed).columns; }

}  // namespace

TEST_CASE("softmax probabilities") {
  const Matrix W = etf_w(4, 5);
  const Vector p = softmax_probs(Vector::Zero(4), W);
  for (int k = 0; k < 5; ++k) CHECK(p[k] == doctest::Approx(0.2).epsilon(1e-12));

  Matrix W3 = Matrix::Zero(1, 3);
  W3(0, 0) = 1000.0;
  const Vector q = softmax_probs(Vector::Ones(1), W3);
  CHECK(std::abs(q[0] - 1.0) < 1e-12);
  CHECK(q.allFinite());

  std::mt19937_64 rng(3);
  const Matrix R = oracle::random_matrix(rng, 6, 4);
  const Vector h = oracle::random_vector(rng, 6);
  CHECK(std::abs(softmax_probs(h, R).sum() - 1.0) < 1e-12);
  // A shift orthogonal to every column difference moves all logits equally.
  Matrix S = R;
  const Vector shift = oracle::random_vector(rng, 6);
  for (int k = 0; k < 4; ++k) S.col(k) = R.col(k) - R.col(k).dot(shift) / shift.squaredNorm() * shift + shift;
  const Vector h2 = h + shift;
  const Vector a = softmax_probs(h2, S);
  const Vector z = S.transpose() * h2;
  Vector b = (z.array() - z.maxCoeff()).exp();
  b /= b.sum();
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);

  Matrix bad = W;
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(softmax_probs(Vector::Ones(4), bad), NumericError);
}

TEST_CASE("cross-entropy loss values") {
  const Matrix W = etf_w(9, 10);
  CHECK(ce_loss({Vector::Zero(9), 3}, W) == doctest::Approx(std::log(10.0)).epsilon(1e-12));

  double prev = std::numeric_limits<double>::infinity();
  for (double t : {0.5, 1.0, 2.0, 5.0, 20.0, 100.0}) {
    const double l = ce_loss({t * W.col(2), 2}, W);
    CHECK(l < prev);
    prev = l;
  }
  CHECK(prev < 1e-40);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix R = oracle::random_matrix(rng, 7, 6, 3.0);
    const Vector h = oracle::random_vector(rng, 7, 3.0);
    const int c = trial % 6;
    CHECK(std::abs(ce_loss({h, c}, R) - oracle::ce_naive(h, R, c)) < 1e-12 * std::max(1.0, oracle::ce_naive(h, R, c)));
  }
}

TEST_CASE("feature gradient of cross-entropy") {
  const int K = 5;
  const Matrix W = etf_w(4, K);
  SUBCASE("uniform logits") {
    const int c = 1;
    Vector expect = -(1.0 - 1.0 / K) * W.col(c);
    for (int k = 0; k < K; ++k)
      if (k != c) expect += W.col(k) / K;
    CHECK((ce_grad_feature({Vector::Zero(4), c}, W) - expect).norm() < 1e-12);
  }
  SUBCASE("finite differences") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix R = oracle::random_matrix(rng, 8, 5);
      const Vector h = oracle::random_vector(rng, 8);
      const int c = trial % 5;
      const Vector fd = oracle::central_diff([&](const Vector& x) { return ce_loss({x, c}, R); }, h, 1e-6);
      CHECK(oracle::rel_error(ce_grad_feature({h, c}, R), fd) < 1e-6);
    }
  }
  SUBCASE("at the optimum the gradient is parallel to the class column") {
    const Vector g = ce_grad_feature({W.col(3), 3}, W);
    CHECK(std::abs(std::abs(cosine(g, W.col(3))) - 1.0) < 1e-12);
  }
}

TEST_CASE("classifier gradient of cross-entropy") {
  std::mt19937_64 rng(13);
  SUBCASE("single sample with uniform logits") {
    const Matrix W = etf_w(3, 3);
    Matrix H = Matrix::Zero(3, 1);
    const FeatureBatch b(H, {0}, 3);
    CHECK(ce_grad_classifier(b, W, 0).norm() < 1e-15);
    // Orthogonal to every column keeps logits equal.
    Matrix W4 = Matrix::Zero(4, 3);
    W4.topRows(3) = W;
    Matrix H4 = Matrix::Zero(4, 1);
    H4(3, 0) = 2.0;
    const FeatureBatch b4(H4, {1}, 3);
    CHECK((ce_grad_classifier(b4, W4, 1) + (1.0 - 1.0 / 3) * H4.col(0)).norm() < 1e-12);
  }
  SUBCASE("finite differences over a column") {
    const int d = 4, K = 3, N = 12;
    const Matrix W = oracle::random_matrix(rng, d, K);
    const Matrix H = oracle::random_matrix(rng, d, N);
    std::vector<int> labels;
    for (int i = 0; i < N; ++i) labels.push_back(i % K);
    const FeatureBatch b(H, labels, K);
    for (int k = 0; k < K; ++k) {
      auto f = [&](const Vector& x) {
        Matrix Wp = W;
        Wp.col(k) = x;
        double s = 0.0;
        for (int i = 0; i < N; ++i) s += ce_loss({H.col(i), labels[static_cast<std::size_t>(i)]}, Wp);
        return s;
      };
      CHECK(oracle::rel_error(ce_grad_classifier(b, W, k), oracle::central_diff(f, W.col(k), 1e-6)) < 1e-6);
    }
  }
  SUBCASE("empty batch") {
    CHECK_THROWS_AS(ce_grad_classifier(FeatureBatch(Matrix(3, 0), {}, 3), etf_w(3, 3), 0), DomainError);
  }
}

TEST_CASE("pull and push reconstruct the negative gradient") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix W = oracle::random_matrix(rng, 6, 4);
    const Vector h = oracle::random_vector(rng, 6);
    const Feature f{h, trial % 4};
    const PullPush pp = decompose_pull_push_feature(f, W);
    const Vector g = ce_grad_feature(f, W);
    CHECK((pp.pull + pp.push + g).norm() <= 1e-12 * std::max(g.norm(), 1e-300));
  }
  const Matrix E = etf_w(5, 6);
  SUBCASE("saturated softmax") {
    const PullPush pp = decompose_pull_push_feature({50.0 * E.col(0), 0}, E);
    CHECK(pp.pull.norm() < 1e-8);
    CHECK(pp.push.norm() < 1e-8);
  }
  SUBCASE("uniform logits push along the class column") {
    const PullPush pp = decompose_pull_push_feature({Vector::Zero(5), 2}, E);
    CHECK((pp.push - E.col(2) / 6.0).norm() < 1e-12);
  }
  SUBCASE("classifier decomposition") {
    const Matrix W = oracle::random_matrix(rng, 5, 3);
    const Matrix H = oracle::random_matrix(rng, 5, 9);
    const FeatureBatch b(H, {0, 1, 2, 0, 1, 2, 0, 1, 2}, 3);
    for (int k = 0; k < 3; ++k) {
      const PullPush pp = decompose_pull_push_classifier(b, W, k);
      const Vector g = ce_grad_classifier(b, W, k);
      CHECK((pp.pull + pp.push + g).norm() <= 1e-12 * g.norm());
    }
    const FeatureBatch only(H.leftCols(3), {1, 1, 1}, 3);
    CHECK(decompose_pull_push_classifier(only, W, 1).push.isZero(0.0));
  }
  SUBCASE("a minor class is dominated by the push term") {
    const int d = 8, K = 4;
    const Matrix W = oracle::random_matrix(rng, d, K, 0.3);
    std::vector<int> labels{3, 3};
    for (int i = 0; i < 200; ++i) labels.push_back(i % 3);
    const Matrix H = oracle::random_matrix(rng, d, static_cast<int>(labels.size()));
    const PullPush pp = decompose_pull_push_classifier(FeatureBatch(H, labels, K), W, 3);
    CHECK(pp.push.norm() > pp.pull.norm());
  }
}

TEST_CASE("dot-regression loss and gradient") {
  const EtfFrame f = generate_etf(6, 4, 2);
  const double e_h = 2.0;
  const FixedClassifier clf = scale_classifier_uniform(f, 3.0);
  const Vector w = clf.scaled_columns.col(1);
  const Vector opt = std::sqrt(e_h / 3.0) * w;
  CHECK(dr_loss(opt, clf, 1, e_h) < 1e-15);
  CHECK(dr_grad(opt, clf, 1, e_h).norm() < 1e-14);

  // Orthogonal point on the sphere.
  Vector u = clf.scaled_columns.col(0) - clf.scaled_columns.col(0).dot(w) / w.squaredNorm() * w;
  u *= std::sqrt(e_h) / u.norm();
  CHECK(dr_loss(u, clf, 1, e_h) == doctest::Approx(std::sqrt(3.0 * e_h) / 2));
  CHECK((dr_grad(u, clf, 1, e_h) + w).norm() < 1e-12);
  CHECK(dr_grad(u, clf, 1, e_h).norm() == doctest::Approx(std::sqrt(3.0)));

  const FixedClassifier unit = scale_classifier_uniform(f, 1.0);
  Vector h = 0.5 * unit.scaled_columns.col(2);
  CHECK(dr_loss(h, unit, 2, 1.0) == doctest::Approx(0.125));

  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = oracle::random_vector(rng, 6);
    const Vector fd = oracle::central_diff([&](const Vector& y) { return dr_loss(y, clf, 3, e_h); }, x, 1e-6);
    CHECK(oracle::rel_error(dr_grad(x, clf, 3, e_h), fd) < 1e-6);
    CHECK(dr_loss(x, clf, 3, e_h) == doctest::Approx(oracle::dr_naive(x, clf.scaled_columns.col(3), e_h)));
  }
  CHECK_THROWS_AS(dr_loss_column(Vector::Ones(3), Vector::Zero(3), 1.0), DegenerateError);
  CHECK_THROWS_AS(dr_loss_column(Vector::Ones(3), Vector::Ones(3), 0.0), DomainError);
  CHECK_THROWS_AS(dr_loss_column(Vector::Ones(3), Vector::Ones(2), 1.0), DimensionError);
}

TEST_CASE("cosine") {
  CHECK(cosine(Vector::Ones(3), 2.0 * Vector::Ones(3)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(cosine(Vector::Zero(3), Vector::Ones(3)), DegenerateError);
}
