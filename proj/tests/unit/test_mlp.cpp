#include <doctest.h>

#include <random>

#include "etfc/error.hpp"
#include "etfc/mlp.hpp"
#include "oracles.hpp"

using namespace etfc;

namespace {

// Flattens all parameters layer by layer (weight column-major, then bias).
Vector flatten(const Mlp& m) {
  std::vector<double> v;
  for (int l = 0; l < m.num_layers(); ++l) {
    const DenseLayer& L = m.layer(l);
    v.insert(v.end(), L.weight.data(), L.weight.data() + L.weight.size());
    v.insert(v.end(), L.bias.data(), L.bias.data() + L.bias.size());
  }
  return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Vector flatten(const MlpGradients& g) {
  std::vector<double> v;
  for (std::size_t l = 0; l < g.weight.size(); ++l) {
    v.insert(v.end(), g.weight[l].data(), g.weight[l].data() + g.weight[l].size());
    v.insert(v.end(), g.bias[l].data(), g.bias[l].data() + g.bias[l].size());
  }
  return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void unflatten(Mlp& m, const Vector& x) {
  Eigen::Index o = 0;
  for (int l = 0; l < m.num_layers(); ++l) {
    DenseLayer& L = m.mutable_layer(l);
    for (Eigen::Index i = 0; i < L.weight.size(); ++i) L.weight.data()[i] = x[o++];
    for (Eigen::Index i = 0; i < L.bias.size(); ++i) L.bias[i] = x[o++];
  }
}

}  // namespace

TEST_CASE("forward pass") {
  Mlp zero({3, 4, 2});
  CHECK(zero.forward(Vector(Vector::Ones(3))).isZero(0.0));

  Mlp relu({3, 3}, true);
  relu.mutable_layer(0).weight = Matrix::Identity(3, 3);
  Vector x(3);
  x << -1.0, 0.5, 2.0;
  const Vector y = relu.forward(x);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 0.5);
  CHECK(y[2] == 2.0);

  Mlp affine({3, 3});
  affine.mutable_layer(0).weight = Matrix::Identity(3, 3);
  CHECK(affine.forward(x) == x);

  Mlp lin({2, 2});
  lin.init(4);
  lin.mutable_layer(0).bias.setZero();
  Vector a = Vector::Random(2), b = Vector::Random(2);
  CHECK((lin.forward(Vector(2.0 * a + b)) - (2.0 * lin.forward(a) + lin.forward(b))).norm() < 1e-12);

  Matrix X(3, 2);
  X << x, 2.0 * x;
  CHECK((affine.forward(X).col(1) - 2.0 * x).norm() == 0.0);
}

TEST_CASE("initialisation") {
  Mlp m({8, 16, 4});
  m.init(11);
  CHECK(m.layer(0).weight.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
  CHECK(m.layer(1).weight.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(16.0));
  Mlp n({8, 16, 4});
  n.init(11);
  CHECK(flatten(m) == flatten(n));
  n.init(12);
  CHECK(flatten(m) != flatten(n));
  CHECK_THROWS_AS(Mlp(std::vector<int>{4}), DimensionError);
}

TEST_CASE("backward matches finite differences") {
  for (bool rectify : {false, true}) {
    Mlp m({3, 5, 2}, rectify);
    m.init(7);
    std::mt19937_64 rng(9);
    const Matrix X = oracle::random_matrix(rng, 3, 4);
    const Matrix T = oracle::random_matrix(rng, 2, 4);
    // L = sum <out, T>: the output gradient is T.
    auto f = [&](const Vector& p) {
      Mlp c = m;
      unflatten(c, p);
      return (c.forward(X).array() * T.array()).sum();
    };
    ForwardCache cache;
    m.forward(X, &cache);
    const Vector g = flatten(m.backward(T, cache));
    const Vector fd = oracle::central_diff(f, flatten(m), 1e-5);
    CHECK(oracle::rel_error(g, fd) < 1e-5);
  }
}

TEST_CASE("stale caches are rejected") {
  Mlp m({2, 3, 2});
  m.init(1);
  ForwardCache cache;
  m.forward(Matrix::Ones(2, 1), &cache);
  CHECK_NOTHROW(m.backward(Matrix::Ones(2, 1), cache));
  m.apply(m.zero_gradients(), 1.0);
  CHECK_THROWS_AS(m.backward(Matrix::Ones(2, 1), cache), Error);
  m.forward(Matrix::Ones(2, 1), &cache);
  m.mutable_layer(0);
  CHECK_THROWS_AS(m.backward(Matrix::Ones(2, 1), cache), Error);
}

TEST_CASE("gradient arithmetic and update") {
  Mlp m({2, 2});
  m.init(3);
  const Vector before = flatten(m);
  MlpGradients g = m.zero_gradients();
  g.weight[0].setOnes();
  g.bias[0].setOnes();
  MlpGradients h = g;
  h.scale(2.0);
  g.add(h, 0.5);
  CHECK(g.weight[0](0, 0) == 2.0);
  m.apply(g, -0.1);
  CHECK((flatten(m) - (before - 0.2 * Vector::Ones(before.size()))).norm() < 1e-15);
  CHECK(m.finite());
  m.mutable_layer(0).bias[1] = std::nan("");
  CHECK_FALSE(m.finite());
}

TEST_CASE("feature normalisation") {
  Vector h(2);
  h << 3.0, 4.0;
  const Vector u = feature_normalize(h, 1.0);
  CHECK(u[0] == doctest::Approx(0.6));
  CHECK(u[1] == doctest::Approx(0.8));
  CHECK(feature_normalize(h, 4.0).norm() == doctest::Approx(2.0));
  CHECK_THROWS_AS(feature_normalize(Vector::Zero(2), 1.0), DomainError);

  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const Vector x = oracle::random_vector(rng, 4);
    const Vector g = oracle::random_vector(rng, 4);
    const Vector fd = oracle::central_diff([&](const Vector& y) { return feature_normalize(y, 2.0).dot(g); }, x, 1e-6);
    CHECK(oracle::rel_error(feature_normalize_backward(x, g, 2.0), fd) < 1e-6);
  }
  const Matrix H = oracle::random_matrix(rng, 3, 5);
  const Matrix N = normalize_columns(H, 1.0);
  for (int i = 0; i < 5; ++i) CHECK(N.col(i).norm() == doctest::Approx(1.0));
  const Matrix G = oracle::random_matrix(rng, 3, 5);
  CHECK((normalize_columns_backward(H, G, 1.0).col(2) - feature_normalize_backward(H.col(2), G.col(2), 1.0)).norm() <
        1e-15);
}

TEST_CASE("class weights") {
  const Vector w = class_weights({100, 50, 10}, 160, 3);
  CHECK(w[0] == doctest::Approx(160.0 / 300.0));
  CHECK(w[2] == doctest::Approx(160.0 / 30.0));
  CHECK(class_weights({5, 5}, 10, 2).isOnes(1e-15));
  CHECK_THROWS_AS(class_weights({5, 0}, 5, 2), DomainError);
  CHECK_THROWS_AS(class_weights({5}, 5, 2), DimensionError);
}

TEST_CASE("json round trip") {
  Mlp m({4, 6, 3}, true);
  m.init(8);
  const Mlp back = Mlp::from_json(m.to_json());
  CHECK(back.widths() == m.widths());
  CHECK(back.rectify_output());
  CHECK(flatten(back) == flatten(m));
  CHECK_THROWS(Mlp::from_json("{\"widths\": [2]}"));
}
