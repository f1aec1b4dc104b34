#include <doctest.h>

#include <cmath>

#include "etfc/error.hpp"
#include "etfc/etf.hpp"
#include "etfc/loss.hpp"
#include "etfc/peeled.hpp"

using namespace etfc;

namespace {

PeeledProblem dlpm(int d, int K, std::vector<int> counts, double e_h = 1.0, double e_w = 1.0, std::uint64_t seed = 3) {
  return make_dlpm_problem(scale_classifier_uniform(generate_etf(d, K, seed), e_w), counts, e_h);
}

}  // namespace

TEST_CASE("ball projection") {
  Vector v(2);
  v << 3.0, 4.0;
  const Vector p = project_ball(v, 1.0);
  CHECK(p[0] == doctest::Approx(0.6));
  CHECK(p[1] == doctest::Approx(0.8));
  CHECK((project_ball(p, 1.0) - p).norm() == 0.0);
  Vector inside(2);
  inside << 0.1, -0.2;
  CHECK(project_ball(inside, 1.0) == inside);
  CHECK(project_ball(Vector::Zero(3), 1.0).isZero(0.0));
  CHECK_THROWS_AS(project_ball(v, 0.0), DomainError);
}

TEST_CASE("feature initialisation") {
  const PeeledProblem p = init_features(dlpm(6, 4, {5, 5, 3, 1}, 2.0), 11);
  for (int i = 0; i < p.total(); ++i) CHECK(p.features.col(i).squaredNorm() == doctest::Approx(2.0).epsilon(1e-12));
  const PeeledProblem t = init_features(dlpm(6, 4, {20, 20, 20, 20}), 12, true);
  for (int i = 0; i < t.total(); ++i) CHECK(t.features.col(i).dot(t.classifier.col(t.labels[std::size_t(i)])) >= 0.0);
  const PeeledProblem again = init_features(dlpm(6, 4, {5, 5, 3, 1}, 2.0), 11);
  CHECK(again.features == p.features);
}

TEST_CASE("closed-form optimum") {
  SUBCASE("K = 4, unit energies") {
    const FixedClassifier clf = scale_classifier_uniform(generate_etf(4, 4, 1), 1.0);
    const Matrix H = analytic_optimum(clf, 1.0);
    const Matrix Z = clf.scaled_columns.transpose() * H;
    for (int k = 0; k < 4; ++k)
      for (int j = 0; j < 4; ++j) CHECK(Z(j, k) == doctest::Approx(k == j ? 1.0 : -1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("K = 10, E_H = 4") {
    const FixedClassifier clf = scale_classifier_uniform(generate_etf(12, 10, 2), 1.0);
    const Matrix Z = clf.scaled_columns.transpose() * analytic_optimum(clf, 4.0);
    CHECK(Z(3, 3) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(Z(3, 5) == doctest::Approx(-2.0 / 9.0).epsilon(1e-12));
  }
  SUBCASE("gap at the optimum and at zero") {
    PeeledProblem p = dlpm(4, 4, {3, 2, 2, 1});
    CHECK(optimality_gap(p) == doctest::Approx(1.0));
    p = place_at_optimum(p);
    CHECK(optimality_gap(p) < 1e-12);
    CHECK(mean_loss(p, LossKind::DR) < 1e-20);
  }
  SUBCASE("per-class lengths are unsupported") {
    Vector lengths(3);
    lengths << 1.0, 2.0, 3.0;
    const FixedClassifier clf = scale_classifier(generate_etf(3, 3, 1), lengths);
    CHECK_THROWS_AS(analytic_optimum(clf, 1.0), UnsupportedError);
    CHECK_THROWS_AS(optimality_gap(make_dlpm_problem(clf, {1, 1, 1}, 1.0)), UnsupportedError);
  }
  CHECK_THROWS_AS(optimality_gap(make_lpm_problem(4, {2, 2}, 1.0, 1.0, 0)), UnsupportedError);
}

TEST_CASE("the optimum is a fixed point") {
  for (LossKind loss : {LossKind::CE, LossKind::DR}) {
    const PeeledProblem p = place_at_optimum(dlpm(5, 4, {4, 3, 2, 1}));
    OptimizerConfig cfg;
    cfg.max_steps = 100;
    cfg.stop_tol = 1e-300;
    const Trajectory t = optimize(p, loss, cfg);
    REQUIRE(t.records.size() >= 100);
    for (const auto& r : t.records) CHECK(r.gap < 1e-10);
  }
}

TEST_CASE("decoupled projected gradient descent") {
  SUBCASE("CE converges and iterates stay in the ball") {
    const PeeledProblem p = init_features(dlpm(10, 10, {200, 200, 200, 200, 200, 2, 2, 2, 2, 2}), 5);
    OptimizerConfig cfg;
    cfg.step_size = 0.5;
    const Trajectory t = optimize(p, LossKind::CE, cfg);
    CHECK(t.converged);
    CHECK(optimality_gap(t.final_state) < 1e-3);
    for (int i = 0; i < t.final_state.total(); ++i) CHECK(t.final_state.features.col(i).squaredNorm() <= 1.0 + 1e-12);
    const ProbeResult probe = feature_mean_probe(t.final_state, {5, 6, 7, 8, 9});
    for (const auto& pr : probe.pairs) CHECK(std::abs(pr.cosine + 1.0 / 9.0) < 0.05);
  }
  SUBCASE("cyclic and full-batch updates reach the same point") {
    const PeeledProblem p = init_features(dlpm(4, 4, {3, 2, 2, 1}), 7);
    OptimizerConfig cfg;
    cfg.step_size = 0.5;
    cfg.stop_tol = 1e-9;
    cfg.max_steps = 50000;
    const Trajectory full = optimize(p, LossKind::CE, cfg);
    cfg.mode = UpdateMode::Cyclic;
    const Trajectory cyc = optimize(p, LossKind::CE, cfg);
    CHECK(full.converged);
    CHECK(cyc.converged);
    CHECK((full.final_state.features - cyc.final_state.features).cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("loss decreases for DR") {
    const PeeledProblem p = init_features(dlpm(6, 4, {10, 10, 10, 10}), 9);
    OptimizerConfig cfg;
    cfg.step_size = 1.0;
    cfg.max_steps = 200;
    const Trajectory t = optimize(p, LossKind::DR, cfg);
    CHECK(t.records.back().loss < t.records.front().loss);
    CHECK(t.records.back().gap < t.records.front().gap);
  }
  SUBCASE("bad configuration") {
    const PeeledProblem p = dlpm(4, 4, {1, 1, 1, 1});
    OptimizerConfig cfg;
    cfg.step_size = 0.0;
    CHECK_THROWS_AS(optimize(p, LossKind::CE, cfg), DomainError);
    CHECK_THROWS_AS(optimize(make_lpm_problem(4, {2, 2}, 1.0, 1.0, 0), LossKind::DR, OptimizerConfig{}), UnsupportedError);
    CHECK_THROWS_AS(make_dlpm_problem(scale_classifier_uniform(generate_etf(4, 4, 1), 1.0), {1, 1, 1}, 1.0),
                    DimensionError);
    CHECK_THROWS_AS(make_dlpm_problem(scale_classifier_uniform(generate_etf(4, 4, 1), 1.0), {1, 0, 1, 1}, 1.0),
                    DomainError);
  }
}

TEST_CASE("learnable classifier on balanced data forms an ETF") {
  PeeledProblem p = init_features(make_lpm_problem(6, {5, 5, 5, 5}, 1.0, 1.0, 21), 22);
  OptimizerConfig cfg;
  cfg.step_size = 0.5;
  cfg.stop_tol = 1e-6;
  cfg.max_steps = 20000;
  const Trajectory t = optimize(p, LossKind::CE, cfg);
  Matrix W = t.final_state.classifier;
  for (int k = 0; k < 4; ++k) W.col(k).normalize();
  const Matrix G = W.transpose() * W;
  CHECK((G - etf_gram_target(4)).cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("probes") {
  const EtfFrame f = generate_etf(5, 4, 1);
  const ProbeResult r = minority_collapse_probe(f.columns, {0, 1, 2});
  CHECK(r.pairs.size() == 3);
  for (const auto& pr : r.pairs) CHECK(pr.cosine == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  CHECK(r.mean_cosine == doctest::Approx(-1.0 / 3.0));
  CHECK_THROWS_AS(minority_collapse_probe(f.columns, {0}), DomainError);
  CHECK_THROWS_AS(minority_collapse_probe(f.columns, {0, 7}), DimensionError);
  Matrix z = f.columns;
  z.col(2).setZero();
  CHECK_THROWS_AS(minority_collapse_probe(z, {1, 2}), DegenerateError);

  Matrix W = f.columns;
  W.col(1) = W.col(0);
  CHECK(minority_collapse_probe(W, {0, 1}).min_cosine == doctest::Approx(1.0));

  const PeeledProblem p = place_at_optimum(dlpm(5, 4, {3, 3, 1, 1}));
  CHECK(feature_mean_probe(p, {2, 3}).mean_cosine == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
}
