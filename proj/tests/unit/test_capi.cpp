#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "etfc/etfc.h"

TEST_CASE("version and status strings") {
  CHECK(std::strlen(etfc_version()) > 0);
  CHECK(std::string(etfc_status_string(ETFC_OK)).size() > 0);
  CHECK(std::string(etfc_status_string(ETFC_ERR_DIMENSION)) != etfc_status_string(ETFC_ERR_DOMAIN));
}

TEST_CASE("frame handles") {
  etfc_frame* f = nullptr;
  REQUIRE(etfc_frame_generate(5, 4, 1, &f) == ETFC_OK);
  int d = 0, K = 0;
  CHECK(etfc_frame_shape(f, &d, &K) == ETFC_OK);
  CHECK(d == 5);
  CHECK(K == 4);

  std::vector<double> cols(20);
  CHECK(etfc_frame_columns(f, cols.data(), cols.size()) == ETFC_OK);
  CHECK(etfc_frame_columns(f, cols.data(), 3) == ETFC_ERR_BUFFER_TOO_SMALL);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      double dot = 0.0;
      for (int i = 0; i < 5; ++i) dot += cols[std::size_t(a * 5 + i)] * cols[std::size_t(b * 5 + i)];
      CHECK(dot == doctest::Approx(a == b ? 1.0 : -1.0 / 3.0).epsilon(1e-12));
    }

  double dev = 1.0;
  int pass = 0;
  CHECK(etfc_frame_verify(f, 1e-9, &dev, &pass) == ETFC_OK);
  CHECK(pass == 1);
  CHECK(dev < 1e-10);

  size_t needed = 0;
  char tiny[4] = {'x', 'x', 'x', 'x'};
  CHECK(etfc_frame_to_json(f, tiny, sizeof tiny, &needed) == ETFC_ERR_BUFFER_TOO_SMALL);
  CHECK(tiny[0] == 'x');
  REQUIRE(needed > 4);
  std::string buf(needed, '\0');
  CHECK(etfc_frame_to_json(f, buf.data(), buf.size(), &needed) == ETFC_OK);
  etfc_frame* g = nullptr;
  REQUIRE(etfc_frame_from_json(buf.c_str(), &g) == ETFC_OK);
  std::vector<double> cols2(20);
  etfc_frame_columns(g, cols2.data(), cols2.size());
  CHECK(cols == cols2);

  etfc_classifier* clf = nullptr;
  REQUIRE(etfc_classifier_uniform(f, 4.0, &clf) == ETFC_OK);
  std::vector<double> w(20);
  etfc_classifier_columns(clf, w.data(), w.size());
  double n0 = 0.0;
  for (int i = 0; i < 5; ++i) n0 += w[std::size_t(i)] * w[std::size_t(i)];
  CHECK(n0 == doctest::Approx(4.0));

  const int counts[4] = {10, 10, 5, 5};
  etfc_classifier* cw = nullptr;
  REQUIRE(etfc_classifier_class_weighted(f, counts, 4, &cw) == ETFC_OK);
  const double bad_lengths[4] = {1.0, -1.0, 1.0, 1.0};
  etfc_classifier* bad = nullptr;
  CHECK(etfc_classifier_scaled(f, bad_lengths, 4, &bad) == ETFC_ERR_DOMAIN);
  CHECK(bad == nullptr);
  CHECK(std::strlen(etfc_last_error()) > 0);

  // DR at the optimum: h* = sqrt(E_H / E_W) w_c.
  double loss = -1.0;
  std::vector<double> grad(5);
  std::vector<double> h(w.begin() + 5, w.begin() + 10);
  for (double& x : h) x *= 0.5;
  CHECK(etfc_dr_loss(h.data(), 5, 1, clf, 1.0, &loss, grad.data()) == ETFC_OK);
  CHECK(loss == doctest::Approx(0.0));
  CHECK(etfc_dr_loss(h.data(), 5, 9, clf, 1.0, &loss, nullptr) == ETFC_ERR_DIMENSION);

  etfc_classifier_free(cw);
  etfc_classifier_free(clf);
  etfc_frame_free(g);
  etfc_frame_free(f);
  etfc_frame_free(nullptr);
}

TEST_CASE("errors") {
  etfc_frame* f = nullptr;
  CHECK(etfc_frame_generate(2, 4, 0, &f) == ETFC_ERR_DIMENSION);
  CHECK(f == nullptr);
  CHECK(std::string(etfc_last_error()).find("d") != std::string::npos);
  CHECK(etfc_frame_generate(3, 4, 0, nullptr) == ETFC_ERR_NULL_ARGUMENT);
  CHECK(etfc_frame_from_json("{", &f) != ETFC_OK);
  CHECK(etfc_frame_shape(nullptr, nullptr, nullptr) == ETFC_ERR_NULL_ARGUMENT);
}

TEST_CASE("cross-entropy") {
  const double h[2] = {0.0, 0.0};
  const double W[6] = {1, 0, 0, 1, -1, -1};
  double loss = 0.0, grad[2];
  CHECK(etfc_ce_loss(h, 2, 0, W, 3, &loss, grad) == ETFC_OK);
  CHECK(loss == doctest::Approx(std::log(3.0)));
  CHECK(etfc_ce_loss(h, 2, 3, W, 3, &loss, grad) == ETFC_ERR_DIMENSION);
}

TEST_CASE("neural-collapse report") {
  etfc_frame* f = nullptr;
  REQUIRE(etfc_frame_generate(4, 3, 2, &f) == ETFC_OK);
  std::vector<double> W(12);
  etfc_frame_columns(f, W.data(), W.size());
  std::vector<double> H;
  std::vector<int> labels;
  for (int k = 0; k < 3; ++k)
    for (int r = 0; r < 2; ++r) {
      H.insert(H.end(), W.begin() + 4 * k, W.begin() + 4 * k + 4);
      labels.push_back(k);
    }
  etfc_nc_values v{};
  REQUIRE(etfc_nc_report(H.data(), labels.data(), 6, 4, W.data(), 3, &v) == ETFC_OK);
  CHECK(v.sigma_w_trace == doctest::Approx(0.0));
  CHECK(v.cos_ff_avg == doctest::Approx(-0.5));
  CHECK(v.self_duality == doctest::Approx(1.0));
  CHECK(v.nc4 == 1.0);
  labels[0] = 7;
  CHECK(etfc_nc_report(H.data(), labels.data(), 6, 4, W.data(), 3, &v) == ETFC_ERR_DIMENSION);
  etfc_frame_free(f);
}

TEST_CASE("commands") {
  const auto out = std::filesystem::temp_directory_path() / "etfc_test_capi";
  std::filesystem::remove_all(out);
  CHECK(etfc_run_command("etf", R"({"d": 4, "K": 3})", out.string().c_str()) == 0);
  CHECK(std::filesystem::exists(out / "frame.json"));
  CHECK(etfc_run_command("etf", R"({"d": 1, "K": 3})", out.string().c_str()) == 2);
  CHECK(std::strlen(etfc_last_message()) > 0);
  CHECK(etfc_run_command(nullptr, "{}", "x") != 0);
}
