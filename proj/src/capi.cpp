#include "etfc/etfc.h"

#include <cstring>
#include <exception>
#include <new>
#include <stdexcept>
#include <string>

#include "etfc/error.hpp"
#include "etfc/etf.hpp"
#include "etfc/experiments.hpp"
#include "etfc/frame_io.hpp"
#include "etfc/loss.hpp"
#include "etfc/mlp.hpp"
#include "etfc/nc_metrics.hpp"

struct etfc_frame {
  etfc::EtfFrame frame;
};

struct etfc_classifier {
  etfc::FixedClassifier clf;
};

namespace {

thread_local std::string g_last_error;
thread_local std::string g_last_message;

etfc_status fail(etfc_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

struct BufferTooSmall : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class F>
etfc_status guard(F&& body) {
  try {
    g_last_error.clear();
    body();
    return ETFC_OK;
  } catch (const etfc::Error& e) {
    return fail(static_cast<etfc_status>(static_cast<int>(e.code())), e.what());
  } catch (const BufferTooSmall& e) {
    return fail(ETFC_ERR_BUFFER_TOO_SMALL, e.what());
  } catch (const std::bad_alloc&) {
    return fail(ETFC_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(ETFC_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(ETFC_ERR_INTERNAL, "unknown failure");
  }
}

#define ETFC_REQUIRE(ptr)                                                              \
  do {                                                                                 \
    if (!(ptr)) return fail(ETFC_ERR_NULL_ARGUMENT, std::string(#ptr) + " is NULL");   \
  } while (0)

void copy_out(const etfc::Matrix& M, double* out, size_t len) {
  if (len < static_cast<size_t>(M.size())) {
    throw BufferTooSmall("output buffer holds " + std::to_string(len) + " values, need " + std::to_string(M.size()));
  }
  std::memcpy(out, M.data(), sizeof(double) * static_cast<size_t>(M.size()));
}

void make_classifier(const etfc::FixedClassifier& c, etfc_classifier** out) { *out = new etfc_classifier{c}; }

}  // namespace

extern "C" {

const char* etfc_version(void) { return "0.1.0"; }

const char* etfc_status_string(etfc_status s) {
  switch (s) {
    case ETFC_OK: return "ok";
    case ETFC_ERR_NULL_ARGUMENT: return "null argument";
    case ETFC_ERR_BUFFER_TOO_SMALL: return "buffer too small";
    case ETFC_ERR_INTERNAL: return "internal error";
    default:
      if (s >= ETFC_ERR_DIMENSION && s <= ETFC_ERR_CHECK_FAILED) {
        return etfc::to_string(static_cast<etfc::ErrorCode>(static_cast<int>(s)));
      }
      return "unknown status";
  }
}

const char* etfc_last_error(void) { return g_last_error.c_str(); }
const char* etfc_last_message(void) { return g_last_message.c_str(); }

etfc_status etfc_frame_generate(int d, int K, uint64_t seed, etfc_frame** out) {
  ETFC_REQUIRE(out);
  *out = nullptr;
  return guard([&] { *out = new etfc_frame{etfc::generate_etf(d, K, seed)}; });
}

etfc_status etfc_frame_from_json(const char* text, etfc_frame** out) {
  ETFC_REQUIRE(text);
  ETFC_REQUIRE(out);
  *out = nullptr;
  return guard([&] { *out = new etfc_frame{etfc::frame_from_json(text)}; });
}

void etfc_frame_free(etfc_frame* frame) { delete frame; }

etfc_status etfc_frame_shape(const etfc_frame* frame, int* d, int* K) {
  ETFC_REQUIRE(frame);
  if (d) *d = frame->frame.dim;
  if (K) *K = frame->frame.num_classes;
  return ETFC_OK;
}

etfc_status etfc_frame_columns(const etfc_frame* frame, double* out, size_t len) {
  ETFC_REQUIRE(frame);
  ETFC_REQUIRE(out);
  return guard([&] { copy_out(frame->frame.columns, out, len); });
}

etfc_status etfc_frame_verify(const etfc_frame* frame, double tol, double* max_deviation, int* pass) {
  ETFC_REQUIRE(frame);
  return guard([&] {
    const etfc::GramReport r = etfc::verify_etf(frame->frame, tol);
    if (max_deviation) *max_deviation = r.max_deviation;
    if (pass) *pass = r.pass ? 1 : 0;
  });
}

etfc_status etfc_frame_to_json(const etfc_frame* frame, char* buf, size_t cap, size_t* needed) {
  ETFC_REQUIRE(frame);
  std::string text;
  const etfc_status s = guard([&] { text = etfc::frame_to_json(frame->frame); });
  if (s != ETFC_OK) return s;
  if (needed) *needed = text.size() + 1;
  if (!buf || cap < text.size() + 1) return fail(ETFC_ERR_BUFFER_TOO_SMALL, "JSON buffer too small");
  std::memcpy(buf, text.c_str(), text.size() + 1);
  return ETFC_OK;
}

etfc_status etfc_classifier_uniform(const etfc_frame* frame, double e_w, etfc_classifier** out) {
  ETFC_REQUIRE(frame);
  ETFC_REQUIRE(out);
  *out = nullptr;
  return guard([&] { make_classifier(etfc::scale_classifier_uniform(frame->frame, e_w), out); });
}

etfc_status etfc_classifier_scaled(const etfc_frame* frame, const double* lengths, size_t K, etfc_classifier** out) {
  ETFC_REQUIRE(frame);
  ETFC_REQUIRE(lengths);
  ETFC_REQUIRE(out);
  *out = nullptr;
  return guard([&] {
    const etfc::Vector l = Eigen::Map<const etfc::Vector>(lengths, static_cast<Eigen::Index>(K));
    make_classifier(etfc::scale_classifier(frame->frame, l), out);
  });
}

etfc_status etfc_classifier_class_weighted(const etfc_frame* frame, const int* counts, size_t K,
                                           etfc_classifier** out) {
  ETFC_REQUIRE(frame);
  ETFC_REQUIRE(counts);
  ETFC_REQUIRE(out);
  *out = nullptr;
  return guard([&] {
    std::vector<int> c(counts, counts + K);
    int N = 0;
    for (int n : c) N += n;
    make_classifier(etfc::scale_classifier(frame->frame, etfc::class_weights(c, N, static_cast<int>(K))), out);
  });
}

void etfc_classifier_free(etfc_classifier* clf) { delete clf; }

etfc_status etfc_classifier_columns(const etfc_classifier* clf, double* out, size_t len) {
  ETFC_REQUIRE(clf);
  ETFC_REQUIRE(out);
  return guard([&] { copy_out(clf->clf.scaled_columns, out, len); });
}

etfc_status etfc_ce_loss(const double* h, int d, int label, const double* W, int K, double* loss, double* grad) {
  ETFC_REQUIRE(h);
  ETFC_REQUIRE(W);
  ETFC_REQUIRE(loss);
  return guard([&] {
    if (d < 1 || K < 2) throw etfc::DimensionError("etfc_ce_loss: need d >= 1 and K >= 2");
    if (label < 0 || label >= K) throw etfc::DimensionError("etfc_ce_loss: label out of range");
    const etfc::Feature f{Eigen::Map<const etfc::Vector>(h, d), label};
    const etfc::Matrix Wm = Eigen::Map<const etfc::Matrix>(W, d, K);
    *loss = etfc::ce_loss(f, Wm);
    if (grad) Eigen::Map<etfc::Vector>(grad, d) = etfc::ce_grad_feature(f, Wm);
  });
}

etfc_status etfc_dr_loss(const double* h, int d, int label, const etfc_classifier* clf, double e_h, double* loss,
                         double* grad) {
  ETFC_REQUIRE(h);
  ETFC_REQUIRE(clf);
  ETFC_REQUIRE(loss);
  return guard([&] {
    if (d != clf->clf.dim()) throw etfc::DimensionError("etfc_dr_loss: feature dim differs from classifier");
    if (label < 0 || label >= clf->clf.num_classes()) throw etfc::DimensionError("etfc_dr_loss: label out of range");
    const etfc::Vector hv = Eigen::Map<const etfc::Vector>(h, d);
    *loss = etfc::dr_loss(hv, clf->clf, label, e_h);
    if (grad) Eigen::Map<etfc::Vector>(grad, d) = etfc::dr_grad(hv, clf->clf, label, e_h);
  });
}

etfc_status etfc_nc_report(const double* features, const int* labels, int N, int d, const double* W, int K,
                           etfc_nc_values* out) {
  ETFC_REQUIRE(features);
  ETFC_REQUIRE(labels);
  ETFC_REQUIRE(W);
  ETFC_REQUIRE(out);
  return guard([&] {
    if (N < 1 || d < 1 || K < 2) throw etfc::DimensionError("etfc_nc_report: need N, d >= 1 and K >= 2");
    const etfc::FeatureBatch batch(Eigen::Map<const etfc::Matrix>(features, d, N), std::vector<int>(labels, labels + N), K);
    const etfc::NcReport r = etfc::compute_nc_report(batch, Eigen::Map<const etfc::Matrix>(W, d, K));
    *out = {r.sigma_w_trace, r.cos_ff_avg, r.cos_ff_std, r.cos_fc_avg, r.cos_fc_std, r.self_duality, r.duality_gap, r.nc4};
  });
}

int etfc_run_command(const char* name, const char* config_json, const char* out_dir) {
  namespace ex = etfc::experiments;
  if (!name || !out_dir) {
    g_last_message = "command name and output directory are required";
    g_last_error = g_last_message;
    return ex::kConfig;
  }
  try {
    const ex::Outcome o = ex::run_command(name, config_json ? config_json : "", out_dir);
    g_last_message = o.message;
    g_last_error = o.exit_code == ex::kOk ? std::string() : o.message;
    return o.exit_code;
  } catch (const std::exception& e) {
    g_last_message = g_last_error = e.what();
    return ex::kOther;
  }
}

}  // extern "C"
