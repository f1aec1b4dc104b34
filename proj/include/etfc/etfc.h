/* C interface to the etfcollapse library.
 *
 * Every function returns an etfc_status; on failure etfc_last_error() gives
 * a message for the calling thread. Matrices are column-major (one column per
 * class or sample), matching the in-library layout.
 */
#ifndef ETFC_ETFC_H
#define ETFC_ETFC_H

#include <stddef.h>
#include <stdint.h>

#if defined(ETFC_BUILDING_LIBRARY)
#define ETFC_API __attribute__((visibility("default")))
#else
#define ETFC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum etfc_status {
  ETFC_OK = 0,
  ETFC_ERR_DIMENSION = 1,
  ETFC_ERR_DOMAIN = 2,
  ETFC_ERR_NUMERIC = 3,
  ETFC_ERR_UNSUPPORTED = 4,
  ETFC_ERR_DEGENERATE = 5,
  ETFC_ERR_CONFIG = 6,
  ETFC_ERR_IO = 7,
  ETFC_ERR_AT_OPTIMUM = 8,
  ETFC_ERR_CHECK_FAILED = 9,
  ETFC_ERR_NULL_ARGUMENT = 100,
  ETFC_ERR_BUFFER_TOO_SMALL = 101,
  ETFC_ERR_INTERNAL = 102
} etfc_status;

typedef struct etfc_frame etfc_frame;
typedef struct etfc_classifier etfc_classifier;

typedef struct etfc_nc_values {
  double sigma_w_trace;
  double cos_ff_avg;
  double cos_ff_std;
  double cos_fc_avg;
  double cos_fc_std;
  double self_duality;
  double duality_gap;
  double nc4;
} etfc_nc_values;

ETFC_API const char* etfc_version(void);
ETFC_API const char* etfc_status_string(etfc_status status);
/* Message of the last failed call on this thread ("" if none). */
ETFC_API const char* etfc_last_error(void);

/* ---- frames ---- */
ETFC_API etfc_status etfc_frame_generate(int d, int K, uint64_t seed, etfc_frame** out);
ETFC_API etfc_status etfc_frame_from_json(const char* text, etfc_frame** out);
ETFC_API void etfc_frame_free(etfc_frame* frame);
ETFC_API etfc_status etfc_frame_shape(const etfc_frame* frame, int* d, int* K);
/* Copies d*K values (column-major) into out; len is the buffer length.
 * A short buffer gives ETFC_ERR_BUFFER_TOO_SMALL. */
ETFC_API etfc_status etfc_frame_columns(const etfc_frame* frame, double* out, size_t len);
ETFC_API etfc_status etfc_frame_verify(const etfc_frame* frame, double tol, double* max_deviation, int* pass);
/* Writes a NUL-terminated JSON document. *needed receives the size including
 * the terminator; with a short buffer the call fails with
 * ETFC_ERR_BUFFER_TOO_SMALL and writes nothing. */
ETFC_API etfc_status etfc_frame_to_json(const etfc_frame* frame, char* buf, size_t cap, size_t* needed);

/* ---- fixed classifiers ---- */
ETFC_API etfc_status etfc_classifier_uniform(const etfc_frame* frame, double e_w, etfc_classifier** out);
/* lengths holds K positive column lengths. */
ETFC_API etfc_status etfc_classifier_scaled(const etfc_frame* frame, const double* lengths, size_t K,
                                            etfc_classifier** out);
/* sqrt(E_{w_k}) = N / (K n_k) from per-class counts. */
ETFC_API etfc_status etfc_classifier_class_weighted(const etfc_frame* frame, const int* counts, size_t K,
                                                    etfc_classifier** out);
ETFC_API void etfc_classifier_free(etfc_classifier* clf);
ETFC_API etfc_status etfc_classifier_columns(const etfc_classifier* clf, double* out, size_t len);

/* ---- losses (grad may be NULL) ---- */
ETFC_API etfc_status etfc_ce_loss(const double* h, int d, int label, const double* W, int K, double* loss,
                                  double* grad);
ETFC_API etfc_status etfc_dr_loss(const double* h, int d, int label, const etfc_classifier* clf, double e_h,
                                  double* loss, double* grad);

/* ---- neural-collapse statistics ----
 * features: d x N column-major; labels: N entries in [0, K); W: d x K. */
ETFC_API etfc_status etfc_nc_report(const double* features, const int* labels, int N, int d, const double* W, int K,
                                    etfc_nc_values* out);

/* ---- experiment commands ----
 * name is one of "etf", "peeled", "regularity", "train", "report". Returns the
 * process exit code (0 ok, 1 other, 2 config, 3 numeric, 4 check failed,
 * 5 io). The message for the run is available from etfc_last_message(). */
ETFC_API int etfc_run_command(const char* name, const char* config_json, const char* out_dir);
ETFC_API const char* etfc_last_message(void);

#ifdef __cplusplus
}
#endif

#endif /* ETFC_ETFC_H */
