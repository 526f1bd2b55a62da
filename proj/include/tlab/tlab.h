#ifndef TLAB_TLAB_H
#define TLAB_TLAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define TLAB_API __declspec(dllexport)
#else
#define TLAB_API __attribute__((visibility("default")))
#endif

/* Status codes. Stable; the CLI uses them as exit codes. */
typedef enum tlab_status {
  TLAB_OK = 0,
  TLAB_INTERNAL = 1,
  TLAB_INVALID_ARGUMENT = 2,
  TLAB_QUERY = 3,
  TLAB_UNDEFINED_CONDITIONAL = 4,
  TLAB_INVALID_INTERVENTION = 5,
  TLAB_TOO_LARGE = 6,
  TLAB_STRUCTURE = 7,
  TLAB_DOMAIN = 8,
  TLAB_POOL = 9,
  TLAB_BUDGET_EXHAUSTED = 10,
  TLAB_STRUCTURALLY_IDENTIFIABLE = 11,
  TLAB_SHAPE = 12,
  TLAB_NUMERIC = 13,
  TLAB_TRAINING = 14,
  TLAB_CLASS_COVERAGE = 15,
  TLAB_SPEC = 16,
  TLAB_IO = 17,
  TLAB_CORRUPT_FILE = 18,
  TLAB_VERSION = 19,
  TLAB_CONFIG = 20,
  TLAB_PARSE = 21,
  TLAB_VERIFICATION = 22 /* a verification check failed */
} tlab_status;

TLAB_API const char* tlab_version(void);
TLAB_API const char* tlab_status_name(tlab_status status);
/* Message of the last failed call on this thread; "" after a success. */
TLAB_API const char* tlab_last_error(void);

typedef struct tlab_config tlab_config;

TLAB_API tlab_status tlab_config_default(const char* kind, tlab_config** out);
TLAB_API tlab_status tlab_config_parse(const char* text, tlab_config** out);
TLAB_API tlab_status tlab_config_load(const char* path, tlab_config** out);
TLAB_API void tlab_config_free(tlab_config* config);
TLAB_API tlab_status tlab_config_kind(const tlab_config* config, const char** kind);
TLAB_API tlab_status tlab_config_set_seeds(tlab_config* config, const uint64_t* seeds, size_t count);
TLAB_API tlab_status tlab_config_set_threads(tlab_config* config, unsigned threads);
/* Comma-separated subset of erm, ablation, ours, or "all". */
TLAB_API tlab_status tlab_config_set_methods(tlab_config* config, const char* methods);
/* Copies a NUL-terminated string into buf. Sets *needed (if non-null) to the
   full length plus one; returns TLAB_INVALID_ARGUMENT when cap is too small. */
TLAB_API tlab_status tlab_config_echo(const tlab_config* config, char* buf, size_t cap, size_t* needed);
TLAB_API tlab_status tlab_config_hash(const tlab_config* config, uint64_t* hash);

/* Verification suites; out_dir may be NULL to skip writing files. */
typedef struct tlab_checks tlab_checks;

typedef struct tlab_check {
  const char* name;
  double value;
  const char* criterion;
  int pass;
  const char* detail;
} tlab_check;

TLAB_API tlab_status tlab_verify_props(const tlab_config* config, const char* out_dir, tlab_checks** out);
TLAB_API tlab_status tlab_verify_theorem(const tlab_config* config, const char* out_dir, tlab_checks** out);
TLAB_API size_t tlab_checks_count(const tlab_checks* checks);
/* Strings stay valid until tlab_checks_free. */
TLAB_API tlab_status tlab_checks_get(const tlab_checks* checks, size_t index, tlab_check* out);
TLAB_API int tlab_checks_all_pass(const tlab_checks* checks);
TLAB_API void tlab_checks_free(tlab_checks* checks);

/* Experiments. Accuracies are fractions; NaN marks a failed seed. */
typedef struct tlab_metrics tlab_metrics;

typedef struct tlab_metric_row {
  uint64_t seed;
  const char* method;
  double train_accuracy;
  double test_accuracy;
  double ood_accuracy;
  double worst_group_ood;
  const char* error; /* "" unless the seed failed */
} tlab_metric_row;

TLAB_API tlab_status tlab_run(const tlab_config* config, const char* out_dir, tlab_metrics** out);
TLAB_API size_t tlab_metrics_count(const tlab_metrics* metrics);
TLAB_API tlab_status tlab_metrics_get(const tlab_metrics* metrics, size_t index, tlab_metric_row* out);
TLAB_API void tlab_metrics_free(tlab_metrics* metrics);

typedef struct tlab_sweep tlab_sweep;

typedef struct tlab_sweep_row {
  size_t n_j;
  double median;
  double min;
  double max;
} tlab_sweep_row;

TLAB_API tlab_status tlab_sweep_nj(const tlab_config* config, const char* out_dir, tlab_sweep** out);
TLAB_API size_t tlab_sweep_count(const tlab_sweep* sweep);
TLAB_API tlab_status tlab_sweep_get(const tlab_sweep* sweep, size_t index, tlab_sweep_row* out);
/* Number of seeds that failed. */
TLAB_API size_t tlab_sweep_failures(const tlab_sweep* sweep);
TLAB_API void tlab_sweep_free(tlab_sweep* sweep);

/* Regenerates summary.md from metrics.csv in dir. */
TLAB_API tlab_status tlab_report_rebuild(const char* dir);

/* Discrete SCMs in the text format. */
typedef struct tlab_scm tlab_scm;

TLAB_API tlab_status tlab_scm_load(const char* path, tlab_scm** out);
TLAB_API tlab_status tlab_scm_parse(const char* text, tlab_scm** out);
TLAB_API void tlab_scm_free(tlab_scm* scm);
/* P(target | do(var_k = value_k)) for k < n_do; n_do = 0 gives the
   observational marginal. Writes dom(target) probabilities. */
TLAB_API tlab_status tlab_scm_query(const tlab_scm* scm, const char* target, const char* const* do_vars,
                                    const int* do_values, size_t n_do, double* probs, size_t cap,
                                    size_t* written);

#ifdef __cplusplus
}
#endif

#endif
