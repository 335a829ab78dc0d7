#ifndef QRLFORGE_H
#define QRLFORGE_H

/* C interface to the qrlforge training toolkit. Every function returns a
 * qrl_status; on failure qrl_last_error() describes the problem for the
 * calling thread. Handles are opaque and must be released with their
 * matching *_free function. Strings returned through handles stay valid
 * until the handle is freed. Accessors given a NULL handle or an out-of-range
 * index return an empty string or zero. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define QRL_API __declspec(dllexport)
#elif defined(__GNUC__)
#define QRL_API __attribute__((visibility("default")))
#else
#define QRL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qrl_status {
  QRL_OK = 0,
  QRL_CONFIG_ERROR = 1,
  QRL_RUNTIME_ERROR = 2,
  QRL_ARGUMENT_ERROR = 3,
  QRL_IO_ERROR = 4
} qrl_status;

typedef struct qrl_config qrl_config;
typedef struct qrl_results qrl_results;

typedef struct qrl_overrides {
  int has_seed;
  uint64_t seed;
  const char* output_dir; /* NULL: QRLFORGE_OUTPUT_DIR, then the config value */
} qrl_overrides;

QRL_API const char* qrl_version(void);
QRL_API const char* qrl_last_error(void);

/* Loads and validates a run config. */
QRL_API qrl_status qrl_config_load(const char* path, qrl_config** out);
QRL_API void qrl_config_free(qrl_config* config);
QRL_API const char* qrl_config_run_name(const qrl_config* config);
QRL_API size_t qrl_config_warning_count(const qrl_config* config);
QRL_API const char* qrl_config_warning(const qrl_config* config, size_t index);

/* overrides may be NULL. */
QRL_API qrl_status qrl_run_single(const qrl_config* config, const qrl_overrides* overrides,
                                  qrl_results** out);
QRL_API qrl_status qrl_run_batch(const char* const* paths, size_t n_paths, int continue_on_error,
                                 const qrl_overrides* overrides, qrl_results** out);
/* Results are ranked best first, followed by failed trials. */
QRL_API qrl_status qrl_tune(const char* grid_path, size_t max_parallel,
                            const qrl_overrides* overrides, qrl_results** out);

QRL_API size_t qrl_results_count(const qrl_results* results);
QRL_API int qrl_result_ok(const qrl_results* results, size_t i);
QRL_API const char* qrl_result_run_name(const qrl_results* results, size_t i);
QRL_API uint64_t qrl_result_seed(const qrl_results* results, size_t i);
QRL_API const char* qrl_result_error(const qrl_results* results, size_t i);
QRL_API double qrl_result_final_return(const qrl_results* results, size_t i);
QRL_API uint64_t qrl_result_env_steps(const qrl_results* results, size_t i);
QRL_API uint64_t qrl_result_circuit_executions(const qrl_results* results, size_t i);
QRL_API double qrl_result_wall_time(const qrl_results* results, size_t i);
QRL_API const char* qrl_result_metrics_path(const qrl_results* results, size_t i);
/* Tune summary CSV path; empty for other result sets. */
QRL_API const char* qrl_results_summary_path(const qrl_results* results);
QRL_API void qrl_results_free(qrl_results* results);

/* CSV report over metrics files matching the glob patterns. The string must
 * be released with qrl_string_free. */
QRL_API qrl_status qrl_report(const char* const* patterns, size_t n_patterns, double threshold,
                              int has_threshold, char** csv_out);
QRL_API void qrl_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
