/* C interface to the sbdyn library.
 *
 * Every function that can fail returns an sbd_status; on failure the message
 * is available from sbd_last_error() on the same thread until the next
 * failing call. Handles are opaque and owned by the caller, who releases them
 * with the matching *_free function. Strings returned by accessors live as
 * long as the handle they came from.
 *
 * Units: energies in Omega (the oscillator frequency), times of P(t) series
 * in 1/Delta, kernel times in 1/Omega.
 */
#ifndef SBDYN_H
#define SBDYN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SBD_API __declspec(dllexport)
#else
#define SBD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sbd_status {
    SBD_OK = 0,
    SBD_ERR_ARGUMENT = 1, /* null pointer, bad index, capacity too small */
    SBD_ERR_DOMAIN = 2,
    SBD_ERR_NUMERIC = 3,
    SBD_ERR_CONFIG = 4,
    SBD_ERR_MODEL = 5,
    SBD_ERR_TRUNCATION = 6,
    SBD_ERR_RESOURCE = 7, /* augmented tensor above the entry cap */
    SBD_ERR_IO = 8,
    SBD_ERR_INTERNAL = 9
} sbd_status;

SBD_API const char* sbd_version(void);
SBD_API const char* sbd_status_name(sbd_status status);
SBD_API const char* sbd_last_error(void);

/* Config format key table. */
typedef struct sbd_config_key {
    const char* key;
    const char* type;
    const char* unit;
    const char* description;
} sbd_config_key;

SBD_API size_t sbd_config_key_count(void);
SBD_API sbd_status sbd_config_key_get(size_t index, sbd_config_key* out);

/* Scenario sets: parsed config files or figure presets. */
typedef struct sbd_scenarios sbd_scenarios;

SBD_API sbd_status sbd_scenarios_load(const char* path, sbd_scenarios** out);
SBD_API sbd_status sbd_scenarios_parse(const char* text, sbd_scenarios** out);
SBD_API sbd_status sbd_scenarios_preset(int figure, sbd_scenarios** out);
SBD_API void sbd_scenarios_free(sbd_scenarios* set);
SBD_API size_t sbd_scenarios_count(const sbd_scenarios* set);
/* NULL when the index is out of range. */
SBD_API const char* sbd_scenarios_name(const sbd_scenarios* set, size_t index);
SBD_API const char* sbd_scenarios_json(const sbd_scenarios* set, size_t index);
/* Overrides applied to every scenario in the set. */
SBD_API sbd_status sbd_scenarios_set_tolerance(sbd_scenarios* set, double tolerance);
SBD_API sbd_status sbd_scenarios_set_scan_tolerance(sbd_scenarios* set, double tolerance);
SBD_API sbd_status sbd_scenarios_set_max_tensor_entries(sbd_scenarios* set, uint64_t entries);
SBD_API sbd_status sbd_scenarios_set_horizon(sbd_scenarios* set, double horizon);

/* Runs. Scenario-level failures do not fail the call; they are listed. */
typedef struct sbd_run sbd_run;

typedef struct sbd_record_info {
    const char* scenario;
    const char* label;
    size_t length;
    double wall_seconds;
} sbd_record_info;

typedef struct sbd_comparison {
    const char* scenario;
    const char* reference;
    const char* candidate;
    double sup;
    double rms;
    double window;
    double tolerance;
    int pass;
} sbd_comparison;

typedef struct sbd_kernel_info {
    const char* scenario;
    size_t length;
    double memory_time; /* INFINITY when the tabulation never settles */
} sbd_kernel_info;

SBD_API sbd_status sbd_run_scenarios(const sbd_scenarios* set, unsigned threads, sbd_run** out);
/* Kernel tabulation only, whatever engines the scenarios select. */
SBD_API sbd_status sbd_run_kernels(const sbd_scenarios* set, unsigned threads, sbd_run** out);
SBD_API void sbd_run_free(sbd_run* run);

SBD_API size_t sbd_run_record_count(const sbd_run* run);
SBD_API sbd_status sbd_run_record(const sbd_run* run, size_t index, sbd_record_info* info);
/* Copies the series; capacity must be at least info.length. */
SBD_API sbd_status sbd_run_series(const sbd_run* run, size_t index, double* times, double* population,
                                  size_t capacity);
SBD_API sbd_status sbd_run_diagnostic(const sbd_run* run, size_t index, const char* key, double* value);

SBD_API size_t sbd_run_comparison_count(const sbd_run* run);
SBD_API sbd_status sbd_run_comparison(const sbd_run* run, size_t index, sbd_comparison* out);

SBD_API size_t sbd_run_kernel_count(const sbd_run* run);
SBD_API sbd_status sbd_run_kernel(const sbd_run* run, size_t index, sbd_kernel_info* info);

SBD_API size_t sbd_run_failure_count(const sbd_run* run);
SBD_API const char* sbd_run_failure(const sbd_run* run, size_t index);

/* 1 when there are no failures and every comparison passed. */
SBD_API int sbd_run_all_passed(const sbd_run* run);
/* CSV and SVG per scenario, kernel CSVs, summary.json. */
SBD_API sbd_status sbd_run_emit(const sbd_run* run, const char* directory);

/* Convergence scans along dk_max, dt or m_keep. */
typedef struct sbd_scan sbd_scan;

typedef struct sbd_scan_info {
    const char* scenario;
    const char* axis;
    size_t points;
    double tolerance;
    int has_verdict;
    int converged;
    double converged_value;
} sbd_scan_info;

/* values may be NULL (n_values 0) for a dk_max scan over the scenario list. */
SBD_API sbd_status sbd_scan_run(const sbd_scenarios* set, size_t index, const char* axis, const double* values,
                                size_t n_values, sbd_scan** out);
SBD_API void sbd_scan_free(sbd_scan* scan);
SBD_API sbd_status sbd_scan_info_get(const sbd_scan* scan, sbd_scan_info* info);
/* gap_to_next is NAN for refused points and the last completed point. */
SBD_API sbd_status sbd_scan_point(const sbd_scan* scan, size_t index, double* value, int* refused,
                                  double* gap_to_next);
SBD_API sbd_status sbd_scan_emit(const sbd_scan* scan, const char* directory);

/* Direct engine entry points, Omega = 1. */
SBD_API sbd_status sbd_map_g0_to_alpha(double g0, double gamma, double omega0, double* alpha);
SBD_API sbd_status sbd_response_kernel(double alpha, double gamma, double beta, double t, double* re,
                                       double* im);
/* P(t) from the TRWA solution at the given times (1/Omega). */
SBD_API sbd_status sbd_trwa_population(double delta, double alpha, double gamma, const double* times, size_t n,
                                       double* population);
/* Bare-qubit QUAPI, population holds n_steps + 1 values at k * dt (1/Omega). */
SBD_API sbd_status sbd_quapi_qubit_population(double delta, double alpha, double gamma, double dt, int dk_max,
                                              int n_steps, double* population);

#ifdef __cplusplus
}
#endif

#endif /* SBDYN_H */
