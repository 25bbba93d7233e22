/* C interface to the prefsdm simulation and inference engine.
 *
 * Every function returning psdm_status leaves a message for the calling
 * thread in psdm_last_error() when it fails. Strings handed out through char**
 * parameters are owned by the caller and released with psdm_string_free. */
#ifndef PREFSDM_PREFSDM_H
#define PREFSDM_PREFSDM_H

#include <stdint.h>

#if defined(_WIN32)
#define PSDM_API __declspec(dllexport)
#elif defined(PSDM_BUILDING_LIBRARY)
#define PSDM_API __attribute__((visibility("default")))
#else
#define PSDM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum psdm_status {
  PSDM_OK = 0,
  PSDM_ERR_INVALID_ARGUMENT = 1,
  PSDM_ERR_DOMAIN = 2,
  PSDM_ERR_OUT_OF_BOUNDS = 3,
  PSDM_ERR_NUMERIC = 4,
  PSDM_ERR_FACTORIZATION = 5,
  PSDM_ERR_IO = 6,
  PSDM_ERR_CONFIG = 7,
  PSDM_ERR_INTERNAL = 8
} psdm_status;

typedef struct psdm_config psdm_config;
typedef struct psdm_dataset psdm_dataset;
typedef struct psdm_fit psdm_fit;

PSDM_API const char* psdm_version(void);
PSDM_API const char* psdm_last_error(void);
PSDM_API const char* psdm_status_name(psdm_status s);
PSDM_API void psdm_string_free(char* s);

/* Configuration. profile is "desk" or "full". */
PSDM_API psdm_status psdm_config_new(const char* profile, psdm_config** out);
/* profile may be NULL; when given it must agree with a profile key in the file. */
PSDM_API psdm_status psdm_config_load(const char* path, const char* profile, psdm_config** out);
PSDM_API psdm_status psdm_config_set_seed(psdm_config* cfg, uint64_t master_seed);
PSDM_API psdm_status psdm_config_set_jobs(psdm_config* cfg, int jobs);
PSDM_API psdm_status psdm_config_text(const psdm_config* cfg, char** out);
PSDM_API psdm_status psdm_config_hash(const psdm_config* cfg, char** out);
PSDM_API psdm_status psdm_config_scenario_count(const psdm_config* cfg, int* out);
PSDM_API void psdm_config_free(psdm_config* cfg);

/* Datasets. */
PSDM_API psdm_status psdm_simulate(const psdm_config* cfg, double range, double prop_random, int n_total,
                                   int replicate, psdm_dataset** out);
PSDM_API psdm_status psdm_dataset_save(const psdm_dataset* d, const char* dir);
PSDM_API psdm_status psdm_dataset_load(const char* dir, psdm_dataset** out);
PSDM_API psdm_status psdm_dataset_counts(const psdm_dataset* d, int* n_preferential, int* n_random,
                                         int* n_test);
PSDM_API void psdm_dataset_free(psdm_dataset* d);

/* Fitting. model is "geo", "pref" or "mix". */
PSDM_API psdm_status psdm_fit_model(const psdm_config* cfg, const psdm_dataset* d, const char* model,
                                    uint64_t seed, psdm_fit** out);
PSDM_API psdm_status psdm_fit_log_evidence(const psdm_fit* f, double* out);
PSDM_API psdm_status psdm_fit_json(const psdm_fit* f, char** out);
/* WAIC, RMSE and abundance ratio as one JSON object. */
PSDM_API psdm_status psdm_fit_evaluate(const psdm_fit* f, const psdm_dataset* d, int n_draws, uint64_t seed,
                                       char** json_out);
PSDM_API void psdm_fit_free(psdm_fit* f);

/* Experiment and report. */
typedef void (*psdm_log_fn)(const char* line, void* user);

/* Runs the factorial study into outdir. jobs <= 0 keeps the configured value.
 * summary_out (may be NULL) receives a JSON object with run counts. */
PSDM_API psdm_status psdm_run_experiment(const psdm_config* cfg, const char* outdir, int resume, int jobs,
                                         psdm_log_fn log, void* user, char** summary_out);
/* Reads a results archive and writes tables and figures into outdir.
 * listing_out (may be NULL) receives the written paths, one per line. */
PSDM_API psdm_status psdm_report(const char* results_path, const char* outdir, char** listing_out);

#ifdef __cplusplus
}
#endif

#endif
