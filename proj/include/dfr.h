/* Deep Frechet regression: C API for the shared library.
 *
 * All functions returning int use the status codes below; 0 means success.
 * On any failure dfr_last_error() returns a one-line, machine-parseable
 * message of the form "ERROR:<stage>:<field>: detail" (thread-local).
 * Objects returned as pointers are opaque handles owned by the caller and
 * released with the matching *_close/_free function.
 */
#ifndef DFR_H
#define DFR_H

#ifdef __cplusplus
extern "C" {
#endif

#define DFR_OK 0
#define DFR_ERR_RUNTIME 1    /* unexpected failure */
#define DFR_ERR_VALIDATION 2 /* bad inputs, files, or preconditions */
#define DFR_ERR_NUMERIC 3    /* numeric failure (labelled with its stage) */
#define DFR_ERR_ALL_FAILED 4 /* every prediction row failed */

typedef struct dfr_dataset dfr_dataset;
typedef struct dfr_model dfr_model;

/* Last error message for the calling thread; never NULL. */
const char* dfr_last_error(void);

/* Status code corresponding to the last recorded error (DFR_OK if none). */
int dfr_last_status(void);

/* ---- datasets ---------------------------------------------------------- */

/* Load predictors (CSV), responses (CSV file or directory) and the JSON
 * sidecar describing the metric space. NULL on failure. */
dfr_dataset* dfr_dataset_open(const char* predictors_csv, const char* responses_path,
                              const char* sidecar_json);
void dfr_dataset_close(dfr_dataset* data);
int dfr_dataset_dims(const dfr_dataset* data, int* n_out, int* p_out);

/* ---- fitting and prediction ------------------------------------------- */

/* Fit the deep Frechet regression pipeline. options_json keys: k, r, seed,
 * jobs, bandwidth, net {...}, grid [...], grid_file, grid_policy. Pass NULL
 * or "{}" for defaults. NULL on failure. */
dfr_model* dfr_fit(const dfr_dataset* data, const char* options_json);

/* Persist / reload a fitted model bundle directory. */
int dfr_model_save(const dfr_model* model, const char* dir);
dfr_model* dfr_model_open(const char* dir);
void dfr_model_close(dfr_model* model);

/* Predict one object per row of x_csv into out_csv (rows failing with an
 * out-of-reach embedding are marked "FAILED: ..." in place). Returns DFR_OK
 * if at least one row succeeded, DFR_ERR_ALL_FAILED if none did. */
int dfr_predict_file(const dfr_model* model, const char* x_csv, const char* out_csv);

/* ---- simulation experiments ------------------------------------------- */

/* Run the Monte Carlo experiment described by the JSON spec file; write the
 * report JSON and CSV. If table_out is non-NULL it receives a rendered
 * AMSPE table (free with dfr_string_free). */
int dfr_simulate_file(const char* spec_json, const char* report_json, const char* report_csv,
                      char** table_out);

void dfr_string_free(char* s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DFR_H */
