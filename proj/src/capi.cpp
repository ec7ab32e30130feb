#include "dfr.h"

#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

#include "dfr/io.hpp"
#include "dfr/parallel.hpp"
#include "dfr/pipeline.hpp"
#include "dfr/simulate.hpp"

namespace {

thread_local std::string g_last_error = "";
thread_local int g_last_status = DFR_OK;

int code_for(const dfr::Error& e) {
  switch (e.kind()) {
    case dfr::ErrorKind::Numeric:
      return DFR_ERR_NUMERIC;
    case dfr::ErrorKind::Bandwidth:
      return DFR_ERR_NUMERIC;
    case dfr::ErrorKind::Validation:
    case dfr::ErrorKind::Shape:
      return DFR_ERR_VALIDATION;
  }
  return DFR_ERR_RUNTIME;
}

int record(const dfr::Error& e) {
  g_last_error = e.what();
  g_last_status = code_for(e);
  return g_last_status;
}

int record_unexpected(const std::exception& e) {
  g_last_error = std::string("ERROR:capi:internal: ") + e.what();
  g_last_status = DFR_ERR_RUNTIME;
  return g_last_status;
}

int record_status(int status, std::string message) {
  g_last_error = std::move(message);
  g_last_status = status;
  return status;
}

}  // namespace

struct dfr_dataset {
  dfr::Dataset data;
};

struct dfr_model {
  dfr::DfrModel model;
};

extern "C" {

const char* dfr_last_error(void) { return g_last_error.c_str(); }

int dfr_last_status(void) { return g_last_status; }

dfr_dataset* dfr_dataset_open(const char* predictors_csv, const char* responses_path,
                              const char* sidecar_json) {
  try {
    if (!predictors_csv || !responses_path || !sidecar_json)
      throw dfr::Error(dfr::ErrorKind::Validation, "capi", "path", "NULL path argument");
    auto* handle = new dfr_dataset;
    handle->data = dfr::load_dataset(predictors_csv, responses_path, sidecar_json);
    return handle;
  } catch (const dfr::Error& e) {
    record(e);
  } catch (const std::exception& e) {
    record_unexpected(e);
  }
  return nullptr;
}

void dfr_dataset_close(dfr_dataset* data) { delete data; }

int dfr_dataset_dims(const dfr_dataset* data, int* n_out, int* p_out) {
  if (!data) return record_status(DFR_ERR_VALIDATION, "ERROR:capi:dataset: NULL dataset handle");
  if (n_out) *n_out = static_cast<int>(data->data.predictors.rows());
  if (p_out) *p_out = static_cast<int>(data->data.predictors.cols());
  return DFR_OK;
}

dfr_model* dfr_fit(const dfr_dataset* data, const char* options_json) {
  try {
    if (!data)
      throw dfr::Error(dfr::ErrorKind::Validation, "capi", "dataset", "NULL dataset handle");
    dfr::FitOptions options =
        dfr::parse_fit_options(options_json && *options_json ? options_json : "{}");
    if (options.jobs <= 0) options.jobs = dfr::default_jobs();
    auto* handle = new dfr_model;
    handle->model = dfr::fit_dfr(data->data.predictors, data->data.responses, options);
    return handle;
  } catch (const dfr::Error& e) {
    record(e);
  } catch (const std::exception& e) {
    record_unexpected(e);
  }
  return nullptr;
}

int dfr_model_save(const dfr_model* model, const char* dir) {
  try {
    if (!model || !dir)
      throw dfr::Error(dfr::ErrorKind::Validation, "capi", "model", "NULL argument");
    dfr::save_model_bundle(dir, model->model);
    return DFR_OK;
  } catch (const dfr::Error& e) {
    return record(e);
  } catch (const std::exception& e) {
    return record_unexpected(e);
  }
}

dfr_model* dfr_model_open(const char* dir) {
  try {
    if (!dir) throw dfr::Error(dfr::ErrorKind::Validation, "capi", "dir", "NULL directory");
    auto* handle = new dfr_model;
    handle->model = dfr::load_model_bundle(dir);
    return handle;
  } catch (const dfr::Error& e) {
    record(e);
  } catch (const std::exception& e) {
    record_unexpected(e);
  }
  return nullptr;
}

void dfr_model_close(dfr_model* model) { delete model; }

int dfr_predict_file(const dfr_model* model, const char* x_csv, const char* out_csv) {
  try {
    if (!model || !x_csv || !out_csv)
      throw dfr::Error(dfr::ErrorKind::Validation, "capi", "predict", "NULL argument");
    const auto rows = dfr::read_csv_rows_lenient(x_csv);
    if (rows.empty())
      throw dfr::Error(dfr::ErrorKind::Validation, "capi", "x", "no predictor rows");

    const int p = model->model.nets.empty() ? 0 : model->model.nets.front().input_dim();
    std::vector<dfr::PredictionRow> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      try {
        if (!rows[i].ok)
          throw dfr::Error(dfr::ErrorKind::Validation, "pipeline", "x", rows[i].error);
        if (static_cast<int>(rows[i].values.size()) != p)
          throw dfr::Error(dfr::ErrorKind::Shape, "pipeline", "x",
                           "row has " + std::to_string(rows[i].values.size()) +
                               " values; the model expects " + std::to_string(p));
        Eigen::VectorXd x(p);
        for (int c = 0; c < p; ++c) x(c) = rows[i].values[c];
        out[i].object = dfr::predict_dfr(model->model, x);
        out[i].ok = true;
      } catch (const dfr::Error& e) {
        out[i].ok = false;
        out[i].error = e.what();
      }
    }
    dfr::write_predictions(out_csv, out);
    const bool any_ok =
        std::any_of(out.begin(), out.end(), [](const auto& r) { return r.ok; });
    if (!any_ok)
      return record_status(DFR_ERR_ALL_FAILED,
                           "ERROR:pipeline:predict: every prediction row failed");
    return DFR_OK;
  } catch (const dfr::Error& e) {
    return record(e);
  } catch (const std::exception& e) {
    return record_unexpected(e);
  }
}

int dfr_simulate_file(const char* spec_json, const char* report_json, const char* report_csv,
                      char** table_out) {
  try {
    if (!spec_json)
      throw dfr::Error(dfr::ErrorKind::Validation, "capi", "spec", "NULL spec path");
    dfr::ExperimentSpec spec = dfr::load_experiment_spec(spec_json);
    if (spec.jobs <= 0) spec.jobs = dfr::default_jobs();
    const dfr::ExperimentReport report = dfr::run_experiment(spec);
    if (report_json) dfr::write_report_json(report_json, report);
    if (report_csv) dfr::write_report_csv(report_csv, report);
    if (table_out) {
      const std::string table = dfr::format_table(report);
      *table_out = new char[table.size() + 1];
      std::memcpy(*table_out, table.c_str(), table.size() + 1);
    }
    return DFR_OK;
  } catch (const dfr::Error& e) {
    return record(e);
  } catch (const std::exception& e) {
    return record_unexpected(e);
  }
}

void dfr_string_free(char* s) { delete[] s; }

}  // extern "C"
