#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "dfr/metric_spaces.hpp"
#include "dfr/pipeline.hpp"
#include "dfr/simulate.hpp"

namespace dfr {

/// Shape metadata accompanying every dataset:
/// {"space": "wasserstein"|"laplacian"|"covariance", "grid_size": G,
///  "nodes": m, "weight_bound": W} plus optional "format"
/// ("quantiles"|"samples"), "support" ([a, b]) and "diag_bound".
struct Sidecar {
  Space space = Space::Wasserstein;
  int grid_size = 101;
  int nodes = 0;
  double weight_bound = 0.0;  // 0 means: use the maximum observed weight
  std::optional<double> diag_bound;
  std::optional<Bounds> support;
  std::string format;  // wasserstein row format; empty means infer
};

Sidecar load_sidecar(const std::string& path);

/// Rectangular numeric CSV (no header).
Eigen::MatrixXd read_csv_matrix(const std::string& path);
/// Ragged numeric CSV; empty lines skipped.
std::vector<std::vector<double>> read_csv_rows(const std::string& path);

/// Per-row tolerant CSV read: malformed rows are returned with ok=false
/// instead of failing the whole file (the predict path marks them in place).
struct CsvRow {
  bool ok = false;
  std::vector<double> values;
  std::string error;
};
std::vector<CsvRow> read_csv_rows_lenient(const std::string& path);
void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m);

struct Dataset {
  Eigen::MatrixXd predictors;
  std::vector<MetricObject> responses;
  Sidecar sidecar;
};

/// Load predictors plus responses in the space's format. Wasserstein
/// responses are rows of quantiles or raw samples (see Sidecar::format);
/// Laplacian/covariance responses are a stacked dense CSV (n*m rows of m
/// values), flattened rows (m^2 values each), or a directory of per-object
/// files (edge list or dense, sorted by name).
Dataset load_dataset(const std::string& predictors_csv, const std::string& responses_path,
                     const std::string& sidecar_path);

/// Model bundle directory: embedding.json, net_<j>.json, lfr.json,
/// provenance.json, fit.log.
void save_model_bundle(const std::string& dir, const DfrModel& model);
DfrModel load_model_bundle(const std::string& dir);
Sidecar bundle_sidecar(const DfrModel& model);

/// One CSV row per object: G quantiles, or m^2 row-major matrix entries.
std::string serialize_object_row(const MetricObject& obj);
MetricObject parse_object_row(const std::string& line, const Sidecar& sidecar);

struct PredictionRow {
  bool ok = false;
  MetricObject object;
  std::string error;
};

void write_predictions(const std::string& path, std::span<const PredictionRow> rows);
/// Re-parse a predictions file; failed rows come back with ok=false.
std::vector<PredictionRow> read_predictions(const std::string& path, const Sidecar& sidecar);

ExperimentSpec load_experiment_spec(const std::string& path);
void write_report_json(const std::string& path, const ExperimentReport& report);
void write_report_csv(const std::string& path, const ExperimentReport& report);

/// Parse a FitOptions JSON payload (keys k, r, seed, bandwidth, jobs, net,
/// grid, grid_file, grid_policy).
FitOptions parse_fit_options(const std::string& json_text);

/// Diagnostic JSON for a projection solver report.
std::string solver_report_json(const SolverReport& report);

}  // namespace dfr
