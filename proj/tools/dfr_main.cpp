// dfr: fit, predict, and simulate deep Frechet regression models from the
// command line. All domain work goes through the shared library's C API.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dfr.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int report_failure() {
  std::cerr << dfr_last_error() << "\n";
  const int status = dfr_last_status();
  return status == DFR_OK ? DFR_ERR_RUNTIME : status;
}

struct FitArgs {
  std::string space;
  std::string predictors;
  std::string responses;
  std::string sidecar;
  std::string out;
  std::string grid_file;
  std::string config_file;
  int k = 10;
  int r = 2;
  double bandwidth = 0.0;
  std::uint64_t seed = 0;
  int jobs = 0;
};

json fit_options_json(const FitArgs& args) {
  json options;
  if (!args.config_file.empty()) {
    std::ifstream in(args.config_file);
    if (!in) {
      std::cerr << "ERROR:cli:config: cannot open '" << args.config_file << "'\n";
      std::exit(DFR_ERR_VALIDATION);
    }
    try {
      in >> options;
    } catch (const json::exception& e) {
      std::cerr << "ERROR:cli:config: invalid JSON: " << e.what() << "\n";
      std::exit(DFR_ERR_VALIDATION);
    }
  }
  // flags override the config file
  options["k"] = args.k;
  options["r"] = args.r;
  options["seed"] = args.seed;
  options["jobs"] = args.jobs;
  if (args.bandwidth > 0.0) options["bandwidth"] = args.bandwidth;
  if (!args.grid_file.empty()) options["grid_file"] = args.grid_file;
  return options;
}

int run_fit(const FitArgs& args) {
  if (!args.space.empty() && args.space != "wasserstein" && args.space != "laplacian" &&
      args.space != "covariance") {
    std::cerr << "ERROR:cli:space: expected wasserstein|laplacian|covariance, got '" << args.space
              << "'\n";
    return DFR_ERR_VALIDATION;
  }
  dfr_dataset* data =
      dfr_dataset_open(args.predictors.c_str(), args.responses.c_str(), args.sidecar.c_str());
  if (!data) return report_failure();
  const std::string options = fit_options_json(args).dump();
  dfr_model* model = dfr_fit(data, options.c_str());
  dfr_dataset_close(data);
  if (!model) return report_failure();
  const int rc = dfr_model_save(model, args.out.c_str());
  dfr_model_close(model);
  if (rc != DFR_OK) return report_failure();
  std::cout << "model written to " << args.out << "\n";
  return DFR_OK;
}

int run_predict(const std::string& model_dir, const std::string& x_csv,
                const std::string& out_path) {
  dfr_model* model = dfr_model_open(model_dir.c_str());
  if (!model) return report_failure();
  const int rc = dfr_predict_file(model, x_csv.c_str(), out_path.c_str());
  dfr_model_close(model);
  if (rc != DFR_OK) return report_failure();
  std::cout << "predictions written to " << out_path << "\n";
  return DFR_OK;
}

int run_simulate(const std::string& spec_path, const std::string& out_dir, int jobs,
                 std::uint64_t seed, bool seed_set) {
  // optional overrides are applied by rewriting the spec into the output dir
  std::string effective_spec = spec_path;
  fs::create_directories(out_dir);
  if (jobs > 0 || seed_set) {
    std::ifstream in(spec_path);
    if (!in) {
      std::cerr << "ERROR:cli:spec: cannot open '" << spec_path << "'\n";
      return DFR_ERR_VALIDATION;
    }
    json spec;
    try {
      in >> spec;
    } catch (const json::exception& e) {
      std::cerr << "ERROR:cli:spec: invalid JSON: " << e.what() << "\n";
      return DFR_ERR_VALIDATION;
    }
    if (jobs > 0) spec["jobs"] = jobs;
    if (seed_set) spec["seed"] = seed;
    effective_spec = (fs::path(out_dir) / "spec.effective.json").string();
    std::ofstream out(effective_spec);
    out << spec.dump(2) << "\n";
  }

  const std::string report_json = (fs::path(out_dir) / "report.json").string();
  const std::string report_csv = (fs::path(out_dir) / "report.csv").string();
  char* table = nullptr;
  const int rc =
      dfr_simulate_file(effective_spec.c_str(), report_json.c_str(), report_csv.c_str(), &table);
  if (rc != DFR_OK) return report_failure();
  if (table) {
    std::cout << table;
    dfr_string_free(table);
  }
  std::cout << "report written to " << report_json << " and " << report_csv << "\n";
  return DFR_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deep Frechet regression: metric-space responses on Euclidean predictors"};
  app.require_subcommand(1);

  FitArgs fit;
  CLI::App* cmd_fit = app.add_subcommand("fit", "fit a model from CSV data");
  cmd_fit->add_option("--space", fit.space, "wasserstein|laplacian|covariance (sidecar wins)");
  cmd_fit->add_option("--predictors", fit.predictors, "predictors CSV (n rows, p columns)")
      ->required();
  cmd_fit->add_option("--responses", fit.responses, "responses CSV file or directory")
      ->required();
  cmd_fit->add_option("--sidecar", fit.sidecar, "JSON shape sidecar")->required();
  cmd_fit->add_option("--out", fit.out, "output model directory")->required();
  cmd_fit->add_option("--k", fit.k, "isomap neighbor count");
  cmd_fit->add_option("--r", fit.r, "embedding dimension");
  cmd_fit->add_option("--bandwidth", fit.bandwidth, "LFR bandwidth override");
  cmd_fit->add_option("--seed", fit.seed, "master seed");
  cmd_fit->add_option("--grid", fit.grid_file, "network config grid JSON");
  cmd_fit->add_option("--config", fit.config_file, "full fit-options JSON (flags override)");
  cmd_fit->add_option("--jobs", fit.jobs, "worker threads (0 = all cores)");

  std::string model_dir, x_csv, pred_out;
  CLI::App* cmd_predict = app.add_subcommand("predict", "predict objects for new predictors");
  cmd_predict->add_option("--model", model_dir, "model bundle directory")->required();
  cmd_predict->add_option("--x", x_csv, "predictor rows CSV")->required();
  cmd_predict->add_option("--out", pred_out, "output predictions CSV")->required();

  std::string spec_path, sim_out = "experiment";
  int sim_jobs = 0;
  std::uint64_t sim_seed = 0;
  bool sim_seed_set = false;
  CLI::App* cmd_sim = app.add_subcommand("simulate", "run a Monte Carlo experiment");
  cmd_sim->add_option("--spec", spec_path, "experiment spec JSON")->required();
  cmd_sim->add_option("--out", sim_out, "output directory for report files");
  cmd_sim->add_option("--jobs", sim_jobs, "worker threads (0 = all cores)");
  cmd_sim->add_option("--seed", sim_seed, "master seed override")
      ->each([&](const std::string&) { sim_seed_set = true; });

  CLI11_PARSE(app, argc, argv);

  if (cmd_fit->parsed()) return run_fit(fit);
  if (cmd_predict->parsed()) return run_predict(model_dir, x_csv, pred_out);
  if (cmd_sim->parsed()) return run_simulate(spec_path, sim_out, sim_jobs, sim_seed, sim_seed_set);
  return DFR_ERR_RUNTIME;
}
