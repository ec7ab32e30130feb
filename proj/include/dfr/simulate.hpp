#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dfr/metric_spaces.hpp"
#include "dfr/pipeline.hpp"

namespace dfr {

/// A generated regression dataset: predictors, noisy responses, and the true
/// regression objects m(X_i). For distributional generators the raw samples
/// behind each empirical response are retained, along with the latent
/// (mean, sd) parameters for diagnostics.
struct SimDataset {
  Eigen::MatrixXd predictors;  // n x p
  std::vector<MetricObject> responses;
  std::vector<MetricObject> truths;
  std::vector<std::vector<double>> raw_samples;
  std::vector<std::array<double, 2>> params;  // (eta_i, sigma_i) when applicable
  std::string generator;
  std::uint64_t seed = 0;
  int redraws = 0;  // predictor redraws forced by invalid latent parameters
};

/// Distributional design: nine predictors, Gaussian response distributions
/// with mean eta ~ N(mu(X), 0.5^2) and sd sigma ~ Gamma(theta(X)^2, 1/theta(X));
/// each response enters as the empirical quantile function of 100 draws.
SimDataset gen_distributional(int n, std::uint64_t seed, int grid_size = 101);

/// Network design: nine predictors, d = m(m-1)/2 Beta(alpha1, alpha2) edge
/// weights per response assembled into graph Laplacians with W = 1.
SimDataset gen_network(int n, int nodes, std::uint64_t seed);

/// Perturbed distributional design: twelve predictors, eta ~ N(mu(X), nu^2);
/// nu = 0 gives a noiseless-mean manifold family.
SimDataset gen_perturbed(int n, double nu, std::uint64_t seed, int grid_size = 101);

/// Mean squared distance between aligned prediction/truth lists.
double mspe(std::span<const MetricObject> predictions, std::span<const MetricObject> truths);

struct ExperimentSpec {
  std::string generator = "distributional";  // distributional|network|perturbed
  std::vector<int> sample_sizes{100};
  int runs = 1;  // Monte Carlo replicates per sample size
  std::vector<std::string> methods{"dfr", "gfr"};
  std::uint64_t seed = 0;
  int test_size = 100;
  int nodes = 10;      // network generator
  double nu = 0.0;     // perturbed generator
  int grid_size = 101; // quantile grid
  FitOptions fit;
  int jobs = 1;
};

struct RunResult {
  int n = 0;
  std::string method;
  int run = 0;
  double mspe_value = 0.0;
  double wall_ms = 0.0;
  std::string status;  // "ok", "partial" (some predictions failed), or "failed"
  std::string error;   // stage-labelled message (first failure) when not ok
  int predictions_checked = 0;
  int failed_predictions = 0;
  int invariant_violations = 0;
};

struct Aggregate {
  int n = 0;
  std::string method;
  double amspe = 0.0;
  double mmspe = 0.0;
  int completed = 0;
  int failed = 0;
};

struct ExperimentReport {
  ExperimentSpec spec;
  std::vector<RunResult> runs;
  std::vector<Aggregate> aggregates;
  double wall_ms = 0.0;
};

/// Q Monte Carlo runs per sample size: fresh train set, independent test set,
/// each method fit on the same data. Failures are recorded per run, never
/// aborting the batch. Every emitted prediction is checked against its
/// space's invariants and violations are counted.
ExperimentReport run_experiment(const ExperimentSpec& spec);

/// AMSPE table, sample sizes as rows and methods as columns.
std::string format_table(const ExperimentReport& report);

}  // namespace dfr
