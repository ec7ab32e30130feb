#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dfr/lfr.hpp"
#include "dfr/manifold.hpp"
#include "dfr/mlp.hpp"

namespace dfr {

enum class GridPolicy { FirstCoordinate, PerCoordinate };

struct FitOptions {
  int k = 10;  // isomap neighbors
  int r = 2;   // embedding dimension
  MlpConfig net;
  std::vector<MlpConfig> grid;  // optional candidates; selected by grid_search
  GridPolicy grid_policy = GridPolicy::FirstCoordinate;
  std::optional<double> bandwidth;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct Provenance {
  std::uint64_t seed = 0;
  std::string predictors_hash;
  std::string responses_hash;
  int k = 0;
  int r = 0;
  double bandwidth = 0.0;
  std::vector<std::uint64_t> net_seeds;
};

/// The fitted composite estimator: isomap embedding of the training responses,
/// one network per embedding coordinate, and a local Frechet regression over
/// the networks' fitted values (not the raw isomap coordinates).
struct DfrModel {
  EmbeddingModel embedding;
  std::vector<Mlp> nets;
  LfrModel lfr;
  Provenance provenance;
};

DfrModel fit_dfr(const Eigen::MatrixXd& x_rows, std::vector<MetricObject> responses,
                 const FitOptions& options);

MetricObject predict_dfr(const DfrModel& model, const Eigen::VectorXd& x,
                         SolverReport* report = nullptr);

/// Global Frechet regression baseline with weights
/// s_i(x) = 1 + (X_i - Xbar)' Sigma^-1 (x - Xbar).
struct GfrModel {
  Eigen::VectorXd x_mean;
  Eigen::MatrixXd x_rows;  // centered predictors
  Eigen::LDLT<Eigen::MatrixXd> sigma_ldlt;
  bool ridged = false;
  std::vector<MetricObject> responses;
};

GfrModel fit_gfr(const Eigen::MatrixXd& x_rows, std::vector<MetricObject> responses);
Eigen::VectorXd gfr_weights(const GfrModel& model, const Eigen::VectorXd& x);
MetricObject predict_gfr(const GfrModel& model, const Eigen::VectorXd& x,
                         SolverReport* report = nullptr);

/// FNV-1a hash of raw double bytes, for provenance records.
std::string hash_matrix(const Eigen::MatrixXd& m);
std::string hash_objects(std::span<const MetricObject> objects);

}  // namespace dfr
