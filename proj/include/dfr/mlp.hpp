#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "dfr/common.hpp"
#include "dfr/rng.hpp"

namespace dfr {

struct MlpConfig {
  int hidden_layers = 3;
  int width = 32;
  double dropout = 0.1;          // in [0, 1)
  double learning_rate = 1e-3;   // Adam step size
  int max_epochs = 500;
  int patience = 20;             // consecutive non-improving epochs tolerated
  int batch_size = 32;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochLog {
  double train_risk;
  double validation_risk;
};

struct TrainSplit {
  std::vector<int> train;
  std::vector<int> validation;
};

/// Seeded shuffle split; validation share matches the fraction within one sample.
TrainSplit make_split(int n, double validation_fraction, RngStream rng);

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

/// Feedforward ReLU network with a single linear output. Weight l maps layer
/// activations of width dims[l] to dims[l+1]; the last layer is affine.
class Mlp {
 public:
  Mlp() = default;
  /// Zero-initialized network with the given layer dims (input, hidden..., 1).
  explicit Mlp(std::vector<int> dims);

  /// Evaluation-mode output, deterministic.
  double predict(const Eigen::VectorXd& x) const;
  Eigen::VectorXd predict_rows(const Eigen::MatrixXd& x_rows) const;

  /// Single-point forward pass; in train mode hidden activations are dropped
  /// with the configured rate and survivors scaled by 1/(1-rate) (inverted
  /// dropout), consuming masks from `rng`.
  double forward(const Eigen::VectorXd& x, bool train_mode, RngStream* rng) const;

  /// Mean squared error over the batch (rows of x) and exact gradients of all
  /// weights and biases. Dropout is off here; training uses the internal path.
  std::pair<double, Gradients> loss_and_grad(const Eigen::MatrixXd& x_rows,
                                             const Eigen::VectorXd& z) const;

  int input_dim() const { return dims_.empty() ? 0 : dims_.front(); }
  const std::vector<int>& dims() const { return dims_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }
  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }

  const MlpConfig& config() const { return config_; }
  const std::vector<EpochLog>& training_log() const { return log_; }
  int best_epoch() const { return best_epoch_; }

  friend Mlp train_mlp(const Eigen::MatrixXd&, const Eigen::VectorXd&, const MlpConfig&);
  friend class MlpSerializer;

 private:
  std::vector<int> dims_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
  MlpConfig config_;
  std::vector<EpochLog> log_;
  int best_epoch_ = -1;
  double dropout_rate_ = 0.0;
};

/// Adam-trained network with early stopping on a held-out validation split;
/// returns the parameters from the best validation epoch.
Mlp train_mlp(const Eigen::MatrixXd& x_rows, const Eigen::VectorXd& z, const MlpConfig& config);

/// Train every candidate and return the one with minimal validation risk;
/// ties broken by earlier position in the grid. Candidates are independent
/// and train in parallel across `jobs` workers.
MlpConfig grid_search(const Eigen::MatrixXd& x_rows, const Eigen::VectorXd& z,
                      std::span<const MlpConfig> candidates, int jobs = 1);

}  // namespace dfr
