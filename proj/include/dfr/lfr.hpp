#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dfr/metric_spaces.hpp"
#include "dfr/projections.hpp"

namespace dfr {

enum class KernelFamily { Epanechnikov };

/// Kernel with one shared bandwidth across all embedding coordinates
/// (isotropic H = h I_r). The product Epanechnikov kernel is compactly
/// supported on [-1, 1]^r, so points further than h in any coordinate get
/// exactly zero weight.
struct KernelSpec {
  KernelFamily family = KernelFamily::Epanechnikov;
  double bandwidth = 0.0;
};

/// Unit-bandwidth product Epanechnikov kernel prod_j 0.75 (1 - u_j^2) 1{|u_j|<=1}.
double kernel_value(const Eigen::VectorXd& u);

/// K_h(v) = h^-r K(v / h).
double kernel_scaled(const KernelSpec& spec, const Eigen::VectorXd& v);

struct LocalMoments {
  double mu0 = 0.0;
  Eigen::VectorXd mu1;
  Eigen::MatrixXd mu2;
  Eigen::VectorXd mu2inv_mu1;  // solved with the ridged mu2
  double sigma0_sq = 0.0;      // mu0 - mu1' mu2^-1 mu1
};

/// Kernel-weighted moments of (Z_i - z) up to order two; mu2 is ridged by
/// 1e-10 * trace/r before inversion.
LocalMoments local_moments(const Eigen::MatrixXd& z_rows, const Eigen::VectorXd& z,
                           const KernelSpec& spec);

/// Local-linear weights; mean one and zero weighted first moment hold by
/// construction. Weights may be negative.
Eigen::VectorXd lfr_weights(const Eigen::MatrixXd& z_rows, const Eigen::VectorXd& z,
                            const KernelSpec& spec);

/// Local Frechet regression model over estimated predictor coordinates.
struct LfrModel {
  Eigen::MatrixXd embeddings;  // n x r
  std::vector<MetricObject> responses;
  KernelSpec kernel;
};

/// (1/n) sum_i w_i rep(Y_i) in the space's linear representation, then the
/// space's projection. Shared by local and global Frechet regression.
MetricObject project_weighted_average(std::span<const MetricObject> responses,
                                      const Eigen::VectorXd& weights,
                                      SolverReport* report = nullptr);

/// Weighted average of the responses' linear representations followed by the
/// metric space's projection.
MetricObject lfr_predict(const LfrModel& model, const Eigen::VectorXd& z,
                         SolverReport* report = nullptr);

/// h = 10% of the largest per-coordinate range of the embeddings.
KernelSpec default_bandwidth(const Eigen::MatrixXd& z_rows);

}  // namespace dfr
