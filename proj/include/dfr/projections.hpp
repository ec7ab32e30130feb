#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "dfr/metric_spaces.hpp"

namespace dfr {

/// A grid function that need not be monotone yet: the kernel-weighted average
/// of quantile vectors before projection.
struct RawGridFunction {
  ProbGrid grid;
  std::vector<double> values;
  std::optional<Bounds> support;
};

struct SolverReport {
  int iterations = 0;
  double residual = 0.0;
  bool converged = true;
};

/// Pool-adjacent-violators over the values (uniform weights), then clip to the
/// support. Exact Euclidean projection onto {nondecreasing} intersected with
/// the box; clipping after PAVA yields the joint minimizer.
QuantileFunction project_monotone(const RawGridFunction& raw);

/// In-place isotonic regression of a plain vector (building block, exposed for
/// reuse and testing).
void isotonic_fit(std::span<double> values);

/// Frobenius-nearest graph Laplacian via Dykstra's alternating projections
/// over {symmetric}, {off-diagonal in [-W, 0]}, {rows sum to zero}.
GraphLaplacian project_laplacian(const Eigen::MatrixXd& m, double weight_bound,
                                 SolverReport* report = nullptr, double tol = 1e-8,
                                 int max_sweeps = 10000);

/// Nearest PSD matrix: symmetrize, clip negative eigenvalues to zero. With a
/// diagonal bound, alternate eigenvalue clipping and diagonal clipping until
/// the iterates stagnate.
CovMatrix project_psd(const Eigen::MatrixXd& m, std::optional<double> diag_bound = std::nullopt,
                      SolverReport* report = nullptr);

}  // namespace dfr
