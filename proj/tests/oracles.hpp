// Test-only oracles, independent of the implementation paths they check.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace oracles {

// All-pairs shortest paths by Floyd-Warshall on a dense weight matrix
// (infinity where no edge, zero diagonal).
inline Eigen::MatrixXd floyd_warshall(Eigen::MatrixXd w) {
  const int n = static_cast<int>(w.rows());
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double cand = w(i, k) + w(k, j);
        if (cand < w(i, j)) w(i, j) = cand;
      }
  return w;
}

// Euclidean projection onto {nondecreasing vectors} by projected gradient in
// the reparameterization x = b + cumsum(deltas), deltas >= 0, run to
// stagnation with a tiny step.
inline std::vector<double> isotonic_projected_gradient(const std::vector<double>& v) {
  const int n = static_cast<int>(v.size());
  double b = v.empty() ? 0.0 : v[0];
  std::vector<double> delta(std::max(0, n - 1), 0.0);
  const double step = 0.02 / std::max(1, n);
  std::vector<double> x(n), grad_x(n);
  double prev_obj = std::numeric_limits<double>::infinity();
  for (long iter = 0; iter < 4000000; ++iter) {
    double acc = b;
    for (int i = 0; i < n; ++i) {
      if (i > 0) acc += delta[i - 1];
      x[i] = acc;
      grad_x[i] = 2.0 * (x[i] - v[i]);
    }
    double grad_b = 0.0;
    for (int i = 0; i < n; ++i) grad_b += grad_x[i];
    b -= step * grad_b;
    double suffix = 0.0;
    for (int i = n - 1; i >= 1; --i) {
      suffix += grad_x[i];
      delta[i - 1] = std::max(0.0, delta[i - 1] - step * suffix);
    }
    if (iter % 2000 == 0) {
      double obj = 0.0;
      for (int i = 0; i < n; ++i) obj += (x[i] - v[i]) * (x[i] - v[i]);
      if (prev_obj - obj < 1e-15) break;
      prev_obj = obj;
    }
  }
  double acc = b;
  for (int i = 0; i < n; ++i) {
    if (i > 0) acc += delta[i - 1];
    x[i] = acc;
  }
  return x;
}

// Frobenius-nearest 3x3 graph Laplacian with off-diagonals in [-w, 0] by
// refined grid search over the three free parameters (a01, a02, a12). The
// objective is convex, so shrinking the grid around the incumbent converges
// to the global minimizer.
inline Eigen::Matrix3d laplacian_grid_search_3x3(const Eigen::Matrix3d& m, double w) {
  auto build = [](double a01, double a02, double a12) {
    Eigen::Matrix3d y;
    y << -(a01 + a02), a01, a02, a01, -(a01 + a12), a12, a02, a12, -(a02 + a12);
    return y;
  };
  auto objective = [&](double a01, double a02, double a12) {
    return (build(a01, a02, a12) - m).squaredNorm();
  };

  double lo0 = -w, hi0 = 0.0, lo1 = -w, hi1 = 0.0, lo2 = -w, hi2 = 0.0;
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
  constexpr int kPoints = 33;
  for (int stage = 0; stage < 12; ++stage) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kPoints; ++i)
      for (int j = 0; j < kPoints; ++j)
        for (int k = 0; k < kPoints; ++k) {
          const double a0 = lo0 + (hi0 - lo0) * i / (kPoints - 1);
          const double a1 = lo1 + (hi1 - lo1) * j / (kPoints - 1);
          const double a2 = lo2 + (hi2 - lo2) * k / (kPoints - 1);
          const double obj = objective(a0, a1, a2);
          if (obj < best) {
            best = obj;
            b0 = a0;
            b1 = a1;
            b2 = a2;
          }
        }
    const double span0 = (hi0 - lo0) / (kPoints - 1) * 2;
    const double span1 = (hi1 - lo1) / (kPoints - 1) * 2;
    const double span2 = (hi2 - lo2) / (kPoints - 1) * 2;
    lo0 = std::max(-w, b0 - span0);
    hi0 = std::min(0.0, b0 + span0);
    lo1 = std::max(-w, b1 - span1);
    hi1 = std::min(0.0, b1 + span1);
    lo2 = std::max(-w, b2 - span2);
    hi2 = std::min(0.0, b2 + span2);
  }
  return build(b0, b1, b2);
}

// Least-squares Procrustes residual: best rigid alignment (rotation and
// translation, reflection allowed) of b onto a, then the RMS mismatch.
inline double procrustes_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::RowVectorXd ca = a.colwise().mean();
  const Eigen::RowVectorXd cb = b.colwise().mean();
  const Eigen::MatrixXd a0 = a.rowwise() - ca;
  const Eigen::MatrixXd b0 = b.rowwise() - cb;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b0.transpose() * a0,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::MatrixXd rot = svd.matrixU() * svd.matrixV().transpose();
  return (b0 * rot - a0).norm() / std::sqrt(static_cast<double>(a.rows()));
}

// Standard normal CDF via erfc, and its inverse by bisection: an oracle for
// the library's quantile routine.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_quantile_bisect(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracles
