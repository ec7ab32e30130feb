#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dfr/common.hpp"

namespace dfr {

enum class Space { Wasserstein, Laplacian, Covariance };

std::string space_name(Space s);
Space space_from_name(const std::string& name);

/// Midpoint probability grid p_k = (k - 0.5)/G, k = 1..G. Avoids the endpoints
/// 0 and 1 where quantile functions may be unbounded.
struct ProbGrid {
  int size = 0;

  static ProbGrid of(int g);
  double point(int k) const { return (k + 0.5) / size; }  // 0-indexed
  bool operator==(const ProbGrid&) const = default;
};

struct Bounds {
  double lo;
  double hi;
};

/// A one-dimensional distribution stored as its quantile values on a ProbGrid.
/// The 2-Wasserstein metric is the L2 distance between these vectors.
struct QuantileFunction {
  ProbGrid grid;
  std::vector<double> values;
  std::optional<Bounds> support;
};

/// Graph Laplacian of an undirected weighted network: symmetric, zero row
/// sums, off-diagonal entries in [-W, 0].
struct GraphLaplacian {
  int nodes = 0;
  Eigen::MatrixXd entries;
  double weight_bound = 1.0;
};

/// Covariance matrix, optionally with a bound on the diagonal entries.
struct CovMatrix {
  int dim = 0;
  Eigen::MatrixXd entries;
  std::optional<double> diag_bound;
};

using MetricObject = std::variant<QuantileFunction, GraphLaplacian, CovMatrix>;

Space object_space(const MetricObject& obj);

/// Throwing invariant checks (stage "metric_spaces"). The noexcept variants
/// report instead of throwing, for validity sweeps.
void check_invariants(const QuantileFunction& q);
void check_invariants(const GraphLaplacian& y);
void check_invariants(const CovMatrix& c);
void check_invariants(const MetricObject& obj);
bool satisfies_invariants(const MetricObject& obj, std::string* why = nullptr);

/// Midpoint-rule Wasserstein distance sqrt((1/G) sum_k (q1_k - q2_k)^2).
double wasserstein_distance(const QuantileFunction& a, const QuantileFunction& b);

double frobenius_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Distance in the object's own metric; both objects must share variant and shape.
double object_distance(const MetricObject& a, const MetricObject& b);

/// Empirical quantile function of a sample: order statistic x_(i) placed at
/// probability (i - 0.5)/N, linear interpolation between, clamped outside.
QuantileFunction quantile_from_samples(std::span<const double> samples, ProbGrid grid,
                                       std::optional<Bounds> support = std::nullopt);

struct WeightedEdge {
  int i;  // 0-based node indices
  int j;
  double weight;
};

/// Build a graph Laplacian from an edge list: y_ij = -weight off-diagonal,
/// diagonal chosen so every row sums to zero.
GraphLaplacian laplacian_from_edges(std::span<const WeightedEdge> edges, int nodes,
                                    double weight_bound);

}  // namespace dfr
