#include "dfr/metric_spaces.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dfr {

namespace {
constexpr double kRowSumTol = 1e-10;
constexpr double kPsdTol = 1e-10;

void require_finite(std::span<const double> xs, const char* field) {
  for (double x : xs)
    if (!std::isfinite(x))
      throw Error(ErrorKind::Numeric, "metric_spaces", field, "non-finite entry");
}
}  // namespace

std::string space_name(Space s) {
  switch (s) {
    case Space::Wasserstein: return "wasserstein";
    case Space::Laplacian: return "laplacian";
    case Space::Covariance: return "covariance";
  }
  return "unknown";
}

Space space_from_name(const std::string& name) {
  if (name == "wasserstein") return Space::Wasserstein;
  if (name == "laplacian") return Space::Laplacian;
  if (name == "covariance") return Space::Covariance;
  throw Error(ErrorKind::Validation, "metric_spaces", "space",
              "unknown space '" + name + "' (expected wasserstein|laplacian|covariance)");
}

ProbGrid ProbGrid::of(int g) {
  if (g < 1)
    throw Error(ErrorKind::Validation, "metric_spaces", "grid_size",
                "grid size must be positive, got " + std::to_string(g));
  return ProbGrid{g};
}

Space object_space(const MetricObject& obj) {
  if (std::holds_alternative<QuantileFunction>(obj)) return Space::Wasserstein;
  if (std::holds_alternative<GraphLaplacian>(obj)) return Space::Laplacian;
  return Space::Covariance;
}

void check_invariants(const QuantileFunction& q) {
  if (q.grid.size < 1 || static_cast<int>(q.values.size()) != q.grid.size)
    throw Error(ErrorKind::Shape, "metric_spaces", "quantile",
                "value count does not match grid size");
  require_finite(q.values, "quantile");
  for (int k = 0; k + 1 < q.grid.size; ++k)
    if (q.values[k] > q.values[k + 1])
      throw Error(ErrorKind::Validation, "metric_spaces", "quantile",
                  "quantile values must be nondecreasing");
  if (q.support) {
    if (q.support->lo > q.support->hi)
      throw Error(ErrorKind::Validation, "metric_spaces", "support", "inverted support bounds");
    if (q.values.front() < q.support->lo || q.values.back() > q.support->hi)
      throw Error(ErrorKind::Validation, "metric_spaces", "quantile",
                  "values exceed the declared support");
  }
}

void check_invariants(const GraphLaplacian& y) {
  const int m = y.nodes;
  if (m < 1 || y.entries.rows() != m || y.entries.cols() != m)
    throw Error(ErrorKind::Shape, "metric_spaces", "laplacian", "entry matrix is not m x m");
  if (!(y.weight_bound > 0.0))
    throw Error(ErrorKind::Validation, "metric_spaces", "weight_bound",
                "weight bound must be positive");
  if (!y.entries.allFinite())
    throw Error(ErrorKind::Numeric, "metric_spaces", "laplacian", "non-finite entry");
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (y.entries(i, j) != y.entries(j, i))
        throw Error(ErrorKind::Validation, "metric_spaces", "laplacian", "matrix not symmetric");
      if (i != j && (y.entries(i, j) > 0.0 || y.entries(i, j) < -y.weight_bound))
        throw Error(ErrorKind::Validation, "metric_spaces", "laplacian",
                    "off-diagonal entry outside [-W, 0]");
    }
    if (std::fabs(y.entries.row(i).sum()) > kRowSumTol)
      throw Error(ErrorKind::Validation, "metric_spaces", "laplacian",
                  "row sum exceeds tolerance");
  }
}

void check_invariants(const CovMatrix& c) {
  const int m = c.dim;
  if (m < 1 || c.entries.rows() != m || c.entries.cols() != m)
    throw Error(ErrorKind::Shape, "metric_spaces", "covariance", "entry matrix is not m x m");
  if (!c.entries.allFinite())
    throw Error(ErrorKind::Numeric, "metric_spaces", "covariance", "non-finite entry");
  if (!c.entries.isApprox(c.entries.transpose(), 0.0))
    throw Error(ErrorKind::Validation, "metric_spaces", "covariance", "matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.entries, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw Error(ErrorKind::Numeric, "metric_spaces", "covariance", "eigendecomposition failed");
  if (es.eigenvalues().minCoeff() < -kPsdTol)
    throw Error(ErrorKind::Validation, "metric_spaces", "covariance",
                "matrix is not positive semidefinite");
  if (c.diag_bound && c.entries.diagonal().maxCoeff() > *c.diag_bound + 1e-12)
    throw Error(ErrorKind::Validation, "metric_spaces", "covariance",
                "diagonal entry exceeds the bound");
}

void check_invariants(const MetricObject& obj) {
  std::visit([](const auto& o) { check_invariants(o); }, obj);
}

bool satisfies_invariants(const MetricObject& obj, std::string* why) {
  try {
    check_invariants(obj);
    return true;
  } catch (const Error& e) {
    if (why) *why = e.what();
    return false;
  }
}

double wasserstein_distance(const QuantileFunction& a, const QuantileFunction& b) {
  if (a.grid != b.grid)
    throw Error(ErrorKind::Shape, "metric_spaces", "grid",
                "quantile functions live on different grids");
  double acc = 0.0;
  for (int k = 0; k < a.grid.size; ++k) {
    const double d = a.values[k] - b.values[k];
    acc += d * d;
  }
  return std::sqrt(acc / a.grid.size);
}

double frobenius_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorKind::Shape, "metric_spaces", "matrix", "dimension mismatch");
  return (a - b).norm();
}

double object_distance(const MetricObject& a, const MetricObject& b) {
  if (a.index() != b.index())
    throw Error(ErrorKind::Shape, "metric_spaces", "object",
                "objects from different metric spaces");
  if (const auto* qa = std::get_if<QuantileFunction>(&a))
    return wasserstein_distance(*qa, std::get<QuantileFunction>(b));
  if (const auto* la = std::get_if<GraphLaplacian>(&a))
    return frobenius_distance(la->entries, std::get<GraphLaplacian>(b).entries);
  return frobenius_distance(std::get<CovMatrix>(a).entries, std::get<CovMatrix>(b).entries);
}

QuantileFunction quantile_from_samples(std::span<const double> samples, ProbGrid grid,
                                       std::optional<Bounds> support) {
  if (samples.empty())
    throw Error(ErrorKind::Validation, "metric_spaces", "samples", "empty sample");
  require_finite(samples, "samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const int n = static_cast<int>(sorted.size());

  QuantileFunction out;
  out.grid = grid;
  out.support = support;
  out.values.resize(grid.size);
  for (int k = 0; k < grid.size; ++k) {
    const double pos = grid.point(k) * n - 0.5;  // x_(i) sits at p = (i-0.5)/n
    if (pos <= 0.0) {
      out.values[k] = sorted.front();
    } else if (pos >= n - 1) {
      out.values[k] = sorted.back();
    } else {
      const int lo = static_cast<int>(pos);
      const double frac = pos - lo;
      out.values[k] = sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
    }
    if (support) out.values[k] = std::clamp(out.values[k], support->lo, support->hi);
  }
  return out;
}

GraphLaplacian laplacian_from_edges(std::span<const WeightedEdge> edges, int nodes,
                                    double weight_bound) {
  if (nodes < 1)
    throw Error(ErrorKind::Validation, "metric_spaces", "nodes", "need at least one node");
  if (!(weight_bound > 0.0))
    throw Error(ErrorKind::Validation, "metric_spaces", "weight_bound",
                "weight bound must be positive");
  GraphLaplacian y;
  y.nodes = nodes;
  y.weight_bound = weight_bound;
  y.entries = Eigen::MatrixXd::Zero(nodes, nodes);
  std::vector<bool> seen(static_cast<std::size_t>(nodes) * nodes, false);
  for (const auto& e : edges) {
    if (e.i < 0 || e.j < 0 || e.i >= nodes || e.j >= nodes)
      throw Error(ErrorKind::Validation, "metric_spaces", "edge", "node index out of range");
    if (e.i == e.j)
      throw Error(ErrorKind::Validation, "metric_spaces", "edge", "self loops not allowed");
    if (!(e.weight >= 0.0) || e.weight > weight_bound) {
      std::ostringstream msg;
      msg << "edge weight " << e.weight << " outside [0, " << weight_bound << "]";
      throw Error(ErrorKind::Validation, "metric_spaces", "edge", msg.str());
    }
    const std::size_t key = static_cast<std::size_t>(std::min(e.i, e.j)) * nodes +
                            static_cast<std::size_t>(std::max(e.i, e.j));
    if (seen[key])
      throw Error(ErrorKind::Validation, "metric_spaces", "edge", "duplicate edge");
    seen[key] = true;
    y.entries(e.i, e.j) = -e.weight;
    y.entries(e.j, e.i) = -e.weight;
  }
  for (int i = 0; i < nodes; ++i) y.entries(i, i) = -y.entries.row(i).sum();
  return y;
}

}  // namespace dfr
