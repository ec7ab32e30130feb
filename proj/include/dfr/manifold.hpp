#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "dfr/metric_spaces.hpp"

namespace dfr {

struct GraphEdge {
  int u;
  int v;
  double weight;
};

/// Union-symmetrized k-nearest-neighbor graph. If the kNN graph comes out
/// disconnected, the shortest inter-component edge is added repeatedly until
/// it is connected; every such addition is recorded in `bridges`.
struct NeighborGraph {
  int n = 0;
  int k = 0;
  std::vector<std::vector<std::pair<int, double>>> adjacency;  // (neighbor, distance)
  std::vector<GraphEdge> bridges;
};

/// ISOMAP output at the training objects: low-dimensional coordinates, the
/// geodesic distance matrix, and the MDS eigenvalue spectrum for diagnostics.
struct EmbeddingModel {
  Eigen::MatrixXd coordinates;  // n x r, column-centered
  int intrinsic_dim = 0;
  int neighbors = 0;
  Eigen::MatrixXd geodesics;       // n x n
  std::vector<double> spectrum;    // nonincreasing MDS eigenvalues
  std::vector<GraphEdge> bridges;  // connectivity repairs, if any
  bool zero_filled = false;        // true if a negative eigenvalue was truncated
};

/// Pairwise distances in the objects' own metric; objects must be homogeneous.
Eigen::MatrixXd pairwise_distances(std::span<const MetricObject> objects, int jobs = 1);

NeighborGraph knn_graph(const Eigen::MatrixXd& distances, int k);

/// All-pairs shortest paths on the neighbor graph, Dijkstra from every source.
Eigen::MatrixXd geodesic_distances(const NeighborGraph& graph, int jobs = 1);

struct MdsResult {
  Eigen::MatrixXd coordinates;   // n x r
  std::vector<double> spectrum;  // all eigenvalues, nonincreasing
  bool zero_filled = false;
};

/// Classical MDS: double-center -1/2 J D^2 J, take the top-r eigenpairs,
/// scale eigenvectors by sqrt(eigenvalue). Sign convention: the entry of
/// largest magnitude in each eigenvector is positive. Negative eigenvalues
/// among the top r produce zero-filled coordinates and set `zero_filled`.
MdsResult classical_mds(const Eigen::MatrixXd& distances, int r);

EmbeddingModel isomap(std::span<const MetricObject> objects, int k, int r, int jobs = 1);

}  // namespace dfr
