#include "dfr/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "dfr/parallel.hpp"

namespace dfr {

Eigen::MatrixXd pairwise_distances(std::span<const MetricObject> objects, int jobs) {
  const int n = static_cast<int>(objects.size());
  if (n < 2)
    throw Error(ErrorKind::Validation, "manifold", "objects", "need at least two objects");
  for (int i = 1; i < n; ++i)
    if (objects[i].index() != objects[0].index())
      throw Error(ErrorKind::Shape, "manifold", "objects", "objects from different spaces");

  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  parallel_for(jobs, n, [&](int i) {
    for (int j = i + 1; j < n; ++j) d(i, j) = object_distance(objects[i], objects[j]);
  });
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) d(j, i) = d(i, j);
  return d;
}

namespace {

// Union-find for connectivity bookkeeping.
struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

}  // namespace

NeighborGraph knn_graph(const Eigen::MatrixXd& distances, int k) {
  const int n = static_cast<int>(distances.rows());
  if (distances.cols() != n)
    throw Error(ErrorKind::Shape, "manifold", "distances", "matrix must be square");
  if (k < 1 || k >= n)
    throw Error(ErrorKind::Validation, "manifold", "k",
                "neighbor count must satisfy 1 <= k < n (k=" + std::to_string(k) +
                    ", n=" + std::to_string(n) + ")");

  // adjacency as a flag matrix first: edge if either endpoint selects the other
  std::vector<bool> edge(static_cast<std::size_t>(n) * n, false);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), 0);
    // ties broken by lower index: stable sort on distance keeps index order
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return distances(i, a) < distances(i, b); });
    int taken = 0;
    for (int pos = 0; pos < n && taken < k; ++pos) {
      const int j = order[pos];
      if (j == i) continue;
      edge[static_cast<std::size_t>(i) * n + j] = true;
      edge[static_cast<std::size_t>(j) * n + i] = true;
      ++taken;
    }
  }

  NeighborGraph g;
  g.n = n;
  g.k = k;

  DisjointSets components(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (edge[static_cast<std::size_t>(i) * n + j]) components.unite(i, j);

  // bridge disconnected components, shortest inter-component pair first
  for (;;) {
    int best_i = -1, best_j = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        if (components.find(i) == components.find(j)) continue;
        if (distances(i, j) < best_d) {
          best_d = distances(i, j);
          best_i = i;
          best_j = j;
        }
      }
    if (best_i < 0) break;
    edge[static_cast<std::size_t>(best_i) * n + best_j] = true;
    edge[static_cast<std::size_t>(best_j) * n + best_i] = true;
    components.unite(best_i, best_j);
    g.bridges.push_back({best_i, best_j, best_d});
  }

  g.adjacency.resize(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (edge[static_cast<std::size_t>(i) * n + j]) g.adjacency[i].push_back({j, distances(i, j)});
  return g;
}

Eigen::MatrixXd geodesic_distances(const NeighborGraph& graph, int jobs) {
  const int n = graph.n;
  Eigen::MatrixXd d(n, n);
  d.setConstant(std::numeric_limits<double>::infinity());

  parallel_for(jobs, n, [&](int src) {
    using Item = std::pair<double, int>;  // (distance, node)
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    dist[src] = 0.0;
    heap.push({0.0, src});
    while (!heap.empty()) {
      const auto [du, u] = heap.top();
      heap.pop();
      if (du > dist[u]) continue;
      for (const auto& [v, w] : graph.adjacency[u]) {
        const double cand = du + w;
        if (cand < dist[v]) {
          dist[v] = cand;
          heap.push({cand, v});
        }
      }
    }
    for (int j = 0; j < n; ++j) d(src, j) = dist[j];
  });

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (!std::isfinite(d(i, j)))
        throw Error(ErrorKind::Validation, "manifold", "graph",
                    "graph is disconnected; geodesic distances undefined");
  // the graph is undirected, so enforce exact symmetry against roundoff quirks
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = std::min(d(i, j), d(j, i));
      d(i, j) = v;
      d(j, i) = v;
    }
  return d;
}

MdsResult classical_mds(const Eigen::MatrixXd& distances, int r) {
  const int n = static_cast<int>(distances.rows());
  if (distances.cols() != n)
    throw Error(ErrorKind::Shape, "manifold", "distances", "matrix must be square");
  if (r < 1 || r >= n)
    throw Error(ErrorKind::Validation, "manifold", "r",
                "embedding dimension must satisfy 1 <= r < n");

  // B = -1/2 J D^2 J with J = I - 11'/n
  Eigen::MatrixXd b = -0.5 * distances.array().square().matrix();
  const Eigen::VectorXd row_mean = b.rowwise().mean();
  const double total_mean = row_mean.mean();
  b.colwise() -= row_mean;
  b.rowwise() -= row_mean.transpose();
  b.array() += total_mean;
  const Eigen::MatrixXd centered = b;
  b = 0.5 * (centered + centered.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
  if (es.info() != Eigen::Success)
    throw Error(ErrorKind::Numeric, "manifold", "mds", "eigendecomposition failed");

  MdsResult out;
  out.spectrum.resize(n);
  for (int i = 0; i < n; ++i) out.spectrum[i] = es.eigenvalues()(n - 1 - i);

  out.coordinates = Eigen::MatrixXd::Zero(n, r);
  for (int c = 0; c < r; ++c) {
    const double lambda = out.spectrum[c];
    if (lambda <= 0.0) {
      if (lambda < 0.0) out.zero_filled = true;
      continue;  // zero-filled column
    }
    Eigen::VectorXd v = es.eigenvectors().col(n - 1 - c);
    // sign rule: largest-magnitude entry positive (first such index on ties)
    int arg = 0;
    for (int i = 1; i < n; ++i)
      if (std::fabs(v(i)) > std::fabs(v(arg))) arg = i;
    if (v(arg) < 0.0) v = -v;
    out.coordinates.col(c) = std::sqrt(lambda) * v;
  }
  // eigenvectors of the centered operator are mean-zero up to roundoff;
  // make the column centering exact
  out.coordinates.rowwise() -= Eigen::RowVectorXd(out.coordinates.colwise().mean());
  return out;
}

EmbeddingModel isomap(std::span<const MetricObject> objects, int k, int r, int jobs) {
  const int n = static_cast<int>(objects.size());
  if (n < std::max(k + 1, r + 1))
    throw Error(ErrorKind::Validation, "manifold", "n",
                "need at least max(k+1, r+1) objects for isomap");
  const Eigen::MatrixXd ambient = pairwise_distances(objects, jobs);
  NeighborGraph graph = knn_graph(ambient, k);
  Eigen::MatrixXd geo = geodesic_distances(graph, jobs);
  MdsResult mds = classical_mds(geo, r);

  EmbeddingModel model;
  model.coordinates = std::move(mds.coordinates);
  model.intrinsic_dim = r;
  model.neighbors = k;
  model.geodesics = std::move(geo);
  model.spectrum = std::move(mds.spectrum);
  model.bridges = std::move(graph.bridges);
  model.zero_filled = mds.zero_filled;
  return model;
}

}  // namespace dfr
