#include "dfr/pipeline.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "dfr/parallel.hpp"

namespace dfr {

namespace {

std::uint64_t fnv1a_bytes(const void* data, std::size_t len, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ull;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

constexpr std::uint64_t kFnvOffset = 0xCBF29CE484222325ull;

}  // namespace

std::string hash_matrix(const Eigen::MatrixXd& m) {
  std::uint64_t h = kFnvOffset;
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const double v = m(r, c);
      h = fnv1a_bytes(&v, sizeof v, h);
    }
  return hex64(h);
}

std::string hash_objects(std::span<const MetricObject> objects) {
  std::uint64_t h = kFnvOffset;
  auto mix = [&](double v) { h = fnv1a_bytes(&v, sizeof v, h); };
  for (const auto& obj : objects) {
    if (const auto* q = std::get_if<QuantileFunction>(&obj)) {
      for (double v : q->values) mix(v);
    } else if (const auto* l = std::get_if<GraphLaplacian>(&obj)) {
      for (Eigen::Index c = 0; c < l->entries.cols(); ++c)
        for (Eigen::Index r = 0; r < l->entries.rows(); ++r) mix(l->entries(r, c));
    } else {
      const auto& cm = std::get<CovMatrix>(obj);
      for (Eigen::Index c = 0; c < cm.entries.cols(); ++c)
        for (Eigen::Index r = 0; r < cm.entries.rows(); ++r) mix(cm.entries(r, c));
    }
  }
  return hex64(h);
}

DfrModel fit_dfr(const Eigen::MatrixXd& x_rows, std::vector<MetricObject> responses,
                 const FitOptions& options) {
  const int n = static_cast<int>(x_rows.rows());
  if (n != static_cast<int>(responses.size()))
    throw Error(ErrorKind::Shape, "pipeline", "responses",
                "predictor rows and response count differ");
  if (n < std::max({options.k + 1, options.r + 1, 10}))
    throw Error(ErrorKind::Validation, "pipeline", "n",
                "need at least max(k+1, r+1, 10) training pairs");

  DfrModel model;
  model.provenance.seed = options.seed;
  model.provenance.k = options.k;
  model.provenance.r = options.r;
  model.provenance.predictors_hash = hash_matrix(x_rows);
  model.provenance.responses_hash = hash_objects(responses);

  model.embedding = isomap(responses, options.k, options.r, options.jobs);

  RngStream root = RngStream::root(options.seed);

  // Per-coordinate network configs, via grid search when a grid is given.
  std::vector<MlpConfig> configs(options.r, options.net);
  if (!options.grid.empty()) {
    auto searched = [&](int coordinate) {
      std::vector<MlpConfig> candidates = options.grid;
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        RngStream s = root.child("grid", static_cast<std::uint64_t>(coordinate) * 10007 + c);
        candidates[c].seed = s.next_u64();
      }
      return grid_search(x_rows, model.embedding.coordinates.col(coordinate), candidates,
                         options.jobs);
    };
    if (options.grid_policy == GridPolicy::FirstCoordinate) {
      const MlpConfig chosen = searched(0);
      configs.assign(options.r, chosen);
    } else {
      for (int j = 0; j < options.r; ++j) configs[j] = searched(j);
    }
  }
  for (int j = 0; j < options.r; ++j) {
    RngStream s = root.child("net", j);
    configs[j].seed = s.next_u64();
    model.provenance.net_seeds.push_back(configs[j].seed);
  }

  model.nets.resize(options.r);
  parallel_for(options.jobs, options.r, [&](int j) {
    model.nets[j] = train_mlp(x_rows, model.embedding.coordinates.col(j), configs[j]);
  });

  // LFR predictors are the fitted values g_hat(X_i), the errors-in-variables design.
  Eigen::MatrixXd fitted(n, options.r);
  for (int j = 0; j < options.r; ++j) fitted.col(j) = model.nets[j].predict_rows(x_rows);

  model.lfr.embeddings = std::move(fitted);
  model.lfr.responses = std::move(responses);
  if (options.bandwidth) {
    if (!(*options.bandwidth > 0.0))
      throw Error(ErrorKind::Validation, "pipeline", "bandwidth", "bandwidth must be positive");
    model.lfr.kernel = KernelSpec{KernelFamily::Epanechnikov, *options.bandwidth};
  } else {
    model.lfr.kernel = default_bandwidth(model.lfr.embeddings);
  }
  model.provenance.bandwidth = model.lfr.kernel.bandwidth;
  return model;
}

MetricObject predict_dfr(const DfrModel& model, const Eigen::VectorXd& x, SolverReport* report) {
  if (model.nets.empty())
    throw Error(ErrorKind::Validation, "pipeline", "model", "model has no networks");
  Eigen::VectorXd z(model.nets.size());
  for (std::size_t j = 0; j < model.nets.size(); ++j) z(j) = model.nets[j].predict(x);
  try {
    return lfr_predict(model.lfr, z, report);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Bandwidth) throw;
    std::ostringstream msg;
    msg << "query embedding (";
    for (Eigen::Index j = 0; j < z.size(); ++j) msg << (j ? ", " : "") << z(j);
    msg << ") out of reach: " << e.what();
    throw Error(ErrorKind::Bandwidth, "pipeline", "x", msg.str());
  }
}

GfrModel fit_gfr(const Eigen::MatrixXd& x_rows, std::vector<MetricObject> responses) {
  const int n = static_cast<int>(x_rows.rows());
  const int p = static_cast<int>(x_rows.cols());
  if (n != static_cast<int>(responses.size()))
    throw Error(ErrorKind::Shape, "pipeline", "responses",
                "predictor rows and response count differ");
  if (n < 2) throw Error(ErrorKind::Validation, "pipeline", "n", "need at least two pairs");

  GfrModel model;
  model.x_mean = x_rows.colwise().mean();
  model.x_rows = x_rows.rowwise() - model.x_mean.transpose();
  Eigen::MatrixXd sigma = (model.x_rows.transpose() * model.x_rows) / n;

  // Ridge only when the plain factorization is numerically unusable, so the
  // weight identities hold to machine precision in the regular case.
  const double scale = sigma.trace() / p;
  model.sigma_ldlt.compute(sigma);
  const bool ok = model.sigma_ldlt.info() == Eigen::Success && scale > 0.0 &&
                  model.sigma_ldlt.vectorD().minCoeff() > 1e-12 * scale;
  if (!ok) {
    model.ridged = true;
    sigma += (1e-8 * scale) * Eigen::MatrixXd::Identity(p, p);
    model.sigma_ldlt.compute(sigma);
    if (model.sigma_ldlt.info() != Eigen::Success || scale <= 0.0 ||
        model.sigma_ldlt.vectorD().minCoeff() <= 0.0)
      throw Error(ErrorKind::Validation, "pipeline", "predictors",
                  "singular predictor covariance even after ridge");
  }
  model.responses = std::move(responses);
  return model;
}

Eigen::VectorXd gfr_weights(const GfrModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.x_mean.size())
    throw Error(ErrorKind::Shape, "pipeline", "x", "predictor length mismatch");
  const Eigen::VectorXd dir = model.sigma_ldlt.solve(x - model.x_mean);
  return Eigen::VectorXd::Ones(model.x_rows.rows()) + model.x_rows * dir;
}

MetricObject predict_gfr(const GfrModel& model, const Eigen::VectorXd& x, SolverReport* report) {
  return project_weighted_average(model.responses, gfr_weights(model, x), report);
}

}  // namespace dfr
