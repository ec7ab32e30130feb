#include "dfr/lfr.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace dfr {

double kernel_value(const Eigen::VectorXd& u) {
  double k = 1.0;
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    const double a = std::fabs(u(j));
    if (a >= 1.0) return 0.0;
    k *= 0.75 * (1.0 - u(j) * u(j));
  }
  return k;
}

double kernel_scaled(const KernelSpec& spec, const Eigen::VectorXd& v) {
  if (!(spec.bandwidth > 0.0))
    throw Error(ErrorKind::Validation, "lfr", "bandwidth", "bandwidth must be positive");
  const double h = spec.bandwidth;
  return kernel_value(v / h) / std::pow(h, static_cast<double>(v.size()));
}

LocalMoments local_moments(const Eigen::MatrixXd& z_rows, const Eigen::VectorXd& z,
                           const KernelSpec& spec) {
  const int n = static_cast<int>(z_rows.rows());
  const int r = static_cast<int>(z_rows.cols());
  if (z.size() != r)
    throw Error(ErrorKind::Shape, "lfr", "z", "query dimension does not match embeddings");
  if (n < 1) throw Error(ErrorKind::Validation, "lfr", "embeddings", "no training points");

  LocalMoments m;
  m.mu1 = Eigen::VectorXd::Zero(r);
  m.mu2 = Eigen::MatrixXd::Zero(r, r);
  int in_reach = 0;
  double mass = 0.0, mass_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd diff = z_rows.row(i).transpose() - z;
    const double k = kernel_scaled(spec, diff);
    if (k == 0.0) continue;
    ++in_reach;
    mass += k;
    mass_sq += k * k;
    m.mu0 += k;
    m.mu1 += k * diff;
    m.mu2 += k * diff * diff.transpose();
  }
  if (in_reach == 0) {
    std::ostringstream msg;
    msg << "no training point within bandwidth " << spec.bandwidth
        << " of the query; increase the bandwidth";
    throw Error(ErrorKind::Bandwidth, "lfr", "z", msg.str());
  }
  m.mu0 /= n;
  m.mu1 /= n;
  m.mu2 /= n;

  if (m.mu1.isZero(0.0)) {
    // exactly centered design: the linear correction vanishes identically
    m.mu2inv_mu1 = Eigen::VectorXd::Zero(r);
    m.sigma0_sq = m.mu0;
    return m;
  }

  // local-linear weights need at least r+1 points' worth of kernel mass;
  // (sum K)^2 / sum K^2 is that count weighted by the kernel, and equals the
  // raw count for equal weights
  const double effective = mass * mass / mass_sq;
  if (effective < r + 1) {
    std::ostringstream msg;
    msg << "local design within bandwidth " << spec.bandwidth
        << " of the query carries the weight of only " << effective << " points; " << (r + 1)
        << " are needed for " << r
        << "-dimensional local-linear weights; increase the bandwidth";
    throw Error(ErrorKind::Bandwidth, "lfr", "z", msg.str());
  }

  const double ridge = 1e-10 * m.mu2.trace() / r;
  const Eigen::MatrixXd ridged = m.mu2 + ridge * Eigen::MatrixXd::Identity(r, r);
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(ridged);

  // Iteratively refine the ridged solve toward the unridged system. Each
  // candidate is scored by the weight-identity error it can achieve: the
  // exact first-moment residual |mu1 - mu2 t|/sigma0^2 plus the fp noise
  // floor of the mean identity. Refinement sharpens well-conditioned solves;
  // near-singular local designs keep the ridged solution, whose sigma0^2
  // stays bounded away from zero.
  auto sigma_of = [&](const Eigen::VectorXd& t) { return m.mu0 - m.mu1.dot(t); };
  auto score_of = [&](const Eigen::VectorXd& t) {
    const double sigma = sigma_of(t);
    if (!(sigma > 0.0)) return std::numeric_limits<double>::infinity();
    const double resid = (m.mu1 - m.mu2 * t).norm();
    const double noise = 1e-16 * (m.mu0 + m.mu1.norm() * t.norm());
    return (resid + noise) / sigma;
  };

  Eigen::VectorXd t = ldlt.solve(m.mu1);
  Eigen::VectorXd best_t = t;
  double best_score = score_of(t);
  for (int step = 0; step < 40; ++step) {
    t += ldlt.solve(m.mu1 - m.mu2 * t);
    const double s = score_of(t);
    if (s < best_score) {
      best_score = s;
      best_t = t;
    } else {
      break;
    }
  }

  // An unidentifiable local design (fewer than r+1 points in reach, or all of
  // them near one hyperplane) cannot satisfy the weight identities at any
  // tolerance; surface it as a reach problem rather than emit garbage weights.
  constexpr double kIdentityTol = 1e-8;
  if (best_score > kIdentityTol) {
    std::ostringstream msg;
    msg << "local design within bandwidth " << spec.bandwidth << " of the query is too thin for "
        << r << "-dimensional local-linear weights; increase the bandwidth";
    throw Error(ErrorKind::Bandwidth, "lfr", "z", msg.str());
  }
  m.mu2inv_mu1 = best_t;
  m.sigma0_sq = sigma_of(best_t);
  return m;
}

Eigen::VectorXd lfr_weights(const Eigen::MatrixXd& z_rows, const Eigen::VectorXd& z,
                            const KernelSpec& spec) {
  const LocalMoments m = local_moments(z_rows, z, spec);
  const int n = static_cast<int>(z_rows.rows());
  if (!(m.sigma0_sq > 0.0) || !std::isfinite(m.sigma0_sq))
    throw Error(ErrorKind::Numeric, "lfr", "sigma0",
                "degenerate local design (sigma0^2 <= 0); increase the bandwidth");
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd diff = z_rows.row(i).transpose() - z;
    const double k = kernel_scaled(spec, diff);
    w(i) = (k == 0.0) ? 0.0 : k * (1.0 - m.mu2inv_mu1.dot(diff)) / m.sigma0_sq;
  }
  return w;
}

MetricObject project_weighted_average(std::span<const MetricObject> responses,
                                      const Eigen::VectorXd& weights, SolverReport* report) {
  const int n = static_cast<int>(responses.size());
  if (n == 0) throw Error(ErrorKind::Validation, "lfr", "responses", "no responses");
  if (weights.size() != n)
    throw Error(ErrorKind::Shape, "lfr", "weights", "weight/response count mismatch");
  const MetricObject& first = responses.front();

  if (const auto* q0 = std::get_if<QuantileFunction>(&first)) {
    RawGridFunction raw;
    raw.grid = q0->grid;
    raw.support = q0->support;
    raw.values.assign(q0->grid.size, 0.0);
    for (int i = 0; i < n; ++i) {
      const double wi = weights(i) / n;
      if (wi == 0.0) continue;
      const auto& qi = std::get<QuantileFunction>(responses[i]);
      for (int k = 0; k < raw.grid.size; ++k) raw.values[k] += wi * qi.values[k];
    }
    if (report) *report = SolverReport{};
    return project_monotone(raw);
  }

  if (const auto* l0 = std::get_if<GraphLaplacian>(&first)) {
    Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(l0->nodes, l0->nodes);
    for (int i = 0; i < n; ++i)
      avg += (weights(i) / n) * std::get<GraphLaplacian>(responses[i]).entries;
    SolverReport rep;
    GraphLaplacian proj = project_laplacian(avg, l0->weight_bound, &rep);
    if (report) *report = rep;
    return proj;
  }

  const auto& c0 = std::get<CovMatrix>(first);
  Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(c0.dim, c0.dim);
  for (int i = 0; i < n; ++i)
    avg += (weights(i) / n) * std::get<CovMatrix>(responses[i]).entries;
  SolverReport rep;
  CovMatrix proj = project_psd(avg, c0.diag_bound, &rep);
  if (report) *report = rep;
  return proj;
}

MetricObject lfr_predict(const LfrModel& model, const Eigen::VectorXd& z, SolverReport* report) {
  if (model.responses.empty())
    throw Error(ErrorKind::Validation, "lfr", "responses", "model has no responses");
  if (static_cast<Eigen::Index>(model.responses.size()) != model.embeddings.rows())
    throw Error(ErrorKind::Shape, "lfr", "model", "embedding/response count mismatch");
  const Eigen::VectorXd w = lfr_weights(model.embeddings, z, model.kernel);
  return project_weighted_average(model.responses, w, report);
}

KernelSpec default_bandwidth(const Eigen::MatrixXd& z_rows) {
  if (z_rows.rows() < 2)
    throw Error(ErrorKind::Validation, "lfr", "embeddings", "need at least two points");
  double max_range = 0.0;
  for (Eigen::Index j = 0; j < z_rows.cols(); ++j)
    max_range = std::max(max_range, z_rows.col(j).maxCoeff() - z_rows.col(j).minCoeff());
  if (!(max_range > 0.0))
    throw Error(ErrorKind::Numeric, "lfr", "embeddings",
                "degenerate embedding: zero range in every coordinate");
  KernelSpec spec;
  spec.bandwidth = 0.10 * max_range;
  return spec;
}

}  // namespace dfr
