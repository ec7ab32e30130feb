#include "dfr/projections.hpp"

#include <algorithm>
#include <cmath>

namespace dfr {

void isotonic_fit(std::span<double> values) {
  const int n = static_cast<int>(values.size());
  if (n == 0) return;
  // block-merging PAVA: level[b], count[b] per active block
  std::vector<double> level(n);
  std::vector<int> count(n);
  int blocks = 0;
  for (int i = 0; i < n; ++i) {
    level[blocks] = values[i];
    count[blocks] = 1;
    ++blocks;
    while (blocks > 1 && level[blocks - 2] > level[blocks - 1]) {
      const double merged = (level[blocks - 2] * count[blocks - 2] +
                             level[blocks - 1] * count[blocks - 1]) /
                            (count[blocks - 2] + count[blocks - 1]);
      count[blocks - 2] += count[blocks - 1];
      level[blocks - 2] = merged;
      --blocks;
    }
  }
  int pos = 0;
  for (int b = 0; b < blocks; ++b)
    for (int c = 0; c < count[b]; ++c) values[pos++] = level[b];
}

QuantileFunction project_monotone(const RawGridFunction& raw) {
  if (static_cast<int>(raw.values.size()) != raw.grid.size)
    throw Error(ErrorKind::Shape, "projections", "raw", "value count does not match grid");
  for (double v : raw.values)
    if (!std::isfinite(v))
      throw Error(ErrorKind::Numeric, "projections", "raw", "non-finite entry");
  QuantileFunction out;
  out.grid = raw.grid;
  out.support = raw.support;
  out.values = raw.values;
  isotonic_fit(out.values);
  if (raw.support)
    for (double& v : out.values) v = std::clamp(v, raw.support->lo, raw.support->hi);
  return out;
}

namespace {

// Projection onto {off-diagonal entries in [-W, 0]}; diagonal untouched.
void clip_offdiag(Eigen::MatrixXd& y, double w) {
  const int m = static_cast<int>(y.rows());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i != j) y(i, j) = std::clamp(y(i, j), -w, 0.0);
}

// Projection onto the affine subspace {Y : Y 1 = 0}, rowwise mean removal.
void zero_row_sums(Eigen::MatrixXd& y) {
  y.colwise() -= Eigen::VectorXd(y.rowwise().mean());
}

}  // namespace

GraphLaplacian project_laplacian(const Eigen::MatrixXd& m, double weight_bound,
                                 SolverReport* report, double tol, int max_sweeps) {
  if (m.rows() != m.cols())
    throw Error(ErrorKind::Shape, "projections", "matrix", "input must be square");
  if (!m.allFinite())
    throw Error(ErrorKind::Numeric, "projections", "matrix", "non-finite entry");
  if (!(weight_bound > 0.0))
    throw Error(ErrorKind::Validation, "projections", "weight_bound", "must be positive");

  const int n = static_cast<int>(m.rows());
  Eigen::MatrixXd x = m;
  // Dykstra increments, one per non-affine... box set needs one; the two
  // affine projections are exact without correction but carrying increments
  // for all three is the textbook scheme and costs nothing here.
  Eigen::MatrixXd p_sym = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd p_box = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd p_row = Eigen::MatrixXd::Zero(n, n);

  SolverReport rep;
  Eigen::MatrixXd prev = x;
  for (rep.iterations = 1; rep.iterations <= max_sweeps; ++rep.iterations) {
    Eigen::MatrixXd y = x + p_sym;
    x = 0.5 * (y + y.transpose());
    p_sym = y - x;

    y = x + p_box;
    x = y;
    clip_offdiag(x, weight_bound);
    p_box = y - x;

    y = x + p_row;
    x = y;
    zero_row_sums(x);
    p_row = y - x;

    rep.residual = (x - prev).norm();
    if (rep.residual <= tol) break;
    prev = x;
  }
  rep.converged = rep.residual <= tol;
  if (rep.iterations > max_sweeps) rep.iterations = max_sweeps;

  // Final feasibility pass so the output satisfies every invariant exactly:
  // symmetrize, clip the box, re-derive the diagonal from the off-diagonals.
  GraphLaplacian out;
  out.nodes = n;
  out.weight_bound = weight_bound;
  out.entries = 0.5 * (x + x.transpose());
  clip_offdiag(out.entries, weight_bound);
  for (int i = 0; i < n; ++i) {
    out.entries(i, i) = 0.0;
    out.entries(i, i) = -out.entries.row(i).sum();
  }
  if (report) *report = rep;
  return out;
}

CovMatrix project_psd(const Eigen::MatrixXd& m, std::optional<double> diag_bound,
                      SolverReport* report) {
  if (m.rows() != m.cols())
    throw Error(ErrorKind::Shape, "projections", "matrix", "input must be square");
  if (!m.allFinite())
    throw Error(ErrorKind::Numeric, "projections", "matrix", "non-finite entry");
  if (diag_bound && !(*diag_bound > 0.0))
    throw Error(ErrorKind::Validation, "projections", "diag_bound", "must be positive");

  const int n = static_cast<int>(m.rows());
  Eigen::MatrixXd x = 0.5 * (m + m.transpose());

  auto psd_clip = [&](Eigen::MatrixXd& y) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(y);
    if (es.info() != Eigen::Success)
      throw Error(ErrorKind::Numeric, "projections", "matrix", "eigendecomposition failed");
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    const Eigen::MatrixXd rebuilt =
        es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    y = 0.5 * (rebuilt + rebuilt.transpose());  // kill asymmetry from roundoff
  };

  SolverReport rep;
  if (!diag_bound) {
    psd_clip(x);
    rep.iterations = 1;
    rep.residual = 0.0;
  } else {
    // Plain alternation between the PSD cone and {diag <= bound}; the loop
    // tolerance is tighter than the reported contract so that re-projecting
    // the output is a no-op at the invariant tolerances.
    constexpr double kLoopTol = 1e-12;
    constexpr int kMaxIter = 10000;
    Eigen::MatrixXd prev = x;
    for (rep.iterations = 1; rep.iterations <= kMaxIter; ++rep.iterations) {
      for (int i = 0; i < n; ++i) x(i, i) = std::min(x(i, i), *diag_bound);
      psd_clip(x);
      rep.residual = (x - prev).norm();
      if (rep.residual <= kLoopTol) break;
      prev = x;
    }
    // PSD holds exactly after the final clip; nudge any residual diagonal
    // excess below the bound (kept PSD by the loop tolerance).
    for (int i = 0; i < n; ++i) x(i, i) = std::min(x(i, i), *diag_bound);
  }
  rep.converged = rep.residual <= 1e-8;
  if (report) *report = rep;

  CovMatrix out;
  out.dim = n;
  out.entries = x;
  out.diag_bound = diag_bound;
  return out;
}

}  // namespace dfr
