#include "dfr/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dfr/parallel.hpp"
#include "dfr/rng.hpp"

namespace dfr {

namespace {

constexpr double kPi = 3.14159265358979323846;

QuantileFunction gaussian_quantiles(double mean, double sd, ProbGrid grid) {
  QuantileFunction q;
  q.grid = grid;
  q.values.resize(grid.size);
  for (int k = 0; k < grid.size; ++k) q.values[k] = mean + sd * norm_quantile(grid.point(k));
  return q;
}

double wall_ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

SimDataset gen_distributional(int n, std::uint64_t seed, int grid_size) {
  if (n < 1) throw Error(ErrorKind::Validation, "simharness", "n", "need n >= 1");
  const ProbGrid grid = ProbGrid::of(grid_size);
  SimDataset data;
  data.generator = "distributional";
  data.seed = seed;
  data.predictors.resize(n, 9);
  data.responses.reserve(n);
  data.truths.reserve(n);
  data.raw_samples.reserve(n);
  data.params.reserve(n);

  RngStream root = RngStream::root(seed).child("distributional");
  for (int i = 0; i < n; ++i) {
    RngStream s = root.child("obs", i);
    auto& x = data.predictors;
    x(i, 0) = s.uniform(-1.0, 0.0);
    x(i, 1) = s.uniform(0.0, 1.0);
    x(i, 2) = s.uniform(1.0, 2.0);
    x(i, 3) = s.normal(0.0, 1.0);
    x(i, 4) = s.normal(-10.0, std::sqrt(3.0));
    x(i, 5) = s.normal(10.0, std::sqrt(3.0));
    x(i, 6) = s.uniform() < 0.6 ? 1.0 : 0.0;
    x(i, 7) = s.uniform() < 0.7 ? 1.0 : 0.0;
    x(i, 8) = s.uniform() < 0.3 ? 1.0 : 0.0;

    const double trig = std::sin(kPi * x(i, 0)) + std::cos(kPi * x(i, 1));
    const double quad = 5.0 * x(i, 3) * x(i, 3) + x(i, 4);
    const double mu = 3.0 * x(i, 7) * trig + x(i, 6) * quad;
    const double theta = 3.0 + 0.5 * x(i, 7) * trig + x(i, 6) * std::fabs(quad);

    const double eta = s.normal(mu, 0.5);
    const double sigma = s.gamma(theta * theta, 1.0 / theta);
    data.params.push_back({eta, sigma});

    std::vector<double> draws(100);
    for (double& d : draws) d = s.normal(eta, sigma);
    data.responses.push_back(quantile_from_samples(draws, grid));
    data.raw_samples.push_back(std::move(draws));

    // E(eta|X) = mu, E(sigma|X) = theta (Gamma(theta^2, 1/theta) mean)
    data.truths.push_back(gaussian_quantiles(mu, theta, grid));
  }
  return data;
}

SimDataset gen_network(int n, int nodes, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorKind::Validation, "simharness", "n", "need n >= 1");
  if (nodes < 2) throw Error(ErrorKind::Validation, "simharness", "nodes", "need m >= 2");
  const int d = nodes * (nodes - 1) / 2;
  SimDataset data;
  data.generator = "network";
  data.seed = seed;
  data.predictors.resize(n, 9);
  data.responses.reserve(n);
  data.truths.reserve(n);

  // vech^-1 excluding the diagonal: fill the strict upper triangle rowwise,
  // mirror, then set the diagonal for zero row sums.
  auto laplacian_from_offdiag = [&](const std::vector<double>& weights) {
    GraphLaplacian y;
    y.nodes = nodes;
    y.weight_bound = 1.0;
    y.entries = Eigen::MatrixXd::Zero(nodes, nodes);
    int idx = 0;
    for (int a = 0; a < nodes; ++a)
      for (int b = a + 1; b < nodes; ++b) {
        y.entries(a, b) = -weights[idx];
        y.entries(b, a) = -weights[idx];
        ++idx;
      }
    for (int a = 0; a < nodes; ++a) y.entries(a, a) = -y.entries.row(a).sum();
    return y;
  };

  RngStream root = RngStream::root(seed).child("network");
  constexpr double kTiny = 1e-12;
  for (int i = 0; i < n; ++i) {
    double alpha1 = 0.0, alpha2 = 0.0;
    Eigen::RowVectorXd xi(9);
    for (int attempt = 0;; ++attempt) {
      RngStream s = root.child("obs", i).child("draw", attempt);
      xi(0) = s.uniform(0.0, 1.0);
      xi(1) = s.uniform(-0.5, 0.5);
      xi(2) = s.uniform(1.0, 2.0);
      xi(3) = s.normal(0.0, 1.0);
      xi(4) = s.normal(0.0, 1.0);
      xi(5) = s.normal(5.0, std::sqrt(5.0));
      xi(6) = s.uniform() < 0.4 ? 1.0 : 0.0;
      xi(7) = s.uniform() < 0.3 ? 1.0 : 0.0;
      xi(8) = s.uniform() < 0.6 ? 1.0 : 0.0;
      alpha1 = xi(7) * std::sin(kPi * xi(0)) + (1.0 - xi(7)) * std::cos(kPi * xi(1));
      alpha2 = xi(3) * xi(3) * xi(6) + xi(4) * xi(4) * (1.0 - xi(6));
      if (alpha1 > kTiny && alpha2 > kTiny) break;
      ++data.redraws;  // Beta parameters must be positive
    }
    data.predictors.row(i) = xi;

    RngStream s = root.child("obs", i).child("edges");
    std::vector<double> weights(d);
    for (double& w : weights) w = s.beta(alpha1, alpha2);
    data.responses.push_back(laplacian_from_offdiag(weights));

    const double mean_weight = alpha1 / (alpha1 + alpha2);
    data.truths.push_back(laplacian_from_offdiag(std::vector<double>(d, mean_weight)));
  }
  return data;
}

SimDataset gen_perturbed(int n, double nu, std::uint64_t seed, int grid_size) {
  if (n < 1) throw Error(ErrorKind::Validation, "simharness", "n", "need n >= 1");
  if (!(nu >= 0.0)) throw Error(ErrorKind::Validation, "simharness", "nu", "need nu >= 0");
  const ProbGrid grid = ProbGrid::of(grid_size);
  SimDataset data;
  data.generator = "perturbed";
  data.seed = seed;
  data.predictors.resize(n, 12);
  data.responses.reserve(n);
  data.truths.reserve(n);
  data.raw_samples.reserve(n);
  data.params.reserve(n);

  RngStream root = RngStream::root(seed).child("perturbed");
  for (int i = 0; i < n; ++i) {
    double mu = 0.0, sigma = -1.0;
    Eigen::RowVectorXd xi(12);
    for (int attempt = 0;; ++attempt) {
      RngStream s = root.child("obs", i).child("draw", attempt);
      xi(0) = s.uniform(-1.0, 0.0);
      xi(1) = s.uniform(0.0, 1.0);
      xi(2) = s.uniform(1.0, 2.0);
      xi(3) = s.normal(1.0, 1.0);
      xi(4) = s.normal(-1.0, 1.0);
      xi(5) = s.normal(0.0, std::sqrt(3.0));
      xi(6) = s.uniform() < 0.6 ? 1.0 : 0.0;
      xi(7) = s.uniform() < 0.7 ? 1.0 : 0.0;
      xi(8) = s.uniform() < 0.3 ? 1.0 : 0.0;
      xi(9) = s.beta(2.0, 2.0);
      xi(10) = s.beta(3.0, 2.0);
      xi(11) = s.beta(2.0, 3.0);
      mu = 3.0 * xi(9) + 3.0 * xi(7) * (std::cos(kPi * xi(0)) + std::sin(kPi * xi(1))) +
           xi(6) * (xi(3) + xi(4));
      sigma = 3.0 * xi(10) + 2.0 * xi(7) * (std::sin(kPi * xi(0)) + std::cos(kPi * xi(1))) +
              xi(6) * (xi(3) * xi(3) + xi(4) * xi(4));
      if (sigma >= 0.0) break;
      ++data.redraws;  // a negative sd has no valid quantile function
    }
    data.predictors.row(i) = xi;

    RngStream s = root.child("obs", i).child("response");
    const double eta = (nu == 0.0) ? mu : s.normal(mu, nu);
    data.params.push_back({eta, sigma});

    std::vector<double> draws(100);
    for (double& d : draws) d = s.normal(eta, sigma);
    data.responses.push_back(quantile_from_samples(draws, grid));
    data.raw_samples.push_back(std::move(draws));

    data.truths.push_back(gaussian_quantiles(mu, sigma, grid));
  }
  return data;
}

double mspe(std::span<const MetricObject> predictions, std::span<const MetricObject> truths) {
  if (predictions.size() != truths.size())
    throw Error(ErrorKind::Shape, "simharness", "mspe", "prediction/truth count mismatch");
  if (predictions.empty())
    throw Error(ErrorKind::Validation, "simharness", "mspe", "empty prediction list");
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = object_distance(predictions[i], truths[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(predictions.size());
}

namespace {

// diagnostic generator: every response equals the same fixed distribution
SimDataset gen_degenerate(int n, std::uint64_t seed, int grid_size) {
  SimDataset data;
  data.generator = "degenerate";
  data.seed = seed;
  data.predictors.resize(n, 2);
  RngStream root = RngStream::root(seed).child("degenerate");
  const QuantileFunction common = gaussian_quantiles(0.0, 1.0, ProbGrid::of(grid_size));
  for (int i = 0; i < n; ++i) {
    RngStream s = root.child("obs", i);
    data.predictors(i, 0) = s.uniform();
    data.predictors(i, 1) = s.uniform();
    data.responses.push_back(common);
    data.truths.push_back(common);
  }
  return data;
}

SimDataset generate(const ExperimentSpec& spec, int n, std::uint64_t seed) {
  if (spec.generator == "distributional") return gen_distributional(n, seed, spec.grid_size);
  if (spec.generator == "network") return gen_network(n, spec.nodes, seed);
  if (spec.generator == "perturbed") return gen_perturbed(n, spec.nu, seed, spec.grid_size);
  if (spec.generator == "degenerate") return gen_degenerate(n, seed, spec.grid_size);
  throw Error(ErrorKind::Validation, "simharness", "generator",
              "unknown generator '" + spec.generator + "'");
}

struct RunJob {
  int n;
  int run;
};

}  // namespace

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  if (spec.runs < 1) throw Error(ErrorKind::Validation, "simharness", "runs", "need Q >= 1");
  if (spec.test_size < 1)
    throw Error(ErrorKind::Validation, "simharness", "test_size", "need a nonempty test set");
  if (spec.methods.empty())
    throw Error(ErrorKind::Validation, "simharness", "methods", "no methods requested");
  for (const auto& m : spec.methods)
    if (m != "dfr" && m != "gfr")
      throw Error(ErrorKind::Validation, "simharness", "methods",
                  "unknown method '" + m + "' (expected dfr|gfr)");

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<RunJob> jobs;
  for (int n : spec.sample_sizes)
    for (int q = 0; q < spec.runs; ++q) jobs.push_back({n, q});

  // one result slot per (job, method); filled independently, so run-level
  // parallelism cannot perturb the report
  std::vector<std::vector<RunResult>> results(jobs.size());
  for (auto& slot : results) slot.resize(spec.methods.size());

  RngStream root = RngStream::root(spec.seed).child("experiment");

  parallel_for(spec.jobs, static_cast<int>(jobs.size()), [&](int ji) {
    const auto [n, q] = jobs[ji];
    RngStream run_stream = root.child("n", n).child("run", q);
    const std::uint64_t train_seed = run_stream.child("train").next_u64();
    const std::uint64_t test_seed = run_stream.child("test").next_u64();
    const std::uint64_t fit_seed = run_stream.child("fit").next_u64();

    SimDataset train = generate(spec, n, train_seed);
    SimDataset test = generate(spec, spec.test_size, test_seed);

    for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
      const std::string& method = spec.methods[mi];
      RunResult rr;
      rr.n = n;
      rr.method = method;
      rr.run = q;
      const auto tr0 = std::chrono::steady_clock::now();
      try {
        // out-of-reach or thin-design queries fail visibly per prediction;
        // the run's MSPE covers the successful ones and the run is marked
        // partial, so the batch keeps going with full auditability
        std::vector<MetricObject> predictions;
        std::vector<MetricObject> truths;
        auto predict_all = [&](auto&& predict_one) {
          for (int i = 0; i < spec.test_size; ++i) {
            try {
              predictions.push_back(predict_one(Eigen::VectorXd(test.predictors.row(i))));
              truths.push_back(test.truths[i]);
            } catch (const Error& e) {
              ++rr.failed_predictions;
              if (rr.error.empty()) rr.error = e.what();
            }
          }
        };
        if (method == "dfr") {
          FitOptions options = spec.fit;
          options.seed = fit_seed;
          options.jobs = 1;  // parallelism lives at the run level here
          const DfrModel model = fit_dfr(train.predictors, train.responses, options);
          predict_all([&](const Eigen::VectorXd& x) { return predict_dfr(model, x); });
        } else {
          const GfrModel model = fit_gfr(train.predictors, train.responses);
          predict_all([&](const Eigen::VectorXd& x) { return predict_gfr(model, x); });
        }
        std::string why;
        for (const auto& pred : predictions) {
          ++rr.predictions_checked;
          if (!satisfies_invariants(pred, &why)) ++rr.invariant_violations;
        }
        if (predictions.empty()) {
          rr.status = "failed";
          if (rr.error.empty()) rr.error = "ERROR:simharness:run: no prediction succeeded";
        } else {
          rr.mspe_value = mspe(predictions, truths);
          rr.status = rr.failed_predictions == 0 ? "ok" : "partial";
        }
      } catch (const Error& e) {
        rr.status = "failed";
        rr.error = e.what();
      } catch (const std::exception& e) {
        rr.status = "failed";
        rr.error = std::string("ERROR:simharness:run: ") + e.what();
      }
      rr.wall_ms = wall_ms_since(tr0);
      results[ji][mi] = std::move(rr);
    }
  });

  ExperimentReport report;
  report.spec = spec;
  for (std::size_t ji = 0; ji < jobs.size(); ++ji)
    for (auto& rr : results[ji]) report.runs.push_back(std::move(rr));

  for (int n : spec.sample_sizes) {
    for (const auto& method : spec.methods) {
      Aggregate agg;
      agg.n = n;
      agg.method = method;
      std::vector<double> values;
      for (const auto& rr : report.runs) {
        if (rr.n != n || rr.method != method) continue;
        if (rr.status == "failed")
          ++agg.failed;
        else
          values.push_back(rr.mspe_value);
      }
      agg.completed = static_cast<int>(values.size());
      if (!values.empty()) {
        agg.amspe = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
        std::sort(values.begin(), values.end());
        const std::size_t mid = values.size() / 2;
        agg.mmspe = (values.size() % 2 == 1) ? values[mid]
                                             : 0.5 * (values[mid - 1] + values[mid]);
      }
      report.aggregates.push_back(std::move(agg));
    }
  }
  report.wall_ms = wall_ms_since(t0);
  return report;
}

std::string format_table(const ExperimentReport& report) {
  std::ostringstream out;
  out << "AMSPE (" << report.spec.generator << ", Q=" << report.spec.runs << ")\n";
  out << "  n";
  for (const auto& m : report.spec.methods) {
    std::string upper = m;
    std::transform(upper.begin(), upper.end(), upper.begin(), ::toupper);
    out << "\t" << upper;
  }
  out << "\n";
  for (int n : report.spec.sample_sizes) {
    out << "  " << n;
    for (const auto& method : report.spec.methods) {
      for (const auto& agg : report.aggregates)
        if (agg.n == n && agg.method == method) {
          char buf[64];
          if (agg.completed > 0)
            std::snprintf(buf, sizeof buf, "%.3f", agg.amspe);
          else
            std::snprintf(buf, sizeof buf, "n/a");
          out << "\t" << buf;
          if (agg.failed > 0) out << " (" << agg.failed << " failed)";
        }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace dfr
