#include <doctest.h>

#include <cmath>
#include <vector>

#include "dfr/pipeline.hpp"
#include "dfr/rng.hpp"
#include "dfr/simulate.hpp"

using namespace dfr;

namespace {

QuantileFunction gaussian_q(double mean, double sd, int g) {
  QuantileFunction q;
  q.grid = ProbGrid::of(g);
  q.values.resize(g);
  for (int k = 0; k < g; ++k) q.values[k] = mean + sd * norm_quantile(q.grid.point(k));
  return q;
}

QuantileFunction scalar_obj(double value) {
  QuantileFunction q;
  q.grid = ProbGrid::of(1);
  q.values = {value};
  return q;
}

FitOptions small_options(std::uint64_t seed) {
  FitOptions options;
  options.k = 5;
  options.r = 1;
  options.net.hidden_layers = 2;
  options.net.width = 8;
  options.net.dropout = 0.0;
  options.net.max_epochs = 120;
  options.net.patience = 15;
  options.seed = seed;
  return options;
}

}  // namespace

TEST_CASE("degenerate pipeline: identical responses reproduce themselves") {
  RngStream rng = RngStream::root(71);
  const int n = 20;
  Eigen::MatrixXd x(n, 2);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform(0.0, 1.0);
    x(i, 1) = rng.uniform(0.0, 1.0);
  }
  const QuantileFunction common = gaussian_q(3.0, 1.0, 33);
  std::vector<MetricObject> responses(n, common);

  FitOptions options = small_options(5);
  options.net.max_epochs = 30;
  options.bandwidth = 1.0;  // embedding collapses to ~0, so fix the reach
  const DfrModel model = fit_dfr(x, responses, options);
  CHECK(model.embedding.coordinates.isZero(1e-10));

  const auto pred = std::get<QuantileFunction>(predict_dfr(model, Eigen::VectorXd(x.row(3))));
  for (int k = 0; k < 33; ++k) CHECK(pred.values[k] == doctest::Approx(common.values[k]));
}

TEST_CASE("pipeline preconditions") {
  Eigen::MatrixXd x(5, 2);
  std::vector<MetricObject> responses(4, scalar_obj(1.0));
  CHECK_THROWS_AS(fit_dfr(x, responses, small_options(1)), Error);  // count mismatch
  std::vector<MetricObject> five(5, scalar_obj(1.0));
  CHECK_THROWS_AS(fit_dfr(x, five, small_options(1)), Error);  // n below the floor
}

TEST_CASE("fit is deterministic given data and seed") {
  RngStream rng = RngStream::root(72);
  const int n = 40;
  Eigen::MatrixXd x(n, 2);
  std::vector<MetricObject> responses;
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform(0.0, 1.0);
    x(i, 1) = rng.uniform(0.0, 1.0);
    responses.push_back(gaussian_q(2.0 * x(i, 0), 1.0, 33));
  }
  const FitOptions options = small_options(9);
  const DfrModel a = fit_dfr(x, responses, options);
  const DfrModel b = fit_dfr(x, responses, options);
  CHECK(a.lfr.embeddings == b.lfr.embeddings);
  CHECK(a.lfr.kernel.bandwidth == b.lfr.kernel.bandwidth);
  for (int rep = 0; rep < 5; ++rep) {
    Eigen::VectorXd q(2);
    q << 0.3 + 0.1 * rep, 0.5;
    const auto pa = std::get<QuantileFunction>(predict_dfr(a, q));
    const auto pb = std::get<QuantileFunction>(predict_dfr(b, q));
    CHECK(pa.values == pb.values);  // bit-identical
  }
  CHECK(a.provenance.predictors_hash == b.provenance.predictors_hash);
  CHECK(a.provenance.responses_hash == b.provenance.responses_hash);
}

TEST_CASE("location family N(2 x1, 1): end-to-end mean tracking") {
  RngStream rng = RngStream::root(73);
  const int n = 300;
  Eigen::MatrixXd x(n, 2);
  std::vector<MetricObject> responses;
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform(0.0, 1.0);
    x(i, 1) = rng.uniform(0.0, 1.0);
    responses.push_back(gaussian_q(2.0 * x(i, 0), 1.0, 65));
  }
  FitOptions options = small_options(17);
  options.k = 10;
  options.net.max_epochs = 250;
  const DfrModel model = fit_dfr(x, responses, options);

  double acc = 0.0;
  int count = 0;
  RngStream test_rng = RngStream::root(74);
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::VectorXd q(2);
    q << test_rng.uniform(0.15, 0.85), test_rng.uniform(0.0, 1.0);
    const auto pred = std::get<QuantileFunction>(predict_dfr(model, q));
    const auto truth = gaussian_q(2.0 * q(0), 1.0, 65);
    const double d = wasserstein_distance(pred, truth);
    acc += d * d;
    ++count;
  }
  CHECK(acc / count < 0.1);
}

TEST_CASE("out-of-reach query raises a bandwidth error naming the embedding") {
  RngStream rng = RngStream::root(75);
  const int n = 30;
  Eigen::MatrixXd x(n, 2);
  std::vector<MetricObject> responses;
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform(0.0, 1.0);
    x(i, 1) = rng.uniform(0.0, 1.0);
    responses.push_back(gaussian_q(5.0 * x(i, 0), 1.0, 33));
  }
  const DfrModel model = fit_dfr(x, responses, small_options(19));
  Eigen::VectorXd far(2);
  far << 1000.0, -1000.0;
  try {
    predict_dfr(model, far);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Bandwidth);
    CHECK(std::string(e.what()).find("embedding") != std::string::npos);
  }
}

TEST_CASE("gfr weights satisfy the global identities") {
  RngStream rng = RngStream::root(76);
  const int n = 50, p = 3;
  Eigen::MatrixXd x(n, p);
  std::vector<MetricObject> responses;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = rng.uniform(-1.0, 1.0);
    responses.push_back(scalar_obj(rng.uniform(-1.0, 1.0)));
  }
  const GfrModel model = fit_gfr(x, responses);
  CHECK(!model.ridged);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd q(p);
    for (int j = 0; j < p; ++j) q(j) = rng.uniform(-1.0, 1.0);
    const Eigen::VectorXd s = gfr_weights(model, q);
    CHECK(s.mean() == doctest::Approx(1.0).epsilon(1e-10));
    const Eigen::VectorXd moment =
        (x.rowwise() - x.colwise().mean()).transpose() * s / n;
    const Eigen::VectorXd want = q - Eigen::VectorXd(x.colwise().mean().transpose());
    CHECK((moment - want).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("gfr at the predictor mean is the projected frechet mean") {
  RngStream rng = RngStream::root(77);
  const int n = 25;
  Eigen::MatrixXd x(n, 2);
  std::vector<MetricObject> responses;
  std::vector<double> values;
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform(-1.0, 1.0);
    x(i, 1) = rng.uniform(-1.0, 1.0);
    values.push_back(rng.uniform(0.0, 2.0));
    responses.push_back(scalar_obj(values.back()));
  }
  const GfrModel model = fit_gfr(x, responses);
  const Eigen::VectorXd mean_x = x.colwise().mean();
  const auto pred = std::get<QuantileFunction>(predict_gfr(model, mean_x));
  double avg = 0.0;
  for (double v : values) avg += v;
  avg /= n;
  CHECK(pred.values[0] == doctest::Approx(avg).epsilon(1e-12));
}

TEST_CASE("gfr reproduces linear scalar responses exactly") {
  RngStream rng = RngStream::root(78);
  const int n = 60, p = 3;
  Eigen::MatrixXd x(n, p);
  std::vector<MetricObject> responses;
  Eigen::VectorXd beta(p);
  beta << 1.5, -2.0, 0.5;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = rng.uniform(-1.0, 1.0);
    responses.push_back(scalar_obj(0.7 + beta.dot(x.row(i))));
  }
  const GfrModel model = fit_gfr(x, responses);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd q(p);
    for (int j = 0; j < p; ++j) q(j) = rng.uniform(-1.0, 1.0);
    const auto pred = std::get<QuantileFunction>(predict_gfr(model, q));
    CHECK(pred.values[0] == doctest::Approx(0.7 + beta.dot(q)).epsilon(1e-8));
  }
  Eigen::MatrixXd constant = Eigen::MatrixXd::Ones(10, 2);
  std::vector<MetricObject> r10(10, scalar_obj(1.0));
  CHECK_THROWS_AS(fit_gfr(constant, r10), Error);  // singular covariance
}

TEST_CASE("grid search over the full hyperparameter table (recorded, not asserted)") {
  // the candidate grid: layers {3,4,5,6} x neurons {8,16,32,64} x
  // dropout {0.1..0.4} x learning rate {1e-4..5e-3}
  const SimDataset data = gen_distributional(200, 31415);
  const EmbeddingModel embedding = isomap(data.responses, 10, 2, 2);

  std::vector<MlpConfig> grid;
  std::uint64_t c = 0;
  for (int layers : {3, 4, 5, 6})
    for (int width : {8, 16, 32, 64})
      for (double dropout : {0.1, 0.2, 0.3, 0.4})
        for (double lr : {0.0001, 0.0005, 0.001, 0.005}) {
          MlpConfig cfg;
          cfg.hidden_layers = layers;
          cfg.width = width;
          cfg.dropout = dropout;
          cfg.learning_rate = lr;
          cfg.max_epochs = 60;  // desk-scale budget for the 256 candidates
          cfg.patience = 8;
          cfg.seed = RngStream::root(99).child("grid", c++).next_u64();
          grid.push_back(cfg);
        }
  const MlpConfig chosen =
      grid_search(data.predictors, embedding.coordinates.col(0), grid, 4);
  MESSAGE("selected: layers=", chosen.hidden_layers, " width=", chosen.width,
          " dropout=", chosen.dropout, " lr=", chosen.learning_rate);
  CHECK(chosen.width >= 8);
}

TEST_CASE("feeding true latent coordinates instead of network outputs (diagnostic)") {
  // quantifies network-induced error: LFR over the generator's latent
  // parameters vs the full pipeline; reported, not asserted
  const SimDataset train = gen_distributional(100, 2718);
  const SimDataset test = gen_distributional(60, 2719);

  FitOptions options;
  options.seed = 1;
  const DfrModel full = fit_dfr(train.predictors, train.responses, options);

  auto latent = [](const SimDataset& d) {
    Eigen::MatrixXd z(d.predictors.rows(), 2);
    for (Eigen::Index i = 0; i < d.predictors.rows(); ++i) {
      z(i, 0) = d.params[i][0];  // eta
      z(i, 1) = d.params[i][1];  // sigma
    }
    return z;
  };
  LfrModel oracle_lfr;
  oracle_lfr.embeddings = latent(train);
  oracle_lfr.responses = train.responses;
  oracle_lfr.kernel = default_bandwidth(oracle_lfr.embeddings);

  const Eigen::MatrixXd test_latent = latent(test);
  double full_acc = 0.0, oracle_acc = 0.0;
  int full_n = 0, oracle_n = 0;
  for (int i = 0; i < 60; ++i) {
    try {
      const auto pred = predict_dfr(full, Eigen::VectorXd(test.predictors.row(i)));
      const double d = object_distance(pred, test.truths[i]);
      full_acc += d * d;
      ++full_n;
    } catch (const Error&) {
    }
    try {
      const auto pred = lfr_predict(oracle_lfr, test_latent.row(i).transpose());
      const double d = object_distance(pred, test.truths[i]);
      oracle_acc += d * d;
      ++oracle_n;
    } catch (const Error&) {
    }
  }
  REQUIRE(full_n > 0);
  REQUIRE(oracle_n > 0);
  MESSAGE("pipeline mspe=", full_acc / full_n, " (", full_n,
          " predictions), latent-coordinate mspe=", oracle_acc / oracle_n, " (", oracle_n, ")");
}

TEST_CASE("every dfr prediction passes its space invariants") {
  RngStream rng = RngStream::root(79);
  const int n = 40;
  Eigen::MatrixXd x(n, 2);
  std::vector<MetricObject> responses;
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform(0.0, 1.0);
    x(i, 1) = rng.uniform(0.0, 1.0);
    std::vector<double> draws(60);
    for (double& d : draws) d = rng.normal(3.0 * x(i, 0), 1.0 + x(i, 1));
    responses.push_back(quantile_from_samples(draws, ProbGrid::of(41)));
  }
  const DfrModel model = fit_dfr(x, responses, small_options(23));
  for (int rep = 0; rep < 30; ++rep) {
    Eigen::VectorXd q(2);
    q << rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8);
    const MetricObject pred = predict_dfr(model, q);
    CHECK_NOTHROW(check_invariants(pred));
  }
}
