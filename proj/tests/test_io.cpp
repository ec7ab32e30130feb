#include <doctest.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dfr/io.hpp"
#include "dfr/rng.hpp"
#include "dfr/simulate.hpp"

using namespace dfr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("dfr_test_" + std::to_string(RngStream::root(::getpid()).next_u32()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

QuantileFunction gaussian_q(double mean, double sd, int g) {
  QuantileFunction q;
  q.grid = ProbGrid::of(g);
  q.values.resize(g);
  for (int k = 0; k < g; ++k) q.values[k] = mean + sd * norm_quantile(q.grid.point(k));
  return q;
}

}  // namespace

TEST_CASE("csv matrix round trip preserves doubles bit-exactly") {
  TempDir tmp;
  RngStream rng = RngStream::root(81);
  Eigen::MatrixXd m(7, 3);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = rng.normal(0.0, 100.0);
  const std::string path = tmp.file("m.csv");
  write_csv_matrix(path, m);
  const Eigen::MatrixXd back = read_csv_matrix(path);
  CHECK(back == m);

  write_text(tmp.file("ragged.csv"), "1,2\n3\n");
  CHECK_THROWS_AS(read_csv_matrix(tmp.file("ragged.csv")), Error);
  write_text(tmp.file("junk.csv"), "1,abc\n");
  CHECK_THROWS_AS(read_csv_rows(tmp.file("junk.csv")), Error);
}

TEST_CASE("sidecar parsing and validation") {
  TempDir tmp;
  write_text(tmp.file("sc.json"),
             R"({"space": "wasserstein", "grid_size": 51, "support": [0, 10]})");
  const Sidecar sc = load_sidecar(tmp.file("sc.json"));
  CHECK(sc.space == Space::Wasserstein);
  CHECK(sc.grid_size == 51);
  REQUIRE(sc.support.has_value());
  CHECK(sc.support->hi == 10.0);

  write_text(tmp.file("bad.json"), R"({"grid_size": 51})");
  CHECK_THROWS_AS(load_sidecar(tmp.file("bad.json")), Error);
  write_text(tmp.file("bad2.json"), R"({"space": "laplacian"})");
  CHECK_THROWS_AS(load_sidecar(tmp.file("bad2.json")), Error);  // nodes missing
  write_text(tmp.file("notjson.json"), "{");
  CHECK_THROWS_AS(load_sidecar(tmp.file("notjson.json")), Error);
}

TEST_CASE("wasserstein dataset loading: samples and quantile rows") {
  TempDir tmp;
  write_text(tmp.file("x.csv"), "0.1,0.2\n0.3,0.4\n0.5,0.6\n");
  // rows of different lengths: raw samples
  write_text(tmp.file("y.csv"), "3,1,2\n5,4\n0,0,0,1\n");
  write_text(tmp.file("sc.json"), R"({"space": "wasserstein", "grid_size": 8})");
  const Dataset data = load_dataset(tmp.file("x.csv"), tmp.file("y.csv"), tmp.file("sc.json"));
  CHECK(data.predictors.rows() == 3);
  CHECK(data.responses.size() == 3);
  for (const auto& obj : data.responses) {
    CHECK(std::get<QuantileFunction>(obj).grid.size == 8);
    CHECK(satisfies_invariants(obj));
  }

  // explicit quantile rows
  const QuantileFunction q = gaussian_q(0.0, 1.0, 8);
  std::string rows;
  for (int rep = 0; rep < 3; ++rep) rows += serialize_object_row(q) + "\n";
  write_text(tmp.file("yq.csv"), rows);
  write_text(tmp.file("scq.json"),
             R"({"space": "wasserstein", "grid_size": 8, "format": "quantiles"})");
  const Dataset qd = load_dataset(tmp.file("x.csv"), tmp.file("yq.csv"), tmp.file("scq.json"));
  const auto& q0 = std::get<QuantileFunction>(qd.responses[0]);
  CHECK(q0.values == q.values);

  CHECK_THROWS_AS(load_dataset(tmp.file("x.csv"), tmp.file("y.csv"), tmp.file("missing.json")),
                  Error);
}

TEST_CASE("laplacian dataset loading: stacked dense, flattened, edge-list directory") {
  TempDir tmp;
  write_text(tmp.file("x.csv"), "0.1\n0.2\n");
  write_text(tmp.file("sc.json"),
             R"({"space": "laplacian", "nodes": 2, "weight_bound": 1.0})");

  write_text(tmp.file("stacked.csv"), "0.5,-0.5\n-0.5,0.5\n0,0\n0,0\n");
  const Dataset stacked =
      load_dataset(tmp.file("x.csv"), tmp.file("stacked.csv"), tmp.file("sc.json"));
  CHECK(stacked.responses.size() == 2);
  CHECK(std::get<GraphLaplacian>(stacked.responses[0]).entries(0, 1) == -0.5);

  write_text(tmp.file("flat.csv"), "0.5,-0.5,-0.5,0.5\n0,0,0,0\n");
  const Dataset flat = load_dataset(tmp.file("x.csv"), tmp.file("flat.csv"), tmp.file("sc.json"));
  CHECK(flat.responses.size() == 2);

  fs::create_directories(tmp.file("graphs"));
  write_text(tmp.file("graphs/a.csv"), "1,2,0.5\n");  // edge list, 1-based
  write_text(tmp.file("graphs/b.csv"), "0,0\n0,0\n");
  write_text(tmp.file("sc4.json"), R"({"space": "laplacian", "nodes": 2, "weight_bound": 1})");
  const Dataset dir = load_dataset(tmp.file("x.csv"), tmp.file("graphs"), tmp.file("sc4.json"));
  CHECK(dir.responses.size() == 2);
  CHECK(std::get<GraphLaplacian>(dir.responses[0]).entries(0, 0) == doctest::Approx(0.5));

  // count mismatch with predictors
  write_text(tmp.file("x3.csv"), "0.1\n0.2\n0.3\n");
  CHECK_THROWS_AS(load_dataset(tmp.file("x3.csv"), tmp.file("flat.csv"), tmp.file("sc.json")),
                  Error);
}

TEST_CASE("covariance dataset loading enforces psd") {
  TempDir tmp;
  write_text(tmp.file("x.csv"), "0.1\n");
  write_text(tmp.file("sc.json"), R"({"space": "covariance", "nodes": 2})");
  write_text(tmp.file("good.csv"), "1,0.5\n0.5,1\n");
  const Dataset good = load_dataset(tmp.file("x.csv"), tmp.file("good.csv"), tmp.file("sc.json"));
  CHECK(good.responses.size() == 1);
  write_text(tmp.file("bad.csv"), "1,2\n2,1\n");  // indefinite
  CHECK_THROWS_AS(load_dataset(tmp.file("x.csv"), tmp.file("bad.csv"), tmp.file("sc.json")),
                  Error);
}

TEST_CASE("object rows round-trip with distances preserved to 1e-15") {
  RngStream rng = RngStream::root(82);
  Sidecar sc;
  sc.space = Space::Wasserstein;
  sc.grid_size = 33;
  std::vector<double> draws(50);
  for (double& d : draws) d = rng.normal(1.0, 3.0);
  const QuantileFunction a = quantile_from_samples(draws, ProbGrid::of(33));
  for (double& d : draws) d = rng.normal(-2.0, 0.5);
  const QuantileFunction b = quantile_from_samples(draws, ProbGrid::of(33));

  const MetricObject a2 = parse_object_row(serialize_object_row(a), sc);
  const MetricObject b2 = parse_object_row(serialize_object_row(b), sc);
  const double before = wasserstein_distance(a, b);
  const double after = object_distance(a2, b2);
  CHECK(std::fabs(before - after) <= 1e-15);

  Sidecar scl;
  scl.space = Space::Laplacian;
  scl.nodes = 3;
  scl.weight_bound = 1.0;
  const auto y = laplacian_from_edges(std::vector<WeightedEdge>{{0, 1, 0.3}, {1, 2, 0.9}}, 3, 1.0);
  const MetricObject y2 = parse_object_row(serialize_object_row(y), scl);
  CHECK(frobenius_distance(std::get<GraphLaplacian>(y2).entries, y.entries) == 0.0);
}

TEST_CASE("model bundle save/load preserves predictions bit-exactly") {
  TempDir tmp;
  RngStream rng = RngStream::root(83);
  const int n = 30;
  Eigen::MatrixXd x(n, 2);
  std::vector<MetricObject> responses;
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform(0.0, 1.0);
    x(i, 1) = rng.uniform(0.0, 1.0);
    responses.push_back(gaussian_q(2.0 * x(i, 0), 1.0, 21));
  }
  FitOptions options;
  options.k = 5;
  options.r = 1;
  options.net.hidden_layers = 1;
  options.net.width = 4;
  options.net.dropout = 0.0;
  options.net.max_epochs = 40;
  options.seed = 3;
  const DfrModel model = fit_dfr(x, responses, options);
  const std::string dir = tmp.file("bundle");
  save_model_bundle(dir, model);
  for (const char* name :
       {"embedding.json", "net_1.json", "lfr.json", "provenance.json", "fit.log"})
    CHECK(fs::exists(fs::path(dir) / name));

  const DfrModel loaded = load_model_bundle(dir);
  CHECK(loaded.provenance.predictors_hash == model.provenance.predictors_hash);
  for (int rep = 0; rep < 5; ++rep) {
    Eigen::VectorXd q(2);
    q << 0.2 + 0.12 * rep, 0.5;
    const auto pa = std::get<QuantileFunction>(predict_dfr(model, q));
    const auto pb = std::get<QuantileFunction>(predict_dfr(loaded, q));
    CHECK(pa.values == pb.values);
  }

  CHECK_THROWS_AS(load_model_bundle(tmp.file("nope")), Error);
}

TEST_CASE("prediction files round-trip, failed rows marked in place") {
  TempDir tmp;
  Sidecar sc;
  sc.space = Space::Wasserstein;
  sc.grid_size = 5;
  std::vector<PredictionRow> rows(3);
  rows[0].ok = true;
  rows[0].object = gaussian_q(0.0, 1.0, 5);
  rows[1].ok = false;
  rows[1].error = "ERROR:pipeline:x: out of reach";
  rows[2].ok = true;
  rows[2].object = gaussian_q(2.0, 0.5, 5);
  const std::string path = tmp.file("pred.csv");
  write_predictions(path, rows);
  const auto back = read_predictions(path, sc);
  REQUIRE(back.size() == 3);
  CHECK(back[0].ok);
  CHECK(!back[1].ok);
  CHECK(back[1].error.find("out of reach") != std::string::npos);
  CHECK(std::get<QuantileFunction>(back[2].object).values ==
        std::get<QuantileFunction>(rows[2].object).values);
}

TEST_CASE("experiment spec and report files") {
  TempDir tmp;
  write_text(tmp.file("spec.json"),
             R"({"generator": "degenerate", "n": [12], "Q": 2, "methods": ["gfr"],
                 "seed": 7, "test_size": 4, "grid_size": 9})");
  const ExperimentSpec spec = load_experiment_spec(tmp.file("spec.json"));
  CHECK(spec.generator == "degenerate");
  CHECK(spec.runs == 2);
  CHECK(spec.sample_sizes == std::vector<int>{12});

  const ExperimentReport report = run_experiment(spec);
  write_report_json(tmp.file("report.json"), report);
  write_report_csv(tmp.file("report.csv"), report);
  CHECK(fs::exists(tmp.file("report.json")));

  std::ifstream csv(tmp.file("report.csv"));
  std::string header;
  std::getline(csv, header);
  CHECK(header == "generator,method,n,run,mspe,wall_ms,status");
  int lines = 0;
  for (std::string line; std::getline(csv, line);)
    if (!line.empty()) ++lines;
  CHECK(lines == 2);

  std::ifstream jf(tmp.file("report.json"));
  std::string all((std::istreambuf_iterator<char>(jf)), std::istreambuf_iterator<char>());
  CHECK(all.find("\"amspe\"") != std::string::npos);
  CHECK(all.find("\"runs\"") != std::string::npos);
}

TEST_CASE("solver report serializes to json") {
  SolverReport rep;
  rep.iterations = 12;
  rep.residual = 3.5e-9;
  rep.converged = true;
  const std::string j = solver_report_json(rep);
  CHECK(j.find("\"iterations\":12") != std::string::npos);
  CHECK(j.find("\"converged\":true") != std::string::npos);
}

TEST_CASE("fit options parsing") {
  const FitOptions opts = parse_fit_options(
      R"({"k": 7, "r": 3, "seed": 11, "bandwidth": 0.5,
          "net": {"width": 16, "hidden_layers": 4},
          "grid": [{"width": 8}, {"width": 64, "learning_rate": 0.005}],
          "grid_policy": "per_coordinate"})");
  CHECK(opts.k == 7);
  CHECK(opts.r == 3);
  CHECK(opts.seed == 11);
  CHECK(opts.bandwidth == doctest::Approx(0.5));
  CHECK(opts.net.width == 16);
  CHECK(opts.net.hidden_layers == 4);
  REQUIRE(opts.grid.size() == 2);
  CHECK(opts.grid[1].learning_rate == doctest::Approx(0.005));
  CHECK(opts.grid_policy == GridPolicy::PerCoordinate);

  CHECK_THROWS_AS(parse_fit_options("{bad json"), Error);
  CHECK_THROWS_AS(parse_fit_options(R"({"grid_policy": "whatever"})"), Error);
}
