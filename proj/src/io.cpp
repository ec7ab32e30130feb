#include "dfr/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace dfr {

namespace {

[[noreturn]] void io_fail(const std::string& field, const std::string& msg) {
  throw Error(ErrorKind::Validation, "io", field, msg);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail(path, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    io_fail(path, std::string("invalid JSON: ") + e.what());
  }
}

std::vector<double> parse_numeric_line(const std::string& line, const std::string& path) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    std::size_t next = line.find(',', pos);
    if (next == std::string::npos) next = line.size();
    const std::string tok = line.substr(pos, next - pos);
    if (!tok.empty() && tok.find_first_not_of(" \t\r") != std::string::npos) {
      try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        out.push_back(v);
      } catch (const std::exception&) {
        io_fail(path, "non-numeric CSV field '" + tok + "'");
      }
    }
    pos = next + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::vector<double>> read_csv_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) io_fail(path, "cannot open file");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r,") == std::string::npos) continue;
    rows.push_back(parse_numeric_line(line, path));
  }
  return rows;
}

std::vector<CsvRow> read_csv_rows_lenient(const std::string& path) {
  std::ifstream in(path);
  if (!in) io_fail(path, "cannot open file");
  std::vector<CsvRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r,") == std::string::npos) continue;
    CsvRow row;
    try {
      row.values = parse_numeric_line(line, path);
      row.ok = true;
    } catch (const Error& e) {
      row.ok = false;
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd read_csv_matrix(const std::string& path) {
  const auto rows = read_csv_rows(path);
  if (rows.empty()) io_fail(path, "empty CSV");
  const std::size_t cols = rows.front().size();
  for (const auto& r : rows)
    if (r.size() != cols) io_fail(path, "ragged CSV where a rectangular matrix was expected");
  Eigen::MatrixXd m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
  return m;
}

void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) io_fail(path, "cannot open file for writing");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

Sidecar load_sidecar(const std::string& path) {
  const json j = parse_json_file(path);
  Sidecar sc;
  if (!j.contains("space")) io_fail(path, "sidecar missing 'space'");
  sc.space = space_from_name(j.at("space").get<std::string>());
  sc.grid_size = j.value("grid_size", 101);
  sc.nodes = j.value("nodes", 0);
  sc.weight_bound = j.value("weight_bound", 0.0);
  if (j.contains("diag_bound")) sc.diag_bound = j.at("diag_bound").get<double>();
  if (j.contains("support")) {
    const auto& s = j.at("support");
    if (!s.is_array() || s.size() != 2) io_fail(path, "'support' must be [lo, hi]");
    sc.support = Bounds{s[0].get<double>(), s[1].get<double>()};
  }
  sc.format = j.value("format", std::string());
  if (sc.space != Space::Wasserstein && sc.nodes < 1)
    io_fail(path, "matrix spaces need a positive 'nodes' entry");
  return sc;
}

namespace {

bool nondecreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i - 1] > v[i]) return false;
  return true;
}

std::vector<MetricObject> load_wasserstein_rows(const std::string& path, const Sidecar& sc) {
  const auto rows = read_csv_rows(path);
  if (rows.empty()) io_fail(path, "no response rows");
  const ProbGrid grid = ProbGrid::of(sc.grid_size);

  std::string format = sc.format;
  if (format.empty()) {
    bool all_quantiles = true;
    for (const auto& r : rows)
      if (static_cast<int>(r.size()) != sc.grid_size || !nondecreasing(r)) {
        all_quantiles = false;
        break;
      }
    format = all_quantiles ? "quantiles" : "samples";
  }

  std::vector<MetricObject> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    if (format == "quantiles") {
      QuantileFunction q;
      q.grid = grid;
      q.values = r;
      q.support = sc.support;
      check_invariants(q);
      out.emplace_back(std::move(q));
    } else {
      out.emplace_back(quantile_from_samples(r, grid, sc.support));
    }
  }
  return out;
}

MetricObject matrix_object(const Eigen::MatrixXd& entries, const Sidecar& sc) {
  if (sc.space == Space::Laplacian) {
    GraphLaplacian y;
    y.nodes = sc.nodes;
    y.entries = entries;
    double bound = sc.weight_bound;
    if (bound <= 0.0) {
      for (int i = 0; i < sc.nodes; ++i)
        for (int j = 0; j < sc.nodes; ++j)
          if (i != j) bound = std::max(bound, -entries(i, j));
      if (bound <= 0.0) bound = 1.0;
    }
    y.weight_bound = bound;
    check_invariants(y);
    return y;
  }
  CovMatrix c;
  c.dim = sc.nodes;
  c.entries = entries;
  c.diag_bound = sc.diag_bound;
  check_invariants(c);
  return c;
}

Eigen::MatrixXd unflatten(const std::vector<double>& row, int m, const std::string& path) {
  if (static_cast<int>(row.size()) != m * m)
    io_fail(path, "flattened matrix row must have m^2 entries");
  Eigen::MatrixXd e(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) e(i, j) = row[i * m + j];
  return e;
}

std::vector<MetricObject> load_matrix_file(const std::string& path, const Sidecar& sc) {
  const auto rows = read_csv_rows(path);
  if (rows.empty()) io_fail(path, "no response rows");
  const int m = sc.nodes;
  std::vector<MetricObject> out;

  if (static_cast<int>(rows.front().size()) == m * m && m > 1) {
    for (const auto& r : rows) out.push_back(matrix_object(unflatten(r, m, path), sc));
    return out;
  }
  if (static_cast<int>(rows.front().size()) == 3 && sc.space == Space::Laplacian && m != 3) {
    // single edge-list graph (three columns): i, j, weight with 1-based nodes
    std::vector<WeightedEdge> edges;
    for (const auto& r : rows)
      edges.push_back({static_cast<int>(r[0]) - 1, static_cast<int>(r[1]) - 1, r[2]});
    const double bound = sc.weight_bound > 0.0 ? sc.weight_bound
                                               : std::max_element(edges.begin(), edges.end(),
                                                                  [](auto& a, auto& b) {
                                                                    return a.weight < b.weight;
                                                                  })
                                                     ->weight;
    out.push_back(laplacian_from_edges(edges, m, bound > 0 ? bound : 1.0));
    return out;
  }
  if (static_cast<int>(rows.front().size()) != m)
    io_fail(path, "expected rows of m, m^2, or 3 (edge list) values");
  if (rows.size() % m != 0) io_fail(path, "stacked dense CSV row count is not a multiple of m");
  for (std::size_t start = 0; start + m <= rows.size(); start += m) {
    Eigen::MatrixXd e(m, m);
    for (int i = 0; i < m; ++i) {
      if (static_cast<int>(rows[start + i].size()) != m) io_fail(path, "ragged matrix block");
      for (int j = 0; j < m; ++j) e(i, j) = rows[start + i][j];
    }
    out.push_back(matrix_object(e, sc));
  }
  return out;
}

std::vector<MetricObject> load_matrix_responses(const std::string& path, const Sidecar& sc) {
  if (fs::is_directory(path)) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(path))
      if (entry.is_regular_file()) files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) io_fail(path, "empty response directory");
    std::vector<MetricObject> out;
    for (const auto& f : files) {
      auto objs = load_matrix_file(f, sc);
      out.insert(out.end(), std::make_move_iterator(objs.begin()),
                 std::make_move_iterator(objs.end()));
    }
    return out;
  }
  return load_matrix_file(path, sc);
}

}  // namespace

Dataset load_dataset(const std::string& predictors_csv, const std::string& responses_path,
                     const std::string& sidecar_path) {
  if (!fs::exists(sidecar_path)) io_fail(sidecar_path, "sidecar file does not exist");
  if (!fs::exists(predictors_csv)) io_fail(predictors_csv, "predictors file does not exist");
  if (!fs::exists(responses_path)) io_fail(responses_path, "responses path does not exist");

  Dataset data;
  data.sidecar = load_sidecar(sidecar_path);
  data.predictors = read_csv_matrix(predictors_csv);
  data.responses = (data.sidecar.space == Space::Wasserstein)
                       ? load_wasserstein_rows(responses_path, data.sidecar)
                       : load_matrix_responses(responses_path, data.sidecar);
  if (static_cast<Eigen::Index>(data.responses.size()) != data.predictors.rows())
    io_fail(responses_path,
            "response count (" + std::to_string(data.responses.size()) +
                ") does not match predictor rows (" + std::to_string(data.predictors.rows()) +
                ")");
  return data;
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) io_fail("matrix", "expected a nonempty array of arrays");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (j[i].size() != cols) io_fail("matrix", "ragged matrix in JSON");
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

json config_to_json(const MlpConfig& c) {
  return json{{"hidden_layers", c.hidden_layers},
              {"width", c.width},
              {"dropout", c.dropout},
              {"learning_rate", c.learning_rate},
              {"max_epochs", c.max_epochs},
              {"patience", c.patience},
              {"batch_size", c.batch_size},
              {"validation_fraction", c.validation_fraction},
              {"seed", c.seed}};
}

MlpConfig config_from_json(const json& j) {
  MlpConfig c;
  c.hidden_layers = j.value("hidden_layers", c.hidden_layers);
  c.width = j.value("width", c.width);
  c.dropout = j.value("dropout", c.dropout);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.seed = j.value("seed", c.seed);
  return c;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) io_fail(path, "cannot open file for writing");
  out << j.dump(2) << '\n';
}

json object_to_json(const MetricObject& obj) {
  if (const auto* q = std::get_if<QuantileFunction>(&obj)) return json(q->values);
  if (const auto* l = std::get_if<GraphLaplacian>(&obj)) return matrix_to_json(l->entries);
  return matrix_to_json(std::get<CovMatrix>(obj).entries);
}

}  // namespace

class MlpSerializer {
 public:
  static json to_json(const Mlp& net) {
    json j;
    j["dims"] = net.dims_;
    json ws = json::array();
    for (const auto& w : net.weights_) ws.push_back(matrix_to_json(w));
    j["weights"] = std::move(ws);
    json bs = json::array();
    for (const auto& b : net.biases_) {
      json row = json::array();
      for (Eigen::Index i = 0; i < b.size(); ++i) row.push_back(b(i));
      bs.push_back(std::move(row));
    }
    j["biases"] = std::move(bs);
    j["config"] = config_to_json(net.config_);
    json log = json::array();
    for (const auto& e : net.log_)
      log.push_back(json{{"train", e.train_risk}, {"validation", e.validation_risk}});
    j["log"] = std::move(log);
    j["best_epoch"] = net.best_epoch_;
    j["dropout_rate"] = net.dropout_rate_;
    return j;
  }

  static Mlp from_json(const json& j) {
    Mlp net(j.at("dims").get<std::vector<int>>());
    const auto& ws = j.at("weights");
    const auto& bs = j.at("biases");
    if (ws.size() != net.weights_.size() || bs.size() != net.biases_.size())
      io_fail("net", "layer count mismatch in serialized network");
    for (std::size_t l = 0; l < net.weights_.size(); ++l) {
      net.weights_[l] = matrix_from_json(ws[l]);
      const auto& row = bs[l];
      net.biases_[l].resize(row.size());
      for (std::size_t i = 0; i < row.size(); ++i) net.biases_[l](i) = row[i].get<double>();
      if (net.weights_[l].rows() != net.dims_[l + 1] || net.weights_[l].cols() != net.dims_[l] ||
          net.biases_[l].size() != net.dims_[l + 1])
        io_fail("net", "parameter shapes do not chain with dims");
    }
    net.config_ = config_from_json(j.at("config"));
    for (const auto& e : j.at("log"))
      net.log_.push_back({e.at("train").get<double>(), e.at("validation").get<double>()});
    net.best_epoch_ = j.value("best_epoch", -1);
    net.dropout_rate_ = j.value("dropout_rate", 0.0);
    return net;
  }
};

Sidecar bundle_sidecar(const DfrModel& model) {
  Sidecar sc;
  const MetricObject& first = model.lfr.responses.front();
  sc.space = object_space(first);
  if (const auto* q = std::get_if<QuantileFunction>(&first)) {
    sc.grid_size = q->grid.size;
    sc.support = q->support;
  } else if (const auto* l = std::get_if<GraphLaplacian>(&first)) {
    sc.nodes = l->nodes;
    sc.weight_bound = l->weight_bound;
  } else {
    const auto& c = std::get<CovMatrix>(first);
    sc.nodes = c.dim;
    sc.diag_bound = c.diag_bound;
  }
  return sc;
}

void save_model_bundle(const std::string& dir, const DfrModel& model) {
  if (model.lfr.responses.empty())
    throw Error(ErrorKind::Validation, "io", "model", "cannot save an empty model");
  fs::create_directories(dir);
  const fs::path base(dir);

  {
    json j;
    j["coordinates"] = matrix_to_json(model.embedding.coordinates);
    j["spectrum"] = model.embedding.spectrum;
    j["k"] = model.embedding.neighbors;
    j["r"] = model.embedding.intrinsic_dim;
    json bridges = json::array();
    for (const auto& b : model.embedding.bridges)
      bridges.push_back(json{{"u", b.u}, {"v", b.v}, {"weight", b.weight}});
    j["bridges"] = std::move(bridges);
    j["zero_filled"] = model.embedding.zero_filled;
    write_json_file((base / "embedding.json").string(), j);
  }

  for (std::size_t j = 0; j < model.nets.size(); ++j)
    write_json_file((base / ("net_" + std::to_string(j + 1) + ".json")).string(),
                    MlpSerializer::to_json(model.nets[j]));

  {
    const Sidecar sc = bundle_sidecar(model);
    json j;
    j["space"] = space_name(sc.space);
    j["kernel"] = "epanechnikov";
    j["bandwidth"] = model.lfr.kernel.bandwidth;
    j["embeddings"] = matrix_to_json(model.lfr.embeddings);
    json shape;
    shape["grid_size"] = sc.grid_size;
    shape["nodes"] = sc.nodes;
    shape["weight_bound"] = sc.weight_bound;
    if (sc.diag_bound) shape["diag_bound"] = *sc.diag_bound;
    if (sc.support) shape["support"] = json::array({sc.support->lo, sc.support->hi});
    j["shape"] = std::move(shape);
    json responses = json::array();
    for (const auto& obj : model.lfr.responses) responses.push_back(object_to_json(obj));
    j["responses"] = std::move(responses);
    write_json_file((base / "lfr.json").string(), j);
  }

  {
    json j;
    j["seed"] = model.provenance.seed;
    j["predictors_hash"] = model.provenance.predictors_hash;
    j["responses_hash"] = model.provenance.responses_hash;
    j["k"] = model.provenance.k;
    j["r"] = model.provenance.r;
    j["bandwidth"] = model.provenance.bandwidth;
    j["net_seeds"] = model.provenance.net_seeds;
    write_json_file((base / "provenance.json").string(), j);
  }

  {
    std::ofstream log(base / "fit.log");
    log << "deep frechet regression fit\n";
    log << "n=" << model.lfr.responses.size() << " r=" << model.embedding.intrinsic_dim
        << " k=" << model.embedding.neighbors << "\n";
    log << "bandwidth=" << format_double(model.lfr.kernel.bandwidth) << "\n";
    log << "bridges=" << model.embedding.bridges.size()
        << " zero_filled=" << (model.embedding.zero_filled ? "yes" : "no") << "\n";
    double positive_mass = 0.0;
    for (double lambda : model.embedding.spectrum) positive_mass += std::max(lambda, 0.0);
    log << "spectrum (value, share):";
    const std::size_t top = std::min<std::size_t>(model.embedding.spectrum.size(), 8);
    for (std::size_t i = 0; i < top; ++i) {
      const double lambda = model.embedding.spectrum[i];
      log << ' ' << lambda << " (";
      log << (positive_mass > 0.0 ? std::max(lambda, 0.0) / positive_mass : 0.0) << ')';
    }
    log << "\n";
    for (std::size_t j = 0; j < model.nets.size(); ++j) {
      const auto& lg = model.nets[j].training_log();
      log << "net " << (j + 1) << ": epochs=" << lg.size()
          << " best_epoch=" << model.nets[j].best_epoch();
      if (model.nets[j].best_epoch() >= 0)
        log << " best_val=" << lg[model.nets[j].best_epoch()].validation_risk;
      log << "\n";
    }
  }
}

DfrModel load_model_bundle(const std::string& dir) {
  const fs::path base(dir);
  for (const char* name : {"embedding.json", "lfr.json", "provenance.json"})
    if (!fs::exists(base / name))
      io_fail((base / name).string(), "model bundle is missing this file");

  DfrModel model;
  {
    const json j = parse_json_file((base / "embedding.json").string());
    model.embedding.coordinates = matrix_from_json(j.at("coordinates"));
    model.embedding.spectrum = j.at("spectrum").get<std::vector<double>>();
    model.embedding.neighbors = j.at("k").get<int>();
    model.embedding.intrinsic_dim = j.at("r").get<int>();
    for (const auto& b : j.at("bridges"))
      model.embedding.bridges.push_back(
          {b.at("u").get<int>(), b.at("v").get<int>(), b.at("weight").get<double>()});
    model.embedding.zero_filled = j.value("zero_filled", false);
  }

  for (int j = 1; j <= model.embedding.intrinsic_dim; ++j) {
    const fs::path net_path = base / ("net_" + std::to_string(j) + ".json");
    if (!fs::exists(net_path)) io_fail(net_path.string(), "model bundle is missing this file");
    model.nets.push_back(MlpSerializer::from_json(parse_json_file(net_path.string())));
  }

  {
    const json j = parse_json_file((base / "lfr.json").string());
    const Space space = space_from_name(j.at("space").get<std::string>());
    model.lfr.kernel.bandwidth = j.at("bandwidth").get<double>();
    model.lfr.embeddings = matrix_from_json(j.at("embeddings"));
    const json& shape = j.at("shape");
    for (const auto& r : j.at("responses")) {
      if (space == Space::Wasserstein) {
        QuantileFunction q;
        q.grid = ProbGrid::of(shape.at("grid_size").get<int>());
        q.values = r.get<std::vector<double>>();
        if (shape.contains("support")) {
          const auto& s = shape.at("support");
          q.support = Bounds{s[0].get<double>(), s[1].get<double>()};
        }
        check_invariants(q);
        model.lfr.responses.emplace_back(std::move(q));
      } else if (space == Space::Laplacian) {
        GraphLaplacian y;
        y.nodes = shape.at("nodes").get<int>();
        y.weight_bound = shape.at("weight_bound").get<double>();
        y.entries = matrix_from_json(r);
        check_invariants(y);
        model.lfr.responses.emplace_back(std::move(y));
      } else {
        CovMatrix c;
        c.dim = shape.at("nodes").get<int>();
        if (shape.contains("diag_bound")) c.diag_bound = shape.at("diag_bound").get<double>();
        c.entries = matrix_from_json(r);
        check_invariants(c);
        model.lfr.responses.emplace_back(std::move(c));
      }
    }
  }

  {
    const json j = parse_json_file((base / "provenance.json").string());
    model.provenance.seed = j.value("seed", 0ull);
    model.provenance.predictors_hash = j.value("predictors_hash", std::string());
    model.provenance.responses_hash = j.value("responses_hash", std::string());
    model.provenance.k = j.value("k", 0);
    model.provenance.r = j.value("r", 0);
    model.provenance.bandwidth = j.value("bandwidth", 0.0);
    if (j.contains("net_seeds"))
      model.provenance.net_seeds = j.at("net_seeds").get<std::vector<std::uint64_t>>();
  }
  return model;
}

std::string serialize_object_row(const MetricObject& obj) {
  std::ostringstream out;
  auto emit = [&](double v, bool first) {
    if (!first) out << ',';
    out << format_double(v);
  };
  if (const auto* q = std::get_if<QuantileFunction>(&obj)) {
    for (std::size_t k = 0; k < q->values.size(); ++k) emit(q->values[k], k == 0);
    return out.str();
  }
  const Eigen::MatrixXd& e = std::holds_alternative<GraphLaplacian>(obj)
                                 ? std::get<GraphLaplacian>(obj).entries
                                 : std::get<CovMatrix>(obj).entries;
  bool first = true;
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.cols(); ++j) {
      emit(e(i, j), first);
      first = false;
    }
  return out.str();
}

MetricObject parse_object_row(const std::string& line, const Sidecar& sidecar) {
  const std::vector<double> values = parse_numeric_line(line, "row");
  if (sidecar.space == Space::Wasserstein) {
    QuantileFunction q;
    q.grid = ProbGrid::of(sidecar.grid_size);
    q.values = values;
    q.support = sidecar.support;
    check_invariants(q);
    return q;
  }
  const Eigen::MatrixXd entries = unflatten(values, sidecar.nodes, "row");
  return matrix_object(entries, sidecar);
}

void write_predictions(const std::string& path, std::span<const PredictionRow> rows) {
  std::ofstream out(path);
  if (!out) io_fail(path, "cannot open file for writing");
  for (const auto& row : rows) {
    if (row.ok)
      out << serialize_object_row(row.object) << '\n';
    else
      out << "FAILED: " << row.error << '\n';
  }
}

std::vector<PredictionRow> read_predictions(const std::string& path, const Sidecar& sidecar) {
  std::ifstream in(path);
  if (!in) io_fail(path, "cannot open file");
  std::vector<PredictionRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    PredictionRow row;
    if (line.rfind("FAILED:", 0) == 0) {
      row.ok = false;
      row.error = line.substr(7);
    } else {
      row.ok = true;
      row.object = parse_object_row(line, sidecar);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

FitOptions parse_fit_options(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    io_fail("options", std::string("invalid options JSON: ") + e.what());
  }
  FitOptions opts;
  opts.k = j.value("k", opts.k);
  opts.r = j.value("r", opts.r);
  opts.seed = j.value("seed", opts.seed);
  opts.jobs = j.value("jobs", opts.jobs);
  if (j.contains("bandwidth")) opts.bandwidth = j.at("bandwidth").get<double>();
  if (j.contains("net")) opts.net = config_from_json(j.at("net"));
  if (j.contains("grid"))
    for (const auto& g : j.at("grid")) opts.grid.push_back(config_from_json(g));
  if (j.contains("grid_file")) {
    const json gj = parse_json_file(j.at("grid_file").get<std::string>());
    const json& arr = gj.is_array() ? gj : gj.at("grid");
    for (const auto& g : arr) opts.grid.push_back(config_from_json(g));
  }
  const std::string policy = j.value("grid_policy", "first_coordinate");
  if (policy == "first_coordinate")
    opts.grid_policy = GridPolicy::FirstCoordinate;
  else if (policy == "per_coordinate")
    opts.grid_policy = GridPolicy::PerCoordinate;
  else
    io_fail("grid_policy", "expected first_coordinate|per_coordinate");
  return opts;
}

ExperimentSpec load_experiment_spec(const std::string& path) {
  const json j = parse_json_file(path);
  ExperimentSpec spec;
  spec.generator = j.value("generator", spec.generator);
  if (j.contains("n")) {
    if (j.at("n").is_array())
      spec.sample_sizes = j.at("n").get<std::vector<int>>();
    else
      spec.sample_sizes = {j.at("n").get<int>()};
  }
  spec.runs = j.value("Q", j.value("runs", spec.runs));
  if (j.contains("methods")) spec.methods = j.at("methods").get<std::vector<std::string>>();
  spec.seed = j.value("seed", spec.seed);
  spec.test_size = j.value("test_size", spec.test_size);
  spec.nodes = j.value("nodes", spec.nodes);
  spec.nu = j.value("nu", spec.nu);
  spec.grid_size = j.value("grid_size", spec.grid_size);
  spec.jobs = j.value("jobs", spec.jobs);
  if (j.contains("fit")) {
    FitOptions opts = parse_fit_options(j.at("fit").dump());
    spec.fit = std::move(opts);
  }
  return spec;
}

namespace {

json report_to_json(const ExperimentReport& report) {
  json j;
  j["generator"] = report.spec.generator;
  j["methods"] = report.spec.methods;
  j["n"] = report.spec.sample_sizes;
  j["Q"] = report.spec.runs;
  j["seeds"] = json{{"master", report.spec.seed}};
  j["test_size"] = report.spec.test_size;
  json runs = json::array();
  for (const auto& rr : report.runs) {
    json r{{"n", rr.n},
           {"method", rr.method},
           {"run", rr.run},
           {"wall_ms", rr.wall_ms},
           {"status", rr.status},
           {"predictions_checked", rr.predictions_checked},
           {"failed_predictions", rr.failed_predictions},
           {"invariant_violations", rr.invariant_violations}};
    if (rr.status != "failed") r["mspe"] = rr.mspe_value;
    if (!rr.error.empty()) r["error"] = rr.error;
    runs.push_back(std::move(r));
  }
  j["runs"] = std::move(runs);
  json amspe = json::object();
  json mmspe = json::object();
  for (const auto& agg : report.aggregates) {
    const std::string key = std::to_string(agg.n);
    if (agg.completed > 0) {
      amspe[agg.method][key] = agg.amspe;
      mmspe[agg.method][key] = agg.mmspe;
    } else {
      amspe[agg.method][key] = nullptr;
      mmspe[agg.method][key] = nullptr;
    }
  }
  j["amspe"] = std::move(amspe);
  j["mmspe"] = std::move(mmspe);
  j["wall_ms"] = report.wall_ms;
  return j;
}

}  // namespace

std::string solver_report_json(const SolverReport& report) {
  return json{{"iterations", report.iterations},
              {"residual", report.residual},
              {"converged", report.converged}}
      .dump();
}

void write_report_json(const std::string& path, const ExperimentReport& report) {
  write_json_file(path, report_to_json(report));
}

void write_report_csv(const std::string& path, const ExperimentReport& report) {
  std::ofstream out(path);
  if (!out) io_fail(path, "cannot open file for writing");
  out << "generator,method,n,run,mspe,wall_ms,status\n";
  for (const auto& rr : report.runs) {
    out << report.spec.generator << ',' << rr.method << ',' << rr.n << ',' << rr.run << ',';
    if (rr.status != "failed") out << format_double(rr.mspe_value);
    out << ',' << format_double(rr.wall_ms) << ',' << rr.status << '\n';
  }
}

}  // namespace dfr
