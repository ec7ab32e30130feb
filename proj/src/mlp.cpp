#include "dfr/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dfr/parallel.hpp"

namespace dfr {

void MlpConfig::validate() const {
  auto fail = [](const char* field, const char* msg) {
    throw Error(ErrorKind::Validation, "dnn", field, msg);
  };
  if (hidden_layers < 1) fail("hidden_layers", "need at least one hidden layer");
  if (width < 1) fail("width", "layer width must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout", "dropout must be in [0, 1)");
  if (!(learning_rate >= 0.0)) fail("learning_rate", "learning rate must be nonnegative");
  if (max_epochs < 1) fail("max_epochs", "need at least one epoch");
  if (patience < 0) fail("patience", "patience must be nonnegative");
  if (batch_size < 1) fail("batch_size", "batch size must be positive");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    fail("validation_fraction", "validation fraction must be in (0, 1)");
}

TrainSplit make_split(int n, double validation_fraction, RngStream rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = n - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.below(static_cast<std::uint32_t>(i + 1))]);
  int n_val = static_cast<int>(std::lround(validation_fraction * n));
  n_val = std::clamp(n_val, 1, n - 1);
  TrainSplit split;
  split.validation.assign(idx.begin(), idx.begin() + n_val);
  split.train.assign(idx.begin() + n_val, idx.end());
  if (split.train.empty() || split.validation.empty())
    throw Error(ErrorKind::Validation, "dnn", "split", "degenerate train/validation split");
  return split;
}

Mlp::Mlp(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.size() < 2)
    throw Error(ErrorKind::Shape, "dnn", "dims", "need at least input and output dims");
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    weights_.push_back(Eigen::MatrixXd::Zero(dims_[l + 1], dims_[l]));
    biases_.push_back(Eigen::VectorXd::Zero(dims_[l + 1]));
  }
}

namespace {

void check_input(const Mlp& net, Eigen::Index got) {
  if (got != net.input_dim())
    throw Error(ErrorKind::Shape, "dnn", "x",
                "input length " + std::to_string(got) + " does not match network input dim " +
                    std::to_string(net.input_dim()));
}

}  // namespace

double Mlp::forward(const Eigen::VectorXd& x, bool train_mode, RngStream* rng) const {
  check_input(*this, x.size());
  Eigen::VectorXd a = x;
  const std::size_t layers = weights_.size();
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    a = (weights_[l] * a + biases_[l]).cwiseMax(0.0);
    if (train_mode && dropout_rate_ > 0.0) {
      if (!rng)
        throw Error(ErrorKind::Validation, "dnn", "rng", "train-mode forward needs an rng");
      const double keep = 1.0 - dropout_rate_;
      for (Eigen::Index i = 0; i < a.size(); ++i)
        a(i) = (rng->uniform() < keep) ? a(i) / keep : 0.0;
    }
  }
  const Eigen::VectorXd out = weights_.back() * a + biases_.back();
  if (!std::isfinite(out(0)))
    throw Error(ErrorKind::Numeric, "dnn", "forward", "non-finite activation");
  return out(0);
}

double Mlp::predict(const Eigen::VectorXd& x) const { return forward(x, false, nullptr); }

Eigen::VectorXd Mlp::predict_rows(const Eigen::MatrixXd& x_rows) const {
  Eigen::VectorXd out(x_rows.rows());
  for (Eigen::Index i = 0; i < x_rows.rows(); ++i) out(i) = predict(Eigen::VectorXd(x_rows.row(i)));
  return out;
}

namespace {

// Activations per layer for a batch (samples as columns), with optional
// inverted-dropout masks recorded for the backward pass.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // [0]=input, per hidden layer after
  std::vector<Eigen::MatrixXd> masks;        // scale factors applied per hidden unit
  Eigen::RowVectorXd output;
};

ForwardCache forward_batch(const std::vector<Eigen::MatrixXd>& w,
                           const std::vector<Eigen::VectorXd>& b, const Eigen::MatrixXd& x_cols,
                           double dropout, RngStream* rng) {
  ForwardCache cache;
  cache.activations.push_back(x_cols);
  const std::size_t layers = w.size();
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    Eigen::MatrixXd a = ((w[l] * cache.activations.back()).colwise() + b[l]).cwiseMax(0.0);
    if (dropout > 0.0) {
      const double keep = 1.0 - dropout;
      Eigen::MatrixXd mask(a.rows(), a.cols());
      for (Eigen::Index c = 0; c < a.cols(); ++c)
        for (Eigen::Index r = 0; r < a.rows(); ++r)
          mask(r, c) = (rng->uniform() < keep) ? 1.0 / keep : 0.0;
      a = a.cwiseProduct(mask);
      cache.masks.push_back(std::move(mask));
    }
    cache.activations.push_back(std::move(a));
  }
  cache.output = (w.back() * cache.activations.back()).colwise() + b.back();
  return cache;
}

// Exact backprop of the batch-mean squared error.
std::pair<double, Gradients> backward_batch(const std::vector<Eigen::MatrixXd>& w,
                                            const ForwardCache& cache,
                                            const Eigen::RowVectorXd& targets) {
  const auto batch = static_cast<double>(targets.size());
  const Eigen::RowVectorXd err = cache.output - targets;
  const double risk = err.squaredNorm() / batch;

  Gradients g;
  g.weights.resize(w.size());
  g.biases.resize(w.size());

  // delta for the output layer: dL/d(out) = 2 err / batch
  Eigen::MatrixXd delta = (2.0 / batch) * err;
  for (int l = static_cast<int>(w.size()) - 1; l >= 0; --l) {
    g.weights[l] = delta * cache.activations[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = w[l].transpose() * delta;
      if (!cache.masks.empty()) back = back.cwiseProduct(cache.masks[l - 1]);
      // ReLU gate: activation > 0 (post-mask zeros stay zero either way)
      back = back.cwiseProduct(
          (cache.activations[l].array() > 0.0).cast<double>().matrix());
      delta = std::move(back);
    }
  }
  return {risk, std::move(g)};
}

double eval_risk(const Mlp& net, const Eigen::MatrixXd& x_rows, const Eigen::VectorXd& z,
                 std::span<const int> idx) {
  double acc = 0.0;
  for (int i : idx) {
    const double e = net.predict(Eigen::VectorXd(x_rows.row(i))) - z(i);
    acc += e * e;
  }
  return acc / static_cast<double>(idx.size());
}

struct AdamState {
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  long t = 0;
};

void adam_step(std::vector<Eigen::MatrixXd>& w, std::vector<Eigen::VectorXd>& b,
               const Gradients& g, AdamState& s, double lr) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++s.t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(s.t));
  for (std::size_t l = 0; l < w.size(); ++l) {
    s.mw[l] = beta1 * s.mw[l] + (1.0 - beta1) * g.weights[l];
    s.vw[l] = beta2 * s.vw[l] + (1.0 - beta2) * g.weights[l].cwiseProduct(g.weights[l]);
    w[l].array() -=
        lr * (s.mw[l].array() / bc1) / ((s.vw[l].array() / bc2).sqrt() + eps);
    s.mb[l] = beta1 * s.mb[l] + (1.0 - beta1) * g.biases[l];
    s.vb[l] = beta2 * s.vb[l] + (1.0 - beta2) * g.biases[l].cwiseProduct(g.biases[l]);
    b[l].array() -=
        lr * (s.mb[l].array() / bc1) / ((s.vb[l].array() / bc2).sqrt() + eps);
  }
}

}  // namespace

std::pair<double, Gradients> Mlp::loss_and_grad(const Eigen::MatrixXd& x_rows,
                                                const Eigen::VectorXd& z) const {
  if (x_rows.rows() == 0)
    throw Error(ErrorKind::Validation, "dnn", "batch", "empty batch");
  if (x_rows.rows() != z.size())
    throw Error(ErrorKind::Shape, "dnn", "batch", "target count does not match batch rows");
  check_input(*this, x_rows.cols());
  ForwardCache cache =
      forward_batch(weights_, biases_, x_rows.transpose(), /*dropout=*/0.0, nullptr);
  auto [risk, grads] = backward_batch(weights_, cache, z.transpose());
  if (!std::isfinite(risk))
    throw Error(ErrorKind::Numeric, "dnn", "loss", "non-finite loss");
  return {risk, std::move(grads)};
}

Mlp train_mlp(const Eigen::MatrixXd& x_rows, const Eigen::VectorXd& z, const MlpConfig& config) {
  config.validate();
  const int n = static_cast<int>(x_rows.rows());
  const int p = static_cast<int>(x_rows.cols());
  if (n < 5) throw Error(ErrorKind::Validation, "dnn", "n", "need at least 5 samples");
  if (p < 1) throw Error(ErrorKind::Validation, "dnn", "p", "need at least one predictor");
  if (z.size() != n)
    throw Error(ErrorKind::Shape, "dnn", "z", "target length does not match sample count");
  if (!x_rows.allFinite() || !z.allFinite())
    throw Error(ErrorKind::Numeric, "dnn", "data", "non-finite training data");

  RngStream root = RngStream::root(config.seed);
  const TrainSplit split = make_split(n, config.validation_fraction, root.child("split"));

  // Standardize inputs and target on the training split so one learning rate
  // works across wildly different predictor and embedding scales. Both affine
  // maps are folded back into the first and last layers on return, so the
  // trained network evaluates raw inputs directly.
  Eigen::VectorXd x_mean = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd x_scale = Eigen::VectorXd::Ones(p);
  for (int j = 0; j < p; ++j) {
    double mean = 0.0;
    for (int i : split.train) mean += x_rows(i, j);
    mean /= split.train.size();
    double var = 0.0;
    for (int i : split.train) var += (x_rows(i, j) - mean) * (x_rows(i, j) - mean);
    var /= split.train.size();
    x_mean(j) = mean;
    x_scale(j) = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  double z_mean = 0.0;
  for (int i : split.train) z_mean += z(i);
  z_mean /= split.train.size();
  double z_var = 0.0;
  for (int i : split.train) z_var += (z(i) - z_mean) * (z(i) - z_mean);
  z_var /= split.train.size();
  const double z_scale = z_var > 1e-24 ? std::sqrt(z_var) : 1.0;

  Eigen::MatrixXd xs = x_rows;
  xs.rowwise() -= x_mean.transpose();
  xs.array().rowwise() /= x_scale.transpose().array();
  const Eigen::VectorXd zs = (z.array() - z_mean) / z_scale;

  std::vector<int> dims;
  dims.push_back(p);
  for (int l = 0; l < config.hidden_layers; ++l) dims.push_back(config.width);
  dims.push_back(1);

  Mlp net(dims);
  net.config_ = config;
  net.dropout_rate_ = config.dropout;
  {
    RngStream init = root.child("init");
    for (std::size_t l = 0; l < net.weights_.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
      for (Eigen::Index c = 0; c < net.weights_[l].cols(); ++c)
        for (Eigen::Index r = 0; r < net.weights_[l].rows(); ++r)
          net.weights_[l](r, c) = init.uniform(-bound, bound);
      for (Eigen::Index r = 0; r < net.biases_[l].size(); ++r)
        net.biases_[l](r) = init.uniform(-bound, bound);
    }
  }

  AdamState adam;
  for (const auto& w : net.weights_) {
    adam.mw.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    adam.vw.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  }
  for (const auto& b : net.biases_) {
    adam.mb.push_back(Eigen::VectorXd::Zero(b.size()));
    adam.vb.push_back(Eigen::VectorXd::Zero(b.size()));
  }

  RngStream order_rng = root.child("order");
  RngStream dropout_rng = root.child("dropout");

  std::vector<Eigen::MatrixXd> best_w = net.weights_;
  std::vector<Eigen::VectorXd> best_b = net.biases_;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int stall = 0;
  constexpr double kImprovement = 1e-6;

  std::vector<int> train_idx = split.train;
  const int n_train = static_cast<int>(train_idx.size());

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    for (int i = n_train - 1; i > 0; --i)
      std::swap(train_idx[i], train_idx[order_rng.below(static_cast<std::uint32_t>(i + 1))]);

    for (int start = 0; start < n_train; start += config.batch_size) {
      const int count = std::min(config.batch_size, n_train - start);
      Eigen::MatrixXd batch(p, count);
      Eigen::RowVectorXd targets(count);
      for (int c = 0; c < count; ++c) {
        batch.col(c) = xs.row(train_idx[start + c]).transpose();
        targets(c) = zs(train_idx[start + c]);
      }
      ForwardCache cache = forward_batch(net.weights_, net.biases_, batch, config.dropout,
                                         config.dropout > 0.0 ? &dropout_rng : nullptr);
      auto [risk, grads] = backward_batch(net.weights_, cache, targets);
      if (!std::isfinite(risk))
        throw Error(ErrorKind::Numeric, "dnn", "loss", "non-finite training loss");
      adam_step(net.weights_, net.biases_, grads, adam, config.learning_rate);
    }

    // log risks in the target's original units
    const double unscale = z_scale * z_scale;
    const double train_risk = unscale * eval_risk(net, xs, zs, split.train);
    const double val_risk = unscale * eval_risk(net, xs, zs, split.validation);
    net.log_.push_back({train_risk, val_risk});

    if (val_risk < best_val) {
      const double gain = best_val - val_risk;
      best_val = val_risk;
      best_w = net.weights_;
      best_b = net.biases_;
      best_epoch = epoch;
      if (gain > kImprovement) {
        stall = 0;
        continue;
      }
    }
    if (++stall > config.patience) break;
  }

  net.weights_ = std::move(best_w);
  net.biases_ = std::move(best_b);
  net.best_epoch_ = best_epoch;

  // Fold the standardization into the parameters: the first layer absorbs the
  // input map x -> (x - mean)/scale, the output layer absorbs z-unscaling.
  net.biases_.front() -= net.weights_.front() * (x_mean.array() / x_scale.array()).matrix();
  net.weights_.front() = net.weights_.front() * (1.0 / x_scale.array()).matrix().asDiagonal();
  net.weights_.back() *= z_scale;
  net.biases_.back() = z_scale * net.biases_.back() +
                       Eigen::VectorXd::Constant(net.biases_.back().size(), z_mean);
  return net;
}

MlpConfig grid_search(const Eigen::MatrixXd& x_rows, const Eigen::VectorXd& z,
                      std::span<const MlpConfig> candidates, int jobs) {
  if (candidates.empty())
    throw Error(ErrorKind::Validation, "dnn", "grid", "empty candidate grid");
  std::vector<double> val_risk(candidates.size(), std::numeric_limits<double>::infinity());
  parallel_for(jobs, static_cast<int>(candidates.size()), [&](int c) {
    const Mlp net = train_mlp(x_rows, z, candidates[c]);
    for (const auto& e : net.training_log())
      val_risk[c] = std::min(val_risk[c], e.validation_risk);
  });
  std::size_t best = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c)
    if (val_risk[c] < val_risk[best]) best = c;
  return candidates[best];
}

}  // namespace dfr
