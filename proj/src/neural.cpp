#include "ips/neural.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include <openssl/evp.h>

namespace ips {
namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation a) {
  if (a == Activation::kRelu) return z.cwiseMax(0.0);
  return z.array().tanh().matrix();
}

// Derivative expressed through the pre-activation z.
Eigen::MatrixXd activation_slope(const Eigen::MatrixXd& z, Activation a) {
  if (a == Activation::kRelu) return (z.array() > 0.0).cast<double>().matrix();
  return (1.0 - z.array().tanh().square()).matrix();
}

Eigen::MatrixXd to_inputs(std::span<const Example> examples, std::size_t dim) {
  Eigen::MatrixXd x(dim, examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].features.size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "example has " + std::to_string(examples[i].features.size()) +
                      " features, network expects " + std::to_string(dim));
    }
    x.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXd>(examples[i].features.data(), static_cast<Eigen::Index>(dim));
  }
  return x;
}

Eigen::MatrixXd to_targets(std::span<const Example> examples) {
  Eigen::MatrixXd y(2, examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    y(0, static_cast<Eigen::Index>(i)) = examples[i].label.x;
    y(1, static_cast<Eigen::Index>(i)) = examples[i].label.y;
  }
  return y;
}

void standardize(Eigen::MatrixXd& x, const FeatureStats& stats) {
  x.colwise() -= stats.mean;
  x.array().colwise() /= stats.stddev.array();
}

double median_error(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& targets) {
  if (predicted.cols() == 0) return 0.0;
  std::vector<double> err(static_cast<std::size_t>(predicted.cols()));
  for (Eigen::Index i = 0; i < predicted.cols(); ++i) {
    err[static_cast<std::size_t>(i)] = (predicted.col(i) - targets.col(i)).norm();
  }
  const std::size_t rank = (err.size() + 1) / 2;
  std::nth_element(err.begin(), err.begin() + static_cast<std::ptrdiff_t>(rank - 1), err.end());
  return err[rank - 1];
}

std::string base64_encode(const std::vector<unsigned char>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw Error(ErrorCode::kSchemaViolation, "bad base64 length");
  std::vector<unsigned char> out(text.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorCode::kSchemaViolation, "bad base64 payload");
  // The decoder keeps the bytes that stand in for '=' padding.
  std::size_t pad = 0;
  for (auto it = text.rbegin(); it != text.rend() && *it == '='; ++it) ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

}  // namespace

MlpConfig MlpConfig::for_input(std::size_t input, const std::vector<std::size_t>& hidden) {
  MlpConfig c;
  c.layer_sizes.push_back(input);
  c.layer_sizes.insert(c.layer_sizes.end(), hidden.begin(), hidden.end());
  c.layer_sizes.push_back(2);
  return c;
}

void MlpConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidConfig, what); };
  if (layer_sizes.size() < 3) fail("need at least one hidden layer");
  if (layer_sizes.back() != 2) fail("output layer must have 2 units");
  for (std::size_t s : layer_sizes) {
    if (s == 0) fail("layer sizes must be positive");
  }
  // Zero is allowed: it freezes the parameters, which is useful as a baseline.
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("learning rate must be >= 0");
  if (batch_size == 0) fail("batch size must be >= 1");
}

Mlp Mlp::initialize(const MlpConfig& config) {
  config.validate();
  Mlp mlp;
  mlp.config = config;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t l = 0; l + 1 < config.layer_sizes.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(config.layer_sizes[l]);
    const auto out = static_cast<Eigen::Index>(config.layer_sizes[l + 1]);
    const double scale = std::sqrt(2.0 / static_cast<double>(in));
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    for (Eigen::Index c = 0; c < in; ++c) {
      for (Eigen::Index r = 0; r < out; ++r) layer.weights(r, c) = scale * gauss(rng);
    }
    mlp.layers.push_back(std::move(layer));
  }
  const auto d = static_cast<Eigen::Index>(config.layer_sizes.front());
  mlp.stats = {Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)};
  return mlp;
}

std::size_t Mlp::input_dim() const noexcept {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weights.cols());
}

std::size_t Mlp::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const DenseLayer& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

std::vector<double> Mlp::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const DenseLayer& l : layers) {
    out.insert(out.end(), l.weights.data(), l.weights.data() + l.weights.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return out;
}

void Mlp::unflatten(std::span<const double> parameters) {
  if (parameters.size() != parameter_count()) {
    throw Error(ErrorCode::kDimensionMismatch, "parameter vector has the wrong length");
  }
  std::size_t at = 0;
  for (DenseLayer& l : layers) {
    std::copy_n(parameters.begin() + static_cast<std::ptrdiff_t>(at), l.weights.size(), l.weights.data());
    at += static_cast<std::size_t>(l.weights.size());
    std::copy_n(parameters.begin() + static_cast<std::ptrdiff_t>(at), l.bias.size(), l.bias.data());
    at += static_cast<std::size_t>(l.bias.size());
  }
}

Eigen::MatrixXd forward_batch(const Mlp& mlp, const Eigen::MatrixXd& inputs) {
  if (static_cast<std::size_t>(inputs.rows()) != mlp.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "input has " + std::to_string(inputs.rows()) + " features, network expects " +
                    std::to_string(mlp.input_dim()));
  }
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    Eigen::MatrixXd z = mlp.layers[l].weights * a;
    z.colwise() += mlp.layers[l].bias;
    a = (l + 1 < mlp.layers.size()) ? activate(z, mlp.config.activation) : std::move(z);
  }
  return a;
}

Position2D forward(const Mlp& mlp, std::span<const double> features) {
  const Eigen::MatrixXd x =
      Eigen::Map<const Eigen::VectorXd>(features.data(), static_cast<Eigen::Index>(features.size()));
  const Eigen::MatrixXd out = forward_batch(mlp, x);
  return {out(0, 0), out(1, 0)};
}

LossAndGrad loss_and_grad(const Mlp& mlp, const Eigen::MatrixXd& inputs,
                          const Eigen::MatrixXd& targets) {
  if (inputs.cols() == 0) throw Error(ErrorCode::kEmpty, "empty batch");
  if (static_cast<std::size_t>(inputs.rows()) != mlp.input_dim() || targets.rows() != 2 ||
      targets.cols() != inputs.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "batch shape does not match the network");
  }
  const std::size_t depth = mlp.layers.size();
  std::vector<Eigen::MatrixXd> acts{inputs};  // a_0 .. a_{L-1}
  std::vector<Eigen::MatrixXd> pre;           // z_1 .. z_L
  for (std::size_t l = 0; l < depth; ++l) {
    Eigen::MatrixXd z = mlp.layers[l].weights * acts.back();
    z.colwise() += mlp.layers[l].bias;
    if (l + 1 < depth) acts.push_back(activate(z, mlp.config.activation));
    pre.push_back(std::move(z));
  }
  const double n = static_cast<double>(inputs.cols());
  const Eigen::MatrixXd residual = pre.back() - targets;

  LossAndGrad out;
  out.mse = residual.squaredNorm() / n;
  out.gradients.layers.resize(depth);
  Eigen::MatrixXd delta = (2.0 / n) * residual;
  for (std::size_t l = depth; l-- > 0;) {
    if (l + 1 < depth) delta = delta.cwiseProduct(activation_slope(pre[l], mlp.config.activation));
    out.gradients.layers[l].weights = delta * acts[l].transpose();
    out.gradients.layers[l].bias = delta.rowwise().sum();
    if (l > 0) delta = mlp.layers[l].weights.transpose() * delta;
  }
  return out;
}

LossAndGrad loss_and_grad(const Mlp& mlp, std::span<const Example> batch) {
  if (batch.empty()) throw Error(ErrorCode::kEmpty, "empty batch");
  return loss_and_grad(mlp, to_inputs(batch, mlp.input_dim()), to_targets(batch));
}

FeatureStats compute_feature_stats(std::span<const Example> examples) {
  if (examples.empty()) throw Error(ErrorCode::kEmpty, "no examples for feature statistics");
  const std::size_t d = examples.front().features.size();
  const Eigen::MatrixXd x = to_inputs(examples, d);
  FeatureStats stats;
  stats.mean = x.rowwise().mean();
  stats.stddev = ((x.colwise() - stats.mean).array().square().rowwise().sum() /
                  static_cast<double>(x.cols()))
                     .sqrt()
                     .matrix();
  for (Eigen::Index i = 0; i < stats.stddev.size(); ++i) {
    if (!(stats.stddev(i) > 1e-12)) stats.stddev(i) = 1.0;
  }
  return stats;
}

TrainResult train(std::span<const Example> train_set, std::span<const Example> test_set,
                  const MlpConfig& config) {
  config.validate();
  if (train_set.empty()) throw Error(ErrorCode::kTooFewFrames, "empty training set");
  const std::size_t d = config.layer_sizes.front();

  Mlp mlp = Mlp::initialize(config);
  Eigen::MatrixXd x_train = to_inputs(train_set, d);
  const Eigen::MatrixXd y_train = to_targets(train_set);
  Eigen::MatrixXd x_test = to_inputs(test_set, d);
  const Eigen::MatrixXd y_test = to_targets(test_set);
  if (config.normalize) {
    mlp.stats = compute_feature_stats(train_set);
    standardize(x_train, mlp.stats);
    standardize(x_test, mlp.stats);
  }
  // Start the output at the centroid of the training labels.
  mlp.layers.back().bias = y_train.rowwise().mean();

  TrainResult result;
  result.model = mlp;
  double best = test_set.empty() ? std::numeric_limits<double>::infinity()
                                 : median_error(forward_batch(mlp, x_test), y_test);

  std::vector<DenseLayer> m1;
  std::vector<DenseLayer> m2;
  for (const DenseLayer& l : mlp.layers) {
    m1.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                  Eigen::VectorXd::Zero(l.bias.size())});
  }
  m2 = m1;

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Eigen::Index> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      Eigen::MatrixXd xb(x_train.rows(), static_cast<Eigen::Index>(count));
      Eigen::MatrixXd yb(2, static_cast<Eigen::Index>(count));
      for (std::size_t i = 0; i < count; ++i) {
        xb.col(static_cast<Eigen::Index>(i)) = x_train.col(order[start + i]);
        yb.col(static_cast<Eigen::Index>(i)) = y_train.col(order[start + i]);
      }
      LossAndGrad lg = loss_and_grad(mlp, xb, yb);
      if (!std::isfinite(lg.mse)) {
        throw TrainingDiverged(result.history,
                               "non-finite loss in epoch " + std::to_string(epoch));
      }
      loss_sum += lg.mse * static_cast<double>(count);
      ++step;

      const double lr = config.learning_rate;
      if (config.optimizer == Optimizer::kSgd) {
        for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
          mlp.layers[l].weights -= lr * lg.gradients.layers[l].weights;
          mlp.layers[l].bias -= lr * lg.gradients.layers[l].bias;
        }
      } else {
        const double b1 = config.adam_beta1;
        const double b2 = config.adam_beta2;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
        auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
          m = b1 * m + (1.0 - b1) * g;
          v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
          param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config.adam_epsilon);
        };
        for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
          update(mlp.layers[l].weights, m1[l].weights, m2[l].weights, lg.gradients.layers[l].weights);
          update(mlp.layers[l].bias, m1[l].bias, m2[l].bias, lg.gradients.layers[l].bias);
        }
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_mse = loss_sum / static_cast<double>(order.size());
    stats.test_median_m = test_set.empty() ? 0.0 : median_error(forward_batch(mlp, x_test), y_test);
    result.history.push_back(stats);
    if (!test_set.empty() && stats.test_median_m < best) {
      best = stats.test_median_m;
      result.model = mlp;
      result.best_epoch = epoch;
    }
  }
  if (test_set.empty()) {
    result.model = mlp;
    result.best_epoch = config.epochs;
  }
  return result;
}

TrainResult train(const std::vector<Example>& examples, const MlpConfig& config,
                  const SplitSpec& spec) {
  const auto [train_set, test_set] = split_dataset(examples, spec);
  return train(std::span<const Example>(train_set), std::span<const Example>(test_set), config);
}

std::vector<std::pair<double, Position2D>> predict_stream(const Mlp& mlp,
                                                          std::span<const Example> examples) {
  std::vector<std::pair<double, Position2D>> out;
  if (examples.empty()) return out;
  Eigen::MatrixXd x = to_inputs(examples, mlp.input_dim());
  standardize(x, mlp.stats);
  const Eigen::MatrixXd y = forward_batch(mlp, x);
  out.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    out.emplace_back(examples[i].t, Position2D{y(0, c), y(1, c)});
  }
  return out;
}

nlohmann::ordered_json mlp_to_json(const Mlp& mlp) {
  const MlpConfig& c = mlp.config;
  nlohmann::ordered_json j;
  j["format"] = "ips-mlp-1";
  j["config"] = nlohmann::ordered_json{
      {"layer_sizes", c.layer_sizes},
      {"activation", c.activation == Activation::kRelu ? "relu" : "tanh"},
      {"learning_rate", c.learning_rate},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"seed", c.seed},
      {"optimizer", c.optimizer == Optimizer::kAdam ? "adam" : "sgd"},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"adam_epsilon", c.adam_epsilon},
      {"normalize", c.normalize}};
  j["stats"] = nlohmann::ordered_json{
      {"mean", std::vector<double>(mlp.stats.mean.data(), mlp.stats.mean.data() + mlp.stats.mean.size())},
      {"stddev", std::vector<double>(mlp.stats.stddev.data(),
                                     mlp.stats.stddev.data() + mlp.stats.stddev.size())}};
  const std::vector<double> params = mlp.flatten();
  std::vector<unsigned char> bytes(params.size() * sizeof(double));
  std::memcpy(bytes.data(), params.data(), bytes.size());
  j["parameter_count"] = params.size();
  j["parameters_f64le_base64"] = base64_encode(bytes);
  return j;
}

Mlp mlp_from_json(const nlohmann::json& j) {
  try {
    const auto& c = j.at("config");
    MlpConfig config;
    config.layer_sizes = c.at("layer_sizes").get<std::vector<std::size_t>>();
    config.activation = c.at("activation").get<std::string>() == "tanh" ? Activation::kTanh
                                                                        : Activation::kRelu;
    config.learning_rate = c.at("learning_rate").get<double>();
    config.batch_size = c.at("batch_size").get<std::size_t>();
    config.epochs = c.at("epochs").get<std::size_t>();
    config.seed = c.at("seed").get<std::uint64_t>();
    config.optimizer = c.at("optimizer").get<std::string>() == "sgd" ? Optimizer::kSgd
                                                                     : Optimizer::kAdam;
    config.adam_beta1 = c.at("adam_beta1").get<double>();
    config.adam_beta2 = c.at("adam_beta2").get<double>();
    config.adam_epsilon = c.at("adam_epsilon").get<double>();
    config.normalize = c.at("normalize").get<bool>();

    Mlp mlp = Mlp::initialize(config);
    const auto mean = j.at("stats").at("mean").get<std::vector<double>>();
    const auto stddev = j.at("stats").at("stddev").get<std::vector<double>>();
    if (mean.size() != mlp.input_dim() || stddev.size() != mlp.input_dim()) {
      throw Error(ErrorCode::kSchemaViolation, "feature statistics do not match the input layer");
    }
    mlp.stats.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    mlp.stats.stddev =
        Eigen::Map<const Eigen::VectorXd>(stddev.data(), static_cast<Eigen::Index>(stddev.size()));

    const auto bytes = base64_decode(j.at("parameters_f64le_base64").get<std::string>());
    if (bytes.size() != mlp.parameter_count() * sizeof(double) ||
        j.at("parameter_count").get<std::size_t>() != mlp.parameter_count()) {
      throw Error(ErrorCode::kSchemaViolation, "parameter payload has the wrong size");
    }
    std::vector<double> params(mlp.parameter_count());
    std::memcpy(params.data(), bytes.data(), bytes.size());
    mlp.unflatten(params);
    return mlp;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, e.what());
  }
}

void save_checkpoint(const std::string& path, const Mlp& mlp) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path + " for writing");
  out << mlp_to_json(mlp).dump() << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path);
}

Mlp load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  try {
    return mlp_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kMalformedLine, e.what());
  }
}

}  // namespace ips
