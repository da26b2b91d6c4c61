#pragma once

// Multilayer-perceptron position regressor f(m) -> (x, y): dense layers,
// float64, MSE loss, backpropagation, SGD/Adam.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ips/error.hpp"
#include "ips/model.hpp"

namespace ips {

enum class Activation { kRelu, kTanh };
enum class Optimizer { kSgd, kAdam };

struct MlpConfig {
  std::vector<std::size_t> layer_sizes;  // input, hidden..., 2
  Activation activation = Activation::kRelu;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 60;
  std::uint64_t seed = 1;
  Optimizer optimizer = Optimizer::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  bool normalize = true;

  static std::vector<std::size_t> default_hidden() { return {256, 128, 64}; }
  /// Layer chain input -> hidden... -> 2.
  static MlpConfig for_input(std::size_t input,
                             const std::vector<std::size_t>& hidden = default_hidden());

  /// Throws kInvalidConfig.
  void validate() const;
};

/// Per-feature standardisation; zero spread is stored as 1.
struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;
};

struct Mlp {
  MlpConfig config;
  std::vector<DenseLayer> layers;
  FeatureStats stats;

  /// He-initialised network (identity feature stats), seeded by config.seed.
  static Mlp initialize(const MlpConfig& config);

  std::size_t input_dim() const noexcept;
  std::size_t parameter_count() const noexcept;
  /// Layer by layer: weights (column-major), then bias.
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> parameters);
};

struct Example {
  double t = 0.0;
  std::vector<double> features;
  Position2D label;
};

struct SplitSpec {
  double train_fraction = 0.9;
  std::uint64_t shuffle_seed = 7;
};

inline constexpr std::size_t kMinSplitFrames = 10;

/// Seeded shuffle, then the first floor(fraction * n) items train.
/// Throws kTooFewFrames below 10 items.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_dataset(const std::vector<T>& items,
                                                        const SplitSpec& spec) {
  if (items.size() < kMinSplitFrames) {
    throw Error(ErrorCode::kTooFewFrames,
                std::to_string(items.size()) + " frames, need " + std::to_string(kMinSplitFrames));
  }
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "train fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(spec.shuffle_seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(items.size()) + 1e-9)),
      1, items.size() - 1);
  std::pair<std::vector<T>, std::vector<T>> out;
  out.first.reserve(n_train);
  out.second.reserve(items.size() - n_train);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? out.first : out.second).push_back(items[order[i]]);
  }
  return out;
}

/// Raw network evaluation (no normalisation). Throws kDimensionMismatch.
Position2D forward(const Mlp& mlp, std::span<const double> features);

/// Columns are samples; returns 2 x n.
Eigen::MatrixXd forward_batch(const Mlp& mlp, const Eigen::MatrixXd& inputs);

struct Gradients {
  std::vector<DenseLayer> layers;  // same shapes as Mlp::layers
};

struct LossAndGrad {
  double mse = 0.0;  // mean over samples of |f(m) - label|^2
  Gradients gradients;
};

/// Throws kDimensionMismatch, kEmpty for an empty batch.
LossAndGrad loss_and_grad(const Mlp& mlp, std::span<const Example> batch);
LossAndGrad loss_and_grad(const Mlp& mlp, const Eigen::MatrixXd& inputs,
                          const Eigen::MatrixXd& targets);

FeatureStats compute_feature_stats(std::span<const Example> examples);

struct EpochStats {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double test_median_m = 0.0;
};

struct TrainResult {
  Mlp model;                         // snapshot with the lowest test median error
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;        // 0 = initial parameters
};

/// Raised on a non-finite loss; carries the epochs completed so far.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::vector<EpochStats> history, const std::string& message)
      : Error(ErrorCode::kDivergence, message), history_(std::move(history)) {}
  const std::vector<EpochStats>& history() const noexcept { return history_; }

 private:
  std::vector<EpochStats> history_;
};

/// Trains on `train_set`, normalising with statistics of `train_set` only,
/// and keeps the snapshot with the best median error on `test_set`.
TrainResult train(std::span<const Example> train_set, std::span<const Example> test_set,
                  const MlpConfig& config);

/// split_dataset() followed by the two-set overload.
TrainResult train(const std::vector<Example>& examples, const MlpConfig& config,
                  const SplitSpec& spec);

/// Applies the stored normalisation, then the network.
std::vector<std::pair<double, Position2D>> predict_stream(const Mlp& mlp,
                                                          std::span<const Example> examples);

nlohmann::ordered_json mlp_to_json(const Mlp& mlp);
Mlp mlp_from_json(const nlohmann::json& j);
void save_checkpoint(const std::string& path, const Mlp& mlp);
Mlp load_checkpoint(const std::string& path);

}  // namespace ips
