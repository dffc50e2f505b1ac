#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "nlgaudit/corpus.hpp"

namespace nlgaudit {

// Text feature layout produced by featurize():
//   [0, kHistogramBuckets)     share of output tokens in fragments of length
//                              1..K, then >= K+1
//   kCoverageSlot, kDensitySlot, kLengthRatioSlot,
//   kNovelUnigramSlot, kNovelBigramSlot
//   kTextFeatureDim...         planted channels, if any
inline constexpr std::size_t kFragmentLengthCap = 4;
inline constexpr std::size_t kHistogramBuckets = kFragmentLengthCap + 1;
inline constexpr std::size_t kCoverageSlot = kHistogramBuckets;
inline constexpr std::size_t kDensitySlot = kCoverageSlot + 1;
inline constexpr std::size_t kLengthRatioSlot = kDensitySlot + 1;
inline constexpr std::size_t kNovelUnigramSlot = kLengthRatioSlot + 1;
inline constexpr std::size_t kNovelBigramSlot = kNovelUnigramSlot + 1;
inline constexpr std::size_t kTextFeatureDim = kNovelBigramSlot + 1;

struct FeatureVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

FeatureVector featurize(const TokenSequence& source, const TokenSequence& output,
                        std::span<const double> planted = {});

// 2 / (1 + exp(-gamma * progress)) - 1; progress must lie in [0, 1].
double lambda_schedule(double progress, double gamma);

// Gradient reversal: identity forward, -lambda * g backward.
std::vector<double> grl_forward(std::span<const double> h, double lambda);
std::vector<double> grl_backward(std::span<const double> grad, double lambda);

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;

  std::size_t in_dim() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weights.rows()); }
};

// tanh encoder feeding a logistic faithfulness head and, behind a gradient
// reversal, an affine head that regresses standardized density.
struct AdversarialNet {
  std::vector<DenseLayer> encoder;
  DenseLayer faith_head;
  DenseLayer density_head;
  double gamma = 10.0;
  double lambda_max = 1.0;
  double density_mean = 0.0;  // target standardization fitted by train()
  double density_std = 1.0;

  std::size_t input_dim() const;
  std::size_t representation_dim() const;
  std::size_t parameter_count() const;
};

// Glorot-uniform weights, zero biases. `zero_faith_head` zeroes the final
// classifier so an untrained net scores exactly 0.5.
AdversarialNet init_net(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                        std::uint64_t seed, bool zero_faith_head = false);

struct TrainingExample {
  std::string id;
  FeatureVector features;
  int label = 0;  // 1 = faithful
  double density = 0.0;
};

struct FeatureDataset {
  std::string name;
  DistributionLabel distribution = DistributionLabel::eval;
  std::vector<TrainingExample> examples;
};

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double gamma = 10.0;
  double lambda_max = 1.0;
  std::vector<std::size_t> hidden = {32, 16};
  // false trains the identical architecture with lambda held at 0.
  bool reverse_gradients = true;
};

struct Gradients {
  std::vector<DenseLayer> encoder;
  DenseLayer faith_head;
  DenseLayer density_head;
  double faith_loss = 0.0;
  double density_loss = 0.0;
};

// Batch-mean logistic loss plus squared loss on standardized density. Encoder
// entries hold dL_faith/dtheta - lambda * dL_density/dtheta; head entries hold
// each head's own loss gradient.
Gradients compute_gradients(const AdversarialNet& net, std::span<const TrainingExample> batch,
                            double lambda);

// Gradients of the logistic loss alone, for a classifier without any density
// branch. Density head entries are zero.
Gradients faith_only_gradients(const AdversarialNet& net, std::span<const TrainingExample> batch);

struct BatchLoss {
  double faith = 0.0;
  double density = 0.0;
};
BatchLoss batch_loss(const AdversarialNet& net, std::span<const TrainingExample> batch);

struct TrainObserver {
  // step, lambda, faith loss, density loss
  std::function<void(std::size_t, double, double, double)> on_step;
};

AdversarialNet train(std::span<const TrainingExample> data, const TrainConfig& config,
                     const TrainObserver& observer = {});

Eigen::VectorXd encode(const AdversarialNet& net, const FeatureVector& fv);

// Logistic faithfulness probability.
double score(const AdversarialNet& net, const FeatureVector& fv);

double accuracy(const AdversarialNet& net, std::span<const TrainingExample> data);

struct ProbeResult {
  double probe_spearman = 0.0;
  double probe_r2 = 0.0;
  std::optional<std::string> warning;
};

// Fits a fresh affine least-squares map from frozen encoder outputs to the
// raw density targets and reports how well it predicts them.
ProbeResult probe_density(const AdversarialNet& net, std::span<const TrainingExample> data);

// Central finite differences against compute_gradients; returns the largest
// relative error |a - n| / max(|a|, |n|, 1e-8) over all parameters.
double gradient_check(const AdversarialNet& net, std::span<const TrainingExample> batch,
                      double epsilon, double lambda = 1.0);

// Synthetic channels: [faithfulness signal, density, 32 distractors]. The
// distractors make the representation a compression of its input, as a text
// encoder's is; with only two informative inputs any nonzero weight on
// density stays linearly decodable. On the train split density correlates
// with the label at `correlation_strength`; on the test split it is
// independent of it.
inline constexpr std::size_t kSyntheticSignalChannel = 0;
inline constexpr std::size_t kSyntheticDensityChannel = 1;
inline constexpr std::size_t kSyntheticDim = 34;

struct SyntheticBenchmark {
  FeatureDataset train;
  FeatureDataset test;
};

SyntheticBenchmark generate_synthetic_benchmark(std::size_t n_train, std::size_t n_test,
                                                double correlation_strength, std::uint64_t seed);

// Versioned JSON checkpoint with row-major weights. `metadata`, when not
// null, is stored under "run_config" and ignored on load.
std::string checkpoint_to_json(const AdversarialNet& net, const nlohmann::json& metadata = {});
AdversarialNet checkpoint_from_json(const std::string& text);
void save_checkpoint(const AdversarialNet& net, const std::filesystem::path& path,
                     const nlohmann::json& metadata = {});
AdversarialNet load_checkpoint(const std::filesystem::path& path);

// Feature files: one JSON object per line with id, features, label, density.
std::string serialize_features(const FeatureDataset& data);
FeatureDataset parse_features(std::string_view text, std::string name);

}  // namespace nlgaudit
