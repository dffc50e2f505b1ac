#include "nlgaudit/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "nlgaudit/error.hpp"
#include "nlgaudit/overlap.hpp"
#include "nlgaudit/rng.hpp"
#include "nlgaudit/stats.hpp"

namespace nlgaudit {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kShuffleStreamBase = 1;

struct Forward {
  std::vector<MatrixXd> activations;  // [0] = input, back() = representation
  Eigen::RowVectorXd faith_logit;
  Eigen::RowVectorXd density_pred;
};

MatrixXd input_matrix(const AdversarialNet& net, std::span<const TrainingExample> batch) {
  const auto dim = static_cast<Eigen::Index>(net.input_dim());
  MatrixXd x(dim, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t c = 0; c < batch.size(); ++c) {
    const auto& v = batch[c].features.values;
    if (v.size() != net.input_dim()) {
      throw Error(ErrorKind::dimension_mismatch,
                  "feature vector has " + std::to_string(v.size()) + " values, model expects " +
                      std::to_string(net.input_dim()));
    }
    x.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const VectorXd>(v.data(), dim);
  }
  return x;
}

Forward forward(const AdversarialNet& net, MatrixXd x) {
  Forward f;
  f.activations.push_back(std::move(x));
  for (const auto& layer : net.encoder) {
    MatrixXd z = layer.weights * f.activations.back();
    z.colwise() += layer.bias;
    f.activations.push_back(z.array().tanh().matrix());
  }
  const auto& h = f.activations.back();
  f.faith_logit = (net.faith_head.weights * h).row(0).array() + net.faith_head.bias(0);
  f.density_pred = (net.density_head.weights * h).row(0).array() + net.density_head.bias(0);
  return f;
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::RowVectorXd labels(std::span<const TrainingExample> batch) {
  Eigen::RowVectorXd y(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) y(static_cast<Eigen::Index>(i)) = batch[i].label;
  return y;
}

Eigen::RowVectorXd std_targets(const AdversarialNet& net, std::span<const TrainingExample> batch) {
  Eigen::RowVectorXd t(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    t(static_cast<Eigen::Index>(i)) = (batch[i].density - net.density_mean) / net.density_std;
  }
  return t;
}

BatchLoss losses(const AdversarialNet& net, const Forward& f, std::span<const TrainingExample> batch) {
  const auto y = labels(batch);
  const auto t = std_targets(net, batch);
  BatchLoss l;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double z = f.faith_logit(i);
    l.faith += softplus(z) - y(i) * z;
    const double d = f.density_pred(i) - t(i);
    l.density += d * d;
  }
  const auto n = static_cast<double>(batch.size());
  l.faith /= n;
  l.density /= n;
  return l;
}

DenseLayer zeros_like(const DenseLayer& layer) {
  return {MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()),
          VectorXd::Zero(layer.bias.size())};
}

DenseLayer glorot(std::size_t in, std::size_t out, CounterRng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  DenseLayer layer{MatrixXd(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
                   VectorXd::Zero(static_cast<Eigen::Index>(out))};
  for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
      layer.weights(r, c) = (2.0 * rng.uniform() - 1.0) * a;
    }
  }
  return layer;
}

// Backprop of an upstream gradient at the representation through the
// encoder, filling grads.encoder.
void backprop_encoder(const AdversarialNet& net, const Forward& f, MatrixXd grad_h, Gradients& grads) {
  grads.encoder.resize(net.encoder.size());
  for (std::size_t k = net.encoder.size(); k-- > 0;) {
    const MatrixXd& a = f.activations[k + 1];
    const MatrixXd dz = grad_h.array() * (1.0 - a.array().square());
    grads.encoder[k].weights = dz * f.activations[k].transpose();
    grads.encoder[k].bias = dz.rowwise().sum();
    if (k > 0) grad_h = net.encoder[k].weights.transpose() * dz;
  }
}

template <typename Fn>
void for_each_parameter(AdversarialNet& net, Fn fn) {
  // fn(value_ref, group, layer, flat_index); group 0 encoder, 1 faith, 2 density
  auto visit = [&](DenseLayer& layer, int group, std::size_t idx) {
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) fn(layer.weights.data()[i], group, idx, i);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      fn(layer.bias.data()[i], group, idx, layer.weights.size() + i);
    }
  };
  for (std::size_t k = 0; k < net.encoder.size(); ++k) visit(net.encoder[k], 0, k);
  visit(net.faith_head, 1, 0);
  visit(net.density_head, 2, 0);
}

double flat_grad(const DenseLayer& g, Eigen::Index i) {
  return i < g.weights.size() ? g.weights.data()[i] : g.bias.data()[i - g.weights.size()];
}

void apply_update(DenseLayer& layer, const DenseLayer& grad, double lr) {
  layer.weights.noalias() -= lr * grad.weights;
  layer.bias.noalias() -= lr * grad.bias;
}

bool all_finite(const AdversarialNet& net) {
  auto ok = [](const DenseLayer& l) { return l.weights.allFinite() && l.bias.allFinite(); };
  return std::all_of(net.encoder.begin(), net.encoder.end(), ok) && ok(net.faith_head) &&
         ok(net.density_head);
}

json layer_json(const DenseLayer& layer) {
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(layer.weights.size()));
  for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) w.push_back(layer.weights(r, c));
  }
  return {{"in", layer.in_dim()},
          {"out", layer.out_dim()},
          {"weights", w},
          {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}};
}

DenseLayer layer_from_json(const json& j) {
  const auto in = j.at("in").get<Eigen::Index>();
  const auto out = j.at("out").get<Eigen::Index>();
  const auto w = j.at("weights").get<std::vector<double>>();
  const auto b = j.at("bias").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(w.size()) != in * out || static_cast<Eigen::Index>(b.size()) != out) {
    throw Error(ErrorKind::parse, "checkpoint layer shape does not match its arrays");
  }
  DenseLayer layer{MatrixXd(out, in), VectorXd(out)};
  for (Eigen::Index r = 0; r < out; ++r) {
    for (Eigen::Index c = 0; c < in; ++c) layer.weights(r, c) = w[static_cast<std::size_t>(r * in + c)];
    layer.bias(r) = b[static_cast<std::size_t>(r)];
  }
  return layer;
}

}  // namespace

FeatureVector featurize(const TokenSequence& source, const TokenSequence& output,
                        std::span<const double> planted) {
  if (output.empty()) throw Error(ErrorKind::undefined_measure, "cannot featurize an empty output");
  const auto fs = extract_fragments(source, output);
  FeatureVector fv;
  fv.values.assign(kTextFeatureDim, 0.0);
  const auto n = static_cast<double>(output.size());
  for (const auto& f : fs.fragments) {
    const std::size_t bucket = std::min(f.length, kFragmentLengthCap + 1) - 1;
    fv.values[bucket] += static_cast<double>(f.length) / n;
  }
  fv.values[kCoverageSlot] = coverage(fs);
  fv.values[kDensitySlot] = density(fs);
  fv.values[kLengthRatioSlot] =
      source.empty() ? 0.0 : n / static_cast<double>(source.size());

  const std::set<std::string_view> src_unigrams(source.tokens.begin(), source.tokens.end());
  std::size_t novel = 0;
  for (const auto& t : output.tokens) novel += src_unigrams.count(t) == 0;
  fv.values[kNovelUnigramSlot] = static_cast<double>(novel) / n;

  if (output.size() < 2) {
    // no bigram exists, so a single token is novel iff the unigram is
    fv.values[kNovelBigramSlot] = fv.values[kNovelUnigramSlot];
  } else {
    std::set<std::pair<std::string_view, std::string_view>> src_bigrams;
    for (std::size_t i = 0; i + 1 < source.size(); ++i) {
      src_bigrams.emplace(source.tokens[i], source.tokens[i + 1]);
    }
    std::size_t novel_bi = 0;
    for (std::size_t i = 0; i + 1 < output.size(); ++i) {
      novel_bi += src_bigrams.count({output.tokens[i], output.tokens[i + 1]}) == 0;
    }
    fv.values[kNovelBigramSlot] = static_cast<double>(novel_bi) / static_cast<double>(output.size() - 1);
  }
  fv.values.insert(fv.values.end(), planted.begin(), planted.end());
  return fv;
}

double lambda_schedule(double progress, double gamma) {
  if (!(progress >= 0.0 && progress <= 1.0)) {
    throw Error(ErrorKind::precondition, "lambda schedule progress outside [0,1]");
  }
  return 2.0 / (1.0 + std::exp(-gamma * progress)) - 1.0;
}

std::vector<double> grl_forward(std::span<const double> h, double lambda) {
  if (lambda < 0.0) throw Error(ErrorKind::precondition, "gradient reversal needs lambda >= 0");
  return {h.begin(), h.end()};
}

std::vector<double> grl_backward(std::span<const double> grad, double lambda) {
  if (lambda < 0.0) throw Error(ErrorKind::precondition, "gradient reversal needs lambda >= 0");
  std::vector<double> out(grad.size());
  std::transform(grad.begin(), grad.end(), out.begin(), [lambda](double g) { return -lambda * g; });
  return out;
}

std::size_t AdversarialNet::input_dim() const {
  return encoder.empty() ? faith_head.in_dim() : encoder.front().in_dim();
}

std::size_t AdversarialNet::representation_dim() const { return faith_head.in_dim(); }

std::size_t AdversarialNet::parameter_count() const {
  std::size_t n = 0;
  auto add = [&](const DenseLayer& l) {
    n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  };
  for (const auto& l : encoder) add(l);
  add(faith_head);
  add(density_head);
  return n;
}

AdversarialNet init_net(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                        std::uint64_t seed, bool zero_faith_head) {
  if (input_dim == 0) throw Error(ErrorKind::precondition, "input dimension must be positive");
  CounterRng rng(seed, kInitStream);
  AdversarialNet net;
  std::size_t in = input_dim;
  for (const std::size_t width : hidden) {
    if (width == 0) throw Error(ErrorKind::precondition, "hidden widths must be positive");
    net.encoder.push_back(glorot(in, width, rng));
    in = width;
  }
  net.faith_head = glorot(in, 1, rng);
  net.density_head = glorot(in, 1, rng);
  if (zero_faith_head) net.faith_head = zeros_like(net.faith_head);
  return net;
}

BatchLoss batch_loss(const AdversarialNet& net, std::span<const TrainingExample> batch) {
  if (batch.empty()) throw Error(ErrorKind::precondition, "empty batch");
  return losses(net, forward(net, input_matrix(net, batch)), batch);
}

Gradients compute_gradients(const AdversarialNet& net, std::span<const TrainingExample> batch,
                            double lambda) {
  if (batch.empty()) throw Error(ErrorKind::precondition, "empty batch");
  const Forward f = forward(net, input_matrix(net, batch));
  const auto l = losses(net, f, batch);
  const auto n = static_cast<double>(batch.size());
  const MatrixXd& h = f.activations.back();

  Gradients g;
  g.faith_loss = l.faith;
  g.density_loss = l.density;

  Eigen::RowVectorXd dz(f.faith_logit.size());
  for (Eigen::Index i = 0; i < dz.size(); ++i) dz(i) = (sigmoid(f.faith_logit(i)) - batch[static_cast<std::size_t>(i)].label) / n;
  const Eigen::RowVectorXd dq = 2.0 * (f.density_pred - std_targets(net, batch)) / n;

  g.faith_head = {dz * h.transpose(), VectorXd::Constant(1, dz.sum())};
  g.density_head = {dq * h.transpose(), VectorXd::Constant(1, dq.sum())};

  const MatrixXd grad_faith = net.faith_head.weights.transpose() * dz;
  const MatrixXd grad_density = net.density_head.weights.transpose() * dq;
  // The reversal sits between the representation and the density head.
  MatrixXd reversed(grad_density.rows(), grad_density.cols());
  const auto flipped = grl_backward({grad_density.data(), static_cast<std::size_t>(grad_density.size())}, lambda);
  std::copy(flipped.begin(), flipped.end(), reversed.data());
  backprop_encoder(net, f, grad_faith + reversed, g);
  return g;
}

Gradients faith_only_gradients(const AdversarialNet& net, std::span<const TrainingExample> batch) {
  if (batch.empty()) throw Error(ErrorKind::precondition, "empty batch");
  const Forward f = forward(net, input_matrix(net, batch));
  const auto n = static_cast<double>(batch.size());
  const MatrixXd& h = f.activations.back();

  Gradients g;
  Eigen::RowVectorXd dz(f.faith_logit.size());
  for (Eigen::Index i = 0; i < dz.size(); ++i) {
    const double z = f.faith_logit(i);
    const int y = batch[static_cast<std::size_t>(i)].label;
    g.faith_loss += softplus(z) - y * z;
    dz(i) = (sigmoid(z) - y) / n;
  }
  g.faith_loss /= n;
  g.faith_head = {dz * h.transpose(), VectorXd::Constant(1, dz.sum())};
  g.density_head = zeros_like(net.density_head);
  backprop_encoder(net, f, net.faith_head.weights.transpose() * dz, g);
  return g;
}

AdversarialNet train(std::span<const TrainingExample> data, const TrainConfig& config,
                     const TrainObserver& observer) {
  if (data.empty()) throw Error(ErrorKind::precondition, "training set is empty");
  if (!(config.learning_rate > 0.0)) throw Error(ErrorKind::precondition, "learning rate must be > 0");
  if (config.epochs < 1) throw Error(ErrorKind::precondition, "epochs must be >= 1");
  if (config.batch_size < 1) throw Error(ErrorKind::precondition, "batch size must be >= 1");
  if (!(config.lambda_max > 0.0 && config.lambda_max <= 1.0)) {
    throw Error(ErrorKind::precondition, "lambda_max must lie in (0,1]");
  }
  for (const auto& ex : data) {
    if (!std::isfinite(ex.density) || (ex.label != 0 && ex.label != 1)) {
      throw Error(ErrorKind::precondition, "training targets must be finite with labels in {0,1}");
    }
  }

  AdversarialNet net = init_net(data.front().features.size(), config.hidden, config.seed);
  net.gamma = config.gamma;
  net.lambda_max = config.lambda_max;

  double mean = 0.0;
  for (const auto& ex : data) mean += ex.density;
  mean /= static_cast<double>(data.size());
  double var = 0.0;
  for (const auto& ex : data) var += (ex.density - mean) * (ex.density - mean);
  const double sd = std::sqrt(var / static_cast<double>(data.size()));
  net.density_mean = mean;
  net.density_std = sd > 0.0 ? sd : 1.0;

  const std::size_t n = data.size();
  const std::size_t batches = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = config.epochs * batches;
  std::vector<std::size_t> order(n);
  std::vector<TrainingExample> batch;
  batch.reserve(config.batch_size);

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    CounterRng rng(config.seed, kShuffleStreamBase + epoch);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    for (std::size_t b = 0; b < batches; ++b, ++step) {
      batch.clear();
      const std::size_t end = std::min(n, (b + 1) * config.batch_size);
      for (std::size_t i = b * config.batch_size; i < end; ++i) batch.push_back(data[order[i]]);

      const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
      const double lambda =
          config.reverse_gradients ? config.lambda_max * lambda_schedule(progress, config.gamma) : 0.0;
      const Gradients g = compute_gradients(net, batch, lambda);
      if (!std::isfinite(g.faith_loss) || !std::isfinite(g.density_loss)) {
        throw Error(ErrorKind::divergence, "non-finite loss at step " + std::to_string(step));
      }
      if (observer.on_step) observer.on_step(step, lambda, g.faith_loss, g.density_loss);

      for (std::size_t k = 0; k < net.encoder.size(); ++k) {
        apply_update(net.encoder[k], g.encoder[k], config.learning_rate);
      }
      apply_update(net.faith_head, g.faith_head, config.learning_rate);
      apply_update(net.density_head, g.density_head, config.learning_rate);
      if (!all_finite(net)) {
        throw Error(ErrorKind::divergence, "non-finite parameters after step " + std::to_string(step));
      }
    }
  }
  return net;
}

Eigen::VectorXd encode(const AdversarialNet& net, const FeatureVector& fv) {
  if (fv.size() != net.input_dim()) {
    throw Error(ErrorKind::dimension_mismatch, "feature vector has " + std::to_string(fv.size()) +
                                                   " values, model expects " +
                                                   std::to_string(net.input_dim()));
  }
  VectorXd a = Eigen::Map<const VectorXd>(fv.values.data(), static_cast<Eigen::Index>(fv.size()));
  for (const auto& layer : net.encoder) a = (layer.weights * a + layer.bias).array().tanh().matrix();
  return a;
}

double score(const AdversarialNet& net, const FeatureVector& fv) {
  const VectorXd h = encode(net, fv);
  return sigmoid(net.faith_head.weights.row(0).dot(h) + net.faith_head.bias(0));
}

double accuracy(const AdversarialNet& net, std::span<const TrainingExample> data) {
  if (data.empty()) throw Error(ErrorKind::precondition, "accuracy of an empty set");
  std::size_t correct = 0;
  for (const auto& ex : data) correct += ((score(net, ex.features) > 0.5) == (ex.label == 1));
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

ProbeResult probe_density(const AdversarialNet& net, std::span<const TrainingExample> data) {
  if (data.size() < 10) throw Error(ErrorKind::precondition, "density probe needs >= 10 examples");
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto width = static_cast<Eigen::Index>(net.representation_dim());
  MatrixXd design(n, width + 1);
  VectorXd target(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design.row(i).head(width) = encode(net, data[static_cast<std::size_t>(i)].features).transpose();
    design(i, width) = 1.0;
    target(i) = data[static_cast<std::size_t>(i)].density;
  }

  ProbeResult res;
  const VectorXd centered_target = target.array() - target.mean();
  const double sst = centered_target.squaredNorm();
  const MatrixXd centered = design.leftCols(width).rowwise() - design.leftCols(width).colwise().mean();
  if (centered.cwiseAbs().maxCoeff() == 0.0 || sst == 0.0) {
    res.warning = "degenerate representation or targets (zero variance); probe reported as 0";
    return res;
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
  const VectorXd beta = qr.solve(target);
  const VectorXd pred = design * beta;
  res.probe_r2 = 1.0 - (target - pred).squaredNorm() / sst;
  try {
    res.probe_spearman = spearman(std::span<const double>(pred.data(), static_cast<std::size_t>(n)),
                                  std::span<const double>(target.data(), static_cast<std::size_t>(n)));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::degenerate_sample) throw;
    res.probe_spearman = 0.0;
    res.warning = "probe predictions have zero variance; probe reported as 0";
  }
  return res;
}

double gradient_check(const AdversarialNet& net, std::span<const TrainingExample> batch,
                      double epsilon, double lambda) {
  if (batch.empty()) throw Error(ErrorKind::precondition, "gradient check needs a non-empty batch");
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw Error(ErrorKind::precondition, "epsilon must lie in [1e-7, 1e-3]");
  }
  const Gradients analytic = compute_gradients(net, batch, lambda);
  AdversarialNet probe = net;
  double worst = 0.0;
  for_each_parameter(probe, [&](double& value, int group, std::size_t layer, Eigen::Index i) {
    const double saved = value;
    value = saved + epsilon;
    const auto up = batch_loss(probe, batch);
    value = saved - epsilon;
    const auto down = batch_loss(probe, batch);
    value = saved;

    const double d_faith = (up.faith - down.faith) / (2.0 * epsilon);
    const double d_density = (up.density - down.density) / (2.0 * epsilon);
    double numeric = 0.0, exact = 0.0;
    switch (group) {
      case 0:
        numeric = d_faith - lambda * d_density;
        exact = flat_grad(analytic.encoder[layer], i);
        break;
      case 1:
        numeric = d_faith;
        exact = flat_grad(analytic.faith_head, i);
        break;
      default:
        numeric = d_density;
        exact = flat_grad(analytic.density_head, i);
        break;
    }
    const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(exact - numeric) / denom);
  });
  return worst;
}

SyntheticBenchmark generate_synthetic_benchmark(std::size_t n_train, std::size_t n_test,
                                                double correlation_strength, std::uint64_t seed) {
  if (n_train < 20 || n_test < 20) throw Error(ErrorKind::precondition, "synthetic splits need >= 20 examples");
  if (!(correlation_strength >= 0.0 && correlation_strength <= 1.0)) {
    throw Error(ErrorKind::precondition, "correlation strength must lie in [0,1]");
  }
  // The planted signal separates classes by +-kSignalMargin in unit noise.
  constexpr double kSignalMargin = 0.75;

  auto make = [&](std::size_t count, bool correlated, std::uint64_t stream, const char* prefix) {
    CounterRng rng(seed, stream);
    const double rho = correlated ? correlation_strength : 0.0;
    const double noise_scale = std::sqrt(1.0 - rho * rho);
    std::vector<TrainingExample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      TrainingExample ex;
      ex.id = std::string(prefix) + std::to_string(i);
      ex.label = static_cast<int>(rng.below(2));
      const double sign = ex.label == 1 ? 1.0 : -1.0;
      const double signal = kSignalMargin * sign + rng.normal();
      const double dens = rho * sign + noise_scale * rng.normal();
      ex.features.values.assign(kSyntheticDim, 0.0);
      ex.features.values[kSyntheticSignalChannel] = signal;
      ex.features.values[kSyntheticDensityChannel] = dens;
      for (std::size_t c = 2; c < kSyntheticDim; ++c) ex.features.values[c] = rng.normal();
      ex.density = dens;
      out.push_back(std::move(ex));
    }
    return out;
  };

  SyntheticBenchmark bench;
  bench.train = {"synthetic-train", DistributionLabel::eval, make(n_train, true, 1, "train-")};
  bench.test = {"synthetic-test", DistributionLabel::test, make(n_test, false, 2, "test-")};
  return bench;
}

std::string checkpoint_to_json(const AdversarialNet& net, const json& metadata) {
  json j;
  j["format"] = "nlgaudit-adversarial-net";
  j["version"] = 1;
  j["input_dim"] = net.input_dim();
  std::vector<std::size_t> widths;
  for (const auto& l : net.encoder) widths.push_back(l.out_dim());
  j["hidden"] = widths;
  j["activation"] = "tanh";
  j["gamma"] = net.gamma;
  j["lambda_max"] = net.lambda_max;
  j["density_mean"] = net.density_mean;
  j["density_std"] = net.density_std;
  j["encoder"] = json::array();
  for (const auto& l : net.encoder) j["encoder"].push_back(layer_json(l));
  j["faith_head"] = layer_json(net.faith_head);
  j["density_head"] = layer_json(net.density_head);
  if (!metadata.is_null()) j["run_config"] = metadata;
  return j.dump(1) + "\n";
}

AdversarialNet checkpoint_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "nlgaudit-adversarial-net") {
      throw Error(ErrorKind::parse, "not an adversarial-net checkpoint");
    }
    if (j.at("version").get<int>() != 1) {
      throw Error(ErrorKind::parse, "unsupported checkpoint version " + j["version"].dump());
    }
    AdversarialNet net;
    for (const auto& l : j.at("encoder")) net.encoder.push_back(layer_from_json(l));
    net.faith_head = layer_from_json(j.at("faith_head"));
    net.density_head = layer_from_json(j.at("density_head"));
    net.gamma = j.at("gamma").get<double>();
    net.lambda_max = j.at("lambda_max").get<double>();
    net.density_mean = j.at("density_mean").get<double>();
    net.density_std = j.at("density_std").get<double>();

    std::size_t in = j.at("input_dim").get<std::size_t>();
    for (const auto& l : net.encoder) {
      if (l.in_dim() != in) throw Error(ErrorKind::parse, "checkpoint encoder widths do not chain");
      in = l.out_dim();
    }
    if (net.faith_head.in_dim() != in || net.density_head.in_dim() != in ||
        net.faith_head.out_dim() != 1 || net.density_head.out_dim() != 1) {
      throw Error(ErrorKind::parse, "checkpoint head shapes do not match the encoder");
    }
    return net;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const AdversarialNet& net, const std::filesystem::path& path,
                     const json& metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << checkpoint_to_json(net, metadata);
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

AdversarialNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

std::string serialize_features(const FeatureDataset& data) {
  std::string out;
  for (const auto& ex : data.examples) {
    json j = {{"id", ex.id}, {"features", ex.features.values}, {"label", ex.label}, {"density", ex.density}};
    out += j.dump() + "\n";
  }
  return out;
}

FeatureDataset parse_features(std::string_view text, std::string name) {
  FeatureDataset data;
  data.name = std::move(name);
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      TrainingExample ex;
      ex.id = j.at("id").get<std::string>();
      ex.features.values = j.at("features").get<std::vector<double>>();
      ex.label = j.at("label").get<int>();
      ex.density = j.at("density").get<double>();
      if (!data.examples.empty() && ex.features.size() != data.examples.front().features.size()) {
        throw Error(ErrorKind::dimension_mismatch,
                    "line " + std::to_string(line_no) + ": feature dimension changes");
      }
      data.examples.push_back(std::move(ex));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (data.examples.empty()) throw Error(ErrorKind::validation, "feature file is empty");
  return data;
}

}  // namespace nlgaudit
