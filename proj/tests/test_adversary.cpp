#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "fixtures.hpp"
#include "nlgaudit/adversary.hpp"
#include "nlgaudit/error.hpp"
#include "nlgaudit/rng.hpp"
#include "nlgaudit/stats.hpp"

using namespace nlgaudit;

namespace {

TokenSequence seq(std::vector<std::string> t) { return {std::move(t), TokenOrigin::output}; }

std::vector<TrainingExample> random_batch(std::size_t n, std::size_t dim, std::uint64_t seed) {
  CounterRng rng(seed, 42);
  std::vector<TrainingExample> batch(n);
  for (auto& ex : batch) {
    ex.features.values.resize(dim);
    for (auto& v : ex.features.values) v = rng.normal();
    ex.label = static_cast<int>(rng.below(2));
    ex.density = rng.normal();
  }
  return batch;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::io;
}

bool bitwise_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

double mean_abs_spearman_probe(const AdversarialNet& net, const FeatureDataset& d) {
  return std::abs(probe_density(net, d.examples).probe_spearman);
}

}  // namespace

TEST(Featurize, HandTracedPair) {
  const auto fv = featurize(seq({"the", "cat", "sat", "on", "the", "mat"}),
                            seq({"the", "cat", "jumped", "on", "the", "mat"}));
  ASSERT_EQ(fv.size(), kTextFeatureDim);
  EXPECT_NEAR(fv.values[kCoverageSlot], 5.0 / 6.0, 1e-12);
  EXPECT_NEAR(fv.values[kDensitySlot], 13.0 / 6.0, 1e-12);
  EXPECT_NEAR(fv.values[kLengthRatioSlot], 1.0, 1e-12);
  EXPECT_NEAR(fv.values[kNovelUnigramSlot], 1.0 / 6.0, 1e-12);
  // histogram: one fragment of length 2, one of length 3 -> share of output tokens
  EXPECT_NEAR(fv.values[1], 2.0 / 6.0, 1e-12);
  EXPECT_NEAR(fv.values[2], 3.0 / 6.0, 1e-12);
}

TEST(Featurize, DisjointAndIdentical) {
  const auto disjoint = featurize(seq({"a", "b", "c"}), seq({"x", "y"}));
  for (std::size_t i = 0; i <= kDensitySlot; ++i) EXPECT_EQ(disjoint.values[i], 0.0) << i;
  EXPECT_EQ(disjoint.values[kNovelUnigramSlot], 1.0);
  EXPECT_EQ(disjoint.values[kNovelBigramSlot], 1.0);

  const auto same = featurize(seq({"a", "b", "c", "d", "e", "f"}), seq({"a", "b", "c", "d", "e", "f"}));
  EXPECT_EQ(same.values[kCoverageSlot], 1.0);
  EXPECT_EQ(same.values[kNovelUnigramSlot], 0.0);
  EXPECT_EQ(same.values[kNovelBigramSlot], 0.0);
  EXPECT_EQ(same.values[kHistogramBuckets - 1], 1.0);  // 6 tokens land in the open-ended bucket
}

TEST(Featurize, PlantedChannelsAndErrors) {
  const std::vector<double> planted{0.5, -1.5};
  const auto fv = featurize(seq({"a"}), seq({"a"}), planted);
  ASSERT_EQ(fv.size(), kTextFeatureDim + 2);
  EXPECT_EQ(fv.values[kTextFeatureDim], 0.5);
  EXPECT_EQ(fv.values[kTextFeatureDim + 1], -1.5);
  EXPECT_EQ(kind_of([] { featurize(seq({"a"}), seq({})); }), ErrorKind::undefined_measure);
}

TEST(LambdaSchedule, ClosedForm) {
  EXPECT_EQ(lambda_schedule(0.0, 10), 0.0);
  EXPECT_NEAR(lambda_schedule(1.0, 10), 2.0 / (1.0 + std::exp(-10.0)) - 1.0, 1e-15);
  EXPECT_NEAR(lambda_schedule(1.0, 10), 0.999909, 1e-6);
  EXPECT_GE(lambda_schedule(1.0, 10), 0.9999);
  EXPECT_NEAR(lambda_schedule(0.5, 10), 0.986614, 1e-6);
  double prev = -1;
  for (int i = 0; i <= 1000; ++i) {
    const double l = lambda_schedule(i / 1000.0, 10);
    EXPECT_GT(l, prev);
    EXPECT_LT(l, 1.0);
    prev = l;
  }
  EXPECT_EQ(kind_of([] { lambda_schedule(1.01, 10); }), ErrorKind::precondition);
  EXPECT_EQ(kind_of([] { lambda_schedule(-0.01, 10); }), ErrorKind::precondition);
}

TEST(Grl, ForwardIdentityBackwardReversal) {
  const std::vector<double> h{1.5, -2.0};
  EXPECT_EQ(grl_forward(h, 0.7), h);
  EXPECT_EQ(grl_backward(std::vector<double>{1, -2}, 0.5), (std::vector<double>{-0.5, 1.0}));
  for (const double g : grl_backward(std::vector<double>{3, -4, 5}, 0.0)) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(kind_of([] { grl_backward(std::vector<double>{1}, -0.1); }), ErrorKind::precondition);

  CounterRng rng(1, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v(8);
    for (auto& x : v) x = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(40)) - 20);
    const auto out = grl_forward(v, rng.uniform());
    EXPECT_EQ(std::memcmp(out.data(), v.data(), sizeof(double) * v.size()), 0);
  }
}

TEST(Net, ShapesAndZeroHead) {
  const auto net = init_net(10, {32, 16}, 3, true);
  EXPECT_EQ(net.input_dim(), 10u);
  EXPECT_EQ(net.representation_dim(), 16u);
  EXPECT_EQ(net.parameter_count(), 10u * 32 + 32 + 32 * 16 + 16 + 16 + 1 + 16 + 1);
  FeatureVector fv{std::vector<double>(10, 0.3)};
  EXPECT_EQ(score(net, fv), 0.5);
  EXPECT_EQ(kind_of([&] { score(net, FeatureVector{{1, 2}}); }), ErrorKind::dimension_mismatch);

  const auto other = init_net(10, {32, 16}, 4);
  CounterRng rng(0, 0);
  for (int i = 0; i < 200; ++i) {
    for (auto& v : fv.values) v = rng.normal() * 50;
    const double s = score(other, fv);
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
  }
  // Glorot bound
  const double a = std::sqrt(6.0 / (10 + 32));
  EXPECT_LE(other.encoder[0].weights.cwiseAbs().maxCoeff(), a);
}

TEST(Gradients, LambdaZeroMatchesFaithOnlyBaseline) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto net = init_net(7, {6, 5}, seed);
    const auto batch = random_batch(16, 7, seed);
    const auto adv = compute_gradients(net, batch, 0.0);
    const auto base = faith_only_gradients(net, batch);
    for (std::size_t l = 0; l < adv.encoder.size(); ++l) {
      EXPECT_LE((adv.encoder[l].weights - base.encoder[l].weights).cwiseAbs().maxCoeff(), 1e-15);
      EXPECT_LE((adv.encoder[l].bias - base.encoder[l].bias).cwiseAbs().maxCoeff(), 1e-15);
    }
    EXPECT_TRUE(bitwise_equal(adv.faith_head.weights, base.faith_head.weights));
    // the density head still learns at lambda = 0
    EXPECT_GT(adv.density_head.weights.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(base.density_head.weights.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Gradients, ReversalFlipsDensityContribution) {
  const auto net = init_net(5, {4}, 9);
  const auto batch = random_batch(12, 5, 9);
  const auto g0 = compute_gradients(net, batch, 0.0);
  const auto g1 = compute_gradients(net, batch, 1.0);
  const auto gh = compute_gradients(net, batch, 0.5);
  // encoder gradient is affine in lambda: g(l) = g0 - l * dL_d
  const Eigen::MatrixXd d_density = g0.encoder[0].weights - g1.encoder[0].weights;
  EXPECT_LE((gh.encoder[0].weights - (g0.encoder[0].weights - 0.5 * d_density)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_TRUE(bitwise_equal(g0.density_head.weights, g1.density_head.weights));
}

TEST(GradientCheck, TenSeedsAllLambdas) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto net = init_net(6, {5, 4}, seed);
    const auto batch = random_batch(8, 6, seed + 100);
    for (const double lambda : {0.0, 0.5, 1.0}) {
      EXPECT_LT(gradient_check(net, batch, 1e-5, lambda), 1e-4) << seed << " " << lambda;
    }
  }
}

TEST(GradientCheck, Preconditions) {
  const auto net = init_net(3, {2}, 0);
  EXPECT_EQ(kind_of([&] { gradient_check(net, {}, 1e-5); }), ErrorKind::precondition);
  const auto batch = random_batch(2, 3, 0);
  EXPECT_EQ(kind_of([&] { gradient_check(net, batch, 1e-2); }), ErrorKind::precondition);
  EXPECT_EQ(kind_of([&] { gradient_check(net, batch, 1e-9); }), ErrorKind::precondition);
}

TEST(Train, DeterministicGivenSeed) {
  const auto data = random_batch(100, 6, 5);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.hidden = {8, 4};
  cfg.seed = 77;
  const auto a = train(data, cfg);
  const auto b = train(data, cfg);
  EXPECT_EQ(checkpoint_to_json(a), checkpoint_to_json(b));
  cfg.seed = 78;
  EXPECT_NE(checkpoint_to_json(train(data, cfg)), checkpoint_to_json(a));
}

TEST(Train, LambdaFollowsScheduleAndBaselineStaysAtZero) {
  const auto data = random_batch(64, 4, 1);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.hidden = {4};
  std::vector<double> lambdas;
  train(data, cfg, {[&](std::size_t, double l, double, double) { lambdas.push_back(l); }});
  ASSERT_EQ(lambdas.size(), 8u);
  for (std::size_t i = 1; i < lambdas.size(); ++i) EXPECT_GT(lambdas[i], lambdas[i - 1]);
  // progress is step / total_steps, so step k sees lambda(k / 8)
  for (std::size_t k = 0; k < lambdas.size(); ++k) EXPECT_EQ(lambdas[k], lambda_schedule(k / 8.0, 10));
  cfg.reverse_gradients = false;
  train(data, cfg, {[&](std::size_t, double l, double, double) { EXPECT_EQ(l, 0.0); }});
}

TEST(Train, DivergenceNamesStep) {
  auto data = random_batch(64, 4, 2);
  for (auto& ex : data) {
    for (auto& v : ex.features.values) v *= 1e150;
  }
  TrainConfig cfg;
  cfg.learning_rate = 1e150;
  cfg.hidden = {4};
  try {
    train(data, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::divergence);
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(Train, Preconditions) {
  const auto data = random_batch(10, 3, 0);
  TrainConfig cfg;
  cfg.learning_rate = 0;
  EXPECT_EQ(kind_of([&] { train(data, cfg); }), ErrorKind::precondition);
  cfg = {};
  cfg.lambda_max = 1.5;
  EXPECT_EQ(kind_of([&] { train(data, cfg); }), ErrorKind::precondition);
  EXPECT_EQ(kind_of([&] { train({}, TrainConfig{}); }), ErrorKind::precondition);
}

TEST(Probe, CopyingEncoderAndConstantEncoder) {
  std::vector<TrainingExample> data(50);
  CounterRng rng(5, 0);
  for (auto& ex : data) {
    ex.density = 10 * rng.uniform();
    ex.features.values = {ex.density, rng.normal()};
  }
  AdversarialNet copy = init_net(2, {1}, 0);
  copy.encoder[0].weights << 0.01, 0.0;  // tanh(0.01 * density): monotone in density
  EXPECT_NEAR(probe_density(copy, data).probe_spearman, 1.0, 1e-12);
  EXPECT_GT(probe_density(copy, data).probe_r2, 0.99);

  AdversarialNet flat = copy;
  flat.encoder[0].weights.setZero();
  const auto p = probe_density(flat, data);
  EXPECT_EQ(p.probe_spearman, 0.0);
  EXPECT_TRUE(p.warning.has_value());
  EXPECT_EQ(kind_of([&] { probe_density(copy, std::span(data).first(9)); }), ErrorKind::precondition);
}

TEST(Synthetic, Construction) {
  const auto full = generate_synthetic_benchmark(1000, 1000, 1.0, 3);
  EXPECT_EQ(full.train.distribution, DistributionLabel::eval);
  EXPECT_EQ(full.test.distribution, DistributionLabel::test);
  EXPECT_EQ(full.train.examples.size(), 1000u);
  EXPECT_EQ(full.train.examples[0].features.size(), kSyntheticDim);
  std::vector<double> dens, label;
  for (const auto& ex : full.train.examples) {
    dens.push_back(ex.features.values[kSyntheticDensityChannel]);
    label.push_back(ex.label);
    EXPECT_EQ(ex.density, ex.features.values[kSyntheticDensityChannel]);
  }
  EXPECT_NEAR(spearman(dens, label), 1.0, 1e-12);

  for (const double strength : {0.0, 0.5, 0.9, 1.0}) {
    const auto b = generate_synthetic_benchmark(1000, 1000, strength, 7);
    std::vector<double> td, tl;
    for (const auto& ex : b.test.examples) {
      td.push_back(ex.features.values[kSyntheticDensityChannel]);
      tl.push_back(ex.label);
    }
    EXPECT_LT(std::abs(spearman(td, tl)), 0.1) << strength;
  }
  EXPECT_EQ(kind_of([] { generate_synthetic_benchmark(19, 100, 0.5, 0); }), ErrorKind::precondition);
  EXPECT_EQ(kind_of([] { generate_synthetic_benchmark(100, 100, 1.5, 0); }), ErrorKind::precondition);
}

TEST(Synthetic, ZeroStrengthSplitsShareLaw) {
  const auto b = generate_synthetic_benchmark(20000, 20000, 0.0, 11);
  auto moments = [](const FeatureDataset& d, std::size_t ch) {
    double m = 0, s = 0, cross = 0;
    for (const auto& ex : d.examples) m += ex.features.values[ch];
    m /= d.examples.size();
    for (const auto& ex : d.examples) {
      s += std::pow(ex.features.values[ch] - m, 2);
      cross += (ex.features.values[ch] - m) * (ex.label - 0.5);
    }
    return std::tuple{m, s / d.examples.size(), cross / d.examples.size()};
  };
  for (const auto ch : {kSyntheticSignalChannel, kSyntheticDensityChannel}) {
    const auto [m1, v1, c1] = moments(b.train, ch);
    const auto [m2, v2, c2] = moments(b.test, ch);
    EXPECT_NEAR(m1, m2, 0.06);
    EXPECT_NEAR(v1, v2, 0.08);
    EXPECT_NEAR(c1, c2, 0.03);
  }
}

TEST(Synthetic, Reproducible) {
  const auto a = generate_synthetic_benchmark(50, 50, 0.9, 1);
  const auto b = generate_synthetic_benchmark(50, 50, 0.9, 1);
  EXPECT_EQ(serialize_features(a.train), serialize_features(b.train));
  EXPECT_EQ(serialize_features(a.test), serialize_features(b.test));
  EXPECT_NE(serialize_features(a.train), serialize_features(generate_synthetic_benchmark(50, 50, 0.9, 2).train));
}

TEST(Debiasing, ReversalLowersDensityProbe) {
  double grl_probe = 0, base_probe = 0, grl_acc = 0, base_acc = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto b = generate_synthetic_benchmark(2000, 2000, 0.9, seed);
    TrainConfig cfg;
    cfg.seed = seed;
    const auto grl = train(b.train.examples, cfg);
    cfg.reverse_gradients = false;
    const auto base = train(b.train.examples, cfg);
    grl_probe += mean_abs_spearman_probe(grl, b.test) / 5;
    base_probe += mean_abs_spearman_probe(base, b.test) / 5;
    grl_acc += accuracy(grl, b.test.examples) / 5;
    base_acc += accuracy(base, b.test.examples) / 5;
  }
  EXPECT_LE(grl_probe, base_probe - 0.2) << grl_probe << " vs " << base_probe;
  EXPECT_GE(grl_acc, base_acc) << grl_acc << " vs " << base_acc;
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto data = random_batch(40, 5, 3);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.hidden = {6, 3};
  const auto net = train(data, cfg);
  const auto text = checkpoint_to_json(net, nlohmann::json{{"seed", 0}});
  const auto back = checkpoint_from_json(text);
  EXPECT_EQ(checkpoint_to_json(back, nlohmann::json{{"seed", 0}}), text);
  for (std::size_t l = 0; l < net.encoder.size(); ++l) {
    EXPECT_TRUE(bitwise_equal(net.encoder[l].weights, back.encoder[l].weights));
  }
  EXPECT_EQ(back.density_std, net.density_std);
  for (const auto& ex : data) EXPECT_EQ(score(net, ex.features), score(back, ex.features));

  fixtures::TempDir dir("ckpt");
  save_checkpoint(net, dir / "m.json");
  EXPECT_EQ(checkpoint_to_json(load_checkpoint(dir / "m.json")), checkpoint_to_json(net));

  auto j = nlohmann::json::parse(text);
  j["version"] = 99;
  EXPECT_EQ(kind_of([&] { checkpoint_from_json(j.dump()); }), ErrorKind::parse);
  EXPECT_EQ(kind_of([] { checkpoint_from_json("{\"format\":\"other\"}"); }), ErrorKind::parse);
  EXPECT_EQ(kind_of([] { load_checkpoint("/nonexistent/m.json"); }), ErrorKind::io);
}

TEST(FeatureFile, RoundTrip) {
  const auto b = generate_synthetic_benchmark(25, 25, 0.5, 4);
  const auto text = serialize_features(b.train);
  const auto back = parse_features(text, "train");
  ASSERT_EQ(back.examples.size(), 25u);
  EXPECT_EQ(serialize_features(back), text);
  EXPECT_EQ(kind_of([] { parse_features("", "x"); }), ErrorKind::validation);
  EXPECT_EQ(kind_of([] { parse_features("{\"id\":\"a\",\"features\":[1],\"label\":1,\"density\":1}\n"
                                        "{\"id\":\"b\",\"features\":[1,2],\"label\":0,\"density\":1}",
                                        "x");
            }),
            ErrorKind::dimension_mismatch);
}
