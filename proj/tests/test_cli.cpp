#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "json.hpp"
#include "nlgaudit/adversary.hpp"
#include "nlgaudit/cli.hpp"
#include "nlgaudit/corpus.hpp"
#include "nlgaudit/rng.hpp"

using namespace nlgaudit;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Systems with increasing faithfulness; "good" follows humans, "flat" is constant.
Dataset systems_dataset(std::size_t systems, std::size_t per_system, std::uint64_t seed) {
  CounterRng rng(seed, 0);
  Dataset d;
  d.name = "cli";
  const std::vector<std::string> vocab{"the", "cat", "sat", "on", "mat", "dog", "ran", "far", "away", "quick"};
  for (std::size_t s = 0; s < systems; ++s) {
    for (std::size_t k = 0; k < per_system; ++k) {
      std::vector<std::string> src(30), out(3 + rng.below(8));
      for (auto& t : src) t = vocab[rng.below(vocab.size())];
      for (auto& t : out) t = vocab[rng.below(vocab.size())];
      const double h = std::min(5.0, 1.0 + s * 0.8 + rng.uniform() * 0.4);
      ExampleRecord r;
      r.id = "s" + std::to_string(s) + "-" + std::to_string(k);
      r.system_id = "sys" + std::to_string(s);
      r.source_text = fixtures::join(src);
      r.output_text = fixtures::join(out);
      r.human_scores = {{"faithfulness", h}};
      r.metric_scores = {{"good", h * 2 + rng.uniform() * 0.01}, {"noise", rng.uniform()}, {"flat", 1.0}};
      d.records.push_back(r);
    }
  }
  return d;
}

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) { setenv(name, value, 1); }
  ~ScopedEnv() { unsetenv(name_); }

 private:
  const char* name_;
};

}  // namespace

TEST(Cli, CorrelatesWritesAugmentedDataset) {
  fixtures::TempDir dir("cli");
  save_dataset(systems_dataset(3, 4, 1), dir / "in.jsonl");
  const auto r = run({"correlates", "--data", dir / "in.jsonl", "--out", dir / "out.jsonl"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("processed 12 records, 0 errors"), std::string::npos) << r.out;
  const auto d = load_dataset(dir / "out.jsonl").dataset;
  for (const auto& rec : d.records) {
    EXPECT_TRUE(rec.correlate_scores.count("coverage"));
    EXPECT_TRUE(rec.correlate_scores.count("density"));
    EXPECT_TRUE(rec.correlate_scores.count("length"));
  }
  const auto sidecar = nlohmann::json::parse(slurp(dir / "out.jsonl.config.json"));
  EXPECT_EQ(sidecar["seed"], 0);
}

TEST(Cli, ExitCodes) {
  fixtures::TempDir dir("cli");
  EXPECT_EQ(run({"correlates", "--data", dir / "missing.jsonl", "--out", dir / "o.jsonl"}).code, 1);

  auto d = systems_dataset(2, 2, 1);
  d.records[1].output_text = "?!";
  save_dataset(d, dir / "empty.jsonl");
  const auto r = run({"correlates", "--data", dir / "empty.jsonl", "--out", dir / "o.jsonl"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(d.records[1].id), std::string::npos) << r.err;

  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"audit", "--no-such-flag"}).code, 2);
  EXPECT_EQ(run({"audit", "--out", dir / "x"}).code, 2);  // --data required
  std::ofstream(dir / "bad.json") << "{oops";
  EXPECT_EQ(run({"audit", "--config", dir / "bad.json", "--data", dir / "empty.jsonl", "--out", dir / "x"}).code, 2);

  // constant human scores: numerical failure
  auto flat = systems_dataset(2, 5, 2);
  for (auto& rec : flat.records) rec.human_scores["faithfulness"] = 3;
  save_dataset(flat, dir / "flat.jsonl");
  EXPECT_EQ(run({"audit", "--data", dir / "flat.jsonl", "--out", dir / "flat", "--bootstrap", "50"}).code, 3);
}

TEST(Cli, AuditIsByteIdenticalAcrossRunsAndWorkers) {
  fixtures::TempDir dir("cli");
  save_dataset(systems_dataset(4, 15, 3), dir / "in.jsonl");
  const std::vector<std::string> base{"audit",       "--data", dir / "in.jsonl", "--out",    dir / "out",
                                      "--bootstrap", "300",    "--seed",         "13",       "--metrics",
                                      "good,noise",  "--correlates", "density,coverage"};
  std::vector<std::string> outputs;
  for (const char* workers : {"1", "1", "4", "9"}) {
    auto args = base;
    args.insert(args.end(), {"--workers", workers});
    const auto r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
    outputs.push_back(slurp(dir / "out/audit.json") + slurp(dir / "out/audit.csv") + slurp(dir / "out/audit.md"));
  }
  for (const auto& o : outputs) EXPECT_EQ(o, outputs[0]);

  const auto csv = slurp(dir / "out/audit.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);  // header + 2 x 2 cross rows
  const auto j = nlohmann::json::parse(slurp(dir / "out/audit.json"));
  EXPECT_EQ(j["run_config"]["seed"], 13);
  EXPECT_EQ(j["config"]["replicates"], 300);
  EXPECT_FALSE(j["run_config"].contains("workers"));
}

TEST(Cli, DegenerateMetricIsAWarningRow) {
  fixtures::TempDir dir("cli");
  save_dataset(systems_dataset(3, 10, 4), dir / "in.jsonl");
  const auto r = run({"audit", "--data", dir / "in.jsonl", "--out", dir / "out", "--bootstrap", "100",
                      "--metrics", "flat,good", "--correlates", "density"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("flat"), std::string::npos);
  EXPECT_NE(slurp(dir / "out/audit.csv").find("flat,metric,density,,,,,,warning"), std::string::npos);
}

TEST(Cli, AuditWithTestSplit) {
  fixtures::TempDir dir("cli");
  save_dataset(systems_dataset(3, 15, 5), dir / "eval.jsonl");
  save_dataset(systems_dataset(3, 15, 6), dir / "test.jsonl");
  const auto r = run({"audit", "--data", dir / "eval.jsonl", "--test-data", dir / "test.jsonl", "--out",
                      dir / "out", "--bootstrap", "100", "--metrics", "good", "--correlates", "density",
                      "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(dir / "out/audit.json"));
  ASSERT_EQ(j["spurious_checks"].size(), 1u);
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "out/audit.md"));
}

TEST(Cli, RankFiveSystems) {
  fixtures::TempDir dir("cli");
  auto d = systems_dataset(5, 3, 7);
  save_dataset(d, dir / "in.jsonl");
  const auto r = run({"rank", "--data", dir / "in.jsonl", "--out", dir / "out", "--metrics", "good"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("good: all-pairs 1,"), std::string::npos) << r.out;
  const auto csv = slurp(dir / "out/ranking.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "scorer,all_pairs_accuracy,all_pairs_n,within_af_accuracy,within_af_n");
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "out/systems.svg"));

  // thresholds loose enough to put every system in AF: perfect scorer -> 1.0 / 1.0
  const auto loose = run({"rank", "--data", dir / "in.jsonl", "--out", dir / "loose", "--metrics", "good",
                          "--af-faith", "0", "--af-density", "1000", "--format", "json"});
  ASSERT_EQ(loose.code, 0) << loose.err;
  const auto j = nlohmann::json::parse(slurp(dir / "loose/ranking.json"));
  EXPECT_EQ(j["rows"][0]["all_pairs"]["accuracy"], 1.0);
  EXPECT_EQ(j["rows"][0]["within_af"]["accuracy"], 1.0);

  // default thresholds: at most one system above 4.5 -> AF absent
  const auto strict = run({"rank", "--data", dir / "in.jsonl", "--out", dir / "strict", "--metrics", "good",
                           "--format", "json"});
  ASSERT_EQ(strict.code, 0);
  EXPECT_TRUE(nlohmann::json::parse(slurp(dir / "strict/ranking.json"))["rows"][0]["within_af"].is_null());
}

TEST(Cli, ConfigEnvFlagPrecedence) {
  fixtures::TempDir dir("cli");
  save_dataset(systems_dataset(3, 6, 8), dir / "in.jsonl");
  std::ofstream(dir / "cfg.json") << R"({"seed": 5, "bootstrap": 50, "metrics": ["good"], "correlates": ["density"]})";
  const std::vector<std::string> base{"audit", "--config", dir / "cfg.json", "--data", dir / "in.jsonl",
                                      "--out", dir / "out", "--format", "csv"};
  auto seed_of = [&](const CliRun& r) {
    EXPECT_EQ(r.code, 0) << r.err;
    const auto line = r.out.substr(r.out.find("config: ") + 8, r.out.find('\n') - 8);
    return nlohmann::json::parse(line)["seed"].get<int>();
  };
  EXPECT_EQ(seed_of(run(base)), 5);
  {
    ScopedEnv env("NLGAUDIT_SEED", "9");
    EXPECT_EQ(seed_of(run(base)), 9);
    auto args = base;
    args.insert(args.end(), {"--seed", "21"});
    EXPECT_EQ(seed_of(run(args)), 21);
  }
  const auto plain = run({"audit", "--data", dir / "in.jsonl", "--out", dir / "out2", "--bootstrap", "20"});
  EXPECT_EQ(seed_of(plain), 0);  // defaulted seed is still echoed
}

TEST(Cli, AdversaryCheckSynthTrainEval) {
  fixtures::TempDir dir("cli");
  const auto check = run({"adversary", "check"});
  EXPECT_EQ(check.code, 0);
  EXPECT_NE(check.out.find("max relative error"), std::string::npos);

  ASSERT_EQ(run({"adversary", "synth", "--out", dir / "a", "--n-train", "200", "--n-test", "100", "--seed", "4"}).code, 0);
  ASSERT_EQ(run({"adversary", "synth", "--out", dir / "b", "--n-train", "200", "--n-test", "100", "--seed", "4"}).code, 0);
  EXPECT_EQ(slurp(dir / "a/train.jsonl"), slurp(dir / "b/train.jsonl"));
  EXPECT_EQ(slurp(dir / "a/test.jsonl"), slurp(dir / "b/test.jsonl"));

  const auto tr = run({"adversary", "train", "--data", dir / "a/train.jsonl", "--out", dir / "m.json", "--epochs", "3"});
  ASSERT_EQ(tr.code, 0) << tr.err;
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "m.json"))["run_config"]["epochs"], 3);
  const auto ev = run({"adversary", "eval", "--data", dir / "a/test.jsonl", "--model", dir / "m.json", "--out",
                       dir / "scores.jsonl"});
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_NE(ev.out.find("density probe"), std::string::npos);

  // dataset files: train on text features, then write metrics.adversarial
  save_dataset(systems_dataset(3, 10, 9), dir / "ds.jsonl");
  ASSERT_EQ(run({"adversary", "train", "--data", dir / "ds.jsonl", "--out", dir / "m2.json", "--epochs", "2",
                 "--label-threshold", "3"}).code, 0);
  const auto ev2 = run({"adversary", "eval", "--data", dir / "ds.jsonl", "--model", dir / "m2.json", "--out",
                        dir / "scored.jsonl"});
  ASSERT_EQ(ev2.code, 0) << ev2.err;
  for (const auto& rec : load_dataset(dir / "scored.jsonl").dataset.records) {
    ASSERT_TRUE(rec.metric_scores.count("adversarial"));
    EXPECT_GT(rec.metric_scores.at("adversarial"), 0.0);
    EXPECT_LT(rec.metric_scores.at("adversarial"), 1.0);
  }
  // dimension mismatch between model and data is a validation failure
  EXPECT_EQ(run({"adversary", "eval", "--data", dir / "a/test.jsonl", "--model", dir / "m2.json", "--out",
                 dir / "x.jsonl"}).code, 2);
}
