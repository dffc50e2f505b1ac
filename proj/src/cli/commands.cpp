#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "nlgaudit/adversary.hpp"
#include "nlgaudit/audit.hpp"
#include "nlgaudit/cli.hpp"
#include "nlgaudit/error.hpp"
#include "nlgaudit/overlap.hpp"
#include "nlgaudit/ranking.hpp"
#include "nlgaudit/render.hpp"
#include "nlgaudit/rng.hpp"

namespace nlgaudit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
  std::string config_file;
  std::string data;
  std::string test_data;
  std::string out;
  std::string model;
  std::string aspect = "faithfulness";
  std::vector<std::string> metrics;
  std::vector<std::string> correlates;
  std::vector<std::string> formats;
  std::size_t bootstrap = 1000;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  double af_faith = 4.5;
  double af_density = 30.0;
  double spurious_high = 0.3;
  double spurious_low = 0.1;
  bool lenient = false;
  unsigned workers = 1;

  // adversary
  double learning_rate = 0.05;
  std::size_t epochs = 30;
  std::size_t batch = 32;
  std::vector<std::size_t> hidden = {32, 16};
  double gamma = 10.0;
  double lambda_max = 1.0;
  bool baseline = false;
  double label_threshold = 4.5;
  std::size_t n_train = 2000;
  std::size_t n_test = 2000;
  double strength = 0.9;
  double epsilon = 1e-5;
};

std::string resolve_path(const std::string& p) {
  return p.empty() ? p : fs::absolute(p).lexically_normal().string();
}

// Registers one option bound to `field`, with its env var and a hook that
// fills it from the config file when neither flag nor env supplied it.
class OptionTable {
 public:
  explicit OptionTable(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* add(const std::string& name, T& field, const std::string& help) {
    auto* opt = app_->add_option("--" + name, field, help)->capture_default_str();
    opt->envname(env_name(name));
    fillers_.push_back({opt, name, [&field](const json& v) { field = v.get<T>(); }});
    return opt;
  }

  CLI::Option* flag(const std::string& name, bool& field, const std::string& help) {
    auto* opt = app_->add_flag("--" + name, field, help);
    opt->envname(env_name(name));
    fillers_.push_back({opt, name, [&field](const json& v) { field = v.get<bool>(); }});
    return opt;
  }

  void apply_config(const json& config) const {
    for (const auto& f : fillers_) {
      if (f.option->count() > 0 || !config.contains(f.key)) continue;
      try {
        f.fill(config.at(f.key));
      } catch (const json::exception& e) {
        throw Error(ErrorKind::validation, "config key '" + f.key + "': " + e.what());
      }
    }
  }

 private:
  static std::string env_name(const std::string& flag) {
    std::string env = kEnvPrefix;
    for (const char c : flag) env += c == '-' ? '_' : static_cast<char>(std::toupper(c));
    return env;
  }

  struct Filler {
    CLI::Option* option;
    std::string key;
    std::function<void(const json&)> fill;
  };
  CLI::App* app_;
  std::vector<Filler> fillers_;
};

json config_json(const RunConfig& c, const std::string& command) {
  // Worker count is deliberately absent: outputs must not depend on it.
  json j = {{"command", command},
            {"data", c.data},
            {"test-data", c.test_data},
            {"out", c.out},
            {"aspect", c.aspect},
            {"metrics", c.metrics},
            {"correlates", c.correlates},
            {"format", c.formats},
            {"bootstrap", c.bootstrap},
            {"seed", c.seed},
            {"alpha", c.alpha},
            {"af-faith", c.af_faith},
            {"af-density", c.af_density},
            {"spurious-high", c.spurious_high},
            {"spurious-low", c.spurious_low},
            {"lenient", c.lenient}};
  if (command.rfind("adversary", 0) == 0) {
    j["model"] = c.model;
    j["lr"] = c.learning_rate;
    j["epochs"] = c.epochs;
    j["batch"] = c.batch;
    j["hidden"] = c.hidden;
    j["gamma"] = c.gamma;
    j["lambda-max"] = c.lambda_max;
    j["baseline"] = c.baseline;
    j["label-threshold"] = c.label_threshold;
    j["n-train"] = c.n_train;
    j["n-test"] = c.n_test;
    j["strength"] = c.strength;
    j["epsilon"] = c.epsilon;
  }
  return j;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw Error(ErrorKind::validation, std::string("missing required --") + flag);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::io, "cannot create directory " + dir);
}

bool wants(const std::vector<std::string>& formats, ReportFormat f) {
  for (const auto& name : formats) {
    if (parse_format(name) == f) return true;
  }
  return false;
}

std::vector<std::string> metric_names(const Dataset& d) {
  std::set<std::string> names;
  for (const auto& r : d.records) {
    for (const auto& [k, _] : r.metric_scores) names.insert(k);
  }
  return {names.begin(), names.end()};
}

std::vector<std::string> correlate_names(const Dataset& d) {
  std::set<std::string> names;
  for (const auto& r : d.records) {
    for (const auto& [k, _] : r.correlate_scores) names.insert(k);
  }
  return {names.begin(), names.end()};
}

bool is_builtin_correlate(const std::string& name) {
  return name == "coverage" || name == "density" || name == "length";
}

// Fills built-in correlates (coverage/density/length) that some record lacks.
Dataset with_builtin_correlates(const Dataset& d, const std::vector<std::string>& wanted,
                                unsigned workers) {
  std::set<Correlate> missing;
  for (const auto& name : wanted) {
    if (!is_builtin_correlate(name)) continue;
    for (const auto& r : d.records) {
      if (!r.correlate_scores.count(name)) {
        missing.insert(parse_correlate(name));
        break;
      }
    }
  }
  if (missing.empty()) return d;
  return annotate_correlates(d, missing, {workers});
}

Dataset load(const RunConfig& c, const std::string& path, DistributionLabel label,
             std::ostream& err) {
  LoadOptions opts;
  opts.lenient = c.lenient;
  opts.distribution = label;
  auto res = load_dataset(path, opts);
  for (const auto& w : res.warnings) err << "warning: " << w << "\n";
  return std::move(res.dataset);
}

void echo_config(std::ostream& out, const json& cfg, unsigned workers) {
  out << "config: " << cfg.dump() << "\n";
  out << "workers: " << workers << "\n";
}

int cmd_correlates(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require(c.data, "data");
  require(c.out, "out");
  const auto cfg = config_json(c, "correlates");
  echo_config(out, cfg, c.workers);
  const Dataset d = load(c, c.data, DistributionLabel::eval, err);
  std::set<Correlate> which;
  for (const auto& name : c.correlates.empty() ? std::vector<std::string>{"coverage", "density", "length"}
                                               : c.correlates) {
    which.insert(parse_correlate(name));
  }
  const Dataset annotated = annotate_correlates(d, which, {c.workers});
  save_dataset(annotated, c.out);
  write_text_file(c.out + ".config.json", cfg.dump(2) + "\n");
  out << "processed " << annotated.records.size() << " records, 0 errors -> " << c.out << "\n";
  return kOk;
}

int cmd_audit(RunConfig c, std::ostream& out, std::ostream& err) {
  require(c.data, "data");
  require(c.out, "out");
  Dataset d = load(c, c.data, DistributionLabel::eval, err);
  if (c.metrics.empty()) c.metrics = metric_names(d);
  if (c.correlates.empty()) {
    c.correlates = correlate_names(d);
    if (c.correlates.empty()) c.correlates = {"coverage", "density"};
  }
  if (c.formats.empty()) c.formats = {"markdown", "csv", "json"};
  const auto cfg = config_json(c, "audit");
  echo_config(out, cfg, c.workers);

  d = with_builtin_correlates(d, c.correlates, c.workers);
  for (const auto& issue : validate(d, {c.aspect}, c.metrics, c.correlates)) {
    err << "warning: " << issue.describe() << " (excluded by listwise deletion)\n";
  }

  const AuditConfig audit_cfg{c.bootstrap, c.seed, c.alpha, c.workers};
  AuditReport report = example_level_audit(d, c.metrics, c.correlates, c.aspect, audit_cfg);
  if (!c.test_data.empty()) {
    Dataset test = load(c, c.test_data, DistributionLabel::test, err);
    test = with_builtin_correlates(test, c.correlates, c.workers);
    for (const auto& m : c.metrics) {
      for (const auto& s : c.correlates) {
        try {
          report.spurious_checks.push_back(spurious_correlate_check(
              d, test, m, s, c.aspect, {c.spurious_high, c.spurious_low}, audit_cfg));
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::degenerate_sample && e.kind() != ErrorKind::unstable_statistic) throw;
          err << "warning: eval/test check " << m << " vs " << s << ": " << e.what() << "\n";
        }
      }
    }
  }

  for (const auto& row : report.rows) {
    for (const auto& w : row.warnings) err << "warning: " << row.scorer_name << ": " << w << "\n";
  }
  ensure_dir(c.out);
  const fs::path dir(c.out);
  if (wants(c.formats, ReportFormat::markdown)) write_text_file(dir / "audit.md", render_audit_markdown(report, cfg));
  if (wants(c.formats, ReportFormat::csv)) write_text_file(dir / "audit.csv", render_audit_csv(report));
  if (wants(c.formats, ReportFormat::json)) write_text_file(dir / "audit.json", render_audit_json(report, cfg));
  out << "audited " << report.n_complete << "/" << report.n_records << " records, "
      << report.flags.size() << " spurious flag(s) -> " << c.out << "\n";
  return kOk;
}

int cmd_rank(RunConfig c, std::ostream& out, std::ostream& err) {
  require(c.data, "data");
  require(c.out, "out");
  Dataset d = load(c, c.data, DistributionLabel::eval, err);
  if (c.metrics.empty()) c.metrics = metric_names(d);
  if (c.correlates.empty()) c.correlates = {"density", "coverage"};
  if (c.formats.empty()) c.formats = {"markdown", "csv", "json", "svg"};
  const auto cfg = config_json(c, "rank");
  echo_config(out, cfg, c.workers);

  std::vector<std::string> needed = c.correlates;
  needed.push_back("density");
  d = with_builtin_correlates(d, needed, c.workers);

  std::vector<std::string> scorers = c.metrics;
  scorers.insert(scorers.end(), c.correlates.begin(), c.correlates.end());
  const auto report = ranking_report(d, scorers, c.aspect, {c.af_faith, c.af_density});

  ensure_dir(c.out);
  const fs::path dir(c.out);
  if (wants(c.formats, ReportFormat::markdown)) write_text_file(dir / "ranking.md", render_ranking_markdown(report, cfg));
  if (wants(c.formats, ReportFormat::csv)) write_text_file(dir / "ranking.csv", render_ranking_csv(report));
  if (wants(c.formats, ReportFormat::json)) write_text_file(dir / "ranking.json", render_ranking_json(report, cfg));
  if (wants(c.formats, ReportFormat::svg_scatter)) write_text_file(dir / "systems.svg", render_ranking_svg(report));

  for (const auto& row : report.rows) {
    out << row.scorer << ": all-pairs " << format_number(row.all_pairs.accuracy) << ", within-AF "
        << (row.within_af ? format_number(row.within_af->accuracy) : std::string("absent")) << "\n";
  }
  return kOk;
}

bool is_feature_file(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      return j.is_object() && j.contains("features");
    } catch (const json::exception&) {
      return false;
    }
  }
  return false;
}

// Dataset records become training examples: label = human aspect at or above
// the threshold, density target = the pair's extractive density.
FeatureDataset features_from_dataset(const Dataset& d, const RunConfig& c) {
  FeatureDataset fd;
  fd.name = d.name;
  fd.distribution = d.distribution;
  std::string empty_ids;
  for (const auto& rec : d.records) {
    const auto src = tokenize(rec.source_text, TokenOrigin::source);
    const auto outp = tokenize(rec.output_text, TokenOrigin::output);
    if (outp.empty()) {
      empty_ids += (empty_ids.empty() ? "" : ", ") + rec.id;
      continue;
    }
    TrainingExample ex;
    ex.id = rec.id;
    ex.features = featurize(src, outp);
    ex.density = ex.features.values[kDensitySlot];
    const auto h = rec.human_scores.find(c.aspect);
    ex.label = h != rec.human_scores.end() && h->second >= c.label_threshold ? 1 : 0;
    fd.examples.push_back(std::move(ex));
  }
  if (!empty_ids.empty()) throw Error(ErrorKind::validation, "empty output text for: " + empty_ids);
  return fd;
}

TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.learning_rate = c.learning_rate;
  t.epochs = c.epochs;
  t.batch_size = c.batch;
  t.seed = c.seed;
  t.gamma = c.gamma;
  t.lambda_max = c.lambda_max;
  t.hidden = c.hidden;
  t.reverse_gradients = !c.baseline;
  return t;
}

int cmd_adversary_synth(const RunConfig& c, std::ostream& out) {
  require(c.out, "out");
  const auto cfg = config_json(c, "adversary synth");
  echo_config(out, cfg, c.workers);
  const auto bench = generate_synthetic_benchmark(c.n_train, c.n_test, c.strength, c.seed);
  ensure_dir(c.out);
  const fs::path dir(c.out);
  write_text_file(dir / "train.jsonl", serialize_features(bench.train));
  write_text_file(dir / "test.jsonl", serialize_features(bench.test));
  write_text_file(dir / "synth.config.json", cfg.dump(2) + "\n");
  out << "wrote " << bench.train.examples.size() << " train / " << bench.test.examples.size()
      << " test examples -> " << c.out << "\n";
  return kOk;
}

FeatureDataset load_training_input(const RunConfig& c, std::ostream& err) {
  const std::string text = read_file(c.data);
  if (is_feature_file(text)) return parse_features(text, fs::path(c.data).stem().string());
  return features_from_dataset(load(c, c.data, DistributionLabel::eval, err), c);
}

int cmd_adversary_train(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require(c.data, "data");
  require(c.out, "out");
  const auto cfg = config_json(c, "adversary train");
  echo_config(out, cfg, c.workers);
  const auto data = load_training_input(c, err);
  const auto net = train(data.examples, train_config(c));
  save_checkpoint(net, c.out, cfg);
  out << "trained on " << data.examples.size() << " examples ("
      << (c.baseline ? "baseline, lambda=0" : "gradient reversal") << "); train accuracy "
      << format_number(accuracy(net, data.examples)) << " -> " << c.out << "\n";
  return kOk;
}

int cmd_adversary_eval(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require(c.data, "data");
  require(c.model, "model");
  require(c.out, "out");
  const auto cfg = config_json(c, "adversary eval");
  echo_config(out, cfg, c.workers);
  const auto net = load_checkpoint(c.model);
  const std::string text = read_file(c.data);

  if (is_feature_file(text)) {
    const auto data = parse_features(text, fs::path(c.data).stem().string());
    std::string lines;
    for (const auto& ex : data.examples) {
      lines += json{{"id", ex.id}, {"score", score(net, ex.features)}, {"label", ex.label}}.dump() + "\n";
    }
    write_text_file(c.out, lines);
    out << "accuracy " << format_number(accuracy(net, data.examples)) << "\n";
    if (data.examples.size() >= 10) {
      const auto probe = probe_density(net, data.examples);
      out << "density probe spearman " << format_number(probe.probe_spearman) << ", r2 "
          << format_number(probe.probe_r2) << "\n";
      if (probe.warning) err << "warning: " << *probe.warning << "\n";
    }
    return kOk;
  }

  Dataset d = load(c, c.data, DistributionLabel::eval, err);
  std::string empty_ids;
  for (auto& rec : d.records) {
    const auto outp = tokenize(rec.output_text, TokenOrigin::output);
    if (outp.empty()) {
      empty_ids += (empty_ids.empty() ? "" : ", ") + rec.id;
      continue;
    }
    rec.metric_scores["adversarial"] =
        score(net, featurize(tokenize(rec.source_text, TokenOrigin::source), outp));
  }
  if (!empty_ids.empty()) throw Error(ErrorKind::validation, "empty output text for: " + empty_ids);
  save_dataset(d, c.out);
  out << "scored " << d.records.size() << " records into metrics.adversarial -> " << c.out << "\n";
  return kOk;
}

int cmd_adversary_check(const RunConfig& c, std::ostream& out) {
  const auto cfg = config_json(c, "adversary check");
  echo_config(out, cfg, c.workers);
  constexpr std::size_t kInput = 6, kBatch = 8;
  const auto net = init_net(kInput, {5, 4}, c.seed);
  CounterRng rng(c.seed, 99);
  std::vector<TrainingExample> batch(kBatch);
  for (auto& ex : batch) {
    ex.features.values.resize(kInput);
    for (auto& v : ex.features.values) v = rng.normal();
    ex.label = static_cast<int>(rng.below(2));
    ex.density = rng.normal();
  }
  double worst = 0.0;
  for (const double lambda : {0.0, 0.5, 1.0}) {
    worst = std::max(worst, gradient_check(net, batch, c.epsilon, lambda));
  }
  out << "max relative error " << format_number(worst) << " (" << net.parameter_count()
      << " parameters, epsilon " << format_number(c.epsilon) << ")\n";
  return worst < 1e-4 ? kOk : kNumericalError;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io:
      return kIoError;
    case ErrorKind::degenerate_sample:
    case ErrorKind::unstable_statistic:
    case ErrorKind::degenerate_fit:
    case ErrorKind::divergence:
      return kNumericalError;
    default:
      return kValidationError;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Audit reference-free NLG metrics for spurious correlates", "nlgaudit"};
  app.require_subcommand(1);
  RunConfig c;

  auto common = [&c](CLI::App* sub, bool bootstrap_opts) {
    auto table = std::make_shared<OptionTable>(sub);
    sub->add_option("--config", c.config_file, "JSON config file; flags and env vars override it");
    table->add("data", c.data, "input dataset (newline-delimited JSON)");
    table->add("out", c.out, "output file or directory");
    table->add("seed", c.seed, "seed for every random stream");
    table->add("aspect", c.aspect, "human score aspect");
    table->add("metrics", c.metrics, "comma-separated metric names")->delimiter(',');
    table->add("correlates", c.correlates, "comma-separated correlate names")->delimiter(',');
    table->add("format", c.formats, "comma-separated: markdown,csv,json,svg")->delimiter(',');
    table->flag("lenient", c.lenient, "warn on unknown record keys instead of failing");
    table->add("workers", c.workers, "worker threads (results do not depend on it)");
    if (bootstrap_opts) {
      table->add("bootstrap", c.bootstrap, "bootstrap replicates");
      table->add("alpha", c.alpha, "significance level");
      table->add("af-faith", c.af_faith, "AF group: mean faithfulness strictly above");
      table->add("af-density", c.af_density, "AF group: mean density strictly below");
      table->add("test-data", c.test_data, "test-distribution dataset for the eval/test check");
      table->add("spurious-high", c.spurious_high, "eval/test check: 'highly correlated' bound");
      table->add("spurious-low", c.spurious_low, "eval/test check: 'not correlated' bound");
    }
    return table;
  };
  auto adversary_opts = [&c](OptionTable& table) {
    table.add("model", c.model, "model checkpoint (JSON)");
    table.add("lr", c.learning_rate, "learning rate");
    table.add("epochs", c.epochs, "training epochs");
    table.add("batch", c.batch, "minibatch size");
    table.add("hidden", c.hidden, "comma-separated encoder widths")->delimiter(',');
    table.add("gamma", c.gamma, "lambda schedule steepness");
    table.add("lambda-max", c.lambda_max, "lambda ceiling in (0,1]");
    table.flag("baseline", c.baseline, "hold lambda at 0 (no gradient reversal)");
    table.add("label-threshold", c.label_threshold, "human score counted as faithful");
    table.add("n-train", c.n_train, "synthetic train size");
    table.add("n-test", c.n_test, "synthetic test size");
    table.add("strength", c.strength, "synthetic train density/label correlation");
    table.add("epsilon", c.epsilon, "finite-difference step");
  };

  auto* correlates_cmd = app.add_subcommand("correlates", "annotate coverage/density/length correlates");
  auto* audit_cmd = app.add_subcommand("audit", "example-level spurious-correlation audit");
  auto* rank_cmd = app.add_subcommand("rank", "system-level pairwise ranking accuracy");
  auto* adv_cmd = app.add_subcommand("adversary", "gradient-reversal faithfulness model");
  adv_cmd->require_subcommand(1);
  auto* train_cmd = adv_cmd->add_subcommand("train", "train a model");
  auto* eval_cmd = adv_cmd->add_subcommand("eval", "score a dataset with a model");
  auto* check_cmd = adv_cmd->add_subcommand("check", "finite-difference gradient check");
  auto* synth_cmd = adv_cmd->add_subcommand("synth", "write the synthetic benchmark");

  std::vector<std::pair<CLI::App*, std::shared_ptr<OptionTable>>> tables;
  tables.emplace_back(correlates_cmd, common(correlates_cmd, false));
  tables.emplace_back(audit_cmd, common(audit_cmd, true));
  tables.emplace_back(rank_cmd, common(rank_cmd, true));
  for (auto* sub : {train_cmd, eval_cmd, check_cmd, synth_cmd}) {
    auto table = common(sub, false);
    adversary_opts(*table);
    tables.emplace_back(sub, table);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  }

  try {
    CLI::App* active = nullptr;
    for (const auto& [sub, table] : tables) {
      if (sub->parsed()) active = sub;
    }
    if (!c.config_file.empty()) {
      json config;
      try {
        config = json::parse(read_file(c.config_file));
      } catch (const json::exception& e) {
        throw Error(ErrorKind::validation, "config file: " + std::string(e.what()));
      }
      for (const auto& [sub, table] : tables) {
        if (sub == active) table->apply_config(config);
      }
    }
    c.data = resolve_path(c.data);
    c.test_data = resolve_path(c.test_data);
    c.out = resolve_path(c.out);
    c.model = resolve_path(c.model);

    if (correlates_cmd->parsed()) return cmd_correlates(c, out, err);
    if (audit_cmd->parsed()) return cmd_audit(c, out, err);
    if (rank_cmd->parsed()) return cmd_rank(c, out, err);
    if (synth_cmd->parsed()) return cmd_adversary_synth(c, out);
    if (train_cmd->parsed()) return cmd_adversary_train(c, out, err);
    if (eval_cmd->parsed()) return cmd_adversary_eval(c, out, err);
    if (check_cmd->parsed()) return cmd_adversary_check(c, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e.kind());
  }
  return kValidationError;
}

}  // namespace nlgaudit::cli
