#include "nlgaudit/audit.hpp"

#include <cmath>

#include "nlgaudit/error.hpp"

namespace nlgaudit {

namespace {

struct Columns {
  std::vector<double> human;
  std::map<std::string, std::vector<double>> metric;
  std::map<std::string, std::vector<double>> correlate;
  std::size_t n = 0;
};

// Listwise deletion: keep records that carry every requested score.
Columns complete_cases(const Dataset& dataset, const std::vector<std::string>& metrics,
                       const std::vector<std::string>& correlates, const std::string& aspect) {
  Columns cols;
  for (const auto& m : metrics) cols.metric[m];
  for (const auto& c : correlates) cols.correlate[c];
  for (const auto& rec : dataset.records) {
    bool complete = rec.human_scores.count(aspect) > 0;
    for (const auto& m : metrics) complete = complete && rec.metric_scores.count(m);
    for (const auto& c : correlates) complete = complete && rec.correlate_scores.count(c);
    if (!complete) continue;
    cols.human.push_back(rec.human_scores.at(aspect));
    for (const auto& m : metrics) cols.metric[m].push_back(rec.metric_scores.at(m));
    for (const auto& c : correlates) cols.correlate[c].push_back(rec.correlate_scores.at(c));
    ++cols.n;
  }
  return cols;
}

bool has_variance(const std::vector<double>& v) {
  for (const double x : v) {
    if (x != v.front()) return true;
  }
  return false;
}

std::optional<BootstrapResult> try_bootstrap(const std::vector<double>& a,
                                             const std::vector<double>& b,
                                             const BootstrapConfig& cfg, const std::string& what,
                                             std::vector<std::string>& warnings) {
  try {
    return bootstrap_mean(correlation_statistic(a, b), a.size(), cfg);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::unstable_statistic && e.kind() != ErrorKind::degenerate_sample) {
      throw;
    }
    warnings.push_back(what + ": " + e.what());
    return std::nullopt;
  }
}

void require_label(const Dataset& d, DistributionLabel expected, const char* role) {
  if (d.distribution != expected) {
    throw Error(ErrorKind::distribution_label, std::string(role) + " dataset '" + d.name +
                                                   "' is labeled '" + label_name(d) + "'");
  }
}

}  // namespace

std::string to_string(ScorerKind kind) {
  return kind == ScorerKind::metric ? "metric" : "correlate";
}

AuditReport example_level_audit(const Dataset& dataset, const std::vector<std::string>& metrics,
                                const std::vector<std::string>& correlates,
                                const std::string& aspect, const AuditConfig& config) {
  AuditReport report;
  report.dataset_name = dataset.name;
  report.aspect = aspect;
  report.config = config;
  report.n_records = dataset.records.size();

  const auto cols = complete_cases(dataset, metrics, correlates, aspect);
  report.n_complete = cols.n;
  if (cols.n < 2) {
    throw Error(ErrorKind::validation, "audit needs >= 2 complete records, found " +
                                           std::to_string(cols.n));
  }
  if (!has_variance(cols.human)) {
    throw Error(ErrorKind::degenerate_sample, "human." + aspect + " has zero variance");
  }
  const auto cfg = config.bootstrap();

  std::map<std::string, bool> usable_correlate;
  for (const auto& c : correlates) usable_correlate[c] = has_variance(cols.correlate.at(c));

  for (const auto& m : metrics) {
    AuditRow row{m, ScorerKind::metric, std::nullopt, {}, {}, {}};
    const auto& f = cols.metric.at(m);
    if (!has_variance(f)) {
      row.warnings.push_back("degenerate column: zero variance");
      report.rows.push_back(std::move(row));
      continue;
    }
    row.corr_with_human = try_bootstrap(f, cols.human, cfg, "corr with human", row.warnings);
    for (const auto& c : correlates) {
      if (!usable_correlate.at(c)) continue;
      const auto& s = cols.correlate.at(c);
      auto fs = try_bootstrap(f, s, cfg, "corr with " + c, row.warnings);
      if (!fs) continue;
      row.corr_with.emplace(c, *fs);
      if (!row.corr_with_human) continue;
      try {
        const auto test = bootstrap_one_tailed_test(
            correlation_statistic(f, s, CorrelationMethod::spearman, true),
            correlation_statistic(f, cols.human, CorrelationMethod::spearman, true), cols.n, cfg);
        row.tests.emplace(c, test);
        const double fh = row.corr_with_human->boot_mean;
        if (std::abs(fs->boot_mean) > std::abs(fh)) {
          report.flags.push_back({m, c, fh, fs->boot_mean, test.significant, test.p});
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::unstable_statistic) throw;
        row.warnings.push_back("test vs " + c + ": " + e.what());
      }
    }
    report.rows.push_back(std::move(row));
  }

  for (const auto& c : correlates) {
    AuditRow row{c, ScorerKind::correlate, std::nullopt, {}, {}, {}};
    if (!usable_correlate.at(c)) {
      row.warnings.push_back("degenerate column: zero variance");
    } else {
      row.corr_with_human =
          try_bootstrap(cols.correlate.at(c), cols.human, cfg, "corr with human", row.warnings);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

SpuriousVerdict spurious_correlate_check(const Dataset& d_eval, const Dataset& d_test,
                                         const std::string& metric,
                                         const std::string& correlate,
                                         const std::string& aspect,
                                         const SpuriousThresholds& thresholds,
                                         const AuditConfig& config) {
  require_label(d_eval, DistributionLabel::eval, "eval");
  require_label(d_test, DistributionLabel::test, "test");
  const auto cfg = config.bootstrap();

  auto pair_for = [&](const Dataset& d) {
    const auto cols = complete_cases(d, {metric}, {correlate}, aspect);
    if (cols.n < 2) {
      throw Error(ErrorKind::validation, "dataset '" + d.name + "' has < 2 complete records");
    }
    const auto& f = cols.metric.at(metric);
    return std::pair{bootstrap_mean(correlation_statistic(f, cols.human), cols.n, cfg),
                     bootstrap_mean(correlation_statistic(f, cols.correlate.at(correlate)),
                                    cols.n, cfg)};
  };

  SpuriousVerdict v;
  v.metric = metric;
  v.correlate = correlate;
  std::tie(v.fh_eval, v.fs_eval) = pair_for(d_eval);
  std::tie(v.fh_test, v.fs_test) = pair_for(d_test);
  v.condition1 = std::abs(v.fh_eval.boot_mean) >= thresholds.high &&
                 std::abs(v.fh_test.boot_mean) < thresholds.low;
  v.condition2 = std::abs(v.fs_test.boot_mean) >= thresholds.high;
  v.is_spurious = v.condition1 && v.condition2;
  return v;
}

}  // namespace nlgaudit
