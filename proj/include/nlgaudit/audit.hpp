#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nlgaudit/corpus.hpp"
#include "nlgaudit/stats.hpp"

namespace nlgaudit {

enum class ScorerKind { metric, correlate };

std::string to_string(ScorerKind kind);

struct AuditRow {
  std::string scorer_name;
  ScorerKind kind = ScorerKind::metric;
  std::optional<BootstrapResult> corr_with_human;
  std::map<std::string, BootstrapResult> corr_with;  // correlate -> corr(F,S)
  std::map<std::string, OneTailedResult> tests;      // |corr(F,S)| > |corr(F,H)|
  std::vector<std::string> warnings;
};

struct SpuriousFlag {
  std::string metric_name;
  std::string correlate_name;
  double corr_fh = 0.0;  // bootstrap means
  double corr_fs = 0.0;
  bool significant = false;
  double p = 1.0;
};

struct AuditConfig {
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  unsigned workers = 1;

  BootstrapConfig bootstrap() const { return {replicates, seed, alpha, workers}; }
};

struct SpuriousThresholds {
  double high = 0.3;
  double low = 0.1;
};

struct SpuriousVerdict {
  std::string metric;
  std::string correlate;
  bool condition1 = false;  // tracks humans on eval but not on test
  bool condition2 = false;  // still tracks the correlate on test
  bool is_spurious = false;
  BootstrapResult fh_eval, fh_test, fs_eval, fs_test;
};

struct AuditReport {
  std::string dataset_name;
  std::string aspect;
  std::vector<AuditRow> rows;
  std::vector<SpuriousFlag> flags;
  AuditConfig config;
  std::size_t n_records = 0;
  std::size_t n_complete = 0;  // rows kept by listwise deletion
  std::vector<SpuriousVerdict> spurious_checks;  // filled when a test split is audited
};

// Spearman correlations of every metric and correlate with the human aspect
// and of every metric with every correlate, all on the same complete-case
// rows and the same bootstrap resamples. A flag is raised when a metric's
// |corr| with a correlate exceeds its |corr| with humans.
AuditReport example_level_audit(const Dataset& dataset, const std::vector<std::string>& metrics,
                                const std::vector<std::string>& correlates,
                                const std::string& aspect, const AuditConfig& config);

// condition1: |corr(F,H)| >= high on eval and < low on test.
// condition2: |corr(F,S)| >= high on test.
SpuriousVerdict spurious_correlate_check(const Dataset& d_eval, const Dataset& d_test,
                                         const std::string& metric,
                                         const std::string& correlate,
                                         const std::string& aspect,
                                         const SpuriousThresholds& thresholds,
                                         const AuditConfig& config);

}  // namespace nlgaudit
