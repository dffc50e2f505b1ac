#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nlgaudit/corpus.hpp"

namespace nlgaudit {

struct SystemAggregate {
  std::string system_id;
  std::size_t n = 0;
  // A key appears only when every record of the system carries it, so each
  // mean is taken over exactly the system's records.
  ScoreMap mean_human;
  ScoreMap mean_metric;
  ScoreMap mean_correlate;
};

struct PairwiseResult {
  std::string scorer_name;
  std::size_t n_pairs = 0;
  double n_correct = 0.0;
  double accuracy = 0.0;
  std::size_t skipped_ties = 0;
};

// One aggregate per distinct system, ordered by system id.
std::vector<SystemAggregate> aggregate_systems(const Dataset& dataset);

// Looks the scorer up among metric means first, then correlate means.
std::optional<double> scorer_mean(const SystemAggregate& agg, const std::string& scorer);

// Unordered pairs with distinct human means: agreement in sign earns 1,
// a scorer tie earns 0.5. Human-tied pairs are skipped.
PairwiseResult pairwise_accuracy(const std::vector<SystemAggregate>& aggs,
                                 const std::string& scorer, const std::string& aspect);

struct AfThresholds {
  double faithfulness = 4.5;
  double density = 30.0;
};

// Abstractive-faithful subgroup: mean faithfulness > threshold and mean
// density < threshold, both strict.
std::vector<SystemAggregate> filter_af(const std::vector<SystemAggregate>& aggs,
                                       const AfThresholds& thresholds = {});

struct RankingRow {
  std::string scorer;
  PairwiseResult all_pairs;
  std::optional<PairwiseResult> within_af;  // absent when AF has < 2 systems
};

struct RankingReport {
  std::string dataset_name;
  std::string aspect;
  AfThresholds thresholds;
  std::vector<SystemAggregate> systems;
  std::vector<std::string> af_systems;
  std::vector<RankingRow> rows;
};

RankingReport ranking_report(const Dataset& dataset, const std::vector<std::string>& scorers,
                             const std::string& aspect, const AfThresholds& thresholds = {});

}  // namespace nlgaudit
