#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace nlgaudit {

// Paired observations (human vs metric, metric vs correlate, ...).
struct PairedSample {
  std::vector<double> a;
  std::vector<double> b;

  // Throws precondition unless both sides are finite with equal length >= 2.
  static PairedSample make(std::vector<double> a, std::vector<double> b);
};

// Sample Pearson correlation; throws degenerate_sample on zero variance.
double pearson(std::span<const double> a, std::span<const double> b);
double pearson(const PairedSample& s);

// Pearson correlation of fractional (tie-averaged) ranks.
double spearman(std::span<const double> a, std::span<const double> b);
double spearman(const PairedSample& s);

// 1-based ranks; tied values share the mean of the positions they occupy.
std::vector<double> fractional_ranks(std::span<const double> values);

enum class CorrelationMethod { pearson, spearman };

// A statistic evaluated on a multiset of row indices. nullopt marks a
// degenerate replicate (for instance a resample with zero variance).
using IndexStatistic = std::function<std::optional<double>(std::span<const std::size_t>)>;

// Correlation between two columns restricted to the given row indices.
IndexStatistic correlation_statistic(std::vector<double> a, std::vector<double> b,
                                     CorrelationMethod method = CorrelationMethod::spearman,
                                     bool absolute = false);

struct BootstrapConfig {
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  unsigned workers = 1;
};

struct BootstrapResult {
  double point = 0.0;
  double boot_mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  std::size_t degenerate = 0;  // skipped replicates
};

// Row indices of replicate `replicate` for a sample of size n. Replicate r
// draws n indices from CounterRng(seed, r), so every replicate is
// reproducible on its own.
std::vector<std::size_t> bootstrap_indices(std::uint64_t seed, std::size_t replicate,
                                           std::size_t n);

// Percentile bootstrap of `stat`. The interval uses linearly interpolated
// order statistics at alpha/2 and 1 - alpha/2 over non-degenerate replicates.
BootstrapResult bootstrap_mean(const IndexStatistic& stat, std::size_t n,
                               const BootstrapConfig& config);

struct OneTailedResult {
  double p = 1.0;
  bool significant = false;
  std::size_t degenerate = 0;
};

// Tests stat_a > stat_b on shared resamples. p counts replicates whose
// difference is <= 0; degenerate replicates count against the hypothesis so
// that p always has denominator B.
OneTailedResult bootstrap_one_tailed_test(const IndexStatistic& stat_a,
                                          const IndexStatistic& stat_b, std::size_t n,
                                          const BootstrapConfig& config);

// Least-squares fit of human scores on standardized (-log ppl, length) with an
// intercept; returns the fitted values.
std::vector<double> combine_ppl_len(std::span<const double> ppl, std::span<const double> len,
                                    std::span<const double> human);

}  // namespace nlgaudit
