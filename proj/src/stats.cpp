#include "nlgaudit/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>
#include <thread>

#include "nlgaudit/error.hpp"
#include "nlgaudit/rng.hpp"

namespace nlgaudit {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::precondition, "paired sample sides differ in length (" +
                                             std::to_string(a.size()) + " vs " +
                                             std::to_string(b.size()) + ")");
  }
  if (a.size() < 2) throw Error(ErrorKind::precondition, "paired sample needs >= 2 rows");
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Linear interpolation between order statistics (Hyndman-Fan type 7).
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

void check_config(const BootstrapConfig& config) {
  if (config.replicates < 1) throw Error(ErrorKind::precondition, "bootstrap needs B >= 1");
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
    throw Error(ErrorKind::precondition, "alpha must lie in (0,1)");
  }
}

// Evaluates fn(r) for r in [0, B) into slot r, splitting replicates across
// workers in contiguous blocks.
template <typename Fn>
void for_each_replicate(std::size_t count, unsigned workers, Fn fn) {
  const std::size_t w = std::clamp<std::size_t>(workers, 1, count);
  if (w == 1) {
    for (std::size_t r = 0; r < count; ++r) fn(r);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (count + w - 1) / w;
  for (std::size_t t = 0; t < w; ++t) {
    const std::size_t b = std::min(count, t * chunk);
    const std::size_t e = std::min(count, b + chunk);
    pool.emplace_back([&fn, b, e] {
      for (std::size_t r = b; r < e; ++r) fn(r);
    });
  }
  for (auto& th : pool) th.join();
}

void check_stability(std::size_t degenerate, std::size_t total) {
  if (2 * degenerate > total) {
    throw Error(ErrorKind::unstable_statistic,
                "statistic degenerate on " + std::to_string(degenerate) + " of " +
                    std::to_string(total) + " bootstrap replicates");
  }
}

std::vector<double> standardized(std::span<const double> v, const char* what) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (const double x : v) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / static_cast<double>(v.size()));
  if (!(sd > 0.0)) {
    throw Error(ErrorKind::degenerate_fit, std::string(what) + " feature has zero variance");
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - m) / sd;
  return out;
}

}  // namespace

PairedSample PairedSample::make(std::vector<double> a, std::vector<double> b) {
  check_pair(a, b);
  for (const auto* side : {&a, &b}) {
    for (const double x : *side) {
      if (!std::isfinite(x)) throw Error(ErrorKind::precondition, "paired sample has non-finite value");
    }
  }
  return PairedSample{std::move(a), std::move(b)};
}

double pearson(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw Error(ErrorKind::degenerate_sample, "correlation undefined: zero variance");
  }
  return std::clamp(sab / (std::sqrt(saa) * std::sqrt(sbb)), -1.0, 1.0);
}

double pearson(const PairedSample& s) { return pearson(s.a, s.b); }

std::vector<double> fractional_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    // Positions i..j-1 (0-based) share the average 1-based rank.
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  const auto ra = fractional_ranks(a);
  const auto rb = fractional_ranks(b);
  return pearson(ra, rb);
}

double spearman(const PairedSample& s) { return spearman(s.a, s.b); }

IndexStatistic correlation_statistic(std::vector<double> a, std::vector<double> b,
                                     CorrelationMethod method, bool absolute) {
  check_pair(a, b);
  auto cols = std::make_shared<const std::pair<std::vector<double>, std::vector<double>>>(
      std::move(a), std::move(b));
  return [cols, method, absolute](std::span<const std::size_t> idx) -> std::optional<double> {
    std::vector<double> xa(idx.size()), xb(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      xa[i] = cols->first[idx[i]];
      xb[i] = cols->second[idx[i]];
    }
    try {
      const double r = method == CorrelationMethod::pearson ? pearson(xa, xb) : spearman(xa, xb);
      return absolute ? std::abs(r) : r;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::degenerate_sample) return std::nullopt;
      throw;
    }
  };
}

std::vector<std::size_t> bootstrap_indices(std::uint64_t seed, std::size_t replicate,
                                           std::size_t n) {
  CounterRng rng(seed, replicate);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
  return idx;
}

BootstrapResult bootstrap_mean(const IndexStatistic& stat, std::size_t n,
                               const BootstrapConfig& config) {
  check_config(config);
  if (n < 1) throw Error(ErrorKind::precondition, "bootstrap needs a non-empty sample");

  std::vector<std::size_t> identity(n);
  std::iota(identity.begin(), identity.end(), 0);
  const auto point = stat(identity);
  if (!point) throw Error(ErrorKind::degenerate_sample, "statistic degenerate on the full sample");

  std::vector<std::optional<double>> reps(config.replicates);
  for_each_replicate(config.replicates, config.workers, [&](std::size_t r) {
    reps[r] = stat(bootstrap_indices(config.seed, r, n));
  });

  std::vector<double> valid;
  valid.reserve(reps.size());
  for (const auto& v : reps) {
    if (v) valid.push_back(*v);
  }
  const std::size_t degenerate = reps.size() - valid.size();
  check_stability(degenerate, reps.size());

  BootstrapResult res;
  res.point = *point;
  // Summation in replicate order keeps the mean independent of worker count.
  res.boot_mean = std::accumulate(valid.begin(), valid.end(), 0.0) / static_cast<double>(valid.size());
  std::sort(valid.begin(), valid.end());
  res.ci_low = quantile_sorted(valid, config.alpha / 2.0);
  res.ci_high = quantile_sorted(valid, 1.0 - config.alpha / 2.0);
  res.replicates = config.replicates;
  res.seed = config.seed;
  res.degenerate = degenerate;
  return res;
}

OneTailedResult bootstrap_one_tailed_test(const IndexStatistic& stat_a,
                                          const IndexStatistic& stat_b, std::size_t n,
                                          const BootstrapConfig& config) {
  check_config(config);
  if (n < 1) throw Error(ErrorKind::precondition, "bootstrap needs a non-empty sample");

  // 0: delta > 0, 1: delta <= 0, 2: degenerate
  std::vector<unsigned char> outcome(config.replicates, 2);
  for_each_replicate(config.replicates, config.workers, [&](std::size_t r) {
    const auto idx = bootstrap_indices(config.seed, r, n);
    const auto a = stat_a(idx);
    const auto b = stat_b(idx);
    if (a && b) outcome[r] = (*a - *b) <= 0.0 ? 1 : 0;
  });

  std::size_t not_greater = 0, degenerate = 0;
  for (const auto o : outcome) {
    if (o == 1) ++not_greater;
    if (o == 2) ++degenerate;
  }
  check_stability(degenerate, outcome.size());

  OneTailedResult res;
  res.degenerate = degenerate;
  res.p = static_cast<double>(not_greater + degenerate) / static_cast<double>(config.replicates);
  res.significant = res.p < config.alpha;
  return res;
}

std::vector<double> combine_ppl_len(std::span<const double> ppl, std::span<const double> len,
                                    std::span<const double> human) {
  if (ppl.size() != len.size() || ppl.size() != human.size()) {
    throw Error(ErrorKind::precondition, "ppl, len and human must have equal length");
  }
  if (ppl.size() < 3) throw Error(ErrorKind::precondition, "PPL+Len fit needs >= 3 examples");

  std::vector<double> neg_log_ppl(ppl.size());
  for (std::size_t i = 0; i < ppl.size(); ++i) {
    if (!(ppl[i] > 0.0) || !std::isfinite(ppl[i])) {
      throw Error(ErrorKind::precondition, "perplexity must be finite and positive");
    }
    neg_log_ppl[i] = -std::log(ppl[i]);
  }
  const auto z_ppl = standardized(neg_log_ppl, "perplexity");
  const auto z_len = standardized(len, "length");

  const auto n = static_cast<Eigen::Index>(ppl.size());
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = z_ppl[static_cast<std::size_t>(i)];
    x(i, 2) = z_len[static_cast<std::size_t>(i)];
    y(i) = human[static_cast<std::size_t>(i)];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) throw Error(ErrorKind::degenerate_fit, "perplexity and length are collinear");
  const Eigen::VectorXd beta = qr.solve(y);
  const Eigen::VectorXd fitted = x * beta;
  return {fitted.data(), fitted.data() + fitted.size()};
}

}  // namespace nlgaudit
