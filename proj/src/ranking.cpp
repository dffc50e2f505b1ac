#include "nlgaudit/ranking.hpp"

#include <map>

#include "nlgaudit/error.hpp"

namespace nlgaudit {

namespace {

struct Accumulator {
  std::size_t n = 0;
  std::map<std::string, std::pair<double, std::size_t>> human, metric, correlate;
};

void add_scores(std::map<std::string, std::pair<double, std::size_t>>& acc, const ScoreMap& s) {
  for (const auto& [k, v] : s) {
    auto& slot = acc[k];
    slot.first += v;
    ++slot.second;
  }
}

ScoreMap complete_means(const std::map<std::string, std::pair<double, std::size_t>>& acc,
                        std::size_t n) {
  ScoreMap out;
  for (const auto& [k, slot] : acc) {
    if (slot.second == n) out.emplace(k, slot.first / static_cast<double>(n));
  }
  return out;
}

int sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

std::vector<SystemAggregate> aggregate_systems(const Dataset& dataset) {
  std::map<std::string, Accumulator> by_system;
  for (const auto& rec : dataset.records) {
    auto& acc = by_system[rec.system_id];
    ++acc.n;
    add_scores(acc.human, rec.human_scores);
    add_scores(acc.metric, rec.metric_scores);
    add_scores(acc.correlate, rec.correlate_scores);
  }
  std::vector<SystemAggregate> out;
  out.reserve(by_system.size());
  for (const auto& [id, acc] : by_system) {
    out.push_back({id, acc.n, complete_means(acc.human, acc.n),
                   complete_means(acc.metric, acc.n), complete_means(acc.correlate, acc.n)});
  }
  return out;
}

std::optional<double> scorer_mean(const SystemAggregate& agg, const std::string& scorer) {
  if (const auto it = agg.mean_metric.find(scorer); it != agg.mean_metric.end()) return it->second;
  if (const auto it = agg.mean_correlate.find(scorer); it != agg.mean_correlate.end()) {
    return it->second;
  }
  return std::nullopt;
}

PairwiseResult pairwise_accuracy(const std::vector<SystemAggregate>& aggs,
                                 const std::string& scorer, const std::string& aspect) {
  if (aggs.size() < 2) {
    throw Error(ErrorKind::insufficient_systems, "pairwise ranking needs >= 2 systems");
  }
  std::vector<double> human(aggs.size()), score(aggs.size());
  for (std::size_t i = 0; i < aggs.size(); ++i) {
    const auto h = aggs[i].mean_human.find(aspect);
    if (h == aggs[i].mean_human.end()) {
      throw Error(ErrorKind::missing_field,
                  "system '" + aggs[i].system_id + "' lacks human." + aspect);
    }
    const auto s = scorer_mean(aggs[i], scorer);
    if (!s) {
      throw Error(ErrorKind::missing_field,
                  "system '" + aggs[i].system_id + "' lacks scorer " + scorer);
    }
    human[i] = h->second;
    score[i] = *s;
  }

  PairwiseResult res;
  res.scorer_name = scorer;
  for (std::size_t i = 0; i < aggs.size(); ++i) {
    for (std::size_t j = i + 1; j < aggs.size(); ++j) {
      const int hs = sign(human[i] - human[j]);
      if (hs == 0) {
        ++res.skipped_ties;
        continue;
      }
      ++res.n_pairs;
      const int ss = sign(score[i] - score[j]);
      if (ss == 0) {
        res.n_correct += 0.5;
      } else if (ss == hs) {
        res.n_correct += 1.0;
      }
    }
  }
  if (res.n_pairs < 1) {
    throw Error(ErrorKind::insufficient_systems,
                "no system pair with distinct human." + aspect + " means");
  }
  res.accuracy = res.n_correct / static_cast<double>(res.n_pairs);
  return res;
}

std::vector<SystemAggregate> filter_af(const std::vector<SystemAggregate>& aggs,
                                       const AfThresholds& thresholds) {
  std::vector<SystemAggregate> out;
  for (const auto& agg : aggs) {
    const auto f = agg.mean_human.find("faithfulness");
    const auto d = agg.mean_correlate.find("density");
    if (f == agg.mean_human.end() || d == agg.mean_correlate.end()) {
      throw Error(ErrorKind::missing_field, "system '" + agg.system_id +
                                                "' lacks mean faithfulness or density");
    }
    if (f->second > thresholds.faithfulness && d->second < thresholds.density) {
      out.push_back(agg);
    }
  }
  return out;
}

RankingReport ranking_report(const Dataset& dataset, const std::vector<std::string>& scorers,
                             const std::string& aspect, const AfThresholds& thresholds) {
  RankingReport report;
  report.dataset_name = dataset.name;
  report.aspect = aspect;
  report.thresholds = thresholds;
  report.systems = aggregate_systems(dataset);
  const auto af = filter_af(report.systems, thresholds);
  for (const auto& a : af) report.af_systems.push_back(a.system_id);

  for (const auto& scorer : scorers) {
    RankingRow row{scorer, pairwise_accuracy(report.systems, scorer, aspect), std::nullopt};
    if (af.size() >= 2) {
      try {
        row.within_af = pairwise_accuracy(af, scorer, aspect);
      } catch (const Error& e) {
        // every AF pair tied on humans
        if (e.kind() != ErrorKind::insufficient_systems) throw;
      }
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace nlgaudit
