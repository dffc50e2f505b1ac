#include "nlgaudit/overlap.hpp"

#include <algorithm>
#include <thread>
#include <unordered_map>

#include "nlgaudit/error.hpp"

namespace nlgaudit {

FragmentSet extract_fragments(const TokenSequence& article, const TokenSequence& summary) {
  if (summary.empty()) {
    throw Error(ErrorKind::undefined_measure, "overlap undefined for an empty summary");
  }
  const auto& a = article.tokens;
  const auto& s = summary.tokens;

  std::unordered_map<std::string_view, std::vector<std::size_t>> positions;
  for (std::size_t j = 0; j < a.size(); ++j) positions[a[j]].push_back(j);

  FragmentSet fs;
  fs.summary_length = s.size();
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t best_len = 0;
    std::size_t best_start = 0;
    if (const auto it = positions.find(s[i]); it != positions.end()) {
      // Positions are ascending, so a strict '>' keeps the earliest start.
      for (const std::size_t j : it->second) {
        std::size_t len = 1;
        while (i + len < s.size() && j + len < a.size() && s[i + len] == a[j + len]) ++len;
        if (len > best_len) {
          best_len = len;
          best_start = j;
        }
      }
    }
    if (best_len > 0) {
      fs.fragments.push_back({best_start, i, best_len});
      i += best_len;
    } else {
      ++i;
    }
  }
  return fs;
}

double coverage(const FragmentSet& fs) {
  if (fs.summary_length == 0) {
    throw Error(ErrorKind::undefined_measure, "coverage undefined for an empty summary");
  }
  std::size_t covered = 0;
  for (const auto& f : fs.fragments) covered += f.length;
  return static_cast<double>(covered) / static_cast<double>(fs.summary_length);
}

double density(const FragmentSet& fs) {
  if (fs.summary_length == 0) {
    throw Error(ErrorKind::undefined_measure, "density undefined for an empty summary");
  }
  std::size_t squares = 0;
  for (const auto& f : fs.fragments) squares += f.length * f.length;
  return static_cast<double>(squares) / static_cast<double>(fs.summary_length);
}

std::size_t length_correlate(const TokenSequence& output) { return output.size(); }

std::string correlate_name(Correlate c) {
  switch (c) {
    case Correlate::coverage: return "coverage";
    case Correlate::density: return "density";
    case Correlate::length: return "length";
  }
  return "";
}

Correlate parse_correlate(const std::string& name) {
  if (name == "coverage") return Correlate::coverage;
  if (name == "density") return Correlate::density;
  if (name == "length") return Correlate::length;
  throw Error(ErrorKind::precondition, "unknown correlate '" + name + "'");
}

Dataset annotate_correlates(const Dataset& dataset, const std::set<Correlate>& which,
                            const AnnotateOptions& options) {
  Dataset out = dataset;
  const bool needs_overlap = which.count(Correlate::coverage) || which.count(Correlate::density);
  std::vector<char> failed(out.records.size(), 0);

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      auto& rec = out.records[r];
      const auto output = tokenize(rec.output_text, TokenOrigin::output);
      if (which.count(Correlate::length)) {
        rec.correlate_scores["length"] = static_cast<double>(length_correlate(output));
      }
      if (!needs_overlap) continue;
      if (output.empty()) {
        failed[r] = 1;
        continue;
      }
      const auto fs = extract_fragments(tokenize(rec.source_text, TokenOrigin::source), output);
      if (which.count(Correlate::coverage)) rec.correlate_scores["coverage"] = coverage(fs);
      if (which.count(Correlate::density)) rec.correlate_scores["density"] = density(fs);
    }
  };

  const std::size_t n = out.records.size();
  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = std::min(n, w * chunk);
      const std::size_t e = std::min(n, b + chunk);
      pool.emplace_back(work, b, e);
    }
    for (auto& t : pool) t.join();
  }

  std::string ids;
  for (std::size_t r = 0; r < n; ++r) {
    if (!failed[r]) continue;
    if (!ids.empty()) ids += ", ";
    ids += out.records[r].id;
  }
  if (!ids.empty()) {
    throw Error(ErrorKind::validation, "empty output text (overlap undefined) for: " + ids);
  }
  return out;
}

}  // namespace nlgaudit
