#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "nlgaudit/corpus.hpp"

namespace nlgaudit {

// A token span copied verbatim from the article into the summary.
struct Fragment {
  std::size_t article_start = 0;
  std::size_t summary_start = 0;
  std::size_t length = 0;

  bool operator==(const Fragment&) const = default;
};

struct FragmentSet {
  std::vector<Fragment> fragments;  // sorted by summary_start, disjoint
  std::size_t summary_length = 0;
};

// Greedy left-to-right extraction: at each summary position take the
// longest run shared with any article position (earliest article position on
// ties), then jump past it. Throws undefined_measure for an empty summary.
FragmentSet extract_fragments(const TokenSequence& article, const TokenSequence& summary);

// Fraction of summary tokens inside a fragment.
double coverage(const FragmentSet& fs);

// Sum of squared fragment lengths over summary length.
double density(const FragmentSet& fs);

std::size_t length_correlate(const TokenSequence& output);

enum class Correlate { coverage, density, length };

std::string correlate_name(Correlate c);
Correlate parse_correlate(const std::string& name);

struct AnnotateOptions {
  unsigned workers = 1;
};

// Returns a copy with the requested correlates filled in for every record.
// Records whose output has no tokens cannot carry coverage or density; all
// such ids are collected into one validation error.
Dataset annotate_correlates(const Dataset& dataset, const std::set<Correlate>& which,
                            const AnnotateOptions& options = {});

}  // namespace nlgaudit
