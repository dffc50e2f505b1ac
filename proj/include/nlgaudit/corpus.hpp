#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nlgaudit {

enum class TokenOrigin { source, output };

struct TokenSequence {
  std::vector<std::string> tokens;
  TokenOrigin origin = TokenOrigin::output;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
};

// Lowercases ASCII letters and splits on every maximal run of ASCII
// characters that are not [A-Za-z0-9]. Bytes >= 0x80 are kept inside tokens
// so UTF-8 words survive intact.
TokenSequence tokenize(std::string_view text,
                       TokenOrigin origin = TokenOrigin::output);

using ScoreMap = std::map<std::string, double>;

struct ExampleRecord {
  std::string id;
  std::string system_id;
  std::string source_text;
  std::string output_text;
  ScoreMap human_scores;
  ScoreMap metric_scores;
  ScoreMap correlate_scores;
};

enum class DistributionLabel { eval, test, other };

struct Dataset {
  std::string name;
  DistributionLabel distribution = DistributionLabel::eval;
  std::string other_label;  // only meaningful when distribution == other
  std::vector<ExampleRecord> records;
};

std::string label_name(const Dataset& dataset);
DistributionLabel parse_distribution_label(std::string_view text,
                                           std::string* other = nullptr);

struct LoadOptions {
  // Unknown keys become warnings instead of errors.
  bool lenient = false;
  DistributionLabel distribution = DistributionLabel::eval;
  std::string other_label;
};

struct LoadResult {
  Dataset dataset;
  std::vector<std::string> warnings;
};

// Parses newline-delimited JSON records. Blank lines are ignored but still
// counted, so error messages carry physical line numbers.
LoadResult load_dataset(const std::filesystem::path& path,
                        const LoadOptions& options = {});
LoadResult parse_dataset(std::string_view text, std::string name,
                         const LoadOptions& options = {});

std::string serialize_record(const ExampleRecord& record);
std::string serialize_dataset(const Dataset& dataset);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

struct ValidationIssue {
  std::string record_id;
  std::vector<std::string> missing;  // qualified as human.x / metrics.x / correlates.x

  std::string describe() const;
};

std::vector<ValidationIssue> validate(
    const Dataset& dataset, const std::vector<std::string>& required_aspects,
    const std::vector<std::string>& required_metrics,
    const std::vector<std::string>& required_correlates = {});

}  // namespace nlgaudit
