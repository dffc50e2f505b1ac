#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "nlgaudit/corpus.hpp"

namespace fixtures {

inline nlgaudit::ExampleRecord record(std::string id, std::string system, double faith,
                                      nlgaudit::ScoreMap metrics = {},
                                      nlgaudit::ScoreMap correlates = {}) {
  nlgaudit::ExampleRecord r;
  r.id = std::move(id);
  r.system_id = std::move(system);
  r.source_text = "the cat sat on the mat";
  r.output_text = "the cat sat";
  r.human_scores = {{"faithfulness", faith}};
  r.metric_scores = std::move(metrics);
  r.correlate_scores = std::move(correlates);
  return r;
}

inline std::vector<std::string> random_tokens(std::mt19937_64& gen, std::size_t vocab,
                                              std::size_t max_len, std::size_t min_len = 0) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<std::size_t> word(0, vocab - 1);
  std::vector<std::string> out(len(gen));
  for (auto& t : out) t = "w" + std::to_string(word(gen));
  return out;
}

inline std::string join(const std::vector<std::string>& tokens) {
  std::string s;
  for (const auto& t : tokens) s += (s.empty() ? "" : " ") + t;
  return s;
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("nlgaudit-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
