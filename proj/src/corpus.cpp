#include "nlgaudit/corpus.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "nlgaudit/error.hpp"

namespace nlgaudit {

namespace {

using nlohmann::json;

bool is_token_char(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c >= 0x80;
}

std::string at_line(std::size_t line) {
  return "line " + std::to_string(line) + ": ";
}

double read_score(const json& value, std::size_t line, const std::string& field) {
  if (value.is_number()) {
    const double v = value.get<double>();
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::validation,
                  at_line(line) + "non-finite score in " + field);
    }
    return v;
  }
  if (value.is_string()) {
    // "NaN", "inf" and friends are the usual way non-finite values leak into
    // JSON; report them as such rather than as a type error.
    const auto& s = value.get_ref<const std::string&>();
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (!s.empty() && end == s.c_str() + s.size() && !std::isfinite(v)) {
      throw Error(ErrorKind::validation,
                  at_line(line) + "non-finite score in " + field);
    }
  }
  throw Error(ErrorKind::parse,
              at_line(line) + "score " + field + " is not a number");
}

ScoreMap read_scores(const json& obj, std::size_t line, const std::string& key) {
  if (!obj.is_object()) {
    throw Error(ErrorKind::parse, at_line(line) + "'" + key + "' must be an object");
  }
  ScoreMap out;
  for (const auto& [name, value] : obj.items()) {
    out.emplace(name, read_score(value, line, key + "." + name));
  }
  return out;
}

std::string read_string(const json& obj, std::size_t line, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(ErrorKind::validation,
                at_line(line) + "missing required field '" + key + "'");
  }
  if (!it->is_string()) {
    throw Error(ErrorKind::parse, at_line(line) + "'" + key + "' must be a string");
  }
  return it->get<std::string>();
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "id", "system", "source", "output", "human", "metrics", "correlates"};
  return keys;
}

}  // namespace

TokenSequence tokenize(std::string_view text, TokenOrigin origin) {
  TokenSequence seq;
  seq.origin = origin;
  std::string current;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_token_char(c)) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!current.empty()) {
      seq.tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) seq.tokens.push_back(std::move(current));
  return seq;
}

std::string label_name(const Dataset& dataset) {
  switch (dataset.distribution) {
    case DistributionLabel::eval: return "eval";
    case DistributionLabel::test: return "test";
    case DistributionLabel::other: return dataset.other_label;
  }
  return "";
}

DistributionLabel parse_distribution_label(std::string_view text, std::string* other) {
  if (text == "eval") return DistributionLabel::eval;
  if (text == "test") return DistributionLabel::test;
  if (other) *other = std::string(text);
  return DistributionLabel::other;
}

LoadResult parse_dataset(std::string_view text, std::string name,
                         const LoadOptions& options) {
  LoadResult result;
  result.dataset.name = std::move(name);
  result.dataset.distribution = options.distribution;
  result.dataset.other_label = options.other_label;

  std::set<std::string> seen_ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto end = nl == std::string_view::npos ? text.size() : nl;
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (nl == std::string_view::npos) break;
      continue;
    }

    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::parse, at_line(line_no) + e.what());
    }
    if (!obj.is_object()) {
      throw Error(ErrorKind::parse, at_line(line_no) + "record must be an object");
    }
    for (const auto& [key, _] : obj.items()) {
      if (known_keys().count(key)) continue;
      const std::string msg = at_line(line_no) + "unknown key '" + key + "'";
      if (!options.lenient) throw Error(ErrorKind::validation, msg);
      result.warnings.push_back(msg);
    }

    ExampleRecord rec;
    rec.id = read_string(obj, line_no, "id");
    rec.system_id = read_string(obj, line_no, "system");
    rec.source_text = read_string(obj, line_no, "source");
    rec.output_text = read_string(obj, line_no, "output");
    for (const char* key : {"human", "metrics"}) {
      if (!obj.contains(key)) {
        throw Error(ErrorKind::validation,
                    at_line(line_no) + "missing required field '" + key + "'");
      }
    }
    rec.human_scores = read_scores(obj["human"], line_no, "human");
    rec.metric_scores = read_scores(obj["metrics"], line_no, "metrics");
    if (obj.contains("correlates")) {
      rec.correlate_scores = read_scores(obj["correlates"], line_no, "correlates");
    }
    if (const auto it = rec.human_scores.find("faithfulness");
        it != rec.human_scores.end() && (it->second < 1.0 || it->second > 5.0)) {
      throw Error(ErrorKind::validation,
                  at_line(line_no) + "human.faithfulness outside [1,5]");
    }
    if (!seen_ids.insert(rec.id).second) {
      throw Error(ErrorKind::validation,
                  at_line(line_no) + "duplicate id '" + rec.id + "'");
    }
    result.dataset.records.push_back(std::move(rec));
    if (nl == std::string_view::npos) break;
  }
  if (result.dataset.records.empty()) {
    throw Error(ErrorKind::validation, "dataset '" + result.dataset.name + "' is empty");
  }
  return result;
}

LoadResult load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), path.stem().string(), options);
}

std::string serialize_record(const ExampleRecord& record) {
  json obj = json::object();
  obj["id"] = record.id;
  obj["system"] = record.system_id;
  obj["source"] = record.source_text;
  obj["output"] = record.output_text;
  obj["human"] = record.human_scores;
  obj["metrics"] = record.metric_scores;
  if (!record.correlate_scores.empty()) obj["correlates"] = record.correlate_scores;
  return obj.dump();
}

std::string serialize_dataset(const Dataset& dataset) {
  std::string out;
  for (const auto& rec : dataset.records) {
    out += serialize_record(rec);
    out += '\n';
  }
  return out;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << serialize_dataset(dataset);
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

std::string ValidationIssue::describe() const {
  std::string s = "record '" + record_id + "' missing";
  for (const auto& m : missing) s += " " + m;
  return s;
}

std::vector<ValidationIssue> validate(const Dataset& dataset,
                                      const std::vector<std::string>& required_aspects,
                                      const std::vector<std::string>& required_metrics,
                                      const std::vector<std::string>& required_correlates) {
  std::vector<ValidationIssue> issues;
  for (const auto& rec : dataset.records) {
    ValidationIssue issue{rec.id, {}};
    for (const auto& a : required_aspects) {
      if (!rec.human_scores.count(a)) issue.missing.push_back("human." + a);
    }
    for (const auto& m : required_metrics) {
      if (!rec.metric_scores.count(m)) issue.missing.push_back("metrics." + m);
    }
    for (const auto& c : required_correlates) {
      if (!rec.correlate_scores.count(c)) issue.missing.push_back("correlates." + c);
    }
    if (!issue.missing.empty()) issues.push_back(std::move(issue));
  }
  return issues;
}

}  // namespace nlgaudit
