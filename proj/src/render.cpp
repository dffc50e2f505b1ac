#include "nlgaudit/render.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>

#include "nlgaudit/error.hpp"

namespace nlgaudit {

using nlohmann::json;

namespace {

std::string xml_escape(const std::string& text) {
  std::string out;
  for (const char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

json to_json(const BootstrapResult& r) {
  return {{"point", r.point},   {"boot_mean", r.boot_mean},   {"ci_low", r.ci_low},
          {"ci_high", r.ci_high}, {"replicates", r.replicates}, {"seed", r.seed},
          {"degenerate", r.degenerate}};
}

BootstrapResult bootstrap_from_json(const json& j) {
  BootstrapResult r;
  r.point = j.at("point").get<double>();
  r.boot_mean = j.at("boot_mean").get<double>();
  r.ci_low = j.at("ci_low").get<double>();
  r.ci_high = j.at("ci_high").get<double>();
  r.replicates = j.at("replicates").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.degenerate = j.at("degenerate").get<std::size_t>();
  return r;
}

json pairwise_json(const PairwiseResult& r) {
  return {{"n_pairs", r.n_pairs},
          {"n_correct", r.n_correct},
          {"accuracy", r.accuracy},
          {"skipped_ties", r.skipped_ties}};
}

std::string ci_text(const BootstrapResult& r) {
  return fixed4(r.boot_mean) + " [" + fixed4(r.ci_low) + ", " + fixed4(r.ci_high) + "]";
}

std::string percent(const PairwiseResult& r) { return fixed4(100.0 * r.accuracy); }

}  // namespace

ReportFormat parse_format(const std::string& name) {
  if (name == "markdown" || name == "md") return ReportFormat::markdown;
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  if (name == "svg" || name == "svg-scatter") return ReportFormat::svg_scatter;
  throw Error(ErrorKind::precondition, "unknown report format '" + name + "'");
}

std::string format_name(ReportFormat format) {
  switch (format) {
    case ReportFormat::markdown: return "markdown";
    case ReportFormat::csv: return "csv";
    case ReportFormat::json: return "json";
    case ReportFormat::svg_scatter: return "svg-scatter";
  }
  return "";
}

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string render_audit_markdown(const AuditReport& report, const json& run_config) {
  std::string md;
  md += "# Spurious-correlation audit: " + report.dataset_name + "\n\n";
  md += "Aspect `" + report.aspect + "`; " + std::to_string(report.n_complete) + " of " +
        std::to_string(report.n_records) + " records complete; B=" +
        std::to_string(report.config.replicates) + ", alpha=" + format_number(report.config.alpha) +
        ", seed=" + std::to_string(report.config.seed) + ".\n\n";
  md += "Values are Spearman bootstrap means with percentile intervals.\n\n";

  md += "## Correlation with human scores\n\n";
  md += "| scorer | kind | bootstrap mean [CI] | point |\n|---|---|---|---|\n";
  for (const auto& row : report.rows) {
    md += "| " + row.scorer_name + " | " + to_string(row.kind) + " | ";
    if (row.corr_with_human) {
      md += ci_text(*row.corr_with_human) + " | " + fixed4(row.corr_with_human->point) + " |\n";
    } else {
      md += "n/a | n/a |\n";
    }
  }

  std::vector<std::string> correlates;
  for (const auto& row : report.rows) {
    if (row.kind == ScorerKind::correlate) correlates.push_back(row.scorer_name);
  }
  if (!correlates.empty()) {
    md += "\n## Metric vs correlate\n\n| metric | human |";
    for (const auto& c : correlates) md += " " + c + " |";
    md += "\n|---|---|";
    for (std::size_t i = 0; i < correlates.size(); ++i) md += "---|";
    md += "\n";
    for (const auto& row : report.rows) {
      if (row.kind != ScorerKind::metric) continue;
      md += "| " + row.scorer_name + " | " +
            (row.corr_with_human ? fixed4(row.corr_with_human->boot_mean) : "n/a") + " |";
      for (const auto& c : correlates) {
        const auto it = row.corr_with.find(c);
        if (it == row.corr_with.end()) {
          md += " n/a |";
          continue;
        }
        const bool flagged = std::any_of(report.flags.begin(), report.flags.end(), [&](const auto& f) {
          return f.metric_name == row.scorer_name && f.correlate_name == c;
        });
        md += " " + (flagged ? "**" + fixed4(it->second.boot_mean) + "**" : fixed4(it->second.boot_mean)) + " |";
      }
      md += "\n";
    }
  }

  md += "\n## Spurious flags\n\n";
  if (report.flags.empty()) md += "None.\n";
  for (const auto& f : report.flags) {
    md += "- `" + f.metric_name + "` tracks `" + f.correlate_name + "` (" + fixed4(f.corr_fs) +
          ") more than humans (" + fixed4(f.corr_fh) + "); p=" + format_number(f.p) +
          (f.significant ? ", significant" : ", not significant") + "\n";
  }

  if (!report.spurious_checks.empty()) {
    md += "\n## Eval/test spurious-correlate check\n\n";
    md += "| metric | correlate | corr(F,H) eval | corr(F,H) test | corr(F,S) test | cond1 | cond2 | spurious |\n";
    md += "|---|---|---|---|---|---|---|---|\n";
    for (const auto& v : report.spurious_checks) {
      md += "| " + v.metric + " | " + v.correlate + " | " + fixed4(v.fh_eval.boot_mean) + " | " +
            fixed4(v.fh_test.boot_mean) + " | " + fixed4(v.fs_test.boot_mean) + " | " +
            (v.condition1 ? "yes" : "no") + " | " + (v.condition2 ? "yes" : "no") + " | " +
            (v.is_spurious ? "**yes**" : "no") + " |\n";
    }
  }

  bool any_warning = false;
  for (const auto& row : report.rows) {
    for (const auto& w : row.warnings) {
      if (!any_warning) md += "\n## Warnings\n\n";
      any_warning = true;
      md += "- `" + row.scorer_name + "`: " + w + "\n";
    }
  }
  if (!run_config.is_null()) md += "\n## Run configuration\n\n```json\n" + run_config.dump(2) + "\n```\n";
  return md;
}

std::string render_audit_csv(const AuditReport& report) {
  std::string out = "scorer,kind,target,point,boot_mean,ci_low,ci_high,p,flagged\n";
  std::vector<std::string> correlates;
  for (const auto& row : report.rows) {
    if (row.kind == ScorerKind::correlate) correlates.push_back(row.scorer_name);
  }
  for (const auto& row : report.rows) {
    if (row.kind != ScorerKind::metric) continue;
    for (const auto& c : correlates) {
      out += csv_field(row.scorer_name) + "," + to_string(row.kind) + "," + csv_field(c) + ",";
      const auto it = row.corr_with.find(c);
      if (it == row.corr_with.end()) {
        out += ",,,,,warning\n";
        continue;
      }
      const auto& r = it->second;
      out += format_number(r.point) + "," + format_number(r.boot_mean) + "," +
             format_number(r.ci_low) + "," + format_number(r.ci_high) + ",";
      const auto t = row.tests.find(c);
      if (t != row.tests.end()) out += format_number(t->second.p);
      const bool flagged = std::any_of(report.flags.begin(), report.flags.end(), [&](const auto& f) {
        return f.metric_name == row.scorer_name && f.correlate_name == c;
      });
      out += flagged ? ",true\n" : ",false\n";
    }
  }
  return out;
}

std::string render_audit_json(const AuditReport& report, const json& run_config) {
  json j;
  j["dataset"] = report.dataset_name;
  j["aspect"] = report.aspect;
  j["config"] = {{"replicates", report.config.replicates},
                 {"seed", report.config.seed},
                 {"alpha", report.config.alpha}};
  j["n_records"] = report.n_records;
  j["n_complete"] = report.n_complete;
  j["rows"] = json::array();
  for (const auto& row : report.rows) {
    json r;
    r["scorer"] = row.scorer_name;
    r["kind"] = to_string(row.kind);
    r["corr_with_human"] = row.corr_with_human ? to_json(*row.corr_with_human) : json(nullptr);
    r["corr_with"] = json::object();
    for (const auto& [c, b] : row.corr_with) r["corr_with"][c] = to_json(b);
    r["tests"] = json::object();
    for (const auto& [c, t] : row.tests) {
      r["tests"][c] = {{"p", t.p}, {"significant", t.significant}, {"degenerate", t.degenerate}};
    }
    r["warnings"] = row.warnings;
    j["rows"].push_back(std::move(r));
  }
  j["flags"] = json::array();
  for (const auto& f : report.flags) {
    j["flags"].push_back({{"metric", f.metric_name},
                          {"correlate", f.correlate_name},
                          {"corr_fh", f.corr_fh},
                          {"corr_fs", f.corr_fs},
                          {"significant", f.significant},
                          {"p", f.p}});
  }
  j["spurious_checks"] = json::array();
  for (const auto& v : report.spurious_checks) {
    j["spurious_checks"].push_back({{"metric", v.metric},
                                    {"correlate", v.correlate},
                                    {"condition1", v.condition1},
                                    {"condition2", v.condition2},
                                    {"is_spurious", v.is_spurious},
                                    {"fh_eval", to_json(v.fh_eval)},
                                    {"fh_test", to_json(v.fh_test)},
                                    {"fs_eval", to_json(v.fs_eval)},
                                    {"fs_test", to_json(v.fs_test)}});
  }
  if (!run_config.is_null()) j["run_config"] = run_config;
  return j.dump(2) + "\n";
}

AuditReport audit_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("audit json: ") + e.what());
  }
  AuditReport report;
  try {
    report.dataset_name = j.at("dataset").get<std::string>();
    report.aspect = j.at("aspect").get<std::string>();
    report.config.replicates = j.at("config").at("replicates").get<std::size_t>();
    report.config.seed = j.at("config").at("seed").get<std::uint64_t>();
    report.config.alpha = j.at("config").at("alpha").get<double>();
    report.n_records = j.at("n_records").get<std::size_t>();
    report.n_complete = j.at("n_complete").get<std::size_t>();
    for (const auto& r : j.at("rows")) {
      AuditRow row;
      row.scorer_name = r.at("scorer").get<std::string>();
      row.kind = r.at("kind").get<std::string>() == "metric" ? ScorerKind::metric : ScorerKind::correlate;
      if (!r.at("corr_with_human").is_null()) row.corr_with_human = bootstrap_from_json(r["corr_with_human"]);
      for (const auto& [c, b] : r.at("corr_with").items()) row.corr_with.emplace(c, bootstrap_from_json(b));
      for (const auto& [c, t] : r.at("tests").items()) {
        row.tests.emplace(c, OneTailedResult{t.at("p").get<double>(), t.at("significant").get<bool>(),
                                             t.at("degenerate").get<std::size_t>()});
      }
      row.warnings = r.at("warnings").get<std::vector<std::string>>();
      report.rows.push_back(std::move(row));
    }
    for (const auto& f : j.at("flags")) {
      report.flags.push_back({f.at("metric").get<std::string>(), f.at("correlate").get<std::string>(),
                              f.at("corr_fh").get<double>(), f.at("corr_fs").get<double>(),
                              f.at("significant").get<bool>(), f.at("p").get<double>()});
    }
    for (const auto& v : j.at("spurious_checks")) {
      SpuriousVerdict s;
      s.metric = v.at("metric").get<std::string>();
      s.correlate = v.at("correlate").get<std::string>();
      s.condition1 = v.at("condition1").get<bool>();
      s.condition2 = v.at("condition2").get<bool>();
      s.is_spurious = v.at("is_spurious").get<bool>();
      s.fh_eval = bootstrap_from_json(v.at("fh_eval"));
      s.fh_test = bootstrap_from_json(v.at("fh_test"));
      s.fs_eval = bootstrap_from_json(v.at("fs_eval"));
      s.fs_test = bootstrap_from_json(v.at("fs_test"));
      report.spurious_checks.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("audit json: ") + e.what());
  }
  return report;
}

std::string render_ranking_markdown(const RankingReport& report, const json& run_config) {
  std::string md = "# Pairwise system ranking: " + report.dataset_name + "\n\n";
  md += std::to_string(report.systems.size()) + " systems; AF group (faithfulness > " +
        format_number(report.thresholds.faithfulness) + ", density < " +
        format_number(report.thresholds.density) + "): " + std::to_string(report.af_systems.size()) +
        " systems.\n\n";
  md += "| scorer | all pairs (%) | within AF (%) |\n|---|---|---|\n";
  for (const auto& row : report.rows) {
    md += "| " + row.scorer + " | " + percent(row.all_pairs) + " | " +
          (row.within_af ? percent(*row.within_af) : "absent") + " |\n";
  }
  md += "\n## Systems\n\n| system | n | " + report.aspect + " | density |\n|---|---|---|---|\n";
  for (const auto& s : report.systems) {
    const auto h = s.mean_human.find(report.aspect);
    const auto d = s.mean_correlate.find("density");
    md += "| " + s.system_id + " | " + std::to_string(s.n) + " | " +
          (h != s.mean_human.end() ? fixed4(h->second) : "n/a") + " | " +
          (d != s.mean_correlate.end() ? fixed4(d->second) : "n/a") + " |\n";
  }
  if (!run_config.is_null()) md += "\n## Run configuration\n\n```json\n" + run_config.dump(2) + "\n```\n";
  return md;
}

std::string render_ranking_csv(const RankingReport& report) {
  std::string out = "scorer,all_pairs_accuracy,all_pairs_n,within_af_accuracy,within_af_n\n";
  for (const auto& row : report.rows) {
    out += csv_field(row.scorer) + "," + format_number(row.all_pairs.accuracy) + "," +
           std::to_string(row.all_pairs.n_pairs) + ",";
    if (row.within_af) {
      out += format_number(row.within_af->accuracy) + "," + std::to_string(row.within_af->n_pairs);
    } else {
      out += ",";
    }
    out += "\n";
  }
  return out;
}

std::string render_ranking_json(const RankingReport& report, const json& run_config) {
  json j;
  j["dataset"] = report.dataset_name;
  j["aspect"] = report.aspect;
  j["af_thresholds"] = {{"faithfulness", report.thresholds.faithfulness},
                        {"density", report.thresholds.density}};
  j["af_systems"] = report.af_systems;
  j["systems"] = json::array();
  for (const auto& s : report.systems) {
    j["systems"].push_back({{"system", s.system_id},
                            {"n", s.n},
                            {"mean_human", s.mean_human},
                            {"mean_metric", s.mean_metric},
                            {"mean_correlate", s.mean_correlate}});
  }
  j["rows"] = json::array();
  for (const auto& row : report.rows) {
    j["rows"].push_back({{"scorer", row.scorer},
                         {"all_pairs", pairwise_json(row.all_pairs)},
                         {"within_af", row.within_af ? pairwise_json(*row.within_af) : json(nullptr)}});
  }
  if (!run_config.is_null()) j["run_config"] = run_config;
  return j.dump(2) + "\n";
}

std::string render_ranking_svg(const RankingReport& report) {
  constexpr double width = 640, height = 480, left = 70, right = 20, top = 30, bottom = 60;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double x_max = report.thresholds.density;
  double y_min = 1.0, y_max = 5.0;
  for (const auto& s : report.systems) {
    if (const auto d = s.mean_correlate.find("density"); d != s.mean_correlate.end()) {
      x_max = std::max(x_max, d->second);
    }
    if (const auto h = s.mean_human.find(report.aspect); h != s.mean_human.end()) {
      y_min = std::min(y_min, h->second);
      y_max = std::max(y_max, h->second);
    }
  }
  x_max *= 1.1;
  auto px = [&](double x) { return left + plot_w * x / x_max; };
  auto py = [&](double y) { return top + plot_h * (y_max - y) / (y_max - y_min); };
  auto num = [](double v) { return fixed4(v); };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
         num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
  svg += "<title>Density vs human " + xml_escape(report.aspect) + " per system: " + xml_escape(report.dataset_name) + "</title>\n";
  svg += "<rect class=\"frame\" x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(plot_w) +
         "\" height=\"" + num(plot_h) + "\" fill=\"none\" stroke=\"#333\"/>\n";

  const double tf = report.thresholds.faithfulness;
  const double td = report.thresholds.density;
  const double af_top = py(y_max), af_bottom = py(std::clamp(tf, y_min, y_max));
  svg += "<rect class=\"af-region\" x=\"" + num(px(0)) + "\" y=\"" + num(af_top) + "\" width=\"" +
         num(px(td) - px(0)) + "\" height=\"" + num(af_bottom - af_top) +
         "\" fill=\"#3b6fd8\" fill-opacity=\"0.12\" stroke=\"#3b6fd8\"/>\n";
  svg += "<line class=\"threshold density\" data-value=\"" + format_number(td) + "\" x1=\"" + num(px(td)) +
         "\" y1=\"" + num(py(y_max)) + "\" x2=\"" + num(px(td)) + "\" y2=\"" + num(py(y_min)) +
         "\" stroke=\"#3b6fd8\" stroke-dasharray=\"4 3\"/>\n";
  svg += "<line class=\"threshold faithfulness\" data-value=\"" + format_number(tf) + "\" x1=\"" +
         num(px(0)) + "\" y1=\"" + num(py(tf)) + "\" x2=\"" + num(px(x_max)) + "\" y2=\"" + num(py(tf)) +
         "\" stroke=\"#3b6fd8\" stroke-dasharray=\"4 3\"/>\n";

  for (const auto& s : report.systems) {
    const auto d = s.mean_correlate.find("density");
    const auto h = s.mean_human.find(report.aspect);
    if (d == s.mean_correlate.end() || h == s.mean_human.end()) continue;
    const bool af = std::find(report.af_systems.begin(), report.af_systems.end(), s.system_id) !=
                    report.af_systems.end();
    svg += "<circle class=\"system" + std::string(af ? " af" : "") + "\" data-system=\"" + xml_escape(s.system_id) +
           "\" cx=\"" + num(px(d->second)) + "\" cy=\"" + num(py(h->second)) + "\" r=\"5\" fill=\"" +
           (af ? "#3b6fd8" : "#d8573b") + "\"/>\n";
    svg += "<text x=\"" + num(px(d->second) + 7) + "\" y=\"" + num(py(h->second) - 7) +
           "\" font-size=\"10\">" + xml_escape(s.system_id) + "</text>\n";
  }
  svg += "<text x=\"" + num(left + plot_w / 2) + "\" y=\"" + num(height - 20) +
         "\" text-anchor=\"middle\">density</text>\n";
  svg += "<text x=\"20\" y=\"" + num(top + plot_h / 2) + "\" transform=\"rotate(-90 20 " +
         num(top + plot_h / 2) + ")\" text-anchor=\"middle\">" + xml_escape(report.aspect) + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

}  // namespace nlgaudit
