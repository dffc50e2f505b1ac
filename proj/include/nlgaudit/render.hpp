#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "nlgaudit/audit.hpp"
#include "nlgaudit/ranking.hpp"

namespace nlgaudit {

enum class ReportFormat { markdown, csv, json, svg_scatter };

ReportFormat parse_format(const std::string& name);
std::string format_name(ReportFormat format);

// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

// `run_config` (may be null) is echoed verbatim into artifacts that can carry it.
std::string render_audit_markdown(const AuditReport& report, const nlohmann::json& run_config = {});
// One row per (metric, correlate) pair; columns
// scorer,kind,target,point,boot_mean,ci_low,ci_high,p,flagged.
std::string render_audit_csv(const AuditReport& report);
std::string render_audit_json(const AuditReport& report, const nlohmann::json& run_config = {});
AuditReport audit_from_json(const std::string& text);

std::string render_ranking_markdown(const RankingReport& report, const nlohmann::json& run_config = {});
std::string render_ranking_csv(const RankingReport& report);
std::string render_ranking_json(const RankingReport& report, const nlohmann::json& run_config = {});
// Per-system (mean density, mean human score) scatter with the AF box and
// the two threshold lines.
std::string render_ranking_svg(const RankingReport& report);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace nlgaudit
