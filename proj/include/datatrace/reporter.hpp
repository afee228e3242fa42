#pragma once

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "datatrace/analyzer.hpp"
#include "datatrace/csv.hpp"
#include "datatrace/detector.hpp"
#include "datatrace/digest.hpp"
#include "datatrace/error.hpp"

namespace datatrace {

inline constexpr std::string_view kToolVersion = "datatrace 1.0.0";

// ---------------------------------------------------------------------------
// Delimited tables. UTF-8, comma separated, RFC 4180 quoting, '\n' endings.

inline std::string detections_csv(std::vector<Detection> detections) {
  order_detections(detections);
  std::ostringstream os;
  csv::write_row(os, {"paper_id", "dataset_id", "kind", "location", "matched_text", "span_start", "span_end"});
  for (const auto& d : detections)
    csv::write_row(os, {d.paper_id, d.dataset_id, std::string(to_string(d.kind)), d.location_label(), d.matched_text,
                        std::to_string(d.span_start), std::to_string(d.span_end)});
  return os.str();
}

/// Reads back what detections_csv wrote. Element anchors are not part of
/// the file, so re-read detections carry anchor 0.
inline std::vector<Detection> parse_detections_csv(std::string_view content) {
  auto rows = csv::parse(content, ',');
  if (rows.empty()) throw Error(ErrorCode::MalformedRow, "detections file has no header");
  std::vector<Detection> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 7) throw Error(ErrorCode::MalformedRow, "detections row " + std::to_string(i) + ": expected 7 cells");
    Detection d;
    d.paper_id = r[0];
    d.dataset_id = r[1];
    d.kind = parse_detection_kind(r[2]);
    std::tie(d.location, d.heading) = parse_location_label(r[3]);
    d.matched_text = r[4];
    d.span_start = std::stoul(r[5]);
    d.span_end = std::stoul(r[6]);
    out.push_back(std::move(d));
  }
  return out;
}

inline std::string presence_csv(const std::vector<PresenceSummary>& summaries) {
  auto sorted = summaries;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return std::tie(a.dataset_id, a.venue_id) < std::tie(b.dataset_id, b.venue_id);
  });
  std::ostringstream os;
  csv::write_row(os, {"dataset", "venue", "type", "count", "total"});
  for (const auto& s : sorted)
    for (auto t : kPresenceTypes)
      csv::write_row(os, {s.dataset_id, s.venue_id, std::string(to_string(t)), std::to_string(s.count(t)),
                          std::to_string(s.total)});
  return os.str();
}

inline std::string cumulative_csv(const std::vector<YearSeries>& series) {
  auto sorted = series;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return std::tie(a.dataset_id, a.kind) < std::tie(b.dataset_id, b.kind); });
  std::ostringstream os;
  csv::write_row(os, {"dataset", "kind", "year", "count"});
  for (const auto& s : sorted)
    for (std::size_t i = 0; i < s.cumulative.size(); ++i)
      csv::write_row(os, {s.dataset_id, std::string(to_string(s.kind)), std::to_string(s.first_year + static_cast<int>(i)),
                          std::to_string(s.cumulative[i])});
  return os.str();
}

inline std::string presence_records_csv(std::vector<PresenceRecord> records) {
  std::sort(records.begin(), records.end());
  std::ostringstream os;
  csv::write_row(os, {"paper_id", "dataset_id", "type"});
  for (const auto& r : records) csv::write_row(os, {r.paper_id, r.dataset_id, std::string(to_string(r.type))});
  return os.str();
}

inline std::vector<PresenceRecord> parse_presence_records_csv(std::string_view content) {
  auto rows = csv::parse(content, ',');
  std::vector<PresenceRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 3) throw Error(ErrorCode::MalformedRow, "presence row " + std::to_string(i));
    out.push_back({rows[i][0], rows[i][1], parse_presence_type(rows[i][2])});
  }
  return out;
}

inline std::string groups_csv(std::vector<GroupAssignment> groups) {
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.paper_id < b.paper_id; });
  std::ostringstream os;
  csv::write_row(os, {"paper_id", "group", "reason"});
  for (const auto& g : groups) csv::write_row(os, {g.paper_id, std::string(to_string(g.group)), g.reason});
  return os.str();
}

inline std::vector<GroupAssignment> parse_groups_csv(std::string_view content) {
  auto rows = csv::parse(content, ',');
  std::vector<GroupAssignment> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 3) throw Error(ErrorCode::MalformedRow, "groups row " + std::to_string(i));
    out.push_back({rows[i][0], parse_group(rows[i][1]), rows[i][2]});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run manifest

struct RunManifest {
  std::string registry_digest;
  std::string venue_list_digest;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::size_t> stage_counts;
  std::string tool_version = std::string(kToolVersion);

  friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

inline void to_json(nlohmann::json& j, const RunManifest& m) {
  j = nlohmann::json{{"registry_digest", m.registry_digest}, {"venue_list_digest", m.venue_list_digest},
                     {"config", m.config}, {"stage_counts", m.stage_counts}, {"tool_version", m.tool_version}};
}

inline void from_json(const nlohmann::json& j, RunManifest& m) {
  m.registry_digest = j.at("registry_digest").get<std::string>();
  m.venue_list_digest = j.at("venue_list_digest").get<std::string>();
  m.config = j.value("config", nlohmann::json::object());
  m.stage_counts = j.value("stage_counts", std::map<std::string, std::size_t>{});
  m.tool_version = j.value("tool_version", "");
}

/// Recomputes the input digests; returns the names of inputs that changed.
inline std::vector<std::string> verify_manifest(const RunManifest& m, const std::filesystem::path& registry,
                                                const std::filesystem::path& venues) {
  std::vector<std::string> changed;
  if (fsio::sha256_file(registry) != m.registry_digest) changed.emplace_back("registry");
  if (fsio::sha256_file(venues) != m.venue_list_digest) changed.emplace_back("venues");
  return changed;
}

struct ReportFiles {
  std::filesystem::path presence, cumulative, detections, manifest;
};

/// Writes the four output files into `out_dir`; the manifest goes last so
/// its presence marks a complete report.
inline ReportFiles emit_reports(const std::vector<PresenceSummary>& summaries, const std::vector<YearSeries>& series,
                                const std::vector<Detection>& detections, const RunManifest& manifest,
                                const std::filesystem::path& out_dir) {
  ReportFiles files{out_dir / "presence.csv", out_dir / "cumulative.csv", out_dir / "detections.csv",
                    out_dir / "manifest.json"};
  fsio::write_file_atomic(files.presence, presence_csv(summaries));
  fsio::write_file_atomic(files.cumulative, cumulative_csv(series));
  fsio::write_file_atomic(files.detections, detections_csv(detections));
  fsio::write_file_atomic(files.manifest, nlohmann::json(manifest).dump(2) + "\n");
  return files;
}

}  // namespace datatrace
