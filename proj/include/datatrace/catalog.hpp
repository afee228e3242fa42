#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "datatrace/csv.hpp"
#include "datatrace/digest.hpp"
#include "datatrace/error.hpp"
#include "datatrace/text.hpp"

namespace datatrace {

enum class Task { segmentation, classification };

inline std::string_view to_string(Task t) {
  return t == Task::segmentation ? "segmentation" : "classification";
}

struct Alias {
  std::string text;
  bool case_sensitive = false;

  friend bool operator==(const Alias&, const Alias&) = default;
};

/// Short all-uppercase acronyms (DRIVE, ACDC) collide with ordinary words
/// once case-folded, so they match case-sensitively unless declared otherwise.
inline bool default_case_sensitive(std::string_view alias) {
  if (alias.size() > 6) return false;
  bool has_letter = false;
  for (char c : alias) {
    if (c >= 'a' && c <= 'z') return false;
    if (c >= 'A' && c <= 'Z') has_letter = true;
  }
  return has_letter;
}

struct DatasetRecord {
  std::string dataset_id;
  std::string canonical_name;
  std::vector<Alias> aliases;  // always contains canonical_name
  std::vector<std::string> urls;
  std::vector<std::string> paper_titles;
  std::vector<std::string> paper_dois;
  std::optional<Task> task;
  std::string organ;
  std::string modality;
  std::optional<int> year_published;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

struct VenueRecord {
  std::string venue_id;
  std::string dblp_stream_key;
  std::string display_name;
  std::pair<int, int> year_range{0, 0};

  friend bool operator==(const VenueRecord&, const VenueRecord&) = default;
};

/// Re-runs the record invariants; returns one message per violation.
inline std::vector<std::string> validate(const DatasetRecord& r) {
  std::vector<std::string> problems;
  if (r.dataset_id.empty()) problems.emplace_back("dataset_id is empty");
  if (r.canonical_name.empty()) problems.emplace_back("canonical_name is empty");
  if (std::none_of(r.aliases.begin(), r.aliases.end(),
                   [&](const Alias& a) { return a.text == r.canonical_name; }))
    problems.emplace_back("canonical_name missing from aliases");
  std::set<std::string> seen_alias;
  for (const auto& a : r.aliases) {
    auto key = text::collapse_whitespace(a.text);
    if (key.empty()) problems.emplace_back("empty alias");
    if (!seen_alias.insert(key).second) problems.emplace_back("duplicate alias '" + key + "'");
  }
  std::set<std::string> seen_doi;
  for (const auto& d : r.paper_dois) {
    auto norm = text::normalize_doi(d);
    if (!norm || *norm != d) problems.emplace_back("DOI not normalized: '" + d + "'");
    if (!seen_doi.insert(d).second) problems.emplace_back("duplicate DOI '" + d + "'");
  }
  return problems;
}

inline std::vector<std::string> validate(const VenueRecord& v) {
  std::vector<std::string> problems;
  if (v.venue_id.empty()) problems.emplace_back("venue_id is empty");
  if (v.dblp_stream_key.empty()) problems.emplace_back("dblp_stream_key is empty");
  if (v.year_range.first > v.year_range.second) problems.emplace_back("year range start after end");
  return problems;
}

namespace detail {

[[noreturn]] inline void malformed(std::size_t row, const std::string& why) {
  throw Error(ErrorCode::MalformedRow, "row " + std::to_string(row) + ": " + why);
}

inline int parse_year(std::string_view s, std::size_t row) {
  auto t = text::trim(s);
  if (t.empty() || t.size() > 4 || !std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; }))
    malformed(row, "invalid year '" + t + "'");
  return std::stoi(t);
}

// `DRIVE[cs]` / `drive[ci]` force the case rule; a bare alias gets the default.
inline Alias parse_alias(std::string_view cell) {
  auto s = text::trim(cell);
  Alias a;
  if (s.size() > 4 && (s.ends_with("[cs]") || s.ends_with("[ci]"))) {
    a.case_sensitive = s.ends_with("[cs]");
    a.text = text::collapse_whitespace(s.substr(0, s.size() - 4));
  } else {
    a.text = text::collapse_whitespace(s);
    a.case_sensitive = default_case_sensitive(a.text);
  }
  return a;
}

inline std::string cell(const csv::Row& row, std::optional<std::size_t> idx) {
  if (!idx || *idx >= row.size()) return {};
  return row[*idx];
}

}  // namespace detail

/// Parses a dataset registry table. Columns are located by header name; only
/// the name column is mandatory. List cells use `;` as inner separator.
inline std::vector<DatasetRecord> parse_dataset_registry(std::string_view content) {
  auto rows = csv::parse(content);
  if (rows.empty()) throw Error(ErrorCode::EmptyRegistry, "registry has no header");
  csv::Header header(rows.front());
  auto col_id = header.find({"dataset_id", "id"});
  auto col_name = header.find({"name", "dataset", "canonical_name"});
  auto col_aliases = header.find({"aliases", "alias"});
  auto col_urls = header.find({"urls", "url"});
  auto col_titles = header.find({"paper_titles", "titles", "title"});
  auto col_dois = header.find({"paper_dois", "dois", "doi"});
  auto col_task = header.find({"task"});
  auto col_organ = header.find({"organ"});
  auto col_modality = header.find({"modality"});
  auto col_year = header.find({"year_published", "published", "year"});
  if (!col_name) detail::malformed(0, "header lacks a name/dataset column");

  std::vector<DatasetRecord> out;
  std::set<std::string> ids;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() > header.size()) detail::malformed(i, "more cells than header columns");
    DatasetRecord r;
    r.canonical_name = text::collapse_whitespace(detail::cell(row, col_name));
    if (r.canonical_name.empty()) detail::malformed(i, "empty dataset name");
    r.dataset_id = text::trim(detail::cell(row, col_id));
    if (r.dataset_id.empty()) r.dataset_id = text::slugify(r.canonical_name);
    if (r.dataset_id.empty()) detail::malformed(i, "cannot derive dataset_id");

    r.aliases.push_back({r.canonical_name, default_case_sensitive(r.canonical_name)});
    for (const auto& raw : text::split_list(detail::cell(row, col_aliases))) {
      auto a = detail::parse_alias(raw);
      if (a.text.empty()) detail::malformed(i, "empty alias");
      auto same = std::find_if(r.aliases.begin(), r.aliases.end(),
                               [&](const Alias& x) { return x.text == a.text; });
      if (same == r.aliases.end()) {
        r.aliases.push_back(std::move(a));
      } else if (same == r.aliases.begin()) {
        same->case_sensitive = a.case_sensitive;  // explicit rule for the self-alias
      } else {
        detail::malformed(i, "duplicate alias '" + a.text + "'");
      }
    }
    for (const auto& u : text::split_list(detail::cell(row, col_urls))) {
      auto norm = text::normalize_url(u);
      if (norm.empty()) detail::malformed(i, "empty URL");
      if (std::find(r.urls.begin(), r.urls.end(), norm) == r.urls.end()) r.urls.push_back(norm);
    }
    for (const auto& t : text::split_list(detail::cell(row, col_titles)))
      r.paper_titles.push_back(text::collapse_whitespace(t));
    for (const auto& d : text::split_list(detail::cell(row, col_dois))) {
      auto norm = text::normalize_doi(d);
      if (!norm) detail::malformed(i, "invalid DOI '" + d + "'");
      if (std::find(r.paper_dois.begin(), r.paper_dois.end(), *norm) == r.paper_dois.end())
        r.paper_dois.push_back(*norm);
    }
    if (auto task = text::to_lower(text::trim(detail::cell(row, col_task))); !task.empty()) {
      if (task == "segmentation") r.task = Task::segmentation;
      else if (task == "classification") r.task = Task::classification;
      else detail::malformed(i, "unknown task '" + task + "'");
    }
    r.organ = text::trim(detail::cell(row, col_organ));
    r.modality = text::trim(detail::cell(row, col_modality));
    if (auto y = detail::cell(row, col_year); !text::trim(y).empty())
      r.year_published = detail::parse_year(y, i);

    if (auto problems = validate(r); !problems.empty()) detail::malformed(i, problems.front());
    if (!ids.insert(r.dataset_id).second)
      throw Error(ErrorCode::DuplicateDatasetId, "dataset_id '" + r.dataset_id + "' at row " + std::to_string(i));
    out.push_back(std::move(r));
  }
  if (out.empty()) throw Error(ErrorCode::EmptyRegistry, "registry has no dataset rows");
  return out;
}

inline std::vector<DatasetRecord> load_dataset_registry(const std::filesystem::path& path) {
  return parse_dataset_registry(fsio::read_file(path));
}

/// Writes the registry in the same format the loader reads; every alias
/// carries an explicit case marker so reloading is exact.
inline std::string serialize_dataset_registry(const std::vector<DatasetRecord>& records) {
  std::vector<csv::Row> rows;
  rows.push_back({"dataset_id", "name", "aliases", "urls", "paper_titles", "paper_dois", "task", "organ",
                  "modality", "year"});
  for (const auto& r : records) {
    std::vector<std::string> aliases;
    for (const auto& a : r.aliases) aliases.push_back(a.text + (a.case_sensitive ? "[cs]" : "[ci]"));
    rows.push_back({r.dataset_id, r.canonical_name, text::join(aliases, ";"), text::join(r.urls, ";"),
                    text::join(r.paper_titles, ";"), text::join(r.paper_dois, ";"),
                    r.task ? std::string(to_string(*r.task)) : std::string(), r.organ, r.modality,
                    r.year_published ? std::to_string(*r.year_published) : std::string()});
  }
  return csv::to_string(rows, ',');
}

/// Venue list: `venue_id`, `display_name`, `years` (`2013-2023` or `2018`),
/// optional `dblp_key` (defaults to `conf/<venue_id>`).
inline std::vector<VenueRecord> parse_venue_list(std::string_view content) {
  auto rows = csv::parse(content);
  if (rows.empty()) throw Error(ErrorCode::EmptyVenueList, "venue list has no header");
  csv::Header header(rows.front());
  auto col_id = header.find({"venue_id", "id", "venue"});
  auto col_name = header.find({"display_name", "name"});
  auto col_years = header.find({"years", "year_range"});
  auto col_key = header.find({"dblp_key", "dblp_stream_key", "stream"});
  if (!col_id || !col_years) detail::malformed(0, "header needs venue_id and years columns");

  std::vector<VenueRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    VenueRecord v;
    v.venue_id = text::trim(detail::cell(row, col_id));
    if (v.venue_id.empty()) detail::malformed(i, "empty venue_id");
    v.display_name = text::trim(detail::cell(row, col_name));
    if (v.display_name.empty()) v.display_name = v.venue_id;
    v.dblp_stream_key = text::trim(detail::cell(row, col_key));
    if (v.dblp_stream_key.empty()) v.dblp_stream_key = "conf/" + v.venue_id;
    auto years = text::trim(detail::cell(row, col_years));
    auto dash = years.find('-');
    if (dash == std::string::npos) {
      v.year_range.first = v.year_range.second = detail::parse_year(years, i);
    } else {
      v.year_range.first = detail::parse_year(years.substr(0, dash), i);
      v.year_range.second = detail::parse_year(years.substr(dash + 1), i);
    }
    if (auto problems = validate(v); !problems.empty()) detail::malformed(i, problems.front());
    out.push_back(std::move(v));
  }
  if (out.empty()) throw Error(ErrorCode::EmptyVenueList, "venue list has no rows");
  return out;
}

inline std::vector<VenueRecord> load_venue_list(const std::filesystem::path& path) {
  return parse_venue_list(fsio::read_file(path));
}

inline const DatasetRecord* find_dataset(const std::vector<DatasetRecord>& registry, std::string_view id) {
  for (const auto& r : registry)
    if (r.dataset_id == id) return &r;
  return nullptr;
}

}  // namespace datatrace
