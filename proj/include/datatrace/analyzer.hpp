#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "datatrace/detector.hpp"
#include "datatrace/error.hpp"
#include "datatrace/harvester.hpp"

namespace datatrace {

enum class Group { group1, group2, group3, discarded };

inline std::string_view to_string(Group g) {
  switch (g) {
    case Group::group1: return "group1";
    case Group::group2: return "group2";
    case Group::group3: return "group3";
    case Group::discarded: return "discarded";
  }
  return "discarded";
}

inline Group parse_group(std::string_view s) {
  for (auto g : {Group::group1, Group::group2, Group::group3, Group::discarded})
    if (to_string(g) == s) return g;
  throw Error(ErrorCode::MalformedRow, "unknown group '" + std::string(s) + "'");
}

struct GroupAssignment {
  std::string paper_id;
  Group group = Group::discarded;
  std::string reason;

  friend bool operator==(const GroupAssignment&, const GroupAssignment&) = default;
};

/// Data-availability partition. Full text decides first: with it a paper is
/// group1 (OpenAlex references present) or group3 (title matching only).
/// Without it the paper is group2 unless it has neither an OpenAlex
/// abstract nor references, in which case it is discarded.
inline GroupAssignment assign_group(const PaperRecord& paper) {
  const bool fulltext = has_fulltext(paper.fulltext_status);
  const bool abstract = paper.has_openalex_abstract();
  const bool references = paper.has_references();
  GroupAssignment a{paper.paper_id, Group::discarded, {}};
  if (fulltext && references) {
    a.group = Group::group1;
    a.reason = abstract ? "full text, abstract and references available"
                        : "full text and references available; abstract taken from full text";
  } else if (fulltext) {
    a.group = Group::group3;
    a.reason = "no references in OpenAlex; citations via title matching on full text";
  } else if (abstract || references) {
    a.group = Group::group2;
    a.reason = abstract ? "full text unavailable; mentions from OpenAlex abstract only"
                        : "full text and abstract unavailable; citations from OpenAlex references only";
  } else {
    a.reason = "no content and no references obtainable";
  }
  return a;
}

// ---------------------------------------------------------------------------

struct PresenceSummary {
  std::string dataset_id;
  std::string venue_id;
  std::array<std::size_t, 3> counts{};  // indexed by PresenceType
  std::size_t total = 0;

  std::size_t count(PresenceType t) const { return counts[static_cast<std::size_t>(t)]; }
  double proportion(PresenceType t) const {
    return total ? static_cast<double>(count(t)) / static_cast<double>(total) : 0.0;
  }

  friend bool operator==(const PresenceSummary&, const PresenceSummary&) = default;
};

using PaperIndex = std::map<std::string, const PaperRecord*>;

inline PaperIndex index_papers(const std::vector<PaperRecord>& papers) {
  PaperIndex idx;
  for (const auto& p : papers) idx.emplace(p.paper_id, &p);
  return idx;
}

namespace analyzer_detail {

inline const PaperRecord& join(const PaperIndex& papers, const std::string& paper_id) {
  auto it = papers.find(paper_id);
  if (it == papers.end()) throw Error(ErrorCode::DanglingPaperRef, "presence record for unknown paper '" + paper_id + "'");
  return *it->second;
}

// Duplicate (paper, dataset) pairs would be double counted; keep the first.
inline std::vector<PresenceRecord> distinct(std::vector<PresenceRecord> records) {
  std::sort(records.begin(), records.end());
  records.erase(std::unique(records.begin(), records.end(),
                            [](const auto& a, const auto& b) {
                              return a.paper_id == b.paper_id && a.dataset_id == b.dataset_id;
                            }),
                records.end());
  return records;
}

}  // namespace analyzer_detail

/// Per (dataset, venue) counts of each presence type, sorted by key.
inline std::vector<PresenceSummary> aggregate_presence(const std::vector<PresenceRecord>& records,
                                                       const PaperIndex& papers) {
  std::map<std::pair<std::string, std::string>, PresenceSummary> acc;
  for (const auto& r : analyzer_detail::distinct(records)) {
    const auto& paper = analyzer_detail::join(papers, r.paper_id);
    auto& s = acc[{r.dataset_id, paper.venue_id}];
    s.dataset_id = r.dataset_id;
    s.venue_id = paper.venue_id;
    ++s.counts[static_cast<std::size_t>(r.type)];
    ++s.total;
  }
  std::vector<PresenceSummary> out;
  for (auto& [key, s] : acc) out.push_back(std::move(s));
  return out;
}

enum class SeriesKind { citations, mentions };

inline std::string_view to_string(SeriesKind k) { return k == SeriesKind::citations ? "citations" : "mentions"; }

struct YearSeries {
  std::string dataset_id;
  SeriesKind kind = SeriesKind::citations;
  int first_year = 0;
  std::vector<std::size_t> cumulative;  // cumulative[i] is the count up to first_year + i

  friend bool operator==(const YearSeries&, const YearSeries&) = default;
};

/// Cumulative paper counts per year for every dataset with at least one
/// presence record, over [years.first, years.second]. Cited papers count
/// toward `citations`, mentioned ones toward `mentions`, so a cited and
/// mentioned paper counts in both. Papers dated before the range count from
/// its first year; papers after it are outside the series.
inline std::vector<YearSeries> cumulative_series(const std::vector<PresenceRecord>& records, const PaperIndex& papers,
                                                 std::pair<int, int> years) {
  if (years.first > years.second) throw Error(ErrorCode::InvalidArgument, "inverted year range");
  const auto span = static_cast<std::size_t>(years.second - years.first + 1);
  std::map<std::pair<std::string, SeriesKind>, std::vector<std::size_t>> per_year;
  std::set<std::string> datasets;
  for (const auto& r : analyzer_detail::distinct(records)) {
    const auto& paper = analyzer_detail::join(papers, r.paper_id);
    datasets.insert(r.dataset_id);
    for (auto kind : {SeriesKind::citations, SeriesKind::mentions}) per_year[{r.dataset_id, kind}].resize(span);
    if (paper.year > years.second) continue;
    auto slot = static_cast<std::size_t>(std::max(paper.year, years.first) - years.first);
    bool cited = r.type != PresenceType::only_mentioned;
    bool mentioned = r.type != PresenceType::only_cited;
    if (cited) ++per_year[{r.dataset_id, SeriesKind::citations}][slot];
    if (mentioned) ++per_year[{r.dataset_id, SeriesKind::mentions}][slot];
  }
  std::vector<YearSeries> out;
  for (const auto& ds : datasets) {
    for (auto kind : {SeriesKind::citations, SeriesKind::mentions}) {
      YearSeries s{ds, kind, years.first, per_year[{ds, kind}]};
      for (std::size_t i = 1; i < s.cumulative.size(); ++i) s.cumulative[i] += s.cumulative[i - 1];
      out.push_back(std::move(s));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

/// |A ∩ B| / |A| kept as an exact fraction; an empty A has no ratio.
struct Containment {
  std::size_t shared = 0;
  std::size_t total = 0;

  std::optional<double> ratio() const {
    if (total == 0) return std::nullopt;
    return static_cast<double>(shared) / static_cast<double>(total);
  }

  friend bool operator==(const Containment&, const Containment&) = default;
};

struct IndexComparison {
  Containment a_in_b;
  Containment b_in_a;

  friend bool operator==(const IndexComparison&, const IndexComparison&) = default;
};

inline IndexComparison compare_citation_indexes(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::size_t shared = 0;
  for (const auto& id : a) shared += b.count(id);
  return {{shared, a.size()}, {shared, b.size()}};
}

}  // namespace datatrace
