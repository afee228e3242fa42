#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "datatrace/catalog.hpp"
#include "datatrace/error.hpp"
#include "datatrace/fulltext.hpp"
#include "datatrace/harvester.hpp"
#include "datatrace/text.hpp"

namespace datatrace {

enum class DetectionKind { citation_via_doi, citation_via_title, mention };

// Declaration order is the sort order of detections within a dataset.
enum class Location { abstract, body_section, figure_caption, table_caption, footnote, reference_list };

inline std::string_view to_string(DetectionKind k) {
  switch (k) {
    case DetectionKind::citation_via_doi: return "citation_via_doi";
    case DetectionKind::citation_via_title: return "citation_via_title";
    case DetectionKind::mention: return "mention";
  }
  return "mention";
}

inline std::string_view to_string(Location l) {
  switch (l) {
    case Location::abstract: return "abstract";
    case Location::body_section: return "body_section";
    case Location::figure_caption: return "figure_caption";
    case Location::table_caption: return "table_caption";
    case Location::footnote: return "footnote";
    case Location::reference_list: return "reference_list";
  }
  return "abstract";
}

inline DetectionKind parse_detection_kind(std::string_view s) {
  for (auto k : {DetectionKind::citation_via_doi, DetectionKind::citation_via_title, DetectionKind::mention})
    if (to_string(k) == s) return k;
  throw Error(ErrorCode::MalformedRow, "unknown detection kind '" + std::string(s) + "'");
}

inline bool is_citation(DetectionKind k) { return k != DetectionKind::mention; }

struct Detection {
  std::string paper_id;
  std::string dataset_id;
  DetectionKind kind = DetectionKind::mention;
  Location location = Location::abstract;
  std::string heading;     // body_section only
  std::size_t anchor = 0;  // element index within the location class
  std::string matched_text;
  std::size_t span_start = 0;
  std::size_t span_end = 0;

  /// `body_section(<heading>)` for body text, the bare location otherwise.
  std::string location_label() const {
    if (location == Location::body_section) return "body_section(" + heading + ")";
    return std::string(to_string(location));
  }

  auto sort_key() const {
    return std::tie(dataset_id, location, anchor, span_start, span_end, kind, heading, matched_text);
  }

  friend bool operator==(const Detection&, const Detection&) = default;
};

inline std::pair<Location, std::string> parse_location_label(std::string_view s) {
  constexpr std::string_view body = "body_section(";
  if (s.starts_with(body) && s.ends_with(")"))
    return {Location::body_section, std::string(s.substr(body.size(), s.size() - body.size() - 1))};
  for (auto l : {Location::abstract, Location::figure_caption, Location::table_caption, Location::footnote,
                 Location::reference_list, Location::body_section})
    if (to_string(l) == s) return {l, {}};
  throw Error(ErrorCode::MalformedRow, "unknown location '" + std::string(s) + "'");
}

/// Deterministic order: paper, then (dataset_id, location, anchor, span).
/// Stable, so rows that tie keep their input order.
inline void order_detections(std::vector<Detection>& ds) {
  std::stable_sort(ds.begin(), ds.end(), [](const Detection& a, const Detection& b) {
    if (a.paper_id != b.paper_id) return a.paper_id < b.paper_id;
    return a.sort_key() < b.sort_key();
  });
}

/// order_detections plus removal of exact duplicates (one span hit by two
/// aliases of the same dataset).
inline void sort_detections(std::vector<Detection>& ds) {
  order_detections(ds);
  ds.erase(std::unique(ds.begin(), ds.end()), ds.end());
}

struct MatcherConfig {
  double title_similarity_threshold = 0.9;
  std::vector<std::string> excluded_heading_keywords = {"related work", "prior work", "state of the art",
                                                        "discussion"};
  bool unknown_heading_eligible = true;

  void validate() const {
    if (!(title_similarity_threshold >= 0.0 && title_similarity_threshold <= 1.0))
      throw Error(ErrorCode::InvalidArgument, "title_similarity_threshold must lie in [0,1]");
    for (const auto& k : excluded_heading_keywords)
      if (k != text::to_lower(k) || text::trim(k).empty())
        throw Error(ErrorCode::InvalidArgument, "excluded heading keyword must be nonempty lowercase: '" + k + "'");
  }
};

// ---------------------------------------------------------------------------
// Citations

/// 1 - levenshtein(a, b) / max(|a|, |b|) over code points; 1 for two empty strings.
inline double edit_similarity(std::string_view a, std::string_view b) {
  auto ua = text::decode_utf8(a);
  auto ub = text::decode_utf8(b);
  if (ua.size() < ub.size()) std::swap(ua, ub);
  if (ua.empty()) return 1.0;
  std::vector<std::size_t> prev(ub.size() + 1), cur(ub.size() + 1);
  for (std::size_t j = 0; j <= ub.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= ua.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= ub.size(); ++j) {
      std::size_t subst = prev[j - 1] + (ua[i - 1] == ub[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
    }
    std::swap(prev, cur);
  }
  return 1.0 - static_cast<double>(prev[ub.size()]) / static_cast<double>(ua.size());
}

/// Registry title vs one bibliography entry: normalized containment in the
/// raw string, or parsed-title similarity at or above `threshold`.
inline bool reference_matches_title(const ReferenceEntry& ref, std::string_view registry_title, double threshold) {
  auto wanted = text::normalize_title(registry_title);
  if (wanted.empty()) return false;
  if (text::normalize_title(ref.raw).find(wanted) != std::string::npos) return true;
  if (!ref.parsed_title) return false;
  return edit_similarity(text::normalize_title(*ref.parsed_title), wanted) >= threshold;
}

/// One citation_via_doi detection per dataset with any resolved work ID in
/// the paper's reference list.
inline std::vector<Detection> detect_citations_by_id(const PaperRecord& paper, const DatasetWorkIndex& index) {
  std::vector<Detection> out;
  if (!paper.referenced_work_ids) return out;
  const auto& refs = *paper.referenced_work_ids;
  for (const auto& [dataset_id, works] : index.works) {
    for (std::size_t i = 0; i < refs.size(); ++i) {
      if (std::find(works.begin(), works.end(), refs[i]) == works.end()) continue;
      Detection d;
      d.paper_id = paper.paper_id;
      d.dataset_id = dataset_id;
      d.kind = DetectionKind::citation_via_doi;
      d.location = Location::reference_list;
      d.anchor = i;
      d.matched_text = refs[i];
      d.span_end = refs[i].size();
      out.push_back(std::move(d));
      break;
    }
  }
  sort_detections(out);
  return out;
}

/// One citation_via_title detection per dataset, on the first matching entry.
inline std::vector<Detection> detect_citations_by_title(const StructuredDocument& doc,
                                                        const std::vector<DatasetRecord>& registry,
                                                        const MatcherConfig& config = {}) {
  std::vector<Detection> out;
  for (const auto& ds : registry) {
    bool found = false;
    for (std::size_t i = 0; i < doc.references.size() && !found; ++i) {
      for (const auto& title : ds.paper_titles) {
        if (!reference_matches_title(doc.references[i], title, config.title_similarity_threshold)) continue;
        Detection d;
        d.paper_id = doc.paper_id;
        d.dataset_id = ds.dataset_id;
        d.kind = DetectionKind::citation_via_title;
        d.location = Location::reference_list;
        d.anchor = i;
        d.matched_text = doc.references[i].raw;
        d.span_end = doc.references[i].raw.size();
        out.push_back(std::move(d));
        found = true;
        break;
      }
    }
  }
  sort_detections(out);
  return out;
}

// ---------------------------------------------------------------------------
// Mentions

inline Eligibility classify_section(std::string_view heading, const MatcherConfig& config = {}) {
  auto norm = text::normalize_title(heading);
  if (norm.empty()) return Eligibility::unknown;
  for (const auto& kw : config.excluded_heading_keywords)
    if (norm.find(text::normalize_title(kw)) != std::string::npos) return Eligibility::excluded;
  return Eligibility::eligible;
}

inline bool is_searchable(Eligibility e, const MatcherConfig& config) {
  return e == Eligibility::eligible || (e == Eligibility::unknown && config.unknown_heading_eligible);
}

inline void classify_sections(StructuredDocument& doc, const MatcherConfig& config = {}) {
  for (auto& s : doc.sections) s.eligibility = classify_section(s.heading, config);
}

struct Span {
  std::size_t start;
  std::size_t end;
};

/// Whole-token occurrences of `alias`: the characters on either side of a
/// hit must not be ASCII alphanumerics.
inline std::vector<Span> find_alias(std::string_view haystack, const Alias& alias) {
  std::vector<Span> hits;
  const auto& needle = alias.text;
  if (needle.empty() || needle.size() > haystack.size()) return hits;
  auto eq = [&](char a, char b) { return alias.case_sensitive ? a == b : text::ascii_lower(a) == text::ascii_lower(b); };
  for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
    std::size_t k = 0;
    while (k < needle.size() && eq(haystack[i + k], needle[k])) ++k;
    if (k != needle.size()) continue;
    std::size_t end = i + needle.size();
    bool left_ok = i == 0 || !text::is_ascii_alnum(haystack[i - 1]) || !text::is_ascii_alnum(needle.front());
    bool right_ok = end == haystack.size() || !text::is_ascii_alnum(haystack[end]) ||
                    !text::is_ascii_alnum(needle.back());
    if (left_ok && right_ok) hits.push_back({i, end});
  }
  return hits;
}

/// URL-like tokens (containing `://`, `www.` or a dotted host) with trailing
/// sentence punctuation removed.
inline std::vector<Span> find_url_tokens(std::string_view s) {
  auto is_break = [](char c) {
    return text::is_space(c) || c == '<' || c == '>' || c == '"' || c == '(' || c == ')' || c == '[' ||
           c == ']' || c == '{' || c == '}' || c == '\'';
  };
  std::vector<Span> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_break(s[i])) ++i;
    std::size_t start = i;
    while (i < s.size() && !is_break(s[i])) ++i;
    std::size_t end = i;
    while (end > start && std::string_view(".,;:!?").find(s[end - 1]) != std::string_view::npos) --end;
    auto tok = s.substr(start, end - start);
    auto dot = tok.find('.');
    if (dot != std::string_view::npos && dot > 0 && dot + 1 < tok.size()) out.push_back({start, end});
  }
  return out;
}

namespace detector_detail {

inline void scan_element(std::string_view content, Location loc, std::string_view heading, std::size_t anchor,
                         const std::string& paper_id, const std::vector<DatasetRecord>& registry,
                         std::vector<Detection>& out) {
  auto url_tokens = find_url_tokens(content);
  std::vector<std::string> token_keys;
  for (auto sp : url_tokens) token_keys.push_back(text::url_match_key(content.substr(sp.start, sp.end - sp.start)));

  auto emit = [&](const DatasetRecord& ds, Span sp) {
    Detection d;
    d.paper_id = paper_id;
    d.dataset_id = ds.dataset_id;
    d.kind = DetectionKind::mention;
    d.location = loc;
    d.heading = std::string(heading);
    d.anchor = anchor;
    d.matched_text = std::string(content.substr(sp.start, sp.end - sp.start));
    d.span_start = sp.start;
    d.span_end = sp.end;
    out.push_back(std::move(d));
  };

  for (const auto& ds : registry) {
    for (const auto& alias : ds.aliases)
      for (auto sp : find_alias(content, alias)) emit(ds, sp);
    for (const auto& url : ds.urls) {
      auto key = text::url_match_key(url);
      if (key.empty()) continue;
      for (std::size_t t = 0; t < url_tokens.size(); ++t)
        if (token_keys[t].find(key) != std::string::npos) emit(ds, url_tokens[t]);
    }
  }
}

}  // namespace detector_detail

/// Scans the abstract, searchable body sections, figure and table captions
/// and footnotes. Reference lists are never scanned for mentions.
inline std::vector<Detection> detect_mentions(const StructuredDocument& doc, const std::vector<DatasetRecord>& registry,
                                              const MatcherConfig& config = {}) {
  std::vector<Detection> out;
  if (doc.abstract) detector_detail::scan_element(*doc.abstract, Location::abstract, {}, 0, doc.paper_id, registry, out);
  for (const auto& s : doc.sections) {
    if (!is_searchable(classify_section(s.heading, config), config)) continue;
    detector_detail::scan_element(s.text(), Location::body_section, s.heading, s.anchor, doc.paper_id, registry, out);
  }
  for (const auto& c : doc.figure_captions)
    detector_detail::scan_element(c.text, Location::figure_caption, {}, c.anchor, doc.paper_id, registry, out);
  for (const auto& c : doc.table_captions)
    detector_detail::scan_element(c.text, Location::table_caption, {}, c.anchor, doc.paper_id, registry, out);
  for (const auto& f : doc.footnotes)
    detector_detail::scan_element(f.text, Location::footnote, {}, f.anchor, doc.paper_id, registry, out);
  sort_detections(out);
  return out;
}

/// Abstract-only scan, for papers whose full text is unavailable.
inline std::vector<Detection> detect_mentions(std::string_view paper_id, std::string_view abstract,
                                              const std::vector<DatasetRecord>& registry) {
  std::vector<Detection> out;
  detector_detail::scan_element(abstract, Location::abstract, {}, 0, std::string(paper_id), registry, out);
  sort_detections(out);
  return out;
}

// ---------------------------------------------------------------------------
// Presence

enum class PresenceType { only_cited, only_mentioned, cited_and_mentioned };

inline constexpr PresenceType kPresenceTypes[] = {PresenceType::only_cited, PresenceType::only_mentioned,
                                                  PresenceType::cited_and_mentioned};

inline std::string_view to_string(PresenceType t) {
  switch (t) {
    case PresenceType::only_cited: return "only_cited";
    case PresenceType::only_mentioned: return "only_mentioned";
    case PresenceType::cited_and_mentioned: return "cited_and_mentioned";
  }
  return "only_cited";
}

inline PresenceType parse_presence_type(std::string_view s) {
  for (auto t : kPresenceTypes)
    if (to_string(t) == s) return t;
  throw Error(ErrorCode::MalformedRow, "unknown presence type '" + std::string(s) + "'");
}

inline std::optional<PresenceType> resolve_presence(bool cited, bool mentioned) {
  if (cited && mentioned) return PresenceType::cited_and_mentioned;
  if (cited) return PresenceType::only_cited;
  if (mentioned) return PresenceType::only_mentioned;
  return std::nullopt;
}

struct PresenceRecord {
  std::string paper_id;
  std::string dataset_id;
  PresenceType type = PresenceType::only_cited;

  friend bool operator==(const PresenceRecord&, const PresenceRecord&) = default;
  friend auto operator<=>(const PresenceRecord&, const PresenceRecord&) = default;
};

/// One record per dataset with any detection for this paper, ordered by
/// dataset_id.
inline std::vector<PresenceRecord> resolve_presence(std::string_view paper_id, std::span<const Detection> detections) {
  std::map<std::string, std::pair<bool, bool>> flags;
  for (const auto& d : detections) {
    if (d.paper_id != paper_id)
      throw Error(ErrorCode::InvalidArgument, "detection for paper '" + d.paper_id + "' passed for '" +
                                                  std::string(paper_id) + "'");
    auto& f = flags[d.dataset_id];
    (is_citation(d.kind) ? f.first : f.second) = true;
  }
  std::vector<PresenceRecord> out;
  for (const auto& [ds, f] : flags)
    if (auto t = resolve_presence(f.first, f.second)) out.push_back({std::string(paper_id), ds, *t});
  return out;
}

}  // namespace datatrace
