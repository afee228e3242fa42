#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "datatrace/catalog.hpp"
#include "datatrace/error.hpp"
#include "datatrace/http_cache.hpp"
#include "datatrace/text.hpp"

namespace datatrace {

enum class AbstractSource { openalex, fulltext, none };
enum class FulltextStatus { available, scraped, unavailable };

inline std::string_view to_string(AbstractSource s) {
  switch (s) {
    case AbstractSource::openalex: return "openalex";
    case AbstractSource::fulltext: return "fulltext";
    case AbstractSource::none: return "none";
  }
  return "none";
}

inline std::string_view to_string(FulltextStatus s) {
  switch (s) {
    case FulltextStatus::available: return "available";
    case FulltextStatus::scraped: return "scraped";
    case FulltextStatus::unavailable: return "unavailable";
  }
  return "unavailable";
}

inline bool has_fulltext(FulltextStatus s) { return s != FulltextStatus::unavailable; }

struct PaperRecord {
  std::string paper_id;
  std::string venue_id;
  int year = 0;
  std::string title;
  std::optional<std::string> doi;
  std::optional<std::string> landing_url;  // publisher page from DBLP `ee`
  std::optional<std::string> openalex_id;
  AbstractSource abstract_source = AbstractSource::none;
  std::optional<std::string> abstract_text;
  std::optional<std::vector<std::string>> referenced_work_ids;
  std::optional<std::string> oa_fulltext_url;
  FulltextStatus fulltext_status = FulltextStatus::unavailable;
  std::optional<std::string> metadata_error;  // NotInIndex / AmbiguousTitleMatch / ...

  bool has_references() const { return referenced_work_ids && !referenced_work_ids->empty(); }
  bool has_openalex_abstract() const {
    return abstract_source == AbstractSource::openalex && abstract_text && !abstract_text->empty();
  }

  friend bool operator==(const PaperRecord&, const PaperRecord&) = default;
};

NLOHMANN_JSON_SERIALIZE_ENUM(AbstractSource, {{AbstractSource::openalex, "openalex"},
                                              {AbstractSource::fulltext, "fulltext"},
                                              {AbstractSource::none, "none"}})
NLOHMANN_JSON_SERIALIZE_ENUM(FulltextStatus, {{FulltextStatus::available, "available"},
                                              {FulltextStatus::scraped, "scraped"},
                                              {FulltextStatus::unavailable, "unavailable"}})

namespace detail {
template <class T>
void put_opt(nlohmann::json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}
template <class T>
void get_opt(const nlohmann::json& j, const char* key, std::optional<T>& v) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) v = it->get<T>();
  else v.reset();
}
}  // namespace detail

inline void to_json(nlohmann::json& j, const PaperRecord& p) {
  j = nlohmann::json{{"paper_id", p.paper_id}, {"venue_id", p.venue_id}, {"year", p.year},
                     {"title", p.title}, {"abstract_source", p.abstract_source},
                     {"fulltext_status", p.fulltext_status}};
  detail::put_opt(j, "doi", p.doi);
  detail::put_opt(j, "landing_url", p.landing_url);
  detail::put_opt(j, "openalex_id", p.openalex_id);
  detail::put_opt(j, "abstract_text", p.abstract_text);
  detail::put_opt(j, "referenced_work_ids", p.referenced_work_ids);
  detail::put_opt(j, "oa_fulltext_url", p.oa_fulltext_url);
  detail::put_opt(j, "metadata_error", p.metadata_error);
}

inline void from_json(const nlohmann::json& j, PaperRecord& p) {
  p.paper_id = j.at("paper_id").get<std::string>();
  p.venue_id = j.at("venue_id").get<std::string>();
  p.year = j.at("year").get<int>();
  p.title = j.value("title", "");
  p.abstract_source = j.value("abstract_source", AbstractSource::none);
  p.fulltext_status = j.value("fulltext_status", FulltextStatus::unavailable);
  detail::get_opt(j, "doi", p.doi);
  detail::get_opt(j, "landing_url", p.landing_url);
  detail::get_opt(j, "openalex_id", p.openalex_id);
  detail::get_opt(j, "abstract_text", p.abstract_text);
  detail::get_opt(j, "referenced_work_ids", p.referenced_work_ids);
  detail::get_opt(j, "oa_fulltext_url", p.oa_fulltext_url);
  detail::get_opt(j, "metadata_error", p.metadata_error);
}

/// OpenAlex abstract encoding: token -> positions in the original text.
using InvertedAbstract = std::map<std::string, std::vector<long long>>;

/// Places every token at its positions and joins with single spaces.
/// Positions must be distinct and cover 0..n-1 exactly.
inline std::string reconstruct_abstract(const InvertedAbstract& idx) {
  std::map<long long, const std::string*> slots;
  for (const auto& [word, positions] : idx) {
    for (auto pos : positions) {
      if (pos < 0) throw Error(ErrorCode::GapInPositions, "negative position " + std::to_string(pos));
      if (!slots.emplace(pos, &word).second)
        throw Error(ErrorCode::DuplicatePosition, "position " + std::to_string(pos) + " used twice");
    }
  }
  std::string out;
  long long expected = 0;
  for (const auto& [pos, word] : slots) {
    if (pos != expected) throw Error(ErrorCode::GapInPositions, "no token at position " + std::to_string(expected));
    if (expected) out.push_back(' ');
    out += *word;
    ++expected;
  }
  return out;
}

inline InvertedAbstract parse_inverted_abstract(const nlohmann::json& j) {
  InvertedAbstract idx;
  for (const auto& [word, positions] : j.items()) idx[word] = positions.get<std::vector<long long>>();
  return idx;
}

/// `https://openalex.org/W123` -> `W123`.
inline std::string short_openalex_id(std::string_view id) {
  auto slash = id.rfind('/');
  return std::string(slash == std::string_view::npos ? id : id.substr(slash + 1));
}

namespace openalex {

inline constexpr std::string_view kWorksUrl = "https://api.openalex.org/works";

inline Params doi_query(std::string_view doi) { return {{"filter", "doi:" + std::string(doi)}}; }

inline Params title_query(std::string_view title) {
  return {{"filter", "title.search:" + text::normalize_title(title)}, {"per-page", "50"}};
}

inline std::optional<std::string> string_at(const nlohmann::json& j, std::initializer_list<const char*> path) {
  const nlohmann::json* cur = &j;
  for (auto key : path) {
    if (!cur->is_object()) return std::nullopt;
    auto it = cur->find(key);
    if (it == cur->end() || it->is_null()) return std::nullopt;
    cur = &*it;
  }
  if (!cur->is_string() || cur->get<std::string>().empty()) return std::nullopt;
  return cur->get<std::string>();
}

inline std::vector<nlohmann::json> results(const HttpResponse& resp, std::string_view what) {
  if (resp.status == 404) throw Error(ErrorCode::NotInIndex, std::string(what));
  if (!resp.ok()) throw Error(ErrorCode::TransportError, std::string(what) + ": HTTP " + std::to_string(resp.status));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(resp.body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::TransportError, std::string(what) + ": unparsable payload: " + e.what());
  }
  if (j.contains("results")) return j["results"].get<std::vector<nlohmann::json>>();
  if (j.contains("id")) return {j};
  return {};
}

inline nlohmann::json lookup_by_doi(CachedClient& client, std::string_view doi) {
  auto found = results(client.get(kWorksUrl, doi_query(doi)), "doi:" + std::string(doi));
  if (found.empty()) throw Error(ErrorCode::NotInIndex, "doi:" + std::string(doi));
  return found.front();
}

/// Exact match on normalized title; more than one distinct hit is ambiguous.
inline nlohmann::json lookup_by_title(CachedClient& client, std::string_view title) {
  auto wanted = text::normalize_title(title);
  if (wanted.empty()) throw Error(ErrorCode::NotInIndex, "empty title");
  auto found = results(client.get(kWorksUrl, title_query(title)), "title:" + wanted);
  std::vector<nlohmann::json> exact;
  std::set<std::string> ids;
  for (auto& w : found) {
    auto t = string_at(w, {"display_name"});
    if (!t) t = string_at(w, {"title"});
    if (!t || text::normalize_title(*t) != wanted) continue;
    if (ids.insert(w.value("id", std::to_string(ids.size()))).second) exact.push_back(std::move(w));
  }
  if (exact.empty()) throw Error(ErrorCode::NotInIndex, "title:" + wanted);
  if (exact.size() > 1)
    throw Error(ErrorCode::AmbiguousTitleMatch, std::to_string(exact.size()) + " works titled '" + wanted + "'");
  return exact.front();
}

/// Copies the fields OpenAlex provides onto the record; absent fields stay
/// absent.
inline void apply_work(PaperRecord& paper, const nlohmann::json& work) {
  if (auto id = string_at(work, {"id"})) paper.openalex_id = short_openalex_id(*id);
  if (!paper.doi)
    if (auto d = string_at(work, {"doi"})) paper.doi = text::normalize_doi(*d);

  paper.referenced_work_ids.reset();
  if (auto it = work.find("referenced_works"); it != work.end() && it->is_array()) {
    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (const auto& r : *it) {
      if (!r.is_string()) continue;
      auto id = short_openalex_id(r.get<std::string>());
      if (seen.insert(id).second) ids.push_back(std::move(id));
    }
    paper.referenced_work_ids = std::move(ids);
  }

  paper.abstract_source = AbstractSource::none;
  paper.abstract_text.reset();
  if (auto it = work.find("abstract_inverted_index"); it != work.end() && it->is_object()) {
    try {
      auto abstract = reconstruct_abstract(parse_inverted_abstract(*it));
      if (!abstract.empty()) {
        paper.abstract_text = std::move(abstract);
        paper.abstract_source = AbstractSource::openalex;
      }
    } catch (const Error&) {
      // malformed index: the abstract is treated as missing
    }
  }

  paper.oa_fulltext_url = string_at(work, {"best_oa_location", "pdf_url"});
  if (!paper.oa_fulltext_url) paper.oa_fulltext_url = string_at(work, {"open_access", "oa_url"});
  if (!paper.oa_fulltext_url) paper.oa_fulltext_url = string_at(work, {"primary_location", "pdf_url"});
}

}  // namespace openalex

namespace dblp {

inline constexpr std::string_view kSearchUrl = "https://dblp.org/search/publ/api";
inline constexpr int kPageSize = 1000;

inline Params page_query(std::string_view stream_key, int offset) {
  return {{"q", "stream:streams/" + std::string(stream_key) + ":"},
          {"format", "json"},
          {"h", std::to_string(kPageSize)},
          {"f", std::to_string(offset)}};
}

inline std::string first_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array() && !v.empty() && v.front().is_string()) return v.front().get<std::string>();
  return {};
}

inline int to_int(const nlohmann::json& v) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_string()) return std::stoi(v.get<std::string>());
  return 0;
}

}  // namespace dblp

/// Lists the publications of a venue's DBLP stream inside its year range.
/// A stream with no publications at all is reported as VenueNotFound.
inline std::vector<PaperRecord> fetch_venue_papers(const VenueRecord& venue, CachedClient& client) {
  std::vector<PaperRecord> out;
  std::set<std::string> seen;
  long long total = 0;
  for (int offset = 0;; offset += dblp::kPageSize) {
    auto resp = client.get(dblp::kSearchUrl, dblp::page_query(venue.dblp_stream_key, offset));
    if (resp.status == 404) throw Error(ErrorCode::VenueNotFound, venue.dblp_stream_key);
    if (!resp.ok()) throw Error(ErrorCode::TransportError, "dblp: HTTP " + std::to_string(resp.status));
    nlohmann::json hits;
    try {
      hits = nlohmann::json::parse(resp.body).at("result").at("hits");
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::TransportError, std::string("dblp: unparsable payload: ") + e.what());
    }
    total = dblp::to_int(hits.value("@total", nlohmann::json("0")));
    auto list = hits.value("hit", nlohmann::json::array());
    if (list.is_object()) list = nlohmann::json::array({list});
    for (const auto& hit : list) {
      const auto& info = hit.at("info");
      if (info.value("type", "") == "Editorship") continue;
      auto key = info.value("key", hit.value("@id", ""));
      int year = dblp::to_int(info.value("year", nlohmann::json(0)));
      if (year < venue.year_range.first || year > venue.year_range.second) continue;
      if (!seen.insert(key).second) continue;
      PaperRecord p;
      p.paper_id = text::slugify(key);
      p.venue_id = venue.venue_id;
      p.year = year;
      p.title = text::collapse_whitespace(info.value("title", ""));
      if (!p.title.empty() && p.title.back() == '.') p.title.pop_back();
      if (auto it = info.find("doi"); it != info.end()) p.doi = text::normalize_doi(dblp::first_string(*it));
      if (auto it = info.find("ee"); it != info.end())
        if (auto ee = dblp::first_string(*it); !ee.empty()) p.landing_url = ee;
      out.push_back(std::move(p));
    }
    if (list.empty() || offset + dblp::kPageSize >= total) break;
  }
  if (total == 0) throw Error(ErrorCode::VenueNotFound, venue.dblp_stream_key);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.paper_id < b.paper_id; });
  return out;
}

/// Looks the paper up in OpenAlex (DOI first, else exact normalized title)
/// and returns an enriched copy.
inline PaperRecord fetch_work_metadata(const PaperRecord& paper, CachedClient& client) {
  PaperRecord out = paper;
  nlohmann::json work;
  if (paper.doi) work = openalex::lookup_by_doi(client, *paper.doi);
  else work = openalex::lookup_by_title(client, paper.title);
  openalex::apply_work(out, work);
  out.metadata_error.reset();
  return out;
}

/// Dataset-paper DOIs resolved to OpenAlex work IDs, done once per run.
struct DatasetWorkIndex {
  std::map<std::string, std::vector<std::string>> works;       // dataset_id -> work IDs
  std::vector<std::pair<std::string, std::string>> unresolved;  // (dataset_id, doi)

  friend bool operator==(const DatasetWorkIndex&, const DatasetWorkIndex&) = default;
};

inline void to_json(nlohmann::json& j, const DatasetWorkIndex& idx) {
  j = nlohmann::json{{"works", idx.works}, {"unresolved", nlohmann::json::array()}};
  for (const auto& [ds, doi] : idx.unresolved) j["unresolved"].push_back({{"dataset_id", ds}, {"doi", doi}});
}

inline void from_json(const nlohmann::json& j, DatasetWorkIndex& idx) {
  idx.works = j.at("works").get<std::map<std::string, std::vector<std::string>>>();
  idx.unresolved.clear();
  for (const auto& u : j.value("unresolved", nlohmann::json::array()))
    idx.unresolved.emplace_back(u.at("dataset_id").get<std::string>(), u.at("doi").get<std::string>());
}

inline DatasetWorkIndex resolve_dataset_works(const std::vector<DatasetRecord>& registry, CachedClient& client) {
  DatasetWorkIndex idx;
  for (const auto& ds : registry) {
    auto& ids = idx.works[ds.dataset_id];
    for (const auto& doi : ds.paper_dois) {
      try {
        auto work = openalex::lookup_by_doi(client, doi);
        if (auto id = openalex::string_at(work, {"id"})) {
          auto sid = short_openalex_id(*id);
          if (std::find(ids.begin(), ids.end(), sid) == ids.end()) ids.push_back(sid);
          continue;
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NotInIndex) throw;
      }
      idx.unresolved.emplace_back(ds.dataset_id, doi);
    }
  }
  return idx;
}

}  // namespace datatrace
