#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "datatrace/acquisition.hpp"
#include "datatrace/analyzer.hpp"
#include "datatrace/catalog.hpp"
#include "datatrace/detector.hpp"
#include "datatrace/digest.hpp"
#include "datatrace/error.hpp"
#include "datatrace/fulltext.hpp"
#include "datatrace/harvester.hpp"
#include "datatrace/http_cache.hpp"
#include "datatrace/reporter.hpp"

namespace datatrace {

namespace fs = std::filesystem;

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The exception of
/// the lowest failing index is rethrown, so failures are reproducible.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::size_t default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

struct RunConfig {
  fs::path datasets = "datasets.csv";
  fs::path venues = "venues.csv";
  fs::path out = "out";
  fs::path cache = "cache";
  std::optional<fs::path> grobid_cache;  // default <cache>/grobid
  std::string grobid_url = "http://localhost:8070";
  std::string mailto;
  bool replay = false;
  std::size_t workers = default_workers();
  int retries = 3;
  long backoff_ms = 500;
  std::size_t per_host_cap = 4;
  long spacing_ms = 100;
  MatcherConfig matcher;
  std::map<std::string, std::string> scrapers;  // venue_id -> "pmlr" | "dir:<path>"

  fs::path grobid_cache_dir() const { return grobid_cache ? *grobid_cache : cache / "grobid"; }

  /// Settings that influence outputs. Paths, worker counts and network
  /// tuning are left out so replays on other machines agree.
  nlohmann::json snapshot() const {
    nlohmann::json j;
    j["title_similarity_threshold"] = matcher.title_similarity_threshold;
    j["excluded_heading_keywords"] = matcher.excluded_heading_keywords;
    j["unknown_heading_eligible"] = matcher.unknown_heading_eligible;
    j["replay"] = replay;
    j["scrapers"] = nlohmann::json::object();
    for (const auto& [venue, spec] : scrapers) j["scrapers"][venue] = spec.starts_with("dir:") ? "dir" : spec;
    return j;
  }
};

namespace config_detail {

inline std::string unquote(std::string v) {
  v = text::trim(v);
  if (auto hash = v.find(" #"); hash != std::string::npos && v.front() != '"') v = text::trim(v.substr(0, hash));
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) v = v.substr(1, v.size() - 2);
  return v;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  auto l = text::to_lower(v);
  if (l == "true" || l == "1" || l == "yes") return true;
  if (l == "false" || l == "0" || l == "no") return false;
  throw Error(ErrorCode::InvalidArgument, key + ": expected a boolean, got '" + v + "'");
}

template <class T>
T to_number(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    T out;
    if constexpr (std::is_floating_point_v<T>) out = static_cast<T>(std::stod(v, &used));
    else out = static_cast<T>(std::stoll(v, &used));
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, key + ": expected a number, got '" + v + "'");
  }
}

}  // namespace config_detail

/// Key-value config (INI syntax; also accepts flat TOML with quoted strings).
/// Relative paths resolve against the config file's directory.
inline RunConfig load_config(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw Error(ErrorCode::ConfigMissing, path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
  const auto base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  auto resolve = [&](const std::string& v) { return fs::path(v).is_absolute() ? fs::path(v) : base / v; };

  RunConfig c;
  if (const char* env = std::getenv("DATATRACE_MAILTO")) c.mailto = env;
  c.datasets = resolve(c.datasets.string());
  c.venues = resolve(c.venues.string());
  c.out = resolve(c.out.string());
  c.cache = resolve(c.cache.string());
  using config_detail::to_number, config_detail::to_bool, config_detail::unquote;
  for (const auto& [key, node] : tree) {
    if (!node.empty()) {
      if (key != "scrapers") throw Error(ErrorCode::InvalidArgument, "config: unknown section [" + key + "]");
      for (const auto& [venue, spec] : node) {
        auto v = unquote(spec.data());
        if (v.starts_with("dir:")) v = "dir:" + resolve(v.substr(4)).string();
        c.scrapers[venue] = v;
      }
      continue;
    }
    auto v = unquote(node.data());
    if (key == "datasets") c.datasets = resolve(v);
    else if (key == "venues") c.venues = resolve(v);
    else if (key == "out") c.out = resolve(v);
    else if (key == "cache") c.cache = resolve(v);
    else if (key == "grobid_cache") c.grobid_cache = resolve(v);
    else if (key == "grobid_url") c.grobid_url = v;
    else if (key == "mailto") c.mailto = v;
    else if (key == "replay") c.replay = to_bool(key, v);
    else if (key == "workers") c.workers = std::max<std::size_t>(1, to_number<std::size_t>(key, v));
    else if (key == "retries") c.retries = to_number<int>(key, v);
    else if (key == "backoff_ms") c.backoff_ms = to_number<long>(key, v);
    else if (key == "per_host_cap") c.per_host_cap = std::max<std::size_t>(1, to_number<std::size_t>(key, v));
    else if (key == "spacing_ms") c.spacing_ms = to_number<long>(key, v);
    else if (key == "title_similarity_threshold") c.matcher.title_similarity_threshold = to_number<double>(key, v);
    else if (key == "excluded_headings") {
      c.matcher.excluded_heading_keywords.clear();
      for (auto& k : text::split_list(v, ';')) c.matcher.excluded_heading_keywords.push_back(text::to_lower(k));
    } else if (key == "unknown_heading_eligible") c.matcher.unknown_heading_eligible = to_bool(key, v);
    else throw Error(ErrorCode::InvalidArgument, "config: unknown key '" + key + "'");
  }
  c.matcher.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Stage artifacts under the output directory

struct StagePaths {
  fs::path out;
  fs::path papers() const { return out / "papers.json"; }
  fs::path dataset_works() const { return out / "dataset_works.json"; }
  fs::path pdfs() const { return out / "pdfs"; }
  fs::path tei() const { return out / "tei"; }
  fs::path stage_detections() const { return out / "stage" / "detections.csv"; }
  fs::path groups() const { return out / "groups.csv"; }
  fs::path presence_records() const { return out / "presence_records.csv"; }
  fs::path stage_counts() const { return out / "stage_counts.json"; }
};

inline void require(const fs::path& p) {
  std::error_code ec;
  if (!fs::exists(p, ec)) throw Error(ErrorCode::StageInputMissing, p.string());
}

inline std::vector<PaperRecord> read_papers(const fs::path& p) {
  require(p);
  return nlohmann::json::parse(fsio::read_file(p)).get<std::vector<PaperRecord>>();
}

inline void write_papers(const fs::path& p, std::vector<PaperRecord> papers) {
  std::sort(papers.begin(), papers.end(), [](const auto& a, const auto& b) { return a.paper_id < b.paper_id; });
  fsio::write_file_atomic(p, nlohmann::json(papers).dump(2) + "\n");
}

/// Per-paper detector pass. Discarded papers yield nothing; papers without
/// full text are scanned in their OpenAlex abstract only.
inline std::vector<Detection> detect_paper(const PaperRecord& paper, const std::optional<std::string>& tei,
                                           const std::vector<DatasetRecord>& registry, const DatasetWorkIndex& works,
                                           const MatcherConfig& matcher) {
  std::vector<Detection> out;
  if (assign_group(paper).group == Group::discarded) return out;
  auto add = [&](std::vector<Detection> ds) { out.insert(out.end(), ds.begin(), ds.end()); };
  if (paper.has_references()) add(detect_citations_by_id(paper, works));
  if (has_fulltext(paper.fulltext_status) && tei) {
    auto doc = parse_tei(*tei, paper.paper_id);
    if (!doc.abstract && paper.abstract_text) doc.abstract = paper.abstract_text;
    add(detect_mentions(doc, registry, matcher));
    add(detect_citations_by_title(doc, registry, matcher));
  } else if (paper.has_openalex_abstract()) {
    add(detect_mentions(paper.paper_id, *paper.abstract_text, registry));
  }
  sort_detections(out);
  return out;
}

class Pipeline {
 public:
  /// `transport` may be null for replay runs.
  Pipeline(RunConfig config, std::shared_ptr<Transport> transport)
      : config_(std::move(config)), transport_(std::move(transport)), paths_{config_.out} {
    CacheConfig cc;
    cc.dir = config_.cache;
    cc.replay_only = config_.replay;
    cc.retries = config_.retries;
    cc.backoff_base = std::chrono::milliseconds(config_.backoff_ms);
    cc.per_host_cap = config_.per_host_cap;
    cc.spacing = std::chrono::milliseconds(config_.spacing_ms);
    cc.mailto = config_.mailto;
    client_ = std::make_unique<CachedClient>(config_.replay ? nullptr : transport_, cc);
  }

  const RunConfig& config() const { return config_; }
  const StagePaths& paths() const { return paths_; }
  CachedClient& client() { return *client_; }

  static const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names = {"harvest", "fetch-fulltext", "convert", "detect", "analyze", "report"};
    return names;
  }

  void run_stage(const std::string& name) {
    if (name == "harvest") harvest();
    else if (name == "fetch-fulltext") fetch_fulltext();
    else if (name == "convert") convert();
    else if (name == "detect") detect();
    else if (name == "analyze") analyze();
    else if (name == "report") report();
    else throw Error(ErrorCode::UnknownSubcommand, name);
  }

  void run_all() {
    for (const auto& s : stage_names()) run_stage(s);
  }

  /// Venue listings plus OpenAlex metadata; papers missing from the index
  /// stay in the corpus with the reason recorded.
  void harvest() {
    auto registry = load_dataset_registry(config_.datasets);
    auto venues = load_venue_list(config_.venues);
    std::vector<PaperRecord> papers;
    for (const auto& v : venues) {
      auto listed = fetch_venue_papers(v, *client_);
      papers.insert(papers.end(), listed.begin(), listed.end());
    }
    parallel_for(papers.size(), config_.workers, [&](std::size_t i) {
      try {
        papers[i] = fetch_work_metadata(papers[i], *client_);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NotInIndex && e.code() != ErrorCode::AmbiguousTitleMatch) throw;
        papers[i].metadata_error = std::string(to_string(e.code()));
      }
    });
    auto works = resolve_dataset_works(registry, *client_);
    fs::create_directories(paths_.out);
    write_papers(paths_.papers(), papers);
    fsio::write_file_atomic(paths_.dataset_works(), nlohmann::json(works).dump(2) + "\n");
    std::size_t resolved = 0;
    for (const auto& p : papers) resolved += p.openalex_id.has_value();
    record_counts({{"harvest.papers", papers.size()}, {"harvest.in_openalex", resolved},
                   {"harvest.unresolved_dataset_dois", works.unresolved.size()}});
  }

  void fetch_fulltext() {
    auto papers = read_papers(paths_.papers());
    PdfStore store(paths_.pdfs());
    fs::create_directories(store.dir());
    auto scrapers = make_scrapers();
    parallel_for(papers.size(), config_.workers,
                 [&](std::size_t i) { acquire_pdf(papers[i], store, *client_, scrapers); });
    auto deduped = dedupe_pdfs(store);
    std::size_t available = 0;
    for (auto& p : papers) {
      std::error_code ec;
      if (!has_fulltext(p.fulltext_status) && fs::exists(store.canonical_path(p.paper_id), ec))
        p.fulltext_status = FulltextStatus::scraped;  // bulk-scraped drop folded in by dedupe
      available += has_fulltext(p.fulltext_status);
    }
    write_papers(paths_.papers(), papers);
    record_counts({{"fetch.fulltext", available}, {"fetch.deduplicated", deduped.size()}});
  }

  /// GROBID conversion. Rejected PDFs downgrade the paper; an unreachable
  /// service fails the stage.
  void convert() {
    auto papers = read_papers(paths_.papers());
    require(paths_.pdfs());
    PdfStore store(paths_.pdfs());
    GrobidConfig gc{config_.grobid_url, config_.grobid_cache_dir(), config_.replay};
    GrobidClient grobid(config_.replay ? nullptr : transport_, gc);
    fs::remove_all(paths_.tei());
    fs::create_directories(paths_.tei());
    std::atomic<std::size_t> converted{0}, failed{0};
    parallel_for(papers.size(), config_.workers, [&](std::size_t i) {
      if (!has_fulltext(papers[i].fulltext_status)) return;
      try {
        convert_to_tei(papers[i], store, grobid, paths_.tei());
        ++converted;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ConversionFailed) throw;
        ++failed;
      }
    });
    write_papers(paths_.papers(), papers);
    record_counts({{"convert.tei", converted.load()}, {"convert.failed", failed.load()}});
  }

  void detect() {
    auto papers = read_papers(paths_.papers());
    require(paths_.dataset_works());
    require(paths_.tei());
    auto registry = load_dataset_registry(config_.datasets);
    auto works = nlohmann::json::parse(fsio::read_file(paths_.dataset_works())).get<DatasetWorkIndex>();

    std::vector<std::vector<Detection>> per_paper(papers.size());
    std::vector<GroupAssignment> groups(papers.size());
    parallel_for(papers.size(), config_.workers, [&](std::size_t i) {
      const auto& p = papers[i];
      groups[i] = assign_group(p);
      std::optional<std::string> tei;
      if (has_fulltext(p.fulltext_status)) {
        auto path = paths_.tei() / (p.paper_id + ".tei.xml");
        require(path);
        tei = fsio::read_file(path);
      }
      per_paper[i] = detect_paper(p, tei, registry, works, config_.matcher);
    });
    std::vector<Detection> all;
    for (auto& d : per_paper) all.insert(all.end(), d.begin(), d.end());
    fs::create_directories(paths_.stage_detections().parent_path());
    fsio::write_file_atomic(paths_.stage_detections(), detections_csv(all));
    fsio::write_file_atomic(paths_.groups(), groups_csv(groups));

    std::map<std::string, std::size_t> counts{{"detect.detections", all.size()}};
    for (const auto& g : groups) ++counts["detect." + std::string(to_string(g.group))];
    record_counts(counts);
  }

  void analyze() {
    auto papers = read_papers(paths_.papers());
    require(paths_.stage_detections());
    auto detections = parse_detections_csv(fsio::read_file(paths_.stage_detections()));
    std::map<std::string, std::vector<Detection>> by_paper;
    for (auto& d : detections) by_paper[d.paper_id].push_back(std::move(d));
    std::vector<PresenceRecord> records;
    for (const auto& [paper_id, ds] : by_paper) {
      auto r = resolve_presence(paper_id, ds);
      records.insert(records.end(), r.begin(), r.end());
    }
    fsio::write_file_atomic(paths_.presence_records(), presence_records_csv(records));
    record_counts({{"analyze.presence_records", records.size()}});
  }

  void report() {
    auto papers = read_papers(paths_.papers());
    require(paths_.presence_records());
    require(paths_.stage_detections());
    auto venues = load_venue_list(config_.venues);
    auto records = parse_presence_records_csv(fsio::read_file(paths_.presence_records()));
    auto detections = parse_detections_csv(fsio::read_file(paths_.stage_detections()));
    auto index = index_papers(papers);
    std::pair<int, int> years{venues.front().year_range.first, venues.front().year_range.second};
    for (const auto& v : venues) {
      years.first = std::min(years.first, v.year_range.first);
      years.second = std::max(years.second, v.year_range.second);
    }
    auto summaries = aggregate_presence(records, index);
    auto series = cumulative_series(records, index, years);

    RunManifest m;
    m.registry_digest = fsio::sha256_file(config_.datasets);
    m.venue_list_digest = fsio::sha256_file(config_.venues);
    m.config = config_.snapshot();
    m.stage_counts = read_counts();
    m.stage_counts["report.summaries"] = summaries.size();
    m.stage_counts["report.series"] = series.size();
    emit_reports(summaries, series, detections, m, paths_.out);
  }

 private:
  ScraperMap make_scrapers() {
    ScraperMap map;
    for (const auto& [venue, spec] : config_.scrapers) {
      if (spec == "pmlr") map[venue] = std::make_shared<PmlrScraper>(*client_);
      else if (spec.starts_with("dir:")) map[venue] = std::make_shared<DirectoryScraper>(spec.substr(4));
      else throw Error(ErrorCode::InvalidArgument, "unknown scraper '" + spec + "' for venue " + venue);
    }
    return map;
  }

  std::map<std::string, std::size_t> read_counts() const {
    std::error_code ec;
    if (!fs::exists(paths_.stage_counts(), ec)) return {};
    return nlohmann::json::parse(fsio::read_file(paths_.stage_counts())).get<std::map<std::string, std::size_t>>();
  }

  void record_counts(const std::map<std::string, std::size_t>& counts) {
    auto all = read_counts();
    for (const auto& [k, v] : counts) all[k] = v;
    fs::create_directories(paths_.out);
    fsio::write_file_atomic(paths_.stage_counts(), nlohmann::json(all).dump(2) + "\n");
  }

  RunConfig config_;
  std::shared_ptr<Transport> transport_;
  StagePaths paths_;
  std::unique_ptr<CachedClient> client_;
};

}  // namespace datatrace
