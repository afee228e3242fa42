#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "datatrace/digest.hpp"
#include "datatrace/error.hpp"
#include "datatrace/harvester.hpp"
#include "datatrace/http_cache.hpp"

namespace datatrace {

inline bool looks_like_pdf(std::string_view bytes) { return bytes.substr(0, 5) == "%PDF-"; }

/// `pdfs/<paper_id>.pdf` is the canonical artifact. A bulk scraper may drop
/// `pdfs/<paper_id>.scraped.pdf` next to it; dedupe_pdfs folds those in.
class PdfStore {
 public:
  explicit PdfStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path canonical_path(std::string_view paper_id) const {
    return dir_ / (std::string(paper_id) + ".pdf");
  }
  std::filesystem::path scraped_path(std::string_view paper_id) const {
    return dir_ / (std::string(paper_id) + ".scraped.pdf");
  }

  std::optional<std::filesystem::path> artifact(std::string_view paper_id) const {
    std::error_code ec;
    for (auto p : {canonical_path(paper_id), scraped_path(paper_id)})
      if (std::filesystem::exists(p, ec)) return p;
    return std::nullopt;
  }

  void put(std::string_view paper_id, std::string_view bytes) const {
    fsio::write_file_atomic(canonical_path(paper_id), bytes);
  }

 private:
  std::filesystem::path dir_;
};

/// Per-venue fallback when the open-access link fails.
class Scraper {
 public:
  virtual ~Scraper() = default;
  virtual std::optional<std::string> fetch(const PaperRecord& paper) = 0;
};

/// Serves `<dir>/<paper_id>.pdf` (pre-scraped drops, test fixtures).
class DirectoryScraper : public Scraper {
 public:
  explicit DirectoryScraper(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::optional<std::string> fetch(const PaperRecord& paper) override {
    auto path = dir_ / (paper.paper_id + ".pdf");
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    return fsio::read_file(path);
  }

 private:
  std::filesystem::path dir_;
};

/// PMLR proceedings: `.../v143/name21a.html` -> `.../v143/name21a/name21a.pdf`.
class PmlrScraper : public Scraper {
 public:
  explicit PmlrScraper(CachedClient& client) : client_(client) {}

  static std::optional<std::string> pdf_url(std::string_view landing) {
    if (landing.find("proceedings.mlr.press/") == std::string_view::npos) return std::nullopt;
    if (!landing.ends_with(".html")) return std::nullopt;
    auto stem_start = landing.rfind('/') + 1;
    auto stem = landing.substr(stem_start, landing.size() - stem_start - 5);
    if (stem.empty()) return std::nullopt;
    return std::string(landing.substr(0, stem_start)) + std::string(stem) + "/" + std::string(stem) + ".pdf";
  }

  std::optional<std::string> fetch(const PaperRecord& paper) override {
    if (!paper.landing_url) return std::nullopt;
    auto url = pdf_url(*paper.landing_url);
    if (!url) return std::nullopt;
    auto resp = client_.get(*url);
    if (!resp.ok()) return std::nullopt;
    return resp.body;
  }

 private:
  CachedClient& client_;
};

using ScraperMap = std::map<std::string, std::shared_ptr<Scraper>>;  // venue_id -> scraper

/// Tries the open-access link, then the venue scraper. A missing full text
/// marks the paper unavailable instead of throwing; only replay-mode cache
/// misses propagate, since they mean the recorded corpus is incomplete.
inline FulltextStatus acquire_pdf(PaperRecord& paper, const PdfStore& store, CachedClient& client,
                                  const ScraperMap& scrapers) {
  if (paper.oa_fulltext_url) {
    HttpResponse resp;
    try {
      resp = client.get(*paper.oa_fulltext_url);
    } catch (const Error& e) {
      bool network = e.code() == ErrorCode::TransportError || e.code() == ErrorCode::RateLimited;
      if (!network || client.config().replay_only) throw;
    }
    if (resp.ok() && looks_like_pdf(resp.body)) {
      store.put(paper.paper_id, resp.body);
      return paper.fulltext_status = FulltextStatus::available;
    }
  }
  if (auto it = scrapers.find(paper.venue_id); it != scrapers.end() && it->second) {
    if (auto bytes = it->second->fetch(paper); bytes && looks_like_pdf(*bytes)) {
      store.put(paper.paper_id, *bytes);
      return paper.fulltext_status = FulltextStatus::scraped;
    }
  }
  std::error_code ec;
  std::filesystem::remove(store.canonical_path(paper.paper_id), ec);
  return paper.fulltext_status = FulltextStatus::unavailable;
}

struct DedupeEntry {
  std::string paper_id;
  std::filesystem::path removed;
  std::string reason;  // "identical" or "prefer-scraped"

  friend bool operator==(const DedupeEntry&, const DedupeEntry&) = default;
};

/// Leaves exactly one artifact per paper at the canonical path. Identical
/// content keeps the canonical file; differing content keeps the scraped
/// copy (venue-canonical) and moves it into place.
inline std::vector<DedupeEntry> dedupe_pdfs(const PdfStore& store) {
  namespace fs = std::filesystem;
  std::vector<DedupeEntry> report;
  std::error_code ec;
  if (!fs::exists(store.dir(), ec)) return report;
  std::vector<std::string> scraped_ids;
  for (const auto& entry : fs::directory_iterator(store.dir())) {
    auto name = entry.path().filename().string();
    constexpr std::string_view suffix = ".scraped.pdf";
    if (entry.is_regular_file() && name.size() > suffix.size() && name.ends_with(suffix))
      scraped_ids.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(scraped_ids.begin(), scraped_ids.end());
  for (const auto& id : scraped_ids) {
    auto canonical = store.canonical_path(id);
    auto scraped = store.scraped_path(id);
    if (!fs::exists(canonical, ec)) {
      fs::rename(scraped, canonical);
      continue;
    }
    if (fsio::sha256_file(canonical) == fsio::sha256_file(scraped)) {
      fs::remove(scraped);
      report.push_back({id, scraped, "identical"});
    } else {
      fs::rename(scraped, canonical);  // replaces the open-access copy
      report.push_back({id, canonical, "prefer-scraped"});
    }
  }
  return report;
}

struct GrobidConfig {
  std::string base_url = "http://localhost:8070";
  std::filesystem::path cache_dir = "cache/grobid";
  bool replay_only = false;
};

/// GROBID `processFulltextDocument` with conversions cached by PDF digest
/// at `<cache_dir>/<sha256>.tei.xml` (`<sha256>.failed` for rejections).
class GrobidClient {
 public:
  GrobidClient(std::shared_ptr<Transport> transport, GrobidConfig config)
      : transport_(std::move(transport)), config_(std::move(config)) {}

  std::filesystem::path cache_path(std::string_view pdf_bytes) const {
    return config_.cache_dir / (sha256_hex(pdf_bytes) + ".tei.xml");
  }

  /// Remembered service rejections, so replays reproduce them.
  std::filesystem::path failure_path(std::string_view pdf_bytes) const {
    return config_.cache_dir / (sha256_hex(pdf_bytes) + ".failed");
  }

  std::string convert(std::string_view pdf_bytes) {
    if (!looks_like_pdf(pdf_bytes)) throw Error(ErrorCode::ConversionFailed, "input is not a PDF");
    auto cached = cache_path(pdf_bytes);
    std::error_code ec;
    if (std::filesystem::exists(cached, ec)) {
      ++hits_;
      return fsio::read_file(cached);
    }
    auto failed = failure_path(pdf_bytes);
    if (std::filesystem::exists(failed, ec)) {
      ++hits_;
      throw Error(ErrorCode::ConversionFailed, fsio::read_file(failed));
    }
    if (config_.replay_only || !transport_)
      throw Error(ErrorCode::ServiceUnavailable, "no cached conversion in replay mode: " + cached.filename().string());
    HttpResponse resp;
    try {
      ++service_calls_;
      resp = transport_->post_file(config_.base_url + "/api/processFulltextDocument",
                                   {"input", "paper.pdf", std::string(pdf_bytes), "application/pdf"});
    } catch (const Error& e) {
      if (e.code() == ErrorCode::TransportError) throw Error(ErrorCode::ServiceUnavailable, e.detail());
      throw;
    }
    if (resp.status == 503 || resp.status == 0) throw Error(ErrorCode::ServiceUnavailable, "GROBID busy or down");
    if (!resp.ok() || resp.body.find("<TEI") == std::string::npos) {
      auto why = "GROBID returned HTTP " + std::to_string(resp.status);
      fsio::write_file_atomic(failed, why);
      throw Error(ErrorCode::ConversionFailed, why);
    }
    fsio::write_file_atomic(cached, resp.body);
    return resp.body;
  }

  std::size_t service_calls() const { return service_calls_; }
  std::size_t cache_hits() const { return hits_; }

 private:
  std::shared_ptr<Transport> transport_;
  GrobidConfig config_;
  std::atomic<std::size_t> service_calls_{0};
  std::atomic<std::size_t> hits_{0};
};

/// Converts the stored artifact and writes `<tei_dir>/<paper_id>.tei.xml`.
/// A ConversionFailed downgrades the paper to unavailable and is rethrown.
inline std::filesystem::path convert_to_tei(PaperRecord& paper, const PdfStore& store, GrobidClient& grobid,
                                            const std::filesystem::path& tei_dir) {
  auto pdf = store.artifact(paper.paper_id);
  if (!pdf) {
    paper.fulltext_status = FulltextStatus::unavailable;
    throw Error(ErrorCode::ConversionFailed, "no PDF for " + paper.paper_id);
  }
  std::string tei;
  try {
    tei = grobid.convert(fsio::read_file(*pdf));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConversionFailed) paper.fulltext_status = FulltextStatus::unavailable;
    throw;
  }
  auto out = tei_dir / (paper.paper_id + ".tei.xml");
  fsio::write_file_atomic(out, tei);
  return out;
}

}  // namespace datatrace
