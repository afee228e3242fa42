#include <catch_amalgamated.hpp>

#include "datatrace/acquisition.hpp"
#include "datatrace/fulltext.hpp"
#include "support.hpp"

using namespace datatrace;
using testing_support::FakeTransport;
using testing_support::fixture;
using testing_support::TempDir;

namespace {

std::string tei(const std::string& name) { return fsio::read_file(fixture("tei/" + name)); }

bool has_code(const Error& e, ErrorCode c) { return e.code() == c; }

}  // namespace

TEST_CASE("TEI element counts match the fixture", "[fulltext]") {
  auto doc = parse_tei(tei("sample_full.tei.xml"), "p1");
  CHECK(doc.paper_id == "p1");
  CHECK(doc.sections.size() == 5);
  CHECK(doc.figure_captions.size() == 2);
  CHECK(doc.table_captions.size() == 1);
  CHECK(doc.footnotes.size() == 3);
  CHECK(doc.references.size() == 20);
  CHECK(doc.warnings.empty());
  REQUIRE(doc.abstract);
  CHECK(*doc.abstract == "We segment cardiac MRI from the ACDC challenge.\nCode is public.");
  CHECK(doc.sections[1].heading == "Related Work");
  CHECK(doc.sections[2].paragraphs.size() == 2);
  CHECK(doc.sections[2].paragraphs[1] == "We also test on M&Ms.");
  CHECK(doc.table_captions[0].text == "Dice on the BRATS and ACDC test sets.");
  CHECK(doc.footnotes[0].text == "https://www.creatis.insa-lyon.fr/Challenge/acdc/");
  for (std::size_t i = 0; i < doc.sections.size(); ++i) CHECK(doc.sections[i].anchor == i);
}

TEST_CASE("bibliography entry with title and DOI", "[fulltext]") {
  auto doc = parse_tei(tei("sample_full.tei.xml"));
  const auto& r0 = doc.references[0];
  REQUIRE(r0.parsed_title);
  CHECK(r0.parsed_title->starts_with("Deep Learning Techniques for Automatic MRI"));
  CHECK(r0.parsed_doi == "10.1109/tmi.2018.2837502");
  CHECK(r0.raw.starts_with("Bernard, O., et al."));
  const auto& r1 = doc.references[1];
  CHECK(r1.parsed_title == "Pattern Recognition and Machine Learning");  // monograph title fallback
  CHECK_FALSE(r1.parsed_doi);
}

TEST_CASE("TEI edge cases", "[fulltext]") {
  auto no_abs = parse_tei(tei("no_abstract.tei.xml"));
  CHECK_FALSE(no_abs.abstract);
  CHECK(no_abs.sections.size() == 1);

  auto refs_only = parse_tei(tei("references_only.tei.xml"));
  CHECK(refs_only.sections.empty());
  CHECK(refs_only.references.size() == 1);
  CHECK(refs_only.warnings == std::vector<ErrorCode>{ErrorCode::EmptyBody});

  CHECK_THROWS_MATCHES(parse_tei(tei("malformed.tei.xml")), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return has_code(e, ErrorCode::MalformedXML); }));
}

TEST_CASE("parse_tei is deterministic", "[fulltext][property]") {
  auto a = parse_tei(tei("sample_full.tei.xml"));
  auto b = parse_tei(tei("sample_full.tei.xml"));
  CHECK(a.sections.size() == b.sections.size());
  for (std::size_t i = 0; i < a.sections.size(); ++i) CHECK(a.sections[i].text() == b.sections[i].text());
  for (std::size_t i = 0; i < a.references.size(); ++i) CHECK(a.references[i].raw == b.references[i].raw);
}

// ---------------------------------------------------------------------------

namespace {

const std::string kPdf = "%PDF-1.5\nfake body\n%%EOF\n";

PaperRecord paper(const std::string& id, std::optional<std::string> oa) {
  PaperRecord p;
  p.paper_id = id;
  p.venue_id = "midl";
  p.oa_fulltext_url = std::move(oa);
  p.landing_url = "https://proceedings.mlr.press/v143/" + id + ".html";
  return p;
}

}  // namespace

TEST_CASE("PDF acquisition: OA link, scraper fallback, unavailable", "[acquisition]") {
  TempDir dir;
  auto fake = std::make_shared<FakeTransport>();
  fake->responses["https://oa.example.org/a.pdf"] = {200, kPdf, "application/pdf"};
  fake->responses["https://oa.example.org/html-not-pdf"] = {200, "<html>", "text/html"};
  fake->responses["https://proceedings.mlr.press/v143/b/b.pdf"] = {200, kPdf + "b", "application/pdf"};
  CachedClient client(fake, testing_support::fast_cache(dir / "cache"));
  PdfStore store(dir / "pdfs");
  ScraperMap scrapers{{"midl", std::make_shared<PmlrScraper>(client)}};

  auto a = paper("a", "https://oa.example.org/a.pdf");
  CHECK(acquire_pdf(a, store, client, scrapers) == FulltextStatus::available);
  CHECK(fsio::read_file(store.canonical_path("a")) == kPdf);

  auto b = paper("b", "https://oa.example.org/html-not-pdf");
  CHECK(acquire_pdf(b, store, client, scrapers) == FulltextStatus::scraped);
  CHECK(b.fulltext_status == FulltextStatus::scraped);

  auto c = paper("c", std::nullopt);
  c.venue_id = "miccai";
  CHECK(acquire_pdf(c, store, client, scrapers) == FulltextStatus::unavailable);
  CHECK_FALSE(store.artifact("c"));
}

TEST_CASE("PMLR landing pages map to PDF URLs", "[acquisition]") {
  CHECK(PmlrScraper::pdf_url("https://proceedings.mlr.press/v143/smith21a.html") ==
        "https://proceedings.mlr.press/v143/smith21a/smith21a.pdf");
  CHECK_FALSE(PmlrScraper::pdf_url("https://doi.org/10.1/x"));
}

TEST_CASE("dedupe keeps one artifact per paper", "[acquisition]") {
  TempDir dir;
  PdfStore store(dir / "pdfs");
  std::filesystem::create_directories(store.dir());
  fsio::write_file_atomic(store.canonical_path("same"), kPdf);
  fsio::write_file_atomic(store.scraped_path("same"), kPdf);
  fsio::write_file_atomic(store.canonical_path("diff"), kPdf);
  fsio::write_file_atomic(store.scraped_path("diff"), kPdf + "venue copy");
  fsio::write_file_atomic(store.scraped_path("only"), kPdf);
  auto report = dedupe_pdfs(store);
  REQUIRE(report.size() == 2);
  CHECK(report[0].paper_id == "diff");
  CHECK(report[0].reason == "prefer-scraped");
  CHECK(report[1].paper_id == "same");
  CHECK(report[1].reason == "identical");
  CHECK(fsio::read_file(store.canonical_path("diff")) == kPdf + "venue copy");
  for (auto id : {"same", "diff", "only"}) {
    CHECK(std::filesystem::exists(store.canonical_path(id)));
    CHECK_FALSE(std::filesystem::exists(store.scraped_path(id)));
  }
}

TEST_CASE("GROBID conversion is cached by PDF digest", "[acquisition]") {
  TempDir dir;
  auto fake = std::make_shared<FakeTransport>();
  int posts = 0;
  fake->post_handler = [&](const std::string& url, const FileUpload& f) -> HttpResponse {
    ++posts;
    CHECK(url == "http://grobid:8070/api/processFulltextDocument");
    CHECK(f.field == "input");
    if (f.content.find("broken") != std::string::npos) return {500, "boom", ""};
    return {200, "<TEI xmlns=\"http://www.tei-c.org/ns/1.0\"><text/></TEI>", "application/xml"};
  };
  GrobidClient grobid(fake, {"http://grobid:8070", dir / "grobid", false});
  auto t1 = grobid.convert(kPdf);
  auto t2 = grobid.convert(kPdf);
  CHECK(t1 == t2);
  CHECK(posts == 1);
  CHECK(std::filesystem::exists(grobid.cache_path(kPdf)));

  CHECK_THROWS_MATCHES(grobid.convert("not a pdf"), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return has_code(e, ErrorCode::ConversionFailed); }));
  CHECK_THROWS_MATCHES(grobid.convert(kPdf + "broken"), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return has_code(e, ErrorCode::ConversionFailed); }));

  GrobidClient replay(nullptr, {"http://grobid:8070", dir / "grobid", true});
  CHECK(replay.convert(kPdf) == t1);
  CHECK_THROWS_MATCHES(replay.convert(kPdf + "broken"), Error,  // remembered failure
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return has_code(e, ErrorCode::ConversionFailed); }));
  CHECK_THROWS_MATCHES(replay.convert(kPdf + "never seen"), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return has_code(e, ErrorCode::ServiceUnavailable); }));
}

TEST_CASE("GROBID down is ServiceUnavailable", "[acquisition]") {
  TempDir dir;
  auto fake = std::make_shared<FakeTransport>();  // no post handler: 503
  GrobidClient grobid(fake, {"http://grobid:8070", dir / "grobid", false});
  CHECK_THROWS_MATCHES(grobid.convert(kPdf), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return has_code(e, ErrorCode::ServiceUnavailable); }));
}

TEST_CASE("convert_to_tei writes the per-paper file and downgrades failures", "[acquisition]") {
  TempDir dir;
  auto fake = std::make_shared<FakeTransport>();
  fake->post_handler = [](const std::string&, const FileUpload& f) -> HttpResponse {
    if (f.content.find("bad") != std::string::npos) return {200, "<html>error</html>", ""};
    return {200, "<TEI/>", ""};
  };
  GrobidClient grobid(fake, {"http://g", dir / "grobid", false});
  PdfStore store(dir / "pdfs");
  store.put("ok", kPdf);
  store.put("bad", kPdf + "bad");
  auto ok = paper("ok", std::nullopt);
  ok.fulltext_status = FulltextStatus::available;
  auto path = convert_to_tei(ok, store, grobid, dir / "tei");
  CHECK(path == dir / "tei" / "ok.tei.xml");
  CHECK(fsio::read_file(path) == "<TEI/>");
  auto bad = paper("bad", std::nullopt);
  bad.fulltext_status = FulltextStatus::available;
  CHECK_THROWS_AS(convert_to_tei(bad, store, grobid, dir / "tei"), Error);
  CHECK(bad.fulltext_status == FulltextStatus::unavailable);
}
