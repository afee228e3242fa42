#pragma once

#include <expat.h>

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "datatrace/error.hpp"
#include "datatrace/text.hpp"

namespace datatrace {

enum class Eligibility { eligible, excluded, unknown };

struct Section {
  std::string heading;  // verbatim from <head>, may be empty
  std::vector<std::string> paragraphs;
  Eligibility eligibility = Eligibility::unknown;
  std::size_t anchor = 0;

  /// Text the detector scans; spans are offsets into this string.
  std::string text() const { return text::join(paragraphs, "\n"); }

  friend bool operator==(const Section&, const Section&) = default;
};

enum class CaptionKind { figure, table };

struct Caption {
  CaptionKind kind = CaptionKind::figure;
  std::string text;
  std::size_t anchor = 0;  // index among captions of the same kind

  friend bool operator==(const Caption&, const Caption&) = default;
};

struct Footnote {
  std::string text;
  std::size_t anchor = 0;

  friend bool operator==(const Footnote&, const Footnote&) = default;
};

struct ReferenceEntry {
  std::string raw;
  std::optional<std::string> parsed_title;
  std::optional<std::string> parsed_doi;

  friend bool operator==(const ReferenceEntry&, const ReferenceEntry&) = default;
};

struct StructuredDocument {
  std::string paper_id;
  std::optional<std::string> abstract;
  std::vector<Section> sections;
  std::vector<Caption> figure_captions;
  std::vector<Caption> table_captions;
  std::vector<Footnote> footnotes;
  std::vector<ReferenceEntry> references;
  std::vector<ErrorCode> warnings;  // non-fatal: EmptyBody

  friend bool operator==(const StructuredDocument&, const StructuredDocument&) = default;
};

namespace xml {

/// Minimal element tree. Text runs are children with an empty name.
struct Node {
  std::string name;  // local name, namespace prefix stripped
  std::vector<std::pair<std::string, std::string>> attrs;
  std::string text;  // only for text nodes
  std::vector<Node> children;

  bool is_text() const { return name.empty(); }

  std::string_view attr(std::string_view key) const {
    for (const auto& [k, v] : attrs) {
      auto colon = k.find(':');
      std::string_view local = colon == std::string::npos ? std::string_view(k) : std::string_view(k).substr(colon + 1);
      if (k == key || local == key) return v;
    }
    return {};
  }

  const Node* child(std::string_view n) const {
    for (const auto& c : children)
      if (c.name == n) return &c;
    return nullptr;
  }
};

namespace detail {

struct Builder {
  Node root;
  std::vector<Node*> stack{&root};
};

inline std::string local_name(const char* qname) {
  std::string_view s(qname);
  auto colon = s.rfind(':');
  return std::string(colon == std::string_view::npos ? s : s.substr(colon + 1));
}

inline void on_start(void* data, const XML_Char* name, const XML_Char** atts) {
  auto* b = static_cast<Builder*>(data);
  Node n;
  n.name = local_name(name);
  for (int i = 0; atts[i]; i += 2) n.attrs.emplace_back(atts[i], atts[i + 1]);
  auto* parent = b->stack.back();
  parent->children.push_back(std::move(n));
  b->stack.push_back(&parent->children.back());
}

inline void on_end(void* data, const XML_Char*) { static_cast<Builder*>(data)->stack.pop_back(); }

inline void on_text(void* data, const XML_Char* s, int len) {
  auto* parent = static_cast<Builder*>(data)->stack.back();
  if (!parent->children.empty() && parent->children.back().is_text()) {
    parent->children.back().text.append(s, static_cast<std::size_t>(len));
    return;
  }
  Node t;
  t.text.assign(s, static_cast<std::size_t>(len));
  parent->children.push_back(std::move(t));
}

}  // namespace detail

/// Parses a document and returns its root element.
inline Node parse(std::string_view xml_text) {
  std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(XML_ParserCreate("UTF-8"),
                                                                                       &XML_ParserFree);
  if (!parser) throw Error(ErrorCode::MalformedXML, "cannot create XML parser");
  detail::Builder builder;
  XML_SetUserData(parser.get(), &builder);
  XML_SetElementHandler(parser.get(), detail::on_start, detail::on_end);
  XML_SetCharacterDataHandler(parser.get(), detail::on_text);
  if (XML_Parse(parser.get(), xml_text.data(), static_cast<int>(xml_text.size()), XML_TRUE) == XML_STATUS_ERROR) {
    throw Error(ErrorCode::MalformedXML,
                std::string(XML_ErrorString(XML_GetErrorCode(parser.get()))) + " at line " +
                    std::to_string(XML_GetCurrentLineNumber(parser.get())));
  }
  for (auto& c : builder.root.children)
    if (!c.is_text()) return std::move(c);
  throw Error(ErrorCode::MalformedXML, "no root element");
}

/// Concatenated descendant text. With `spaced`, element boundaries are
/// treated as word breaks (for structured records such as biblStruct).
inline void append_text(const Node& n, std::string& out, bool spaced) {
  if (n.is_text()) {
    out += n.text;
    return;
  }
  for (const auto& c : n.children) {
    append_text(c, out, spaced);
    if (spaced && !c.is_text()) out.push_back(' ');
  }
}

inline std::string text_of(const Node& n, bool spaced = false) {
  std::string out;
  append_text(n, out, spaced);
  return text::collapse_whitespace(out);
}

template <class Fn>
void for_each_element(const Node& n, Fn&& fn) {
  for (const auto& c : n.children) {
    if (c.is_text()) continue;
    if (!fn(c)) continue;  // returning false prunes the subtree
    for_each_element(c, fn);
  }
}

}  // namespace xml

namespace tei_detail {

inline bool is_footnote(const xml::Node& n) {
  return n.name == "note" && text::to_lower(n.attr("place")) == "foot";
}

inline void collect_section(const xml::Node& div, StructuredDocument& doc) {
  Section s;
  if (const auto* head = div.child("head")) s.heading = xml::text_of(*head);
  for (const auto& c : div.children) {
    if (c.name != "p") continue;
    auto t = xml::text_of(c);
    if (!t.empty()) s.paragraphs.push_back(std::move(t));
  }
  if (!s.paragraphs.empty()) {
    s.anchor = doc.sections.size();
    doc.sections.push_back(std::move(s));
  }
}

inline void collect_figure(const xml::Node& fig, StructuredDocument& doc) {
  bool is_table = text::to_lower(fig.attr("type")) == "table";
  std::string caption;
  if (const auto* desc = fig.child("figDesc")) caption = xml::text_of(*desc);
  if (caption.empty())
    if (const auto* head = fig.child("head")) caption = xml::text_of(*head);
  if (caption.empty()) return;
  auto& list = is_table ? doc.table_captions : doc.figure_captions;
  list.push_back({is_table ? CaptionKind::table : CaptionKind::figure, std::move(caption), list.size()});
}

inline ReferenceEntry collect_reference(const xml::Node& entry) {
  ReferenceEntry ref;
  std::optional<std::string> analytic_title, monogr_title;
  xml::for_each_element(entry, [&](const xml::Node& n) {
    if (n.name == "note" && n.attr("type") == "raw_reference") {
      ref.raw = xml::text_of(n);
      return false;
    }
    if (n.name == "analytic") {
      if (const auto* t = n.child("title"); t && !analytic_title) analytic_title = xml::text_of(*t);
    } else if (n.name == "monogr") {
      if (const auto* t = n.child("title"); t && !monogr_title) monogr_title = xml::text_of(*t);
    } else if (n.name == "idno" && text::to_lower(n.attr("type")) == "doi" && !ref.parsed_doi) {
      ref.parsed_doi = text::normalize_doi(xml::text_of(n));
    }
    return true;
  });
  if (analytic_title && !analytic_title->empty()) ref.parsed_title = analytic_title;
  else if (monogr_title && !monogr_title->empty()) ref.parsed_title = monogr_title;
  if (ref.raw.empty()) ref.raw = xml::text_of(entry, true);
  return ref;
}

}  // namespace tei_detail

/// Maps GROBID TEI onto a StructuredDocument: header abstract, one Section
/// per body/back <div> with paragraphs, <figure>/<figure type="table">
/// descriptions as captions, <note place="foot"> as footnotes and
/// <listBibl> entries as references.
inline StructuredDocument parse_tei(std::string_view tei, std::string paper_id = {}) {
  auto root = xml::parse(tei);
  StructuredDocument doc;
  doc.paper_id = std::move(paper_id);

  const xml::Node* header = root.name == "teiHeader" ? &root : root.child("teiHeader");
  if (header) {
    xml::for_each_element(*header, [&](const xml::Node& n) {
      if (n.name != "abstract") return true;
      std::vector<std::string> paras;
      xml::for_each_element(n, [&](const xml::Node& p) {
        if (p.name != "p") return true;
        if (auto t = xml::text_of(p); !t.empty()) paras.push_back(std::move(t));
        return false;
      });
      auto abstract = paras.empty() ? xml::text_of(n) : text::join(paras, "\n");
      if (!abstract.empty() && !doc.abstract) doc.abstract = std::move(abstract);
      return false;
    });
  }

  const xml::Node* body_text = root.name == "text" ? &root : root.child("text");
  if (body_text) {
    xml::for_each_element(*body_text, [&](const xml::Node& n) {
      if (n.name == "listBibl") {
        for (const auto& entry : n.children)
          if (entry.name == "biblStruct" || entry.name == "bibl") {
            auto ref = tei_detail::collect_reference(entry);
            if (!ref.raw.empty()) doc.references.push_back(std::move(ref));
          }
        return false;
      }
      if (n.name == "div") {
        tei_detail::collect_section(n, doc);
        return true;  // nested divs become their own sections
      }
      if (n.name == "figure") {
        tei_detail::collect_figure(n, doc);
        return false;
      }
      if (tei_detail::is_footnote(n)) {
        if (auto t = xml::text_of(n); !t.empty()) doc.footnotes.push_back({std::move(t), doc.footnotes.size()});
        return false;
      }
      return true;
    });
  }
  if (doc.sections.empty()) doc.warnings.push_back(ErrorCode::EmptyBody);
  return doc;
}

}  // namespace datatrace
