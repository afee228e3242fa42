#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace datatrace::text {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_ascii_alnum(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), ascii_lower);
  return out;
}

inline std::string_view trim_view(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

inline bool starts_with_icase(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (ascii_lower(s[i]) != ascii_lower(prefix[i])) return false;
  return true;
}

/// Trims and replaces every whitespace run with a single space.
inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.emplace_back(s.substr(start));
      return parts;
    }
    parts.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

/// Splits on `sep`, trims each piece and drops the empty ones.
inline std::vector<std::string> split_list(std::string_view s, char sep = ';') {
  std::vector<std::string> out;
  for (auto& part : split(s, sep)) {
    auto t = trim(part);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// UTF-8 decoding. Invalid sequences decode to U+FFFD one byte at a time.
inline std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    auto b = static_cast<unsigned char>(s[i]);
    std::size_t len = b < 0x80 ? 1 : (b >> 5) == 0x6 ? 2 : (b >> 4) == 0xE ? 3 : (b >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + len > s.size()) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    char32_t cp = len == 1 ? b : len == 2 ? (b & 0x1F) : len == 3 ? (b & 0x0F) : (b & 0x07);
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      auto cb = static_cast<unsigned char>(s[i + k]);
      if ((cb & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cb & 0x3F);
    }
    if (!ok) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    auto b = static_cast<unsigned char>(s[i]);
    std::size_t len = b < 0x80 ? 1 : (b >> 5) == 0x6 ? 2 : (b >> 4) == 0xE ? 3 : (b >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k)
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
    i += len;
  }
  return true;
}

// ASCII punctuation plus the Latin-1 and General Punctuation blocks (quotes,
// dashes, ellipsis) that PDF extraction commonly produces.
inline bool is_punctuation(char32_t cp) {
  if (cp < 0x80) {
    auto c = static_cast<char>(cp);
    return cp > 0x20 && cp < 0x7F && !is_ascii_alnum(c);
  }
  if (cp >= 0xA1 && cp <= 0xBF) return true;
  if (cp == 0xD7 || cp == 0xF7) return true;
  if (cp >= 0x2010 && cp <= 0x205E) return true;
  return false;
}

inline bool is_unicode_space(char32_t cp) {
  return cp == 0xA0 || (cp >= 0x2000 && cp <= 0x200B) || cp == 0x202F || cp == 0x205F ||
         cp == 0x3000;
}

/// Title normalization used by citation matching: ASCII lowercase,
/// punctuation replaced by spaces, whitespace collapsed.
inline std::string normalize_title(std::string_view s) {
  std::string spaced;
  spaced.reserve(s.size());
  for (char32_t cp : decode_utf8(s)) {
    if (is_punctuation(cp) || is_unicode_space(cp)) {
      spaced.push_back(' ');
    } else if (cp < 0x80) {
      spaced.push_back(ascii_lower(static_cast<char>(cp)));
    } else {
      append_utf8(spaced, cp);
    }
  }
  return collapse_whitespace(spaced);
}

/// Returns the bare lowercase DOI (`10.xxxx/...`), or nullopt when the input
/// does not contain one after stripping resolver and `doi:` prefixes.
inline std::optional<std::string> normalize_doi(std::string_view raw) {
  auto s = trim_view(raw);
  for (std::string_view prefix : {"https://doi.org/", "http://doi.org/", "https://dx.doi.org/",
                                  "http://dx.doi.org/", "doi.org/", "doi:"}) {
    if (starts_with_icase(s, prefix)) {
      s.remove_prefix(prefix.size());
      s = trim_view(s);
      break;
    }
  }
  if (s.size() < 6 || s.substr(0, 3) != "10.") return std::nullopt;
  auto slash = s.find('/');
  if (slash == std::string_view::npos || slash <= 3 || slash + 1 >= s.size()) return std::nullopt;
  for (char c : s)
    if (is_space(c)) return std::nullopt;
  return to_lower(s);
}

struct UrlParts {
  std::string scheme;  // empty when absent
  std::string host;
  std::string path_and_query;  // starts with '/' when nonempty
};

inline UrlParts split_url(std::string_view url) {
  UrlParts parts;
  auto s = trim_view(url);
  if (auto pos = s.find("://"); pos != std::string_view::npos) {
    parts.scheme = to_lower(s.substr(0, pos));
    s.remove_prefix(pos + 3);
  }
  auto end = s.find_first_of("/?#");
  parts.host = to_lower(s.substr(0, end));
  if (end != std::string_view::npos) parts.path_and_query = std::string(s.substr(end));
  return parts;
}

/// Registry URL normalization: lowercase scheme and host, drop trailing '/'.
inline std::string normalize_url(std::string_view url) {
  auto parts = split_url(url);
  std::string out = parts.scheme.empty() ? std::string() : parts.scheme + "://";
  out += parts.host;
  out += parts.path_and_query;
  while (!out.empty() && out.back() == '/') out.pop_back();
  return out;
}

/// Scheme-less, `www.`-less host+path used for substring comparison of URLs.
inline std::string url_match_key(std::string_view url) {
  auto parts = split_url(url);
  std::string host = parts.host;
  if (host.rfind("www.", 0) == 0) host.erase(0, 4);
  std::string out = host + parts.path_and_query;
  while (!out.empty() && out.back() == '/') out.pop_back();
  return out;
}

/// Filesystem-safe identifier: keeps [A-Za-z0-9._-], maps the rest to '_'.
inline std::string slugify(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) out.push_back(is_ascii_alnum(c) || c == '.' || c == '-' || c == '_' ? c : '_');
  while (!out.empty() && (out.front() == '.' || out.front() == '_')) out.erase(out.begin());
  return out;
}

}  // namespace datatrace::text
