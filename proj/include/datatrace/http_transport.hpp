#pragma once

// Real network transport. Include only from binaries that link OpenSSL;
// everything else talks to the Transport interface.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <chrono>
#include <string>

#include "datatrace/http_cache.hpp"

namespace datatrace {

class HttpTransport : public Transport {
 public:
  explicit HttpTransport(std::chrono::seconds timeout = std::chrono::seconds(60),
                         std::string user_agent = "datatrace/1.0")
      : timeout_(timeout), user_agent_(std::move(user_agent)) {}

  HttpResponse get(const std::string& url) override {
    auto [origin, target] = split(url);
    auto cli = client(origin);
    auto res = cli.Get(target);
    return convert(res, url);
  }

  HttpResponse post_file(const std::string& url, const FileUpload& file) override {
    auto [origin, target] = split(url);
    auto cli = client(origin);
    httplib::MultipartFormDataItems items = {{file.field, file.content, file.filename, file.content_type}};
    auto res = cli.Post(target, items);
    return convert(res, url);
  }

 private:
  static std::pair<std::string, std::string> split(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorCode::InvalidArgument, "URL without scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
  }

  httplib::Client client(const std::string& origin) const {
    httplib::Client cli(origin);
    cli.set_follow_location(true);
    cli.set_connection_timeout(timeout_);
    cli.set_read_timeout(timeout_);
    cli.set_default_headers({{"User-Agent", user_agent_}});
    return cli;
  }

  static HttpResponse convert(const httplib::Result& res, const std::string& url) {
    if (!res) throw Error(ErrorCode::TransportError, url + ": " + httplib::to_string(res.error()));
    HttpResponse out;
    out.status = res->status;
    out.body = res->body;
    out.content_type = res->get_header_value("Content-Type");
    return out;
  }

  std::chrono::seconds timeout_;
  std::string user_agent_;
};

}  // namespace datatrace
