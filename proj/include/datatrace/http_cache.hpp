#pragma once

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "datatrace/digest.hpp"
#include "datatrace/error.hpp"
#include "datatrace/text.hpp"

namespace datatrace {

using Params = std::map<std::string, std::string>;

struct HttpResponse {
  int status = 0;
  std::string body;
  std::string content_type;

  bool ok() const { return status >= 200 && status < 300; }
};

struct FileUpload {
  std::string field;
  std::string filename;
  std::string content;
  std::string content_type = "application/pdf";
};

/// Network seam. Implementations throw Error(TransportError) for connection
/// failures and return non-2xx statuses as ordinary responses.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse get(const std::string& url) = 0;
  virtual HttpResponse post_file(const std::string& url, const FileUpload& file) = 0;
};

inline std::string percent_encode(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (text::is_ascii_alnum(static_cast<char>(c)) || c == '-' || c == '.' || c == '_' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}

/// `url?k1=v1&k2=v2` with keys sorted and values percent-encoded. This string
/// is both the request target and (minus excluded keys) the cache key.
inline std::string build_url(std::string_view url, const Params& params) {
  std::string out(url);
  char sep = out.find('?') == std::string::npos ? '?' : '&';
  for (const auto& [k, v] : params) {
    out.push_back(sep);
    out += percent_encode(k);
    out.push_back('=');
    out += percent_encode(v);
    sep = '&';
  }
  return out;
}

/// Counting admission per host: at most `cap` requests in flight and at
/// least `spacing` between consecutive request starts.
class RateLimiter {
 public:
  using Clock = std::chrono::steady_clock;

  RateLimiter(std::size_t per_host_cap = 4, std::chrono::milliseconds spacing = std::chrono::milliseconds(100))
      : cap_(std::max<std::size_t>(1, per_host_cap)), spacing_(spacing) {}

  class Permit {
   public:
    Permit(RateLimiter* owner, std::string host) : owner_(owner), host_(std::move(host)) {}
    Permit(Permit&& other) noexcept : owner_(std::exchange(other.owner_, nullptr)), host_(std::move(other.host_)) {}
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;
    Permit& operator=(Permit&&) = delete;
    ~Permit() {
      if (owner_) owner_->release(host_);
    }

   private:
    RateLimiter* owner_;
    std::string host_;
  };

  Permit acquire(const std::string& host) {
    std::unique_lock lock(mu_);
    auto& st = hosts_[host];
    for (;;) {
      if (st.in_flight < cap_) {
        auto now = Clock::now();
        if (now >= st.next_start) break;
        cv_.wait_until(lock, st.next_start);
      } else {
        cv_.wait(lock);
      }
    }
    ++st.in_flight;
    st.next_start = Clock::now() + spacing_;
    return Permit(this, host);
  }

  std::size_t cap() const { return cap_; }

 private:
  struct HostState {
    std::size_t in_flight = 0;
    Clock::time_point next_start{};
  };

  void release(const std::string& host) {
    {
      std::lock_guard lock(mu_);
      --hosts_[host].in_flight;
    }
    cv_.notify_all();
  }

  std::size_t cap_;
  std::chrono::milliseconds spacing_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::unordered_map<std::string, HostState> hosts_;
};

struct CacheConfig {
  std::filesystem::path dir = "cache";
  bool replay_only = false;  // a miss is an error instead of a network call
  bool refresh = false;      // ignore existing entries and refetch
  int retries = 3;
  std::chrono::milliseconds backoff_base{500};
  std::size_t per_host_cap = 4;
  std::chrono::milliseconds spacing{100};
  std::string mailto;  // attached to api.openalex.org requests, never part of the key
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
};

/// Persistent response cache in front of a Transport. Entries live at
/// `<dir>/<host>/<sha256(key)>.json` as a small JSON envelope holding the
/// status and the body (`body` for UTF-8 text, `body_base64` otherwise).
class CachedClient {
 public:
  CachedClient(std::shared_ptr<Transport> transport, CacheConfig config)
      : transport_(std::move(transport)), config_(std::move(config)),
        limiter_(config_.per_host_cap, config_.spacing) {}

  static std::string cache_key(std::string_view url, const Params& params) { return build_url(url, params); }

  std::filesystem::path entry_path(std::string_view url, const Params& params) const {
    auto host = text::split_url(url).host;
    if (host.empty()) host = "_";
    return config_.dir / text::slugify(host) / (sha256_hex(cache_key(url, params)) + ".json");
  }

  /// Cached GET. 5xx, 429 and connection failures are retried with
  /// exponential backoff; other statuses are cached and returned as-is.
  HttpResponse get(std::string_view url, const Params& params = {}) {
    auto path = entry_path(url, params);
    auto key_lock = lock_key(path.string());
    std::lock_guard guard(*key_lock);

    if (!config_.refresh) {
      if (auto hit = read_entry(path)) {
        ++hits_;
        return *hit;
      }
    }
    if (config_.replay_only || !transport_)
      throw Error(ErrorCode::TransportError, "cache miss in replay mode: " + cache_key(url, params));

    Params request_params = params;
    auto host = text::split_url(url).host;
    if (!config_.mailto.empty() && host == "api.openalex.org") request_params["mailto"] = config_.mailto;
    auto target = build_url(url, request_params);

    HttpResponse resp;
    std::string last_error;
    for (int attempt = 0;; ++attempt) {
      try {
        auto permit = limiter_.acquire(host);
        ++network_calls_;
        resp = transport_->get(target);
        if (resp.status != 429 && resp.status < 500) break;
        last_error = "HTTP " + std::to_string(resp.status);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::TransportError) throw;
        last_error = e.detail();
        resp.status = 0;
      }
      if (attempt >= config_.retries) {
        if (resp.status == 429) throw Error(ErrorCode::RateLimited, target);
        throw Error(ErrorCode::TransportError, target + " after " + std::to_string(attempt + 1) +
                                                   " attempts: " + last_error);
      }
      config_.sleep(config_.backoff_base * (1 << attempt));
    }
    write_entry(path, cache_key(url, params), resp);
    return resp;
  }

  /// Drops the stored entry so the next request refetches.
  bool evict(std::string_view url, const Params& params = {}) {
    std::error_code ec;
    return std::filesystem::remove(entry_path(url, params), ec);
  }

  Transport* transport() const { return transport_.get(); }
  const CacheConfig& config() const { return config_; }
  RateLimiter& limiter() { return limiter_; }
  std::size_t network_calls() const { return network_calls_; }
  std::size_t cache_hits() const { return hits_; }

  static std::string encode_entry(std::string_view key, const HttpResponse& resp) {
    nlohmann::json j;
    j["url"] = key;
    j["status"] = resp.status;
    if (!resp.content_type.empty()) j["content_type"] = resp.content_type;
    if (text::is_valid_utf8(resp.body)) j["body"] = resp.body;
    else j["body_base64"] = base64_encode(resp.body);
    return j.dump(1) + "\n";
  }

  static HttpResponse decode_entry(std::string_view bytes) {
    auto j = nlohmann::json::parse(bytes);
    HttpResponse r;
    r.status = j.at("status").get<int>();
    r.content_type = j.value("content_type", "");
    if (j.contains("body_base64")) r.body = base64_decode(j["body_base64"].get<std::string>());
    else r.body = j.value("body", "");
    return r;
  }

 private:
  std::shared_ptr<std::mutex> lock_key(const std::string& key) {
    std::lock_guard lock(keys_mu_);
    auto& slot = key_locks_[key];
    if (!slot) slot = std::make_shared<std::mutex>();
    return slot;
  }

  static std::optional<HttpResponse> read_entry(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    try {
      return decode_entry(fsio::read_file(path));
    } catch (const nlohmann::json::exception&) {
      return std::nullopt;  // corrupt entry: treat as a miss
    }
  }

  static void write_entry(const std::filesystem::path& path, std::string_view key, const HttpResponse& resp) {
    fsio::write_file_atomic(path, encode_entry(key, resp));
  }

  std::shared_ptr<Transport> transport_;
  CacheConfig config_;
  RateLimiter limiter_;
  std::mutex keys_mu_;
  std::unordered_map<std::string, std::shared_ptr<std::mutex>> key_locks_;
  std::atomic<std::size_t> network_calls_{0};
  std::atomic<std::size_t> hits_{0};
};

}  // namespace datatrace
