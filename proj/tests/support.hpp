#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "datatrace/http_cache.hpp"

namespace testing_support {

inline std::filesystem::path fixture(const std::string& rel) { return std::filesystem::path(DATATRACE_FIXTURES) / rel; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "dt") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

/// Scripted transport: responses by exact URL, optional handler fallback,
/// and a record of every call plus the peak number of concurrent calls.
class FakeTransport : public datatrace::Transport {
 public:
  std::map<std::string, datatrace::HttpResponse> responses;
  std::function<datatrace::HttpResponse(const std::string&)> handler;
  std::function<datatrace::HttpResponse(const std::string&, const datatrace::FileUpload&)> post_handler;
  std::chrono::milliseconds latency{0};

  datatrace::HttpResponse get(const std::string& url) override {
    enter(url);
    if (latency.count()) std::this_thread::sleep_for(latency);
    datatrace::HttpResponse r;
    bool found = false;
    {
      std::lock_guard lock(mu_);
      if (auto it = responses.find(url); it != responses.end()) {
        r = it->second;
        found = true;
      }
    }
    if (!found && handler) {
      try {
        r = handler(url);
      } catch (...) {
        --in_flight_;
        throw;
      }
      found = true;
    }
    --in_flight_;
    if (!found) r.status = 404;
    return r;
  }

  datatrace::HttpResponse post_file(const std::string& url, const datatrace::FileUpload& file) override {
    enter(url);
    --in_flight_;
    if (!post_handler) return {503, "", ""};
    return post_handler(url, file);
  }

  std::vector<std::string> calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }
  std::size_t peak() const { return peak_; }

 private:
  void enter(const std::string& url) {
    {
      std::lock_guard lock(mu_);
      calls_.push_back(url);
    }
    auto now = ++in_flight_;
    auto prev = peak_.load();
    while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
    }
  }

  mutable std::mutex mu_;
  std::vector<std::string> calls_;
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> peak_{0};
};

inline datatrace::CacheConfig fast_cache(const std::filesystem::path& dir) {
  datatrace::CacheConfig c;
  c.dir = dir;
  c.spacing = std::chrono::milliseconds(0);
  c.backoff_base = std::chrono::milliseconds(1);
  c.sleep = [](std::chrono::milliseconds) {};
  return c;
}

}  // namespace testing_support
