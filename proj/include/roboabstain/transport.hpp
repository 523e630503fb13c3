#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "roboabstain/error.hpp"
#include "roboabstain/io.hpp"

namespace roboabstain {

/// One chat-completions call: optional system prompt, one user text and
/// at most one image.
struct ChatRequest {
  std::string model;
  std::string system_prompt;
  std::string user_text;
  std::optional<std::string> image_png;  // raw PNG bytes
  json sampling = json::object();        // provider overrides, e.g. temperature
  double timeout_s = 120.0;
};

/// Transport failure. Transient failures (connection problems, 429, 5xx)
/// are eligible for retry.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, bool transient, int status = 0)
      : Error(ErrorKind::transport_error, message), transient_(transient), status_(status) {}

  bool transient() const noexcept { return transient_; }
  int status() const noexcept { return status_; }

 private:
  bool transient_;
  int status_;
};

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  /// Returns the assistant text. Must be safe to call concurrently.
  virtual std::string complete(const ChatRequest& request) = 0;
};

/// Refuses every call; used when results must come from caches alone.
class OfflineTransport final : public ChatTransport {
 public:
  std::string complete(const ChatRequest&) override {
    throw TransportError("offline mode: request not present in cache", false);
  }
};

/// Canned replies chosen by substring match on the user text; the first
/// matching rule wins. Counts calls.
class ScriptedTransport final : public ChatTransport {
 public:
  struct Rule {
    std::string contains;
    std::string reply;
  };

  ScriptedTransport(std::vector<Rule> rules, std::string fallback)
      : rules_(std::move(rules)), fallback_(std::move(fallback)) {}

  /// {"rules": [{"contains": ..., "reply": ...}], "default": ...}
  explicit ScriptedTransport(const json& script) : fallback_(script.value("default", std::string())) {
    if (script.contains("rules")) {
      for (const auto& r : script.at("rules")) {
        rules_.push_back({r.at("contains").get<std::string>(), r.at("reply").get<std::string>()});
      }
    }
  }

  std::string complete(const ChatRequest& request) override {
    calls_.fetch_add(1);
    for (const auto& r : rules_) {
      if (request.user_text.find(r.contains) != std::string::npos) return r.reply;
    }
    return fallback_;
  }

  std::size_t calls() const { return calls_.load(); }

 private:
  std::vector<Rule> rules_;
  std::string fallback_;
  std::atomic<std::size_t> calls_{0};
};

struct RetryPolicy {
  int max_attempts = 4;  // total attempts, including the first
  int base_delay_ms = 500;
  int max_delay_ms = 8000;
};

/// Calls `fn`, retrying transient TransportErrors with exponential backoff
/// (base, 2*base, ... capped at max_delay_ms). Other errors propagate.
template <typename Fn>
auto with_retry(const RetryPolicy& policy, Fn&& fn) -> decltype(fn()) {
  int delay = policy.base_delay_ms;
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const TransportError& e) {
      if (!e.transient() || attempt >= std::max(1, policy.max_attempts)) throw;
    }
    if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    delay = std::min(policy.max_delay_ms, std::max(1, delay * 2));
  }
}

/// Runs fn(0..n-1) on up to `max_in_flight` threads.
inline void parallel_for(std::size_t n, std::size_t max_in_flight, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t workers = std::max<std::size_t>(1, std::min(max_in_flight, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace roboabstain
