#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "roboabstain/cache.hpp"
#include "roboabstain/dataset.hpp"
#include "roboabstain/grounding.hpp"
#include "roboabstain/hash.hpp"
#include "roboabstain/image.hpp"
#include "roboabstain/prompts.hpp"
#include "roboabstain/transport.hpp"
#include "roboabstain/verdict.hpp"

namespace roboabstain {

struct ResponseRecord {
  std::string item_id;
  std::string model;  // endpoint label
  std::string variant;
  int repeat = 0;
  Category category = Category::missing_referent;
  std::string instruction;
  std::optional<std::string> response;
  std::int64_t latency_ms = 0;
  std::string request_hash;
  std::optional<std::string> error;

  friend bool operator==(const ResponseRecord&, const ResponseRecord&) = default;
};

inline bool response_order(const ResponseRecord& a, const ResponseRecord& b) {
  if (a.model != b.model) return a.model < b.model;
  if (a.variant != b.variant) return a.variant < b.variant;
  if (a.item_id != b.item_id) return a.item_id < b.item_id;
  return a.repeat < b.repeat;
}

/// Cache key for one planner call. Besides item, model, variant, repeat and
/// sampling parameters it covers the instruction text and the prompt text,
/// so editing either never serves a stale reply.
inline std::string request_hash(const BenchmarkItem& item, const EndpointConfig& endpoint, PromptVariant variant,
                                int repeat) {
  json key = json::object();
  key["kind"] = "planner";
  key["item_id"] = item.item_id;
  key["instruction"] = item.instruction;
  key["model"] = endpoint.model;
  key["variant"] = to_string(variant);
  key["prompt_sha256"] = sha256_hex(build_planner_prompt(variant));
  key["repeat"] = repeat;
  key["sampling"] = endpoint.sampling;
  return sha256_hex(key.dump());
}

struct EvaluationOptions {
  int repeats = 1;
  std::size_t max_in_flight = 4;
  RetryPolicy retry;
  bool attach_images = true;
};

/// One record per (item, repeat), successes and failures alike, sorted by
/// (model, variant, item_id, repeat). Cached replies are reused without a
/// network call; failures are not cached so a rerun tries them again.
inline std::vector<ResponseRecord> run_evaluation(const std::vector<BenchmarkItem>& benchmark,
                                                  const EndpointConfig& endpoint, PromptVariant variant,
                                                  const EvaluationOptions& opts, ChatTransport& transport,
                                                  const ResultCache& cache) {
  if (opts.repeats < 1) throw Error(ErrorKind::config_error, "repeats must be >= 1");
  if (opts.max_in_flight < 1) throw Error(ErrorKind::config_error, "max_in_flight must be >= 1");
  const std::string system_prompt = build_planner_prompt(variant);
  const std::size_t reps = static_cast<std::size_t>(opts.repeats);
  std::vector<ResponseRecord> out(benchmark.size() * reps);

  parallel_for(out.size(), opts.max_in_flight, [&](std::size_t job) {
    const BenchmarkItem& item = benchmark[job / reps];
    ResponseRecord& rec = out[job];
    rec.item_id = item.item_id;
    rec.model = endpoint.label;
    rec.variant = std::string(to_string(variant));
    rec.repeat = static_cast<int>(job % reps);
    rec.category = item.category;
    rec.instruction = item.instruction;
    rec.request_hash = request_hash(item, endpoint, variant, rec.repeat);

    if (auto hit = cache.get(rec.request_hash)) {
      rec.response = hit->at("response").get<std::string>();
      rec.latency_ms = hit->at("latency_ms").get<std::int64_t>();
      return;
    }
    try {
      ChatRequest request;
      request.model = endpoint.model;
      request.system_prompt = system_prompt;
      request.user_text = planner_user_message(item.instruction);
      request.sampling = endpoint.sampling;
      request.timeout_s = endpoint.timeout_s;
      if (opts.attach_images) {
        if (item.image_path.empty()) {
          throw Error(ErrorKind::io_error, "item has no image_path (set attach_images to false for text-only runs)");
        }
        request.image_png = prepare_image(item.image_path).png;
      }
      const auto start = std::chrono::steady_clock::now();
      std::string reply = with_retry(opts.retry, [&] { return transport.complete(request); });
      rec.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start)
                           .count();
      rec.response = std::move(reply);
      cache.put(rec.request_hash, json{{"request_hash", rec.request_hash},
                                       {"item_id", rec.item_id},
                                       {"model", endpoint.model},
                                       {"variant", rec.variant},
                                       {"repeat", rec.repeat},
                                       {"response", *rec.response},
                                       {"latency_ms", rec.latency_ms}});
    } catch (const Error& e) {
      rec.error = e.what();
    }
  });
  std::sort(out.begin(), out.end(), response_order);
  return out;
}

inline json response_to_json(const ResponseRecord& r) {
  json j = {{"item_id", r.item_id},
            {"model", r.model},
            {"variant", r.variant},
            {"repeat", r.repeat},
            {"category", to_string(r.category)},
            {"instruction", r.instruction}};
  j["response"] = r.response ? json(*r.response) : json(nullptr);
  j["latency_ms"] = r.latency_ms;
  j["request_hash"] = r.request_hash;
  j["error"] = r.error ? json(*r.error) : json(nullptr);
  return j;
}

inline ResponseRecord response_from_json(const json& j) {
  ResponseRecord r;
  r.item_id = j.at("item_id").get<std::string>();
  r.model = j.at("model").get<std::string>();
  r.variant = j.at("variant").get<std::string>();
  r.repeat = j.at("repeat").get<int>();
  r.category = parse_category(j.at("category").get<std::string>());
  r.instruction = j.at("instruction").get<std::string>();
  if (!j.at("response").is_null()) r.response = j["response"].get<std::string>();
  r.latency_ms = j.at("latency_ms").get<std::int64_t>();
  r.request_hash = j.at("request_hash").get<std::string>();
  if (!j.at("error").is_null()) r.error = j["error"].get<std::string>();
  return r;
}

// ---------------------------------------------------------------------------
// Repeat-run variance

struct VerdictObservation {
  std::string item_id;
  int repeat = 0;
  std::optional<Verdict> verdict;
};

struct ItemSplit {
  std::string item_id;
  int runs = 0;
  int abstain = 0;
  double fraction = 0.0;  // abstain / runs
  double variance = 0.0;  // fraction * (1 - fraction), Bernoulli variance
};

struct VarianceSummary {
  std::vector<ItemSplit> items;  // sorted by item_id
  double mean_fraction = 0.0;
  double fraction_variance = 0.0;    // population variance of per-item fractions
  double mean_item_variance = 0.0;   // mean of per-item Bernoulli variances
  std::vector<double> run_rates;     // abstention rate of each repeat index
  double run_rate_variance = 0.0;    // population variance of run_rates
};

namespace detail {

inline std::pair<double, double> mean_and_variance(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return {mean, var / static_cast<double>(xs.size())};
}

}  // namespace detail

/// Per-item abstain/act split across repeats plus aggregate spread. Every
/// observation needs a verdict.
inline VarianceSummary summarize_variance(const std::vector<VerdictObservation>& obs) {
  std::map<std::string, ItemSplit> by_item;
  std::map<int, std::pair<int, int>> by_repeat;  // repeat -> (abstain, total)
  for (const auto& o : obs) {
    if (!o.verdict) {
      throw Error(ErrorKind::missing_verdicts,
                  "no verdict for " + o.item_id + " repeat " + std::to_string(o.repeat));
    }
    auto& s = by_item[o.item_id];
    s.item_id = o.item_id;
    ++s.runs;
    auto& r = by_repeat[o.repeat];
    ++r.second;
    if (*o.verdict == Verdict::abstain) {
      ++s.abstain;
      ++r.first;
    }
  }
  VarianceSummary out;
  std::vector<double> fractions, variances;
  for (auto& [_, s] : by_item) {
    s.fraction = static_cast<double>(s.abstain) / s.runs;
    s.variance = s.fraction * (1.0 - s.fraction);
    fractions.push_back(s.fraction);
    variances.push_back(s.variance);
    out.items.push_back(s);
  }
  std::tie(out.mean_fraction, out.fraction_variance) = detail::mean_and_variance(fractions);
  out.mean_item_variance = detail::mean_and_variance(variances).first;
  for (const auto& [_, r] : by_repeat) out.run_rates.push_back(static_cast<double>(r.first) / r.second);
  out.run_rate_variance = detail::mean_and_variance(out.run_rates).second;
  return out;
}

}  // namespace roboabstain
