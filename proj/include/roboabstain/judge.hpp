#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "roboabstain/cache.hpp"
#include "roboabstain/evaluation.hpp"
#include "roboabstain/grounding.hpp"
#include "roboabstain/prompts.hpp"
#include "roboabstain/transport.hpp"
#include "roboabstain/verdict.hpp"

namespace roboabstain {

struct JudgedRecord {
  std::string item_id;
  std::string model;
  std::string variant;
  int repeat = 0;
  Category category = Category::missing_referent;
  std::optional<Verdict> verdict;
  std::string judge;  // judge endpoint label
  std::optional<std::string> judge_reply;
  std::optional<std::string> error;

  friend bool operator==(const JudgedRecord&, const JudgedRecord&) = default;
};

struct JudgeOutcome {
  std::optional<Verdict> verdict;
  std::string reply;
  std::optional<std::string> error;  // parse failure; reply is kept
};

inline std::string judge_cache_key(const std::string& instruction, const std::string& response,
                                   const EndpointConfig& judge) {
  json key = json::object();
  key["kind"] = "judge";
  key["model"] = judge.model;
  key["prompt_sha256"] = sha256_hex(judge_system_prompt());
  key["sampling"] = judge.sampling;
  key["instruction"] = instruction;
  key["response"] = response;
  return sha256_hex(key.dump());
}

/// Classifies one planner response. The raw judge reply is cached by content
/// hash, so a cached reply is parsed again without any call. Transport and
/// auth errors propagate.
inline JudgeOutcome judge_response(const std::string& instruction, const std::string& response,
                                   const EndpointConfig& judge, ChatTransport& transport, const ResultCache& cache,
                                   const RetryPolicy& retry = {}) {
  if (response.empty()) throw Error(ErrorKind::config_error, "cannot judge an empty response");
  const std::string key = judge_cache_key(instruction, response, judge);
  JudgeOutcome out;
  if (auto hit = cache.get(key)) {
    out.reply = hit->at("reply").get<std::string>();
  } else {
    ChatRequest request;
    request.model = judge.model;
    request.system_prompt = judge_system_prompt();
    request.user_text = judge_user_message(instruction, response);
    request.sampling = judge.sampling;
    request.timeout_s = judge.timeout_s;
    out.reply = with_retry(retry, [&] { return transport.complete(request); });
    cache.put(key, json{{"key", key}, {"model", judge.model}, {"reply", out.reply}});
  }
  try {
    out.verdict = parse_verdict(out.reply);
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

/// One judged record per response record, same order. Responses that
/// errored or came back empty are carried over as errors without a call.
inline std::vector<JudgedRecord> judge_all(const std::vector<ResponseRecord>& responses, const EndpointConfig& judge,
                                           ChatTransport& transport, const ResultCache& cache,
                                           std::size_t max_in_flight, const RetryPolicy& retry = {}) {
  std::vector<JudgedRecord> out(responses.size());
  parallel_for(responses.size(), max_in_flight, [&](std::size_t i) {
    const ResponseRecord& r = responses[i];
    JudgedRecord& j = out[i];
    j.item_id = r.item_id;
    j.model = r.model;
    j.variant = r.variant;
    j.repeat = r.repeat;
    j.category = r.category;
    j.judge = judge.label;
    if (r.error) {
      j.error = "response-error: " + *r.error;
      return;
    }
    if (!r.response || r.response->empty()) {
      j.error = "response-error: empty response";
      return;
    }
    try {
      auto outcome = judge_response(r.instruction, *r.response, judge, transport, cache, retry);
      j.verdict = outcome.verdict;
      j.judge_reply = std::move(outcome.reply);
      j.error = std::move(outcome.error);
    } catch (const Error& e) {
      j.error = e.what();
    }
  });
  return out;
}

inline json judged_to_json(const JudgedRecord& r) {
  json j = {{"item_id", r.item_id}, {"model", r.model},   {"variant", r.variant},
            {"repeat", r.repeat},   {"category", to_string(r.category)}};
  j["verdict"] = r.verdict ? json(to_string(*r.verdict)) : json(nullptr);
  j["judge"] = r.judge;
  j["judge_reply"] = r.judge_reply ? json(*r.judge_reply) : json(nullptr);
  j["error"] = r.error ? json(*r.error) : json(nullptr);
  return j;
}

inline JudgedRecord judged_from_json(const json& j) {
  JudgedRecord r;
  r.item_id = j.at("item_id").get<std::string>();
  r.model = j.at("model").get<std::string>();
  r.variant = j.at("variant").get<std::string>();
  r.repeat = j.at("repeat").get<int>();
  r.category = parse_category(j.at("category").get<std::string>());
  if (!j.at("verdict").is_null()) r.verdict = parse_verdict(j["verdict"].get<std::string>());
  r.judge = j.at("judge").get<std::string>();
  if (!j.at("judge_reply").is_null()) r.judge_reply = j["judge_reply"].get<std::string>();
  if (!j.at("error").is_null()) r.error = j["error"].get<std::string>();
  return r;
}

inline std::vector<VerdictObservation> observations_for(const std::vector<JudgedRecord>& judged,
                                                        const std::string& model, const std::string& variant) {
  std::vector<VerdictObservation> out;
  for (const auto& j : judged) {
    if (j.model == model && j.variant == variant) out.push_back({j.item_id, j.repeat, j.verdict});
  }
  return out;
}

}  // namespace roboabstain
