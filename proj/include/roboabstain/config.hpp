#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "roboabstain/grounding.hpp"
#include "roboabstain/http_transport.hpp"
#include "roboabstain/io.hpp"
#include "roboabstain/prompts.hpp"
#include "roboabstain/transport.hpp"

namespace roboabstain {

/// Everything a run needs besides command-line flags. Secrets never live
/// here; endpoints name the environment variable holding their key.
struct RunConfig {
  GroundingConfig grounding;
  std::vector<EndpointConfig> planners;
  EndpointConfig judge;
  std::vector<std::string> variants{"default"};
  int repeats = 1;
  std::size_t max_in_flight = 4;
  std::size_t per_category_cap = 10;
  RetryPolicy retry;
  bool attach_images = true;
  json source = json::object();  // the parsed file, recorded in manifests
};

namespace detail {

inline void require_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw Error(ErrorKind::config_error, where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw Error(ErrorKind::config_error, where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T config_value(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::config_error, where + "." + key + " has the wrong type");
  }
}

inline EndpointConfig endpoint_from_json(const json& j, const std::string& where, std::initializer_list<const char*> extra = {}) {
  std::vector<const char*> allowed{"label", "provider", "base_url", "model", "api_key_env", "sampling", "script", "timeout_s"};
  allowed.insert(allowed.end(), extra.begin(), extra.end());
  if (!j.is_object()) throw Error(ErrorKind::config_error, where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
      throw Error(ErrorKind::config_error, where + ": unknown key '" + key + "'");
    }
  }
  EndpointConfig e;
  e.model = config_value<std::string>(j, "model", "", where);
  if (e.model.empty()) throw Error(ErrorKind::config_error, where + ".model is required");
  e.label = config_value<std::string>(j, "label", e.model, where);
  e.provider = config_value<std::string>(j, "provider", "openai", where);
  if (e.provider != "openai" && e.provider != "scripted") {
    throw Error(ErrorKind::config_error, where + ".provider must be \"openai\" or \"scripted\"");
  }
  e.base_url = config_value<std::string>(j, "base_url", "", where);
  if (e.provider == "openai" && e.base_url.empty()) throw Error(ErrorKind::config_error, where + ".base_url is required");
  e.api_key_env = config_value<std::string>(j, "api_key_env", "", where);
  e.sampling = j.value("sampling", json::object());
  if (!e.sampling.is_object()) throw Error(ErrorKind::config_error, where + ".sampling must be an object");
  e.script = j.value("script", json::object());
  e.timeout_s = config_value<double>(j, "timeout_s", 120.0, where);
  if (e.timeout_s <= 0) throw Error(ErrorKind::config_error, where + ".timeout_s must be positive");
  return e;
}

}  // namespace detail

/// Endpoint description without secrets, as recorded in manifests.
inline json endpoint_to_json(const EndpointConfig& e) {
  json j = {{"label", e.label}, {"provider", e.provider}, {"base_url", e.base_url},
            {"model", e.model}, {"api_key_env", e.api_key_env}, {"sampling", e.sampling}};
  return j;
}

inline RunConfig run_config_from_json(const json& j) {
  detail::require_keys(j, "config", {"grounding", "planners", "judge", "variants", "repeats", "max_in_flight",
                                     "per_category_cap", "retry", "attach_images"});
  RunConfig c;
  c.source = j;
  if (j.contains("grounding")) {
    c.grounding.endpoint = detail::endpoint_from_json(j["grounding"], "grounding", {"max_retries"});
    c.grounding.max_retries = detail::config_value<int>(j["grounding"], "max_retries", 2, "grounding");
    if (c.grounding.max_retries < 0) throw Error(ErrorKind::config_error, "grounding.max_retries must be >= 0");
  }
  std::set<std::string> labels;
  for (const auto& p : j.value("planners", json::array())) {
    auto e = detail::endpoint_from_json(p, "planners[" + std::to_string(c.planners.size()) + "]");
    if (!labels.insert(e.label).second) throw Error(ErrorKind::config_error, "duplicate planner label " + e.label);
    c.planners.push_back(std::move(e));
  }
  if (j.contains("judge")) c.judge = detail::endpoint_from_json(j["judge"], "judge");
  if (j.contains("variants")) {
    c.variants.clear();
    for (const auto& v : j["variants"]) {
      const auto name = v.get<std::string>();
      parse_variant(name);
      c.variants.push_back(name);
    }
    if (c.variants.empty()) throw Error(ErrorKind::config_error, "variants must not be empty");
  }
  c.repeats = detail::config_value<int>(j, "repeats", 1, "config");
  if (c.repeats < 1) throw Error(ErrorKind::config_error, "repeats must be >= 1");
  const int in_flight = detail::config_value<int>(j, "max_in_flight", 4, "config");
  if (in_flight < 1) throw Error(ErrorKind::config_error, "max_in_flight must be >= 1");
  c.max_in_flight = static_cast<std::size_t>(in_flight);
  const int cap = detail::config_value<int>(j, "per_category_cap", 10, "config");
  if (cap < 1) throw Error(ErrorKind::config_error, "per_category_cap must be >= 1");
  c.per_category_cap = static_cast<std::size_t>(cap);
  if (j.contains("retry")) {
    const json& r = j["retry"];
    detail::require_keys(r, "retry", {"max_attempts", "base_delay_ms", "max_delay_ms"});
    c.retry.max_attempts = detail::config_value<int>(r, "max_attempts", c.retry.max_attempts, "retry");
    c.retry.base_delay_ms = detail::config_value<int>(r, "base_delay_ms", c.retry.base_delay_ms, "retry");
    c.retry.max_delay_ms = detail::config_value<int>(r, "max_delay_ms", c.retry.max_delay_ms, "retry");
    if (c.retry.max_attempts < 1 || c.retry.base_delay_ms < 0 || c.retry.max_delay_ms < 0) {
      throw Error(ErrorKind::config_error, "retry values out of range");
    }
  }
  c.grounding.transport_retry = c.retry;
  c.attach_images = detail::config_value<bool>(j, "attach_images", true, "config");
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  json j;
  try {
    j = read_json_file(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::config_error, e.what());
  }
  return run_config_from_json(j);
}

using TransportFactory = std::function<std::shared_ptr<ChatTransport>(const EndpointConfig&)>;

/// HTTP transport for "openai" endpoints, canned replies for "scripted".
inline std::shared_ptr<ChatTransport> make_transport(const EndpointConfig& e) {
  if (e.provider == "scripted") return std::make_shared<ScriptedTransport>(e.script);
  return std::make_shared<HttpChatTransport>(e.base_url, api_key_from_env(e.api_key_env));
}

}  // namespace roboabstain
