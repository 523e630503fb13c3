#pragma once

#include <httplib.h>

#include <cstdlib>
#include <string>

#include "roboabstain/image.hpp"
#include "roboabstain/transport.hpp"

namespace roboabstain {

/// OpenAI-compatible request body: optional system message, then one user
/// message holding the text and, when present, the image as a data URL.
inline json build_chat_body(const ChatRequest& request) {
  json body = json::object();
  body["model"] = request.model;
  json messages = json::array();
  if (!request.system_prompt.empty()) {
    messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
  }
  json content = json::array();
  content.push_back({{"type", "text"}, {"text", request.user_text}});
  if (request.image_png) {
    content.push_back({{"type", "image_url"}, {"image_url", {{"url", png_data_url(*request.image_png)}}}});
  }
  messages.push_back({{"role", "user"}, {"content", std::move(content)}});
  body["messages"] = std::move(messages);
  for (const auto& [key, value] : request.sampling.items()) body[key] = value;
  return body;
}

/// Extracts choices[0].message.content; accepts either a string or an array
/// of text parts.
inline std::string parse_chat_reply(const std::string& body_text) {
  json body;
  try {
    body = json::parse(body_text);
  } catch (const json::parse_error& e) {
    throw TransportError(std::string("response body is not JSON: ") + e.what(), false);
  }
  try {
    const json& content = body.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    if (content.is_array()) {
      std::string text;
      for (const auto& part : content) {
        if (part.is_object() && part.value("type", "") == "text") text += part.value("text", "");
      }
      return text;
    }
  } catch (const json::exception&) {
  }
  throw TransportError("response has no choices[0].message.content", false);
}

class HttpChatTransport final : public ChatTransport {
 public:
  /// `base_url` like "https://api.example.com/v1"; requests go to
  /// base_url + "/chat/completions".
  HttpChatTransport(std::string base_url, std::string api_key) : api_key_(std::move(api_key)) {
    while (!base_url.empty() && base_url.back() == '/') base_url.pop_back();
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorKind::config_error, "base_url needs a scheme: " + base_url);
    const auto path_start = base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
      origin_ = base_url;
    } else {
      origin_ = base_url.substr(0, path_start);
      path_prefix_ = base_url.substr(path_start);
    }
  }

  std::string complete(const ChatRequest& request) override {
    httplib::Client client(origin_);
    const auto seconds = static_cast<time_t>(request.timeout_s);
    const auto micros = static_cast<time_t>((request.timeout_s - static_cast<double>(seconds)) * 1e6);
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    const std::string payload = build_chat_body(request).dump();
    auto res = client.Post(path_prefix_ + "/chat/completions", headers, payload, "application/json");
    if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()), true);
    const int status = res->status;
    if (status == 401 || status == 403) {
      throw Error(ErrorKind::auth_error, "endpoint rejected credentials (HTTP " + std::to_string(status) + ")");
    }
    if (status < 200 || status >= 300) {
      const bool transient = status == 408 || status == 409 || status == 429 || status >= 500;
      throw TransportError("HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200), transient, status);
    }
    return parse_chat_reply(res->body);
  }

 private:
  std::string origin_;
  std::string path_prefix_;
  std::string api_key_;
};

/// Reads an API key from the named environment variable. An empty name means
/// no authentication; a named but unset variable is an auth error.
inline std::string api_key_from_env(const std::string& env_name) {
  if (env_name.empty()) return {};
  const char* value = std::getenv(env_name.c_str());
  if (value == nullptr || *value == '\0') {
    throw Error(ErrorKind::auth_error, "environment variable " + env_name + " is not set");
  }
  return value;
}

}  // namespace roboabstain
