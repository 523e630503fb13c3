#pragma once

#include <optional>
#include <string>

#include "roboabstain/bundled_data.hpp"
#include "roboabstain/hash.hpp"
#include "roboabstain/image.hpp"
#include "roboabstain/io.hpp"
#include "roboabstain/scene.hpp"
#include "roboabstain/transport.hpp"
#include "roboabstain/vocab.hpp"

namespace roboabstain {

/// Where and how to reach one chat-completions model.
struct EndpointConfig {
  std::string label;
  std::string provider = "openai";  // "openai" (HTTP) or "scripted"
  std::string base_url;
  std::string model;
  std::string api_key_env;
  json sampling = json::object();
  json script = json::object();  // replies for the scripted provider
  double timeout_s = 120.0;
};

struct GroundingConfig {
  EndpointConfig endpoint;
  int max_retries = 2;
  fs::path cache_dir;
  RetryPolicy transport_retry;
};

namespace detail {

inline void replace_all(std::string& text, std::string_view from, std::string_view to) {
  for (auto pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
    text.replace(pos, from.size(), to);
  }
}

}  // namespace detail

/// The grounding prompt with the vocabulary and schema blocks filled in.
/// Doubled braces in the template are format escapes and become single.
inline std::string build_grounding_prompt(const VocabRegistry& vocab) {
  std::string prompt(bundled::grounding_prompt);
  detail::replace_all(prompt, "{{", "{");
  detail::replace_all(prompt, "}}", "}");
  detail::replace_all(prompt, "{Vocabularies here}", render_vocab_block(vocab));
  detail::replace_all(prompt, "{JSON Schema here}", std::string(bundled::grounding_schema));
  return prompt;
}

/// Candidate JSON text: everything from the first '{' to the last '}'.
/// Code fences and chatter around the object fall away with it.
inline std::string repair_response(std::string_view text) {
  const auto first = text.find('{');
  const auto last = text.rfind('}');
  if (first == std::string_view::npos || last == std::string_view::npos || last < first) {
    throw Error(ErrorKind::no_json_object_found, "no JSON object in model reply");
  }
  return std::string(text.substr(first, last - first + 1));
}

inline std::string grounding_cache_key(const std::string& content_hash, const std::string& model,
                                       const std::string& prompt_hash) {
  return content_hash + "." + sha256_hex(model + "\n" + prompt_hash).substr(0, 16);
}

struct GroundingResult {
  ImageRef image;
  SceneRepresentation scene;
  bool from_cache = false;
  int attempts = 0;
};

/// Cached scene for these image bytes, model and prompt, if any.
inline std::optional<GroundingResult> lookup_grounding_cache(const fs::path& cache_dir, const ImageRef& image,
                                                             const std::string& model, const std::string& prompt,
                                                             const VocabRegistry& vocab) {
  if (cache_dir.empty()) return std::nullopt;
  const fs::path file = cache_dir / (grounding_cache_key(image.content_hash, model, sha256_hex(prompt)) + ".json");
  if (!fs::exists(file)) return std::nullopt;
  const json entry = read_json_file(file);
  GroundingResult out;
  out.image = image;
  out.image.width = entry.at("width").get<int>();
  out.image.height = entry.at("height").get<int>();
  out.scene = scene_from_json(entry.at("scene"), vocab);
  out.from_cache = true;
  return out;
}

/// Runs the grounding prompt against `image` until a reply parses into a
/// valid scene. Every attempt re-sends the identical prompt. Transient
/// transport failures are retried under cfg.transport_retry and do not
/// consume the max_retries budget, which counts invalid replies only.
inline GroundingResult ground_scene(const PreparedImage& image, const GroundingConfig& cfg,
                                    const VocabRegistry& vocab, ChatTransport& transport) {
  if (cfg.max_retries < 0) throw Error(ErrorKind::config_error, "max_retries must be >= 0");
  const std::string prompt = build_grounding_prompt(vocab);
  if (auto hit = lookup_grounding_cache(cfg.cache_dir, image.ref, cfg.endpoint.model, prompt, vocab)) return *hit;

  ChatRequest request;
  request.model = cfg.endpoint.model;
  request.user_text = prompt;
  request.image_png = image.png;
  request.sampling = cfg.endpoint.sampling;
  request.timeout_s = cfg.endpoint.timeout_s;

  std::string last_problem;
  for (int attempt = 1; attempt <= cfg.max_retries + 1; ++attempt) {
    const std::string reply = with_retry(cfg.transport_retry, [&] { return transport.complete(request); });
    try {
      SceneRepresentation scene = parse_scene(repair_response(reply), vocab);
      if (!cfg.cache_dir.empty()) {
        json entry = json::object();
        entry["content_hash"] = image.ref.content_hash;
        entry["model"] = cfg.endpoint.model;
        entry["prompt_sha256"] = sha256_hex(prompt);
        entry["width"] = image.ref.width;
        entry["height"] = image.ref.height;
        entry["scene"] = scene_to_json(scene);
        const auto key = grounding_cache_key(image.ref.content_hash, cfg.endpoint.model, sha256_hex(prompt));
        write_file_atomic(cfg.cache_dir / (key + ".json"), dump_pretty(entry));
      }
      return {image.ref, std::move(scene), false, attempt};
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::no_json_object_found && e.kind() != ErrorKind::malformed_json &&
          e.kind() != ErrorKind::invalid_scene) {
        throw;
      }
      last_problem = e.what();
    }
  }
  throw Error(ErrorKind::grounding_failed, std::to_string(cfg.max_retries + 1) +
                                               " invalid replies for " + image.ref.path.string() +
                                               "; last: " + last_problem);
}

}  // namespace roboabstain
