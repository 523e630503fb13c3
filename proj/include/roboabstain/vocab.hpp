#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "roboabstain/bundled_data.hpp"
#include "roboabstain/error.hpp"
#include "roboabstain/io.hpp"

namespace roboabstain {

/// Controlled vocabularies for Phase-1 output. Every list keeps file order,
/// which is also the order used when rendering the grounding prompt.
struct VocabRegistry {
  std::vector<std::pair<std::string, std::vector<std::string>>> attribute_vocab;
  std::vector<std::string> state_vocab;
  std::vector<std::string> size_vocab;  // ordered smallest to largest
  std::vector<std::string> location_type_vocab;
  std::vector<std::string> modality_vocab;

  const std::vector<std::string>* attribute_values(std::string_view key) const {
    for (const auto& [k, values] : attribute_vocab) {
      if (k == key) return &values;
    }
    return nullptr;
  }

  bool has_attribute_key(std::string_view key) const { return attribute_values(key) != nullptr; }

  bool allows_attribute(std::string_view key, std::string_view value) const {
    const auto* values = attribute_values(key);
    return values && contains(*values, value);
  }

  bool is_state(std::string_view s) const { return contains(state_vocab, s); }
  bool is_size(std::string_view s) const { return contains(size_vocab, s); }
  bool is_location_type(std::string_view s) const { return contains(location_type_vocab, s); }
  bool is_modality(std::string_view s) const { return contains(modality_vocab, s); }

  std::optional<int> size_index(std::string_view s) const {
    auto it = std::find(size_vocab.begin(), size_vocab.end(), s);
    if (it == size_vocab.end()) return std::nullopt;
    return static_cast<int>(it - size_vocab.begin());
  }

  friend bool operator==(const VocabRegistry&, const VocabRegistry&) = default;

 private:
  static bool contains(const std::vector<std::string>& v, std::string_view s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  }
};

namespace detail {

inline std::vector<std::string> vocab_list(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_array()) {
    throw Error(ErrorKind::invalid_vocab, std::string("missing list \"") + key + "\"");
  }
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& v : doc[key]) {
    if (!v.is_string() || v.get<std::string>().empty()) {
      throw Error(ErrorKind::invalid_vocab, std::string(key) + " holds a non-string entry");
    }
    auto s = v.get<std::string>();
    if (!seen.insert(s).second) {
      throw Error(ErrorKind::invalid_vocab, std::string(key) + " repeats \"" + s + "\"");
    }
    out.push_back(std::move(s));
  }
  if (out.empty()) throw Error(ErrorKind::invalid_vocab, std::string(key) + " is empty");
  return out;
}

}  // namespace detail

inline VocabRegistry vocab_from_json(const json& doc) {
  static const std::set<std::string> kKeys = {"attribute_vocab", "state_vocab", "size_vocab",
                                              "location_type_vocab", "modality_vocab"};
  if (!doc.is_object()) throw Error(ErrorKind::invalid_vocab, "vocabulary document must be an object");
  for (const auto& [k, _] : doc.items()) {
    if (!kKeys.count(k)) throw Error(ErrorKind::invalid_vocab, "unknown key \"" + k + "\"");
  }
  VocabRegistry vocab;
  if (!doc.contains("attribute_vocab") || !doc["attribute_vocab"].is_object()) {
    throw Error(ErrorKind::invalid_vocab, "missing object \"attribute_vocab\"");
  }
  for (const auto& [key, values] : doc["attribute_vocab"].items()) {
    json wrapper = {{key, values}};
    vocab.attribute_vocab.emplace_back(key, detail::vocab_list(wrapper, key.c_str()));
  }
  vocab.state_vocab = detail::vocab_list(doc, "state_vocab");
  vocab.size_vocab = detail::vocab_list(doc, "size_vocab");
  vocab.location_type_vocab = detail::vocab_list(doc, "location_type_vocab");
  vocab.modality_vocab = detail::vocab_list(doc, "modality_vocab");

  // Downstream rules rely on these members.
  if (!vocab.is_state("unknown")) throw Error(ErrorKind::invalid_vocab, "state_vocab must contain \"unknown\"");
  for (const char* m : {"vision", "manipulation"}) {
    if (!vocab.is_modality(m)) {
      throw Error(ErrorKind::invalid_vocab, std::string("modality_vocab must contain \"") + m + "\"");
    }
  }
  return vocab;
}

inline json vocab_to_json(const VocabRegistry& vocab) {
  json doc = json::object();
  json attrs = json::object();
  for (const auto& [k, values] : vocab.attribute_vocab) attrs[k] = values;
  doc["attribute_vocab"] = std::move(attrs);
  doc["state_vocab"] = vocab.state_vocab;
  doc["size_vocab"] = vocab.size_vocab;
  doc["location_type_vocab"] = vocab.location_type_vocab;
  doc["modality_vocab"] = vocab.modality_vocab;
  return doc;
}

inline VocabRegistry load_vocab(const fs::path& path) { return vocab_from_json(read_json_file(path)); }

/// The bundled vocabularies.
inline const VocabRegistry& default_vocab() {
  static const VocabRegistry vocab = vocab_from_json(parse_json(bundled::vocab_json, "bundled vocab.json"));
  return vocab;
}

/// Renders the vocabularies as the literal block embedded in the grounding
/// prompt (Python set/list notation).
inline std::string render_vocab_block(const VocabRegistry& vocab) {
  auto quoted = [](const std::vector<std::string>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out += ", ";
      out += "\"" + values[i] + "\"";
    }
    return out;
  };
  std::string out = "ATTRIBUTE_VOCAB = {\n";
  for (const auto& [key, values] : vocab.attribute_vocab) {
    out += "    \"" + key + "\": {" + quoted(values) + "},\n";
  }
  out += "}\n\n";
  out += "STATE_VOCAB = {" + quoted(vocab.state_vocab) + "}\n\n";
  out += "SIZE_VOCAB = [" + quoted(vocab.size_vocab) + "]\n\n";
  out += "LOCATION_TYPE_VOCAB = {" + quoted(vocab.location_type_vocab) + "}\n\n";
  out += "MODALITY_VOCAB = {" + quoted(vocab.modality_vocab) + "}";
  return out;
}

}  // namespace roboabstain
