#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "roboabstain/error.hpp"
#include "roboabstain/io.hpp"
#include "roboabstain/vocab.hpp"

namespace roboabstain {

inline constexpr std::size_t kMaxAbsentObjects = 5;

/// Visible attributes of a scene object. Only non-null values are stored;
/// keys are attribute_vocab keys.
struct ObjectAttributes {
  std::map<std::string, std::string> values;

  std::optional<std::string> get(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const ObjectAttributes&, const ObjectAttributes&) = default;
};

struct SceneObject {
  std::string id;
  std::string object_class;
  ObjectAttributes attributes;
  std::optional<std::string> state;
  std::string size;
  bool is_manipulable = false;
  bool is_stateful = false;
  bool exceeds_weight_limit = false;
  std::vector<std::string> modalities;
  std::string location_id;

  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct SceneLocation {
  std::string id;
  std::string description;
  std::string location_type;
  std::string size;
  std::vector<std::string> contains_object_ids;

  friend bool operator==(const SceneLocation&, const SceneLocation&) = default;
};

struct AbsentObject {
  std::string object_class;
  std::optional<std::string> color;
  std::optional<std::string> state;
  std::string size;
  bool is_manipulable = false;
  bool is_stateful = false;
  bool exceeds_weight_limit = false;

  friend bool operator==(const AbsentObject&, const AbsentObject&) = default;
};

struct SceneRepresentation {
  std::string scene_type;
  std::vector<SceneObject> scene_objects;
  std::vector<SceneLocation> scene_locations;
  std::vector<AbsentObject> absent_and_implausible_objects;

  const SceneObject* find_object(std::string_view id) const {
    for (const auto& o : scene_objects) {
      if (o.id == id) return &o;
    }
    return nullptr;
  }

  const SceneLocation* find_location(std::string_view id) const {
    for (const auto& l : scene_locations) {
      if (l.id == id) return &l;
    }
    return nullptr;
  }

  friend bool operator==(const SceneRepresentation&, const SceneRepresentation&) = default;
};

enum class IssueCode {
  schema_violation,  // wrong type, missing or unknown key
  duplicate_id,
  bad_id_format,
  vocab_violation,
  dangling_reference,
  absent_list_overflow,
  stateful_without_state,
  inconsistent_containment,
};

inline std::string_view to_string(IssueCode code) {
  switch (code) {
    case IssueCode::schema_violation: return "schema-violation";
    case IssueCode::duplicate_id: return "duplicate-id";
    case IssueCode::bad_id_format: return "bad-id-format";
    case IssueCode::vocab_violation: return "vocab-violation";
    case IssueCode::dangling_reference: return "dangling-reference";
    case IssueCode::absent_list_overflow: return "absent-list-overflow";
    case IssueCode::stateful_without_state: return "stateful-without-state";
    case IssueCode::inconsistent_containment: return "inconsistent-containment";
  }
  return "";
}

struct ValidationIssue {
  IssueCode code;
  std::string path;
  std::string message;

  friend bool operator==(const ValidationIssue&, const ValidationIssue&) = default;
};

/// Raised by parse_scene; carries every issue found, not just the first.
class SceneValidationError : public Error {
 public:
  explicit SceneValidationError(std::vector<ValidationIssue> issues)
      : Error(ErrorKind::invalid_scene, summarize(issues)), issues_(std::move(issues)) {}

  const std::vector<ValidationIssue>& issues() const noexcept { return issues_; }

 private:
  static std::string summarize(const std::vector<ValidationIssue>& issues) {
    std::string out = std::to_string(issues.size()) + " issue(s)";
    for (const auto& i : issues) {
      out += "; " + std::string(to_string(i.code)) + " at " + i.path;
    }
    return out;
  }

  std::vector<ValidationIssue> issues_;
};

namespace detail {

/// True for prefix followed by a positive integer without leading zeros.
inline bool is_numbered_id(std::string_view id, char prefix) {
  if (id.size() < 2 || id[0] != prefix || id[1] == '0') return false;
  return std::all_of(id.begin() + 1, id.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline std::string index_path(std::string_view base, std::size_t i) {
  return std::string(base) + "[" + std::to_string(i) + "]";
}

class IssueSink {
 public:
  void add(IssueCode code, std::string path, std::string message) {
    issues.push_back({code, std::move(path), std::move(message)});
  }
  std::vector<ValidationIssue> issues;
};

/// Reads a JSON document into the scene structs, recording structural
/// problems as schema-violation issues and leaving defaults in place.
class SceneReader {
 public:
  explicit SceneReader(IssueSink& sink) : sink_(sink) {}

  SceneRepresentation read(const json& doc) {
    SceneRepresentation scene;
    if (!doc.is_object()) {
      schema("", "document must be a JSON object");
      return scene;
    }
    check_keys(doc, "", {"scene_type", "scene_objects", "scene_locations", "absent_and_implausible_objects"});
    string_field(doc, "", "scene_type", scene.scene_type, true);
    if (const json* arr = array_field(doc, "", "scene_objects")) {
      for (std::size_t i = 0; i < arr->size(); ++i) {
        scene.scene_objects.push_back(read_object((*arr)[i], index_path("scene_objects", i)));
      }
    }
    if (const json* arr = array_field(doc, "", "scene_locations")) {
      for (std::size_t i = 0; i < arr->size(); ++i) {
        scene.scene_locations.push_back(read_location((*arr)[i], index_path("scene_locations", i)));
      }
    }
    if (const json* arr = array_field(doc, "", "absent_and_implausible_objects")) {
      for (std::size_t i = 0; i < arr->size(); ++i) {
        scene.absent_and_implausible_objects.push_back(
            read_absent((*arr)[i], index_path("absent_and_implausible_objects", i)));
      }
    }
    return scene;
  }

  /// Paths that failed structurally; semantic checks skip them.
  const std::set<std::string>& broken_paths() const { return broken_; }

 private:
  static std::string join(std::string_view base, std::string_view key) {
    return base.empty() ? std::string(key) : std::string(base) + "." + std::string(key);
  }

  void schema(const std::string& path, std::string message) {
    broken_.insert(path);
    sink_.add(IssueCode::schema_violation, path, std::move(message));
  }

  void check_keys(const json& obj, std::string_view base, std::initializer_list<std::string_view> allowed) {
    for (const auto& [k, _] : obj.items()) {
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
        schema(join(base, k), "unknown key \"" + k + "\"");
      }
    }
  }

  bool string_field(const json& obj, std::string_view base, const char* key, std::string& out,
                    bool allow_empty = false) {
    const auto path = join(base, key);
    if (!obj.contains(key)) {
      schema(path, "missing required string");
      return false;
    }
    const auto& v = obj[key];
    if (!v.is_string()) {
      schema(path, "expected string");
      return false;
    }
    out = v.get<std::string>();
    if (out.empty() && !allow_empty) {
      schema(path, "must not be empty");
      return false;
    }
    return true;
  }

  void nullable_string_field(const json& obj, std::string_view base, const char* key,
                             std::optional<std::string>& out, bool required = true) {
    const auto path = join(base, key);
    if (!obj.contains(key)) {
      if (required) schema(path, "missing required key (use null when absent)");
      return;
    }
    const auto& v = obj[key];
    if (v.is_null()) return;
    if (!v.is_string()) {
      schema(path, "expected string or null");
      return;
    }
    out = v.get<std::string>();
  }

  void bool_field(const json& obj, std::string_view base, const char* key, bool& out) {
    const auto path = join(base, key);
    if (!obj.contains(key)) {
      schema(path, "missing required boolean");
    } else if (!obj[key].is_boolean()) {
      schema(path, "expected boolean");
    } else {
      out = obj[key].get<bool>();
    }
  }

  const json* array_field(const json& obj, std::string_view base, const char* key) {
    const auto path = join(base, key);
    if (!obj.contains(key)) {
      schema(path, "missing required array");
      return nullptr;
    }
    if (!obj[key].is_array()) {
      schema(path, "expected array");
      return nullptr;
    }
    return &obj[key];
  }

  void string_list_field(const json& obj, std::string_view base, const char* key, std::vector<std::string>& out) {
    const auto path = join(base, key);
    const json* arr = array_field(obj, base, key);
    if (!arr) return;
    for (std::size_t i = 0; i < arr->size(); ++i) {
      if (!(*arr)[i].is_string()) {
        schema(index_path(path, i), "expected string");
        continue;
      }
      out.push_back((*arr)[i].get<std::string>());
    }
  }

  SceneObject read_object(const json& v, const std::string& base) {
    SceneObject o;
    if (!v.is_object()) {
      schema(base, "expected object");
      return o;
    }
    check_keys(v, base,
               {"id", "object_class", "attributes", "state", "size", "is_manipulable", "is_stateful",
                "exceeds_weight_limit", "modalities", "location_id"});
    string_field(v, base, "id", o.id);
    string_field(v, base, "object_class", o.object_class);
    const auto attr_path = join(base, "attributes");
    if (!v.contains("attributes")) {
      schema(attr_path, "missing required object");
    } else if (!v["attributes"].is_object()) {
      schema(attr_path, "expected object");
    } else {
      for (const auto& [k, value] : v["attributes"].items()) {
        if (value.is_null()) continue;
        if (!value.is_string()) {
          schema(join(attr_path, k), "expected string or null");
          continue;
        }
        o.attributes.values[k] = value.get<std::string>();
      }
    }
    nullable_string_field(v, base, "state", o.state);
    string_field(v, base, "size", o.size);
    bool_field(v, base, "is_manipulable", o.is_manipulable);
    bool_field(v, base, "is_stateful", o.is_stateful);
    bool_field(v, base, "exceeds_weight_limit", o.exceeds_weight_limit);
    string_list_field(v, base, "modalities", o.modalities);
    string_field(v, base, "location_id", o.location_id);
    return o;
  }

  SceneLocation read_location(const json& v, const std::string& base) {
    SceneLocation l;
    if (!v.is_object()) {
      schema(base, "expected object");
      return l;
    }
    check_keys(v, base, {"id", "description", "location_type", "size", "contains_object_ids"});
    string_field(v, base, "id", l.id);
    string_field(v, base, "description", l.description);
    string_field(v, base, "location_type", l.location_type);
    string_field(v, base, "size", l.size);
    string_list_field(v, base, "contains_object_ids", l.contains_object_ids);
    return l;
  }

  AbsentObject read_absent(const json& v, const std::string& base) {
    AbsentObject a;
    if (!v.is_object()) {
      schema(base, "expected object");
      return a;
    }
    check_keys(v, base,
               {"object_class", "color", "state", "size", "is_manipulable", "is_stateful", "exceeds_weight_limit"});
    string_field(v, base, "object_class", a.object_class);
    nullable_string_field(v, base, "color", a.color);
    nullable_string_field(v, base, "state", a.state);
    string_field(v, base, "size", a.size);
    bool_field(v, base, "is_manipulable", a.is_manipulable);
    bool_field(v, base, "is_stateful", a.is_stateful);
    bool_field(v, base, "exceeds_weight_limit", a.exceeds_weight_limit);
    return a;
  }

  IssueSink& sink_;
  std::set<std::string> broken_;
};

inline void validate_into(const SceneRepresentation& scene, const VocabRegistry& vocab, IssueSink& sink,
                          const std::set<std::string>& skip) {
  auto add = [&](IssueCode code, std::string path, std::string message) {
    if (skip.count(path)) return;
    sink.add(code, std::move(path), std::move(message));
  };

  std::map<std::string, const SceneObject*> objects_by_id;
  std::set<std::string> location_ids;
  for (const auto& l : scene.scene_locations) location_ids.insert(l.id);

  for (std::size_t i = 0; i < scene.scene_objects.size(); ++i) {
    const auto& o = scene.scene_objects[i];
    const auto base = index_path("scene_objects", i);
    if (!is_numbered_id(o.id, 'o')) add(IssueCode::bad_id_format, base + ".id", "object id \"" + o.id + "\" is not o<integer>");
    if (!objects_by_id.emplace(o.id, &o).second) {
      add(IssueCode::duplicate_id, base + ".id", "object id \"" + o.id + "\" already used");
    }
    for (const auto& [key, value] : o.attributes.values) {
      const auto path = base + ".attributes." + key;
      if (!vocab.has_attribute_key(key)) {
        add(IssueCode::schema_violation, path, "unknown attribute key \"" + key + "\"");
      } else if (!vocab.allows_attribute(key, value)) {
        add(IssueCode::vocab_violation, path, "\"" + value + "\" not in " + key + " vocabulary");
      }
    }
    if (o.state && !vocab.is_state(*o.state)) {
      add(IssueCode::vocab_violation, base + ".state", "\"" + *o.state + "\" not in state vocabulary");
    }
    if (o.is_stateful && !o.state) {
      add(IssueCode::stateful_without_state, base + ".state", "is_stateful is true but state is null");
    }
    if (!vocab.is_size(o.size)) add(IssueCode::vocab_violation, base + ".size", "\"" + o.size + "\" not in size vocabulary");
    for (std::size_t m = 0; m < o.modalities.size(); ++m) {
      if (!vocab.is_modality(o.modalities[m])) {
        add(IssueCode::vocab_violation, index_path(base + ".modalities", m),
            "\"" + o.modalities[m] + "\" not in modality vocabulary");
      }
    }
    if (!location_ids.count(o.location_id)) {
      add(IssueCode::dangling_reference, base + ".location_id", "no location \"" + o.location_id + "\"");
    }
  }

  std::set<std::string> seen_locations;
  for (std::size_t j = 0; j < scene.scene_locations.size(); ++j) {
    const auto& l = scene.scene_locations[j];
    const auto base = index_path("scene_locations", j);
    if (!is_numbered_id(l.id, 'l')) add(IssueCode::bad_id_format, base + ".id", "location id \"" + l.id + "\" is not l<integer>");
    if (!seen_locations.insert(l.id).second) {
      add(IssueCode::duplicate_id, base + ".id", "location id \"" + l.id + "\" already used");
    }
    if (!vocab.is_location_type(l.location_type)) {
      add(IssueCode::vocab_violation, base + ".location_type", "\"" + l.location_type + "\" not in location type vocabulary");
    }
    if (!vocab.is_size(l.size)) add(IssueCode::vocab_violation, base + ".size", "\"" + l.size + "\" not in size vocabulary");
    for (std::size_t k = 0; k < l.contains_object_ids.size(); ++k) {
      const auto& oid = l.contains_object_ids[k];
      const auto path = index_path(base + ".contains_object_ids", k);
      auto it = objects_by_id.find(oid);
      if (it == objects_by_id.end()) {
        add(IssueCode::dangling_reference, path, "no object \"" + oid + "\"");
      } else if (it->second->location_id != l.id) {
        add(IssueCode::inconsistent_containment, path,
            "object \"" + oid + "\" is located at \"" + it->second->location_id + "\"");
      }
    }
  }

  for (std::size_t a = 0; a < scene.absent_and_implausible_objects.size(); ++a) {
    const auto& obj = scene.absent_and_implausible_objects[a];
    const auto base = index_path("absent_and_implausible_objects", a);
    if (obj.color && !vocab.allows_attribute("color", *obj.color)) {
      add(IssueCode::vocab_violation, base + ".color", "\"" + *obj.color + "\" not in color vocabulary");
    }
    if (obj.state && (!vocab.is_state(*obj.state) || *obj.state == "unknown")) {
      add(IssueCode::vocab_violation, base + ".state", "\"" + *obj.state + "\" not a usable state");
    }
    if (!vocab.is_size(obj.size)) add(IssueCode::vocab_violation, base + ".size", "\"" + obj.size + "\" not in size vocabulary");
  }
  if (scene.absent_and_implausible_objects.size() > kMaxAbsentObjects) {
    add(IssueCode::absent_list_overflow, "absent_and_implausible_objects",
        std::to_string(scene.absent_and_implausible_objects.size()) + " entries, limit is " +
            std::to_string(kMaxAbsentObjects));
  }
}

}  // namespace detail

/// Checks every invariant of an in-memory scene. Empty result means valid.
inline std::vector<ValidationIssue> validate_scene(const SceneRepresentation& scene, const VocabRegistry& vocab) {
  detail::IssueSink sink;
  detail::validate_into(scene, vocab, sink, {});
  return std::move(sink.issues);
}

inline SceneRepresentation scene_from_json(const json& doc, const VocabRegistry& vocab) {
  detail::IssueSink sink;
  detail::SceneReader reader(sink);
  SceneRepresentation scene = reader.read(doc);
  detail::validate_into(scene, vocab, sink, reader.broken_paths());
  if (!sink.issues.empty()) throw SceneValidationError(std::move(sink.issues));
  return scene;
}

/// Parses and validates Phase-1 output. Throws Error(malformed_json) for
/// unparseable text and SceneValidationError listing all issues otherwise.
inline SceneRepresentation parse_scene(std::string_view json_text, const VocabRegistry& vocab) {
  return scene_from_json(parse_json(json_text, "scene"), vocab);
}

inline json scene_to_json(const SceneRepresentation& scene) {
  auto nullable = [](const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); };
  json objects = json::array();
  for (const auto& o : scene.scene_objects) {
    json attrs = json::object();
    for (const char* key : {"color", "material", "shape", "texture"}) attrs[key] = nullable(o.attributes.get(key));
    for (const auto& [k, v] : o.attributes.values) {
      if (!attrs.contains(k)) attrs[k] = v;
    }
    objects.push_back({{"id", o.id},
                       {"object_class", o.object_class},
                       {"attributes", std::move(attrs)},
                       {"state", nullable(o.state)},
                       {"size", o.size},
                       {"is_manipulable", o.is_manipulable},
                       {"is_stateful", o.is_stateful},
                       {"exceeds_weight_limit", o.exceeds_weight_limit},
                       {"modalities", o.modalities},
                       {"location_id", o.location_id}});
  }
  json locations = json::array();
  for (const auto& l : scene.scene_locations) {
    locations.push_back({{"id", l.id},
                         {"description", l.description},
                         {"location_type", l.location_type},
                         {"size", l.size},
                         {"contains_object_ids", l.contains_object_ids}});
  }
  json absent = json::array();
  for (const auto& a : scene.absent_and_implausible_objects) {
    absent.push_back({{"object_class", a.object_class},
                      {"color", nullable(a.color)},
                      {"state", nullable(a.state)},
                      {"size", a.size},
                      {"is_manipulable", a.is_manipulable},
                      {"is_stateful", a.is_stateful},
                      {"exceeds_weight_limit", a.exceeds_weight_limit}});
  }
  return {{"scene_type", scene.scene_type},
          {"scene_objects", std::move(objects)},
          {"scene_locations", std::move(locations)},
          {"absent_and_implausible_objects", std::move(absent)}};
}

inline std::string serialize_scene(const SceneRepresentation& scene) { return dump_pretty(scene_to_json(scene)); }

struct ClassBucket {
  std::string object_class;
  std::vector<SceneObject> objects;  // scene order
};

/// Groups objects by class. Buckets appear in order of each class's first
/// occurrence in the scene.
inline std::vector<ClassBucket> objects_by_class(const SceneRepresentation& scene) {
  std::vector<ClassBucket> buckets;
  std::map<std::string, std::size_t> index;
  for (const auto& o : scene.scene_objects) {
    auto [it, inserted] = index.emplace(o.object_class, buckets.size());
    if (inserted) buckets.push_back({o.object_class, {}});
    buckets[it->second].objects.push_back(o);
  }
  return buckets;
}

}  // namespace roboabstain
