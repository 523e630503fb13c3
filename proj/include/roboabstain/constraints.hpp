#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "roboabstain/error.hpp"
#include "roboabstain/io.hpp"
#include "roboabstain/scene.hpp"
#include "roboabstain/vocab.hpp"

// Phase 2: rule-based derivation of abstention candidates from a validated
// scene. Nothing in here performs I/O.

namespace roboabstain {

inline constexpr std::array<std::string_view, 3> kContainerLikeTypes = {"container", "inside_container", "drawer"};
inline constexpr std::array<std::string_view, 2> kRobotModalities = {"vision", "manipulation"};
inline constexpr std::string_view kViolationLargerThanContainer = "object_larger_than_container";

/// Attribute keys in checks-file order; keys outside this list sort after it.
inline constexpr std::array<std::string_view, 7> kAttributeKeyOrder = {"color",   "material",  "shape", "texture",
                                                                       "pattern", "condition", "style"};

struct AmbiguousCandidate {
  std::string object_class;
  std::vector<std::string> instance_ids;
  int count = 0;
  std::vector<std::pair<std::string, std::vector<std::string>>> ambiguous_attributes;
  std::vector<std::string> state;
  std::vector<std::string> size;
  bool is_manipulable = false;
  bool is_stateful = false;
  bool exceeds_weight_limit = false;
  std::vector<std::string> distinguishing_attributes;

  const std::vector<std::string>* shared(std::string_view key) const {
    for (const auto& [k, v] : ambiguous_attributes) {
      if (k == key) return &v;
    }
    return nullptr;
  }

  friend bool operator==(const AmbiguousCandidate&, const AmbiguousCandidate&) = default;
};

struct FalsePremiseCandidate {
  std::string object_id;
  std::string object_class;
  std::string current_state;
  friend bool operator==(const FalsePremiseCandidate&, const FalsePremiseCandidate&) = default;
};

struct InfeasiblePair {
  std::string object_id;
  std::string object_class;
  std::string object_size;
  std::string location_id;
  std::string location_description;
  std::string location_size;
  std::string violation;
  friend bool operator==(const InfeasiblePair&, const InfeasiblePair&) = default;
};

struct CapabilityCandidate {
  std::string object_id;
  std::string object_class;
  std::string required_modality;
  friend bool operator==(const CapabilityCandidate&, const CapabilityCandidate&) = default;
};

struct SubjectiveCandidate {
  std::string object_class;
  std::vector<std::string> instance_ids;
  friend bool operator==(const SubjectiveCandidate&, const SubjectiveCandidate&) = default;
};

struct UnderspecifiedObjectCandidate {
  std::string object_id;
  std::string object_class;
  std::optional<std::string> state;
  std::string size;
  bool is_manipulable = false;
  bool is_stateful = false;
  bool exceeds_weight_limit = false;
  std::string location_id;
  friend bool operator==(const UnderspecifiedObjectCandidate&, const UnderspecifiedObjectCandidate&) = default;
};

struct UnderspecifiedLocationCandidate {
  std::string location_id;
  std::string description;
  std::string location_type;
  std::string size;
  friend bool operator==(const UnderspecifiedLocationCandidate&, const UnderspecifiedLocationCandidate&) = default;
};

/// Raw material for contradictory templates: a carryable object, alone or
/// paired with a location. The contradiction lives in the template text.
struct ContradictoryBinding {
  std::string object_id;
  std::string object_class;
  std::optional<std::string> object_color;
  std::optional<std::string> location_id;
  std::optional<std::string> location_description;
  friend bool operator==(const ContradictoryBinding&, const ContradictoryBinding&) = default;
};

struct CandidateSet {
  std::vector<AmbiguousCandidate> ambiguous;
  std::vector<FalsePremiseCandidate> false_premise;
  std::vector<InfeasiblePair> physically_infeasible;
  std::vector<CapabilityCandidate> missing_capability;
  std::vector<SubjectiveCandidate> subjective;
  std::vector<UnderspecifiedObjectCandidate> underspecified_objects;
  std::vector<UnderspecifiedLocationCandidate> underspecified_locations;
  std::vector<AbsentObject> missing_referent;
  std::vector<ContradictoryBinding> contradictory;

  friend bool operator==(const CandidateSet&, const CandidateSet&) = default;
};

/// 0-based position of `size` in the ordered size vocabulary.
inline int size_rank(std::string_view size, const VocabRegistry& vocab = default_vocab()) {
  if (auto idx = vocab.size_index(size)) return *idx;
  throw Error(ErrorKind::unknown_size, "\"" + std::string(size) + "\"");
}

inline bool is_container_like(std::string_view location_type) {
  return std::find(kContainerLikeTypes.begin(), kContainerLikeTypes.end(), location_type) != kContainerLikeTypes.end();
}

/// The action whose outcome equals `state`, for states that have one.
inline std::optional<std::string_view> false_premise_action(std::string_view state) {
  static const std::map<std::string_view, std::string_view> kActions = {
      {"open", "open"}, {"closed", "close"}, {"on", "turn on"},
      {"off", "turn off"}, {"full", "fill"}, {"empty", "empty"}};
  auto it = kActions.find(state);
  if (it == kActions.end()) return std::nullopt;
  return it->second;
}

inline bool is_carryable(const SceneObject& o) { return o.is_manipulable && !o.exceeds_weight_limit; }

namespace detail {

inline std::vector<std::string> ordered_attribute_keys(const std::vector<SceneObject>& objects) {
  std::set<std::string> extra;
  for (const auto& o : objects) {
    for (const auto& [k, _] : o.attributes.values) {
      if (std::find(kAttributeKeyOrder.begin(), kAttributeKeyOrder.end(), k) == kAttributeKeyOrder.end()) {
        extra.insert(k);
      }
    }
  }
  std::vector<std::string> keys(kAttributeKeyOrder.begin(), kAttributeKeyOrder.end());
  keys.insert(keys.end(), extra.begin(), extra.end());
  return keys;
}

inline void push_unique(std::vector<std::string>& v, const std::string& s) {
  if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

/// Splits attribute keys of a class into those every instance shares with
/// one value, and those with two or more distinct values.
struct AttributeComparison {
  std::vector<std::pair<std::string, std::vector<std::string>>> shared;
  std::vector<std::string> distinguishing;
};

inline AttributeComparison compare_attributes(const std::vector<SceneObject>& instances) {
  AttributeComparison out;
  for (const auto& key : ordered_attribute_keys(instances)) {
    std::vector<std::string> distinct;
    std::size_t present = 0;
    for (const auto& o : instances) {
      if (auto v = o.attributes.get(key)) {
        ++present;
        push_unique(distinct, *v);
      }
    }
    if (distinct.size() >= 2) {
      out.distinguishing.push_back(key);
    } else if (distinct.size() == 1 && present == instances.size()) {
      out.shared.emplace_back(key, distinct);
    }
  }
  return out;
}

}  // namespace detail

inline std::vector<AmbiguousCandidate> derive_ambiguous(const SceneRepresentation& scene) {
  std::vector<AmbiguousCandidate> out;
  for (const auto& bucket : objects_by_class(scene)) {
    if (bucket.objects.size() < 2) continue;
    AmbiguousCandidate c;
    c.object_class = bucket.object_class;
    c.count = static_cast<int>(bucket.objects.size());
    c.is_manipulable = c.is_stateful = c.exceeds_weight_limit = true;
    for (const auto& o : bucket.objects) {
      c.instance_ids.push_back(o.id);
      if (o.state) detail::push_unique(c.state, *o.state);
      detail::push_unique(c.size, o.size);
      c.is_manipulable = c.is_manipulable && o.is_manipulable;
      c.is_stateful = c.is_stateful && o.is_stateful;
      c.exceeds_weight_limit = c.exceeds_weight_limit && o.exceeds_weight_limit;
    }
    auto cmp = detail::compare_attributes(bucket.objects);
    c.ambiguous_attributes = std::move(cmp.shared);
    c.distinguishing_attributes = std::move(cmp.distinguishing);
    out.push_back(std::move(c));
  }
  return out;
}

inline std::vector<AbsentObject> derive_missing_referent(const SceneRepresentation& scene) {
  return scene.absent_and_implausible_objects;
}

inline std::vector<SubjectiveCandidate> derive_subjective(const SceneRepresentation& scene) {
  std::vector<SubjectiveCandidate> out;
  for (const auto& bucket : objects_by_class(scene)) {
    if (bucket.objects.size() < 2) continue;
    if (detail::compare_attributes(bucket.objects).distinguishing.empty()) continue;
    SubjectiveCandidate c{bucket.object_class, {}};
    for (const auto& o : bucket.objects) c.instance_ids.push_back(o.id);
    out.push_back(std::move(c));
  }
  return out;
}

inline std::vector<UnderspecifiedObjectCandidate> derive_underspecified_objects(const SceneRepresentation& scene) {
  std::vector<UnderspecifiedObjectCandidate> out;
  for (const auto& o : scene.scene_objects) {
    if (!is_carryable(o)) continue;
    out.push_back({o.id, o.object_class, o.state, o.size, o.is_manipulable, o.is_stateful, o.exceeds_weight_limit,
                   o.location_id});
  }
  return out;
}

inline std::vector<UnderspecifiedLocationCandidate> derive_underspecified_locations(const SceneRepresentation& scene) {
  std::vector<UnderspecifiedLocationCandidate> out;
  for (const auto& l : scene.scene_locations) out.push_back({l.id, l.description, l.location_type, l.size});
  return out;
}

inline std::vector<InfeasiblePair> derive_physical_infeasibility(const SceneRepresentation& scene,
                                                                 const VocabRegistry& vocab = default_vocab()) {
  std::vector<InfeasiblePair> out;
  for (const auto& o : scene.scene_objects) {
    if (!is_carryable(o)) continue;
    for (const auto& l : scene.scene_locations) {
      if (!is_container_like(l.location_type)) continue;
      if (o.location_id == l.id) continue;
      if (std::find(l.contains_object_ids.begin(), l.contains_object_ids.end(), o.id) != l.contains_object_ids.end()) {
        continue;
      }
      if (size_rank(o.size, vocab) <= size_rank(l.size, vocab)) continue;
      out.push_back({o.id, o.object_class, o.size, l.id, l.description, l.size,
                     std::string(kViolationLargerThanContainer)});
    }
  }
  return out;
}

inline std::vector<CapabilityCandidate> derive_missing_capability(const SceneRepresentation& scene) {
  std::vector<CapabilityCandidate> out;
  for (const auto& o : scene.scene_objects) {
    std::vector<std::string> seen;
    for (const auto& m : o.modalities) {
      if (std::find(kRobotModalities.begin(), kRobotModalities.end(), m) != kRobotModalities.end()) continue;
      if (std::find(seen.begin(), seen.end(), m) != seen.end()) continue;
      seen.push_back(m);
      out.push_back({o.id, o.object_class, m});
    }
  }
  return out;
}

inline std::vector<FalsePremiseCandidate> derive_false_premise(const SceneRepresentation& scene) {
  std::vector<FalsePremiseCandidate> out;
  for (const auto& o : scene.scene_objects) {
    if (!o.is_stateful || !o.state || !false_premise_action(*o.state)) continue;
    out.push_back({o.id, o.object_class, *o.state});
  }
  return out;
}

inline std::vector<ContradictoryBinding> derive_contradictory_bindings(const SceneRepresentation& scene) {
  std::vector<ContradictoryBinding> out;
  for (const auto& o : scene.scene_objects) {
    if (!is_carryable(o)) continue;
    const auto color = o.attributes.get("color");
    out.push_back({o.id, o.object_class, color, std::nullopt, std::nullopt});
    for (const auto& l : scene.scene_locations) out.push_back({o.id, o.object_class, color, l.id, l.description});
  }
  return out;
}

inline CandidateSet derive_all(const SceneRepresentation& scene, const VocabRegistry& vocab = default_vocab()) {
  CandidateSet c;
  c.ambiguous = derive_ambiguous(scene);
  c.false_premise = derive_false_premise(scene);
  c.physically_infeasible = derive_physical_infeasibility(scene, vocab);
  c.missing_capability = derive_missing_capability(scene);
  c.subjective = derive_subjective(scene);
  c.underspecified_objects = derive_underspecified_objects(scene);
  c.underspecified_locations = derive_underspecified_locations(scene);
  c.missing_referent = derive_missing_referent(scene);
  c.contradictory = derive_contradictory_bindings(scene);
  return c;
}

// ---------------------------------------------------------------------------
// Checks-file serialization

inline constexpr std::string_view kExtensionNote =
    "missing_referent_candidates and contradictory_bindings extend the base checks schema";

namespace detail {

inline json nullable(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

inline std::optional<std::string> opt_string(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<std::string>();
}

}  // namespace detail

inline json candidates_to_json(const CandidateSet& c) {
  json checks = json::object();

  json ambiguous = json::array();
  for (const auto& a : c.ambiguous) {
    json attrs = json::object();
    for (const auto& [k, v] : a.ambiguous_attributes) attrs[k] = v;
    ambiguous.push_back({{"object_class", a.object_class},
                         {"instance_ids", a.instance_ids},
                         {"count", a.count},
                         {"ambiguous_attributes", std::move(attrs)},
                         {"state", a.state},
                         {"size", a.size},
                         {"is_manipulable", a.is_manipulable},
                         {"is_stateful", a.is_stateful},
                         {"exceeds_weight_limit", a.exceeds_weight_limit},
                         {"distinguishing_attributes", a.distinguishing_attributes}});
  }
  checks["ambiguous_candidates"] = std::move(ambiguous);

  json fp = json::array();
  for (const auto& f : c.false_premise) {
    fp.push_back({{"object_id", f.object_id}, {"object_class", f.object_class}, {"current_state", f.current_state}});
  }
  checks["false_premise_candidates"] = std::move(fp);

  json pairs = json::array();
  for (const auto& p : c.physically_infeasible) {
    pairs.push_back({{"object_id", p.object_id},
                     {"object_class", p.object_class},
                     {"object_size", p.object_size},
                     {"location_id", p.location_id},
                     {"location_description", p.location_description},
                     {"location_size", p.location_size},
                     {"violation", p.violation}});
  }
  checks["physically_infeasible_pairs"] = std::move(pairs);

  json caps = json::array();
  for (const auto& m : c.missing_capability) {
    caps.push_back({{"object_id", m.object_id},
                    {"object_class", m.object_class},
                    {"required_modality", m.required_modality}});
  }
  checks["missing_capability_candidates"] = std::move(caps);

  json subj = json::array();
  for (const auto& s : c.subjective) subj.push_back({{"object_class", s.object_class}, {"instance_ids", s.instance_ids}});
  checks["subjective_candidates"] = std::move(subj);

  json uobj = json::array();
  for (const auto& u : c.underspecified_objects) {
    uobj.push_back({{"object_id", u.object_id},
                    {"object_class", u.object_class},
                    {"state", detail::nullable(u.state)},
                    {"size", u.size},
                    {"is_manipulable", u.is_manipulable},
                    {"is_stateful", u.is_stateful},
                    {"exceeds_weight_limit", u.exceeds_weight_limit},
                    {"location_id", u.location_id}});
  }
  checks["underspecified_object_candidates"] = std::move(uobj);

  json uloc = json::array();
  for (const auto& u : c.underspecified_locations) {
    uloc.push_back({{"location_id", u.location_id},
                    {"description", u.description},
                    {"location_type", u.location_type},
                    {"size", u.size}});
  }
  checks["underspecified_location_candidates"] = std::move(uloc);

  json missing = json::array();
  for (const auto& a : c.missing_referent) {
    missing.push_back({{"object_class", a.object_class},
                       {"color", detail::nullable(a.color)},
                       {"state", detail::nullable(a.state)},
                       {"size", a.size},
                       {"is_manipulable", a.is_manipulable},
                       {"is_stateful", a.is_stateful},
                       {"exceeds_weight_limit", a.exceeds_weight_limit}});
  }
  checks["missing_referent_candidates"] = std::move(missing);

  json contra = json::array();
  for (const auto& b : c.contradictory) {
    contra.push_back({{"object_id", b.object_id},
                      {"object_class", b.object_class},
                      {"object_color", detail::nullable(b.object_color)},
                      {"location_id", detail::nullable(b.location_id)},
                      {"location_description", detail::nullable(b.location_description)}});
  }
  checks["contradictory_bindings"] = std::move(contra);

  return json{{"extension",
               {{"note", kExtensionNote},
                {"extended_keys", json::array({"missing_referent_candidates", "contradictory_bindings"})}}},
              {"checks", std::move(checks)}};
}

inline CandidateSet candidates_from_json(const json& doc) {
  try {
    const json& checks = doc.at("checks");
    CandidateSet c;
    for (const auto& a : checks.at("ambiguous_candidates")) {
      AmbiguousCandidate x;
      x.object_class = a.at("object_class").get<std::string>();
      x.instance_ids = a.at("instance_ids").get<std::vector<std::string>>();
      x.count = a.at("count").get<int>();
      for (const auto& [k, v] : a.at("ambiguous_attributes").items()) {
        x.ambiguous_attributes.emplace_back(k, v.get<std::vector<std::string>>());
      }
      x.state = a.at("state").get<std::vector<std::string>>();
      x.size = a.at("size").get<std::vector<std::string>>();
      x.is_manipulable = a.at("is_manipulable").get<bool>();
      x.is_stateful = a.at("is_stateful").get<bool>();
      x.exceeds_weight_limit = a.at("exceeds_weight_limit").get<bool>();
      x.distinguishing_attributes = a.at("distinguishing_attributes").get<std::vector<std::string>>();
      c.ambiguous.push_back(std::move(x));
    }
    for (const auto& f : checks.at("false_premise_candidates")) {
      c.false_premise.push_back({f.at("object_id").get<std::string>(), f.at("object_class").get<std::string>(),
                                 f.at("current_state").get<std::string>()});
    }
    for (const auto& p : checks.at("physically_infeasible_pairs")) {
      c.physically_infeasible.push_back(
          {p.at("object_id").get<std::string>(), p.at("object_class").get<std::string>(),
           p.at("object_size").get<std::string>(), p.at("location_id").get<std::string>(),
           p.at("location_description").get<std::string>(), p.at("location_size").get<std::string>(),
           p.at("violation").get<std::string>()});
    }
    for (const auto& m : checks.at("missing_capability_candidates")) {
      c.missing_capability.push_back({m.at("object_id").get<std::string>(), m.at("object_class").get<std::string>(),
                                      m.at("required_modality").get<std::string>()});
    }
    for (const auto& s : checks.at("subjective_candidates")) {
      c.subjective.push_back(
          {s.at("object_class").get<std::string>(), s.at("instance_ids").get<std::vector<std::string>>()});
    }
    for (const auto& u : checks.at("underspecified_object_candidates")) {
      c.underspecified_objects.push_back(
          {u.at("object_id").get<std::string>(), u.at("object_class").get<std::string>(),
           detail::opt_string(u, "state"), u.at("size").get<std::string>(), u.at("is_manipulable").get<bool>(),
           u.at("is_stateful").get<bool>(), u.at("exceeds_weight_limit").get<bool>(),
           u.at("location_id").get<std::string>()});
    }
    for (const auto& u : checks.at("underspecified_location_candidates")) {
      c.underspecified_locations.push_back({u.at("location_id").get<std::string>(),
                                            u.at("description").get<std::string>(),
                                            u.at("location_type").get<std::string>(), u.at("size").get<std::string>()});
    }
    if (checks.contains("missing_referent_candidates")) {
      for (const auto& a : checks.at("missing_referent_candidates")) {
        c.missing_referent.push_back({a.at("object_class").get<std::string>(), detail::opt_string(a, "color"),
                                      detail::opt_string(a, "state"), a.at("size").get<std::string>(),
                                      a.at("is_manipulable").get<bool>(), a.at("is_stateful").get<bool>(),
                                      a.at("exceeds_weight_limit").get<bool>()});
      }
    }
    if (checks.contains("contradictory_bindings")) {
      for (const auto& b : checks.at("contradictory_bindings")) {
        c.contradictory.push_back({b.at("object_id").get<std::string>(), b.at("object_class").get<std::string>(),
                                   detail::opt_string(b, "object_color"), detail::opt_string(b, "location_id"),
                                   detail::opt_string(b, "location_description")});
      }
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::malformed_json, std::string("checks document: ") + e.what());
  }
}

inline std::string serialize_candidates(const CandidateSet& c) { return dump_pretty(candidates_to_json(c)); }

}  // namespace roboabstain
