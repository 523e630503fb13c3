#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "roboabstain/bundled_data.hpp"
#include "roboabstain/category.hpp"
#include "roboabstain/constraints.hpp"
#include "roboabstain/error.hpp"
#include "roboabstain/io.hpp"
#include "roboabstain/rng.hpp"

// Phase 3: category-specific templates instantiated only with Phase-2
// candidates from the template's own category.

namespace roboabstain {

struct Template {
  std::string id;
  Category category;
  std::string pattern;
  std::vector<std::string> placeholders;  // declared, in first-use order
  json constraints = json::object();      // field -> bool | string | [string]
  std::string source;                     // candidate list the template draws from

  friend bool operator==(const Template&, const Template&) = default;
};

struct TemplateSet {
  std::vector<Template> templates;
  std::array<std::size_t, 8> counts{};  // indexed by category_index

  std::size_t total() const { return templates.size(); }
  std::size_t count(Category c) const { return counts[category_index(c)]; }
};

/// One way to fill a template: placeholder values plus the candidate they
/// were drawn from.
struct Binding {
  std::map<std::string, std::string> values;
  std::string candidate_list;  // key in the checks document
  std::size_t candidate_index = 0;
  std::vector<std::string> ids;  // scene ids referenced by the candidate

  friend bool operator==(const Binding&, const Binding&) = default;
};

struct InstructionRecord {
  std::string image_hash;
  Category category = Category::missing_referent;
  std::string template_id;
  std::string instruction;
  Binding bindings;
  std::optional<std::string> image_path;
  std::optional<std::string> source_dataset;

  friend bool operator==(const InstructionRecord&, const InstructionRecord&) = default;
};

// ---------------------------------------------------------------------------
// Phrase helpers

inline std::string humanize(std::string_view object_class) {
  std::string out(object_class);
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

/// Naive English plural of a humanized noun phrase (last word only).
inline std::string pluralize(std::string_view noun) {
  std::string s(noun);
  auto ends_with = [&](std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with("s") || ends_with("x") || ends_with("z") || ends_with("ch") || ends_with("sh")) return s + "es";
  if (s.size() >= 2 && s.back() == 'y' && std::string_view("aeiou").find(s[s.size() - 2]) == std::string_view::npos) {
    return s.substr(0, s.size() - 1) + "ies";
  }
  return s + "s";
}

inline std::string size_phrase(std::string_view size) {
  static const std::map<std::string_view, std::string_view> kPhrases = {
      {"xsmall", "tiny"}, {"small", "small"}, {"medium", "medium-sized"}, {"large", "large"}, {"xlarge", "huge"}};
  auto it = kPhrases.find(size);
  return it == kPhrases.end() ? std::string(size) : std::string(it->second);
}

inline std::string state_phrase(std::string_view state) {
  static const std::map<std::string_view, std::string_view> kPhrases = {
      {"on", "switched-on"}, {"off", "switched-off"}, {"lying_flat", "flat"}};
  auto it = kPhrases.find(state);
  return it == kPhrases.end() ? humanize(state) : std::string(it->second);
}

/// Collapses whitespace runs to one space and trims both ends.
inline std::string normalize_whitespace(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Slot and source tables

namespace detail {

using SlotValues = std::function<std::vector<std::string>(const json&)>;

struct SourceSpec {
  Category category;
  std::string_view name;
  std::string_view list_key;
  std::function<bool(const json&)> accepts;  // filter within the list
  std::vector<std::string_view> constraint_fields;
};

struct SlotSpec {
  std::string_view name;
  Category category;
  std::string_view source;
  SlotValues values;
};

inline std::vector<std::string> one(const json& cand, const char* key,
                                    std::string (*fmt)(std::string_view) = nullptr) {
  if (!cand.contains(key) || cand[key].is_null()) return {};
  auto s = cand[key].get<std::string>();
  return {fmt ? fmt(s) : s};
}

inline std::vector<std::string> shared_attr(const json& cand, const char* key) {
  const auto& attrs = cand["ambiguous_attributes"];
  if (!attrs.contains(key)) return {};
  return attrs[key].get<std::vector<std::string>>();
}

inline bool carryable(const json& cand) {
  return cand["is_manipulable"].get<bool>() && !cand["exceeds_weight_limit"].get<bool>();
}

inline const std::vector<SourceSpec>& source_specs() {
  auto all = [](const json&) { return true; };
  static const std::vector<SourceSpec> kSources = {
      {Category::missing_referent, "absent", "missing_referent_candidates", all,
       {"is_manipulable", "is_stateful", "exceeds_weight_limit", "size", "state", "color"}},
      {Category::ambiguous_referent, "ambiguous", "ambiguous_candidates", all,
       {"is_manipulable", "is_stateful", "exceeds_weight_limit", "count"}},
      {Category::subjective_intent, "subjective", "subjective_candidates", all, {}},
      {Category::underspecified_intent, "objects", "underspecified_object_candidates", all,
       {"is_manipulable", "is_stateful", "exceeds_weight_limit", "size", "state"}},
      {Category::underspecified_intent, "locations", "underspecified_location_candidates", all,
       {"location_type", "size"}},
      {Category::physical_infeasibility, "pairs", "physically_infeasible_pairs", all,
       {"object_size", "location_size", "violation"}},
      {Category::missing_capability, "capability", "missing_capability_candidates", all, {"required_modality"}},
      {Category::contradictory, "objects", "contradictory_bindings",
       [](const json& c) { return c["location_id"].is_null(); }, {}},
      {Category::contradictory, "object_locations", "contradictory_bindings",
       [](const json& c) { return !c["location_id"].is_null(); }, {}},
      {Category::false_premise, "premise", "false_premise_candidates", all, {"current_state"}},
  };
  return kSources;
}

inline const std::vector<SlotSpec>& slot_specs() {
  using C = Category;
  static const std::vector<SlotSpec> kSlots = {
      {"absent_object", C::missing_referent, "absent", [](const json& c) { return one(c, "object_class", humanize); }},
      {"absent_color", C::missing_referent, "absent", [](const json& c) { return one(c, "color"); }},
      {"absent_state", C::missing_referent, "absent", [](const json& c) { return one(c, "state", state_phrase); }},
      {"absent_size", C::missing_referent, "absent", [](const json& c) { return one(c, "size", size_phrase); }},

      {"ambiguous_object", C::ambiguous_referent, "ambiguous",
       [](const json& c) { return one(c, "object_class", humanize); }},
      {"ambiguous_carryable_object", C::ambiguous_referent, "ambiguous",
       [](const json& c) {
         return carryable(c) ? one(c, "object_class", humanize) : std::vector<std::string>{};
       }},
      {"ambiguous_objects", C::ambiguous_referent, "ambiguous",
       [](const json& c) { return std::vector<std::string>{pluralize(humanize(c["object_class"].get<std::string>()))}; }},
      {"shared_color", C::ambiguous_referent, "ambiguous", [](const json& c) { return shared_attr(c, "color"); }},
      {"shared_material", C::ambiguous_referent, "ambiguous", [](const json& c) { return shared_attr(c, "material"); }},
      {"shared_shape", C::ambiguous_referent, "ambiguous", [](const json& c) { return shared_attr(c, "shape"); }},
      {"shared_texture", C::ambiguous_referent, "ambiguous", [](const json& c) { return shared_attr(c, "texture"); }},
      {"shared_attribute", C::ambiguous_referent, "ambiguous",
       [](const json& c) {
         std::vector<std::string> out;
         for (const auto& [_, values] : c["ambiguous_attributes"].items()) {
           for (const auto& v : values) {
             auto s = v.get<std::string>();
             if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
           }
         }
         return out;
       }},
      {"shared_size", C::ambiguous_referent, "ambiguous",
       [](const json& c) {
         const auto& sizes = c["size"];
         if (sizes.size() != 1) return std::vector<std::string>{};
         return std::vector<std::string>{size_phrase(sizes[0].get<std::string>())};
       }},

      {"subjective_object", C::subjective_intent, "subjective",
       [](const json& c) { return one(c, "object_class", humanize); }},
      {"subjective_objects", C::subjective_intent, "subjective",
       [](const json& c) { return std::vector<std::string>{pluralize(humanize(c["object_class"].get<std::string>()))}; }},

      {"underspecified_object", C::underspecified_intent, "objects",
       [](const json& c) { return one(c, "object_class", humanize); }},
      {"underspecified_location", C::underspecified_intent, "locations",
       [](const json& c) { return one(c, "description"); }},

      {"infeasible_object", C::physical_infeasibility, "pairs",
       [](const json& c) { return one(c, "object_class", humanize); }},
      {"target_location", C::physical_infeasibility, "pairs",
       [](const json& c) { return one(c, "location_description"); }},

      {"capability_object", C::missing_capability, "capability",
       [](const json& c) { return one(c, "object_class", humanize); }},

      {"contradictory_object", C::contradictory, "",
       [](const json& c) { return one(c, "object_class", humanize); }},
      {"contradictory_color", C::contradictory, "", [](const json& c) { return one(c, "object_color"); }},
      {"contradictory_location", C::contradictory, "object_locations",
       [](const json& c) { return one(c, "location_description"); }},

      {"premise_object", C::false_premise, "premise", [](const json& c) { return one(c, "object_class", humanize); }},
  };
  return kSlots;
}

inline const SlotSpec* find_slot(Category category, std::string_view name) {
  for (const auto& s : slot_specs()) {
    if (s.category == category && s.name == name) return &s;
  }
  return nullptr;
}

inline const SourceSpec* find_source(Category category, std::string_view name) {
  for (const auto& s : source_specs()) {
    if (s.category == category && s.name == name) return &s;
  }
  return nullptr;
}

inline const SourceSpec& default_source(Category category) {
  for (const auto& s : source_specs()) {
    if (s.category == category) return s;
  }
  throw Error(ErrorKind::unknown_category, std::string(to_string(category)));
}

inline std::vector<std::string> pattern_placeholders(std::string_view pattern) {
  static const std::regex kPlaceholder("<([^<>]*)>");
  std::vector<std::string> out;
  std::string p(pattern);
  for (auto it = std::sregex_iterator(p.begin(), p.end(), kPlaceholder); it != std::sregex_iterator(); ++it) {
    auto name = (*it)[1].str();
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  }
  return out;
}

inline std::string_view id_prefix(Category c) {
  switch (c) {
    case Category::missing_referent: return "MR-";
    case Category::ambiguous_referent: return "AR-";
    case Category::subjective_intent: return "SI-";
    case Category::underspecified_intent: return "UI-";
    case Category::physical_infeasibility: return "PI-";
    case Category::missing_capability: return "MC-";
    case Category::contradictory: return "CI-";
    case Category::false_premise: return "FP-";
  }
  return "";
}

inline bool constraint_holds(const json& field, const json& expected) {
  if (expected.is_array()) {
    return field.is_string() && std::find(expected.begin(), expected.end(), field) != expected.end();
  }
  return field == expected;
}

inline std::vector<std::string> candidate_ids(const json& cand) {
  std::vector<std::string> ids;
  for (const char* key : {"object_id", "location_id"}) {
    if (cand.contains(key) && cand[key].is_string()) ids.push_back(cand[key].get<std::string>());
  }
  if (cand.contains("instance_ids")) {
    for (const auto& id : cand["instance_ids"]) ids.push_back(id.get<std::string>());
  }
  return ids;
}

}  // namespace detail

/// Category prefix used in template ids, e.g. "AR-" for ambiguous referent.
inline std::string_view template_id_prefix(Category c) { return detail::id_prefix(c); }

// ---------------------------------------------------------------------------
// Registry loading

inline Template template_from_json(const json& j, std::size_t index) {
  const auto where = "template[" + std::to_string(index) + "]";
  if (!j.is_object()) throw Error(ErrorKind::malformed_registry, where + " is not an object");
  for (const auto& [k, _] : j.items()) {
    static const std::set<std::string> kKeys = {"id", "category", "pattern", "placeholders", "constraints", "source"};
    if (!kKeys.count(k)) throw Error(ErrorKind::malformed_registry, where + ": unknown key \"" + k + "\"");
  }
  auto str = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty()) {
      throw Error(ErrorKind::malformed_registry, where + ": \"" + key + "\" must be a nonempty string");
    }
    return j[key].get<std::string>();
  };
  Template t;
  t.id = str("id");
  t.category = parse_category(str("category"));
  t.pattern = str("pattern");
  const auto where_id = "template " + t.id;

  if (t.id.rfind(detail::id_prefix(t.category), 0) != 0) {
    throw Error(ErrorKind::malformed_registry,
                where_id + ": id must start with \"" + std::string(detail::id_prefix(t.category)) + "\"");
  }
  if (j.contains("placeholders")) {
    if (!j["placeholders"].is_array()) throw Error(ErrorKind::malformed_registry, where_id + ": placeholders must be a list");
    for (const auto& p : j["placeholders"]) {
      if (!p.is_string()) throw Error(ErrorKind::malformed_registry, where_id + ": placeholder names must be strings");
      t.placeholders.push_back(p.get<std::string>());
    }
  }
  const auto used = detail::pattern_placeholders(t.pattern);
  for (const auto& name : used) {
    if (std::find(t.placeholders.begin(), t.placeholders.end(), name) == t.placeholders.end()) {
      throw Error(ErrorKind::undeclared_placeholder, where_id + ": <" + name + "> is not declared");
    }
  }
  for (const auto& name : t.placeholders) {
    if (std::find(used.begin(), used.end(), name) == used.end()) {
      throw Error(ErrorKind::malformed_registry, where_id + ": declared placeholder <" + name + "> is unused");
    }
  }
  t.placeholders = used;

  // Resolve the candidate source: explicit, implied by slots, or the
  // category's first list.
  std::string implied;
  for (const auto& name : t.placeholders) {
    const auto* slot = detail::find_slot(t.category, name);
    if (!slot) {
      throw Error(ErrorKind::malformed_registry,
                  where_id + ": <" + name + "> is not available for " + std::string(to_string(t.category)));
    }
    if (slot->source.empty()) continue;
    if (!implied.empty() && implied != slot->source) {
      throw Error(ErrorKind::malformed_registry, where_id + ": placeholders draw from different candidate lists");
    }
    implied = slot->source;
  }
  if (j.contains("source")) {
    if (!j["source"].is_string()) throw Error(ErrorKind::malformed_registry, where_id + ": source must be a string");
    t.source = j["source"].get<std::string>();
    if (!detail::find_source(t.category, t.source)) {
      throw Error(ErrorKind::malformed_registry, where_id + ": unknown source \"" + t.source + "\"");
    }
    if (!implied.empty() && implied != t.source) {
      throw Error(ErrorKind::malformed_registry, where_id + ": source conflicts with placeholders");
    }
  } else {
    t.source = implied.empty() ? std::string(detail::default_source(t.category).name) : implied;
  }

  if (j.contains("constraints")) {
    if (!j["constraints"].is_object()) throw Error(ErrorKind::malformed_registry, where_id + ": constraints must be an object");
    t.constraints = j["constraints"];
  }
  const auto* source = detail::find_source(t.category, t.source);
  for (const auto& [field, expected] : t.constraints.items()) {
    const auto& allowed = source->constraint_fields;
    if (std::find(allowed.begin(), allowed.end(), field) == allowed.end()) {
      throw Error(ErrorKind::malformed_registry, where_id + ": cannot constrain \"" + field + "\"");
    }
    bool ok = expected.is_boolean() || expected.is_string() || expected.is_number_integer();
    if (expected.is_array()) {
      ok = std::all_of(expected.begin(), expected.end(), [](const json& v) { return v.is_string(); });
    }
    if (!ok) throw Error(ErrorKind::malformed_registry, where_id + ": bad value for constraint \"" + field + "\"");
  }
  return t;
}

inline TemplateSet templates_from_json(const json& doc) {
  if (!doc.is_array()) throw Error(ErrorKind::malformed_registry, "registry must be a JSON list");
  TemplateSet set;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    Template t = template_from_json(doc[i], i);
    if (!ids.insert(t.id).second) throw Error(ErrorKind::malformed_registry, "duplicate template id " + t.id);
    ++set.counts[category_index(t.category)];
    set.templates.push_back(std::move(t));
  }
  return set;
}

inline TemplateSet load_templates(const fs::path& registry_file) {
  std::string text = read_file(registry_file);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::malformed_registry, registry_file.string() + ": " + e.what());
  }
  return templates_from_json(doc);
}

inline const TemplateSet& default_templates() {
  static const TemplateSet set = templates_from_json(json::parse(bundled::templates_json));
  return set;
}

// ---------------------------------------------------------------------------
// Instantiation

/// Every binding of `tmpl` drawn from its category's candidate list that
/// satisfies the template constraints. Placeholders expand as a cartesian
/// product over their per-candidate values.
inline std::vector<Binding> enumerate_bindings(const Template& tmpl, const json& checks_doc) {
  const auto* source = detail::find_source(tmpl.category, tmpl.source);
  if (!source) throw Error(ErrorKind::malformed_registry, "template " + tmpl.id + " has no source");
  const json& checks = checks_doc.contains("checks") ? checks_doc["checks"] : checks_doc;
  std::vector<Binding> out;
  const std::string list_key(source->list_key);
  if (!checks.contains(list_key)) return out;
  const json& list = checks[list_key];

  for (std::size_t i = 0; i < list.size(); ++i) {
    const json& cand = list[i];
    if (!source->accepts(cand)) continue;
    bool ok = true;
    for (const auto& [field, expected] : tmpl.constraints.items()) {
      if (!cand.contains(field) || !detail::constraint_holds(cand[field], expected)) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;

    std::vector<std::vector<std::string>> choices;
    for (const auto& name : tmpl.placeholders) {
      choices.push_back(detail::find_slot(tmpl.category, name)->values(cand));
      if (choices.back().empty()) ok = false;
    }
    if (!ok) continue;

    Binding base;
    base.candidate_list = std::string(source->list_key);
    base.candidate_index = i;
    base.ids = detail::candidate_ids(cand);
    std::vector<std::size_t> cursor(choices.size(), 0);
    for (;;) {
      Binding b = base;
      for (std::size_t s = 0; s < choices.size(); ++s) b.values[tmpl.placeholders[s]] = choices[s][cursor[s]];
      out.push_back(std::move(b));
      std::size_t s = choices.size();
      while (s > 0 && ++cursor[s - 1] == choices[s - 1].size()) {
        cursor[s - 1] = 0;
        --s;
      }
      if (s == 0) break;
    }
  }
  return out;
}

inline std::vector<Binding> enumerate_bindings(const Template& tmpl, const CandidateSet& cands) {
  return enumerate_bindings(tmpl, candidates_to_json(cands));
}

inline std::string render(const Template& tmpl, const Binding& b) {
  std::string out;
  const auto& p = tmpl.pattern;
  std::size_t pos = 0;
  while (pos < p.size()) {
    auto open = p.find('<', pos);
    if (open == std::string::npos) {
      out.append(p, pos);
      break;
    }
    auto close = p.find('>', open);
    out.append(p, pos, open - pos);
    auto name = p.substr(open + 1, close - open - 1);
    out += b.values.at(name);
    pos = close + 1;
  }
  return normalize_whitespace(out);
}

inline bool instruction_order(const InstructionRecord& a, const InstructionRecord& b) {
  if (a.category != b.category) return category_index(a.category) < category_index(b.category);
  if (a.template_id != b.template_id) return a.template_id < b.template_id;
  return a.instruction < b.instruction;
}

/// All distinct instructions per category, before sampling. Within a
/// category the first occurrence of a string (registry order, then
/// candidate order) is kept.
inline std::array<std::vector<InstructionRecord>, 8> enumerate_instructions(const CandidateSet& cands,
                                                                            const TemplateSet& tset,
                                                                            const std::string& image_hash) {
  const json doc = candidates_to_json(cands);
  std::array<std::vector<InstructionRecord>, 8> out;
  std::array<std::set<std::string>, 8> seen;
  for (const auto& tmpl : tset.templates) {
    const auto ci = category_index(tmpl.category);
    for (auto& b : enumerate_bindings(tmpl, doc)) {
      auto text = render(tmpl, b);
      if (!seen[ci].insert(text).second) continue;
      out[ci].push_back({image_hash, tmpl.category, tmpl.id, std::move(text), std::move(b), std::nullopt, std::nullopt});
    }
  }
  return out;
}

/// Samples up to `per_category_cap` distinct instructions per category with
/// a generator keyed on (seed, image_hash, category). Output is sorted by
/// (category, template_id, instruction).
inline std::vector<InstructionRecord> generate_instructions(const CandidateSet& cands, const TemplateSet& tset,
                                                            std::uint64_t seed, std::size_t per_category_cap,
                                                            const std::string& image_hash) {
  if (per_category_cap < 1) throw Error(ErrorKind::config_error, "per-category cap must be at least 1");
  auto all = enumerate_instructions(cands, tset, image_hash);
  std::vector<InstructionRecord> out;
  for (Category c : kAllCategories) {
    auto& pool = all[category_index(c)];
    auto rng = SeededRng::for_key("generate", seed, image_hash, to_string(c));
    for (auto i : sample_indices(pool.size(), per_category_cap, rng)) out.push_back(std::move(pool[i]));
  }
  std::sort(out.begin(), out.end(), instruction_order);
  return out;
}

// ---------------------------------------------------------------------------
// JSONL form

inline json instruction_to_json(const InstructionRecord& r) {
  json values = json::object();
  for (const auto& [k, v] : r.bindings.values) values[k] = v;
  json j = {{"image_hash", r.image_hash},
            {"category", to_string(r.category)},
            {"template_id", r.template_id},
            {"instruction", r.instruction},
            {"bindings", std::move(values)},
            {"source",
             {{"list", r.bindings.candidate_list},
              {"index", r.bindings.candidate_index},
              {"ids", r.bindings.ids}}}};
  if (r.image_path) j["image_path"] = *r.image_path;
  if (r.source_dataset) j["source_dataset"] = *r.source_dataset;
  return j;
}

inline InstructionRecord instruction_from_json(const json& j) {
  InstructionRecord r;
  r.image_hash = j.at("image_hash").get<std::string>();
  r.category = parse_category(j.at("category").get<std::string>());
  r.template_id = j.at("template_id").get<std::string>();
  r.instruction = j.at("instruction").get<std::string>();
  for (const auto& [k, v] : j.at("bindings").items()) r.bindings.values[k] = v.get<std::string>();
  const auto& src = j.at("source");
  r.bindings.candidate_list = src.at("list").get<std::string>();
  r.bindings.candidate_index = src.at("index").get<std::size_t>();
  r.bindings.ids = src.at("ids").get<std::vector<std::string>>();
  if (j.contains("image_path")) r.image_path = j["image_path"].get<std::string>();
  if (j.contains("source_dataset")) r.source_dataset = j["source_dataset"].get<std::string>();
  return r;
}

}  // namespace roboabstain
