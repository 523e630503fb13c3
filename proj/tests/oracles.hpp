#pragma once

// Brute-force re-statements of the derivation rules, written without the
// library's helpers: every rule is a literal predicate over all objects or
// all (object, location) pairs.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "roboabstain/constraints.hpp"
#include "roboabstain/metrics.hpp"

namespace oracle {

using namespace roboabstain;

inline bool contains(const std::vector<std::string>& xs, const std::string& x) {
  for (const auto& y : xs) {
    if (y == x) return true;
  }
  return false;
}

inline int rank_of(const std::string& size) {
  const std::vector<std::string> order = {"xsmall", "small", "medium", "large", "xlarge"};
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] == size) return static_cast<int>(i);
  }
  return -1;
}

inline std::vector<std::string> classes_in_order(const SceneRepresentation& s) {
  std::vector<std::string> out;
  for (const auto& o : s.scene_objects) {
    if (!contains(out, o.object_class)) out.push_back(o.object_class);
  }
  return out;
}

inline std::vector<SceneObject> instances(const SceneRepresentation& s, const std::string& cls) {
  std::vector<SceneObject> out;
  for (const auto& o : s.scene_objects) {
    if (o.object_class == cls) out.push_back(o);
  }
  return out;
}

inline std::vector<std::string> attribute_keys(const std::vector<SceneObject>& objs) {
  std::vector<std::string> keys = {"color", "material", "shape", "texture", "pattern", "condition", "style"};
  std::vector<std::string> extra;
  for (const auto& o : objs) {
    for (const auto& [k, _] : o.attributes.values) {
      if (!contains(keys, k) && !contains(extra, k)) extra.push_back(k);
    }
  }
  std::sort(extra.begin(), extra.end());
  keys.insert(keys.end(), extra.begin(), extra.end());
  return keys;
}

inline std::vector<AmbiguousCandidate> ambiguous(const SceneRepresentation& s) {
  std::vector<AmbiguousCandidate> out;
  for (const auto& cls : classes_in_order(s)) {
    const auto inst = instances(s, cls);
    if (inst.size() < 2) continue;
    AmbiguousCandidate c;
    c.object_class = cls;
    c.count = static_cast<int>(inst.size());
    c.is_manipulable = std::all_of(inst.begin(), inst.end(), [](const auto& o) { return o.is_manipulable; });
    c.is_stateful = std::all_of(inst.begin(), inst.end(), [](const auto& o) { return o.is_stateful; });
    c.exceeds_weight_limit = std::all_of(inst.begin(), inst.end(), [](const auto& o) { return o.exceeds_weight_limit; });
    for (const auto& o : inst) {
      c.instance_ids.push_back(o.id);
      if (o.state && !contains(c.state, *o.state)) c.state.push_back(*o.state);
      if (!contains(c.size, o.size)) c.size.push_back(o.size);
    }
    for (const auto& key : attribute_keys(inst)) {
      std::vector<std::string> present, distinct;
      for (const auto& o : inst) {
        auto it = o.attributes.values.find(key);
        if (it == o.attributes.values.end()) continue;
        present.push_back(it->second);
        if (!contains(distinct, it->second)) distinct.push_back(it->second);
      }
      if (present.size() == inst.size() && distinct.size() == 1) c.ambiguous_attributes.push_back({key, distinct});
      if (distinct.size() >= 2) c.distinguishing_attributes.push_back(key);
    }
    out.push_back(c);
  }
  return out;
}

inline std::vector<SubjectiveCandidate> subjective(const SceneRepresentation& s) {
  std::vector<SubjectiveCandidate> out;
  for (const auto& cls : classes_in_order(s)) {
    const auto inst = instances(s, cls);
    if (inst.size() < 2) continue;
    // some pair of instances shows two different values for one key
    bool differs = false;
    for (std::size_t a = 0; a < inst.size(); ++a) {
      for (std::size_t b = a + 1; b < inst.size(); ++b) {
        for (const auto& [k, va] : inst[a].attributes.values) {
          auto it = inst[b].attributes.values.find(k);
          if (it != inst[b].attributes.values.end() && it->second != va) differs = true;
        }
      }
    }
    if (!differs) continue;
    SubjectiveCandidate c{cls, {}};
    for (const auto& o : inst) c.instance_ids.push_back(o.id);
    out.push_back(c);
  }
  return out;
}

inline std::vector<UnderspecifiedObjectCandidate> underspecified_objects(const SceneRepresentation& s) {
  std::vector<UnderspecifiedObjectCandidate> out;
  for (const auto& o : s.scene_objects) {
    if (o.is_manipulable == true && o.exceeds_weight_limit == false) {
      out.push_back({o.id, o.object_class, o.state, o.size, o.is_manipulable, o.is_stateful, o.exceeds_weight_limit,
                     o.location_id});
    }
  }
  return out;
}

inline std::vector<UnderspecifiedLocationCandidate> underspecified_locations(const SceneRepresentation& s) {
  std::vector<UnderspecifiedLocationCandidate> out;
  for (const auto& l : s.scene_locations) out.push_back({l.id, l.description, l.location_type, l.size});
  return out;
}

inline std::vector<InfeasiblePair> infeasible(const SceneRepresentation& s) {
  std::vector<InfeasiblePair> out;
  for (const auto& o : s.scene_objects) {
    for (const auto& l : s.scene_locations) {
      const bool container = l.location_type == "container" || l.location_type == "inside_container" ||
                             l.location_type == "drawer";
      const bool already_inside = o.location_id == l.id || contains(l.contains_object_ids, o.id);
      if (container && o.is_manipulable && !o.exceeds_weight_limit && rank_of(o.size) > rank_of(l.size) &&
          !already_inside) {
        out.push_back({o.id, o.object_class, o.size, l.id, l.description, l.size, "object_larger_than_container"});
      }
    }
  }
  return out;
}

inline std::vector<CapabilityCandidate> capability(const SceneRepresentation& s) {
  std::vector<CapabilityCandidate> out;
  for (const auto& o : s.scene_objects) {
    std::vector<std::string> done;
    for (const auto& m : o.modalities) {
      if (m == "vision" || m == "manipulation" || contains(done, m)) continue;
      done.push_back(m);
      out.push_back({o.id, o.object_class, m});
    }
  }
  return out;
}

inline std::vector<FalsePremiseCandidate> false_premise(const SceneRepresentation& s) {
  const std::vector<std::string> actionable = {"open", "closed", "full", "empty", "on", "off"};
  std::vector<FalsePremiseCandidate> out;
  for (const auto& o : s.scene_objects) {
    if (o.is_stateful && o.state && contains(actionable, *o.state)) out.push_back({o.id, o.object_class, *o.state});
  }
  return out;
}

inline std::vector<ContradictoryBinding> contradictory(const SceneRepresentation& s) {
  std::vector<ContradictoryBinding> out;
  for (const auto& o : s.scene_objects) {
    if (!o.is_manipulable || o.exceeds_weight_limit) continue;
    auto color = o.attributes.get("color");
    out.push_back({o.id, o.object_class, color, std::nullopt, std::nullopt});
    for (const auto& l : s.scene_locations) out.push_back({o.id, o.object_class, color, l.id, l.description});
  }
  return out;
}

inline CandidateSet all(const SceneRepresentation& s) {
  CandidateSet c;
  c.ambiguous = ambiguous(s);
  c.false_premise = false_premise(s);
  c.physically_infeasible = infeasible(s);
  c.missing_capability = capability(s);
  c.subjective = subjective(s);
  c.underspecified_objects = underspecified_objects(s);
  c.underspecified_locations = underspecified_locations(s);
  c.missing_referent = s.absent_and_implausible_objects;
  c.contradictory = contradictory(s);
  return c;
}

// Pair-counting restatement of Fleiss kappa: expand each row into explicit
// rater labels and count agreeing ordered rater pairs.
inline std::optional<double> fleiss_kappa(const std::vector<std::vector<int>>& rows) {
  double p_sum = 0;
  std::map<int, double> label_count;
  double ratings = 0;
  for (const auto& row : rows) {
    std::vector<int> labels;
    for (std::size_t j = 0; j < row.size(); ++j) {
      for (int r = 0; r < row[j]; ++r) labels.push_back(static_cast<int>(j));
    }
    double agree = 0, pairs = 0;
    for (std::size_t a = 0; a < labels.size(); ++a) {
      for (std::size_t b = 0; b < labels.size(); ++b) {
        if (a == b) continue;
        ++pairs;
        if (labels[a] == labels[b]) ++agree;
      }
      label_count[labels[a]] += 1;
      ratings += 1;
    }
    p_sum += agree / pairs;
  }
  const double p_bar = p_sum / static_cast<double>(rows.size());
  double p_e = 0;
  for (const auto& [_, c] : label_count) p_e += (c / ratings) * (c / ratings);
  if (p_e >= 1.0) return std::nullopt;
  return (p_bar - p_e) / (1 - p_e);
}

}  // namespace oracle
