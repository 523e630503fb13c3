#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "roboabstain/error.hpp"

namespace roboabstain {

/// The eight abstention categories, in reporting order.
enum class Category {
  missing_referent,
  ambiguous_referent,
  subjective_intent,
  underspecified_intent,
  physical_infeasibility,
  missing_capability,
  contradictory,
  false_premise,
};

inline constexpr std::array<Category, 8> kAllCategories = {
    Category::missing_referent,       Category::ambiguous_referent,
    Category::subjective_intent,      Category::underspecified_intent,
    Category::physical_infeasibility, Category::missing_capability,
    Category::contradictory,          Category::false_premise,
};

inline std::string_view to_string(Category c) {
  switch (c) {
    case Category::missing_referent: return "missing_referent";
    case Category::ambiguous_referent: return "ambiguous_referent";
    case Category::subjective_intent: return "subjective_intent";
    case Category::underspecified_intent: return "underspecified_intent";
    case Category::physical_infeasibility: return "physical_infeasibility";
    case Category::missing_capability: return "missing_capability";
    case Category::contradictory: return "contradictory";
    case Category::false_premise: return "false_premise";
  }
  return "";
}

inline std::string_view display_name(Category c) {
  switch (c) {
    case Category::missing_referent: return "Missing Referent";
    case Category::ambiguous_referent: return "Ambiguous Referent";
    case Category::subjective_intent: return "Subjective Intent";
    case Category::underspecified_intent: return "Underspecified Intent";
    case Category::physical_infeasibility: return "Physical Infeasibility";
    case Category::missing_capability: return "Missing Capability";
    case Category::contradictory: return "Contradictory";
    case Category::false_premise: return "False Premise";
  }
  return "";
}

inline std::optional<Category> try_parse_category(std::string_view name) {
  for (Category c : kAllCategories) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

inline Category parse_category(std::string_view name) {
  if (auto c = try_parse_category(name)) return *c;
  throw Error(ErrorKind::unknown_category, "\"" + std::string(name) + "\"");
}

inline std::size_t category_index(Category c) { return static_cast<std::size_t>(c); }

}  // namespace roboabstain
