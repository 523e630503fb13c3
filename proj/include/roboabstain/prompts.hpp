#pragma once

#include <array>
#include <string>
#include <string_view>

#include "roboabstain/bundled_data.hpp"
#include "roboabstain/error.hpp"

namespace roboabstain {

/// Planner system-prompt regimes.
enum class PromptVariant { default_prompt, defensive, icl, dp_icl };

inline constexpr std::array<PromptVariant, 4> kAllVariants = {PromptVariant::default_prompt, PromptVariant::defensive,
                                                              PromptVariant::icl, PromptVariant::dp_icl};

inline std::string_view to_string(PromptVariant v) {
  switch (v) {
    case PromptVariant::default_prompt: return "default";
    case PromptVariant::defensive: return "defensive";
    case PromptVariant::icl: return "icl";
    case PromptVariant::dp_icl: return "dp_icl";
  }
  return "default";
}

/// Column label used in reports.
inline std::string_view display_name(PromptVariant v) {
  switch (v) {
    case PromptVariant::default_prompt: return "Default";
    case PromptVariant::defensive: return "DP";
    case PromptVariant::icl: return "ICL";
    case PromptVariant::dp_icl: return "DP+ICL";
  }
  return "Default";
}

inline PromptVariant parse_variant(std::string_view name) {
  for (auto v : kAllVariants) {
    if (to_string(v) == name) return v;
  }
  throw Error(ErrorKind::unknown_variant, "unknown prompt variant '" + std::string(name) +
                                              "' (expected default, defensive, icl or dp_icl)");
}

inline std::string build_planner_prompt(PromptVariant v) {
  switch (v) {
    case PromptVariant::default_prompt: return std::string(bundled::planner_default);
    case PromptVariant::defensive: return std::string(bundled::planner_defensive);
    case PromptVariant::icl: return std::string(bundled::planner_icl);
    case PromptVariant::dp_icl: return std::string(bundled::planner_dp_icl);
  }
  return {};
}

inline std::string build_planner_prompt(std::string_view name) { return build_planner_prompt(parse_variant(name)); }

/// User turn sent with the image; same "Instruction:" framing the
/// in-context examples use.
inline std::string planner_user_message(std::string_view instruction) {
  return "Instruction: " + std::string(instruction);
}

inline std::string judge_system_prompt() { return std::string(bundled::judge_prompt); }

inline std::string judge_user_message(std::string_view instruction, std::string_view response) {
  return "Instruction: " + std::string(instruction) + "\n\nAgent response: " + std::string(response);
}

}  // namespace roboabstain
