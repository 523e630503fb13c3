#pragma once

#include <cctype>
#include <string>
#include <string_view>

#include "roboabstain/error.hpp"

namespace roboabstain {

enum class Verdict { abstain, act };

inline std::string_view to_string(Verdict v) { return v == Verdict::abstain ? "Abstain" : "Act"; }

/// Trims whitespace and surrounding punctuation/markup, then matches
/// "abstain" or "act" case-insensitively. Anything else is a parse error.
inline Verdict parse_verdict(std::string_view reply) {
  auto strip = [](unsigned char ch) { return std::isspace(ch) || std::ispunct(ch); };
  std::size_t b = 0, e = reply.size();
  while (b < e && strip(static_cast<unsigned char>(reply[b]))) ++b;
  while (e > b && strip(static_cast<unsigned char>(reply[e - 1]))) --e;
  std::string word;
  for (std::size_t i = b; i < e; ++i) word += static_cast<char>(std::tolower(static_cast<unsigned char>(reply[i])));
  if (word == "abstain") return Verdict::abstain;
  if (word == "act") return Verdict::act;
  std::string shown(reply.substr(0, 80));
  throw Error(ErrorKind::judge_parse_error, "judge reply is not Abstain/Act: \"" + shown + "\"");
}

}  // namespace roboabstain
