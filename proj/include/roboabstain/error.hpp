#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace roboabstain {

enum class ErrorKind {
  malformed_json,
  invalid_scene,
  invalid_vocab,
  unknown_size,
  undecodable_image,
  no_json_object_found,
  grounding_failed,
  transport_error,
  auth_error,
  malformed_registry,
  unknown_category,
  undeclared_placeholder,
  io_error,
  malformed_line,
  unknown_variant,
  missing_verdicts,
  judge_parse_error,
  item_set_mismatch,
  degenerate_input,
  config_error,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::malformed_json: return "malformed-json";
    case ErrorKind::invalid_scene: return "invalid-scene";
    case ErrorKind::invalid_vocab: return "invalid-vocab";
    case ErrorKind::unknown_size: return "unknown-size";
    case ErrorKind::undecodable_image: return "undecodable-image";
    case ErrorKind::no_json_object_found: return "no-json-object-found";
    case ErrorKind::grounding_failed: return "grounding-failed";
    case ErrorKind::transport_error: return "transport-error";
    case ErrorKind::auth_error: return "auth-error";
    case ErrorKind::malformed_registry: return "malformed-registry";
    case ErrorKind::unknown_category: return "unknown-category";
    case ErrorKind::undeclared_placeholder: return "undeclared-placeholder";
    case ErrorKind::io_error: return "io-error";
    case ErrorKind::malformed_line: return "malformed-line";
    case ErrorKind::unknown_variant: return "unknown-variant";
    case ErrorKind::missing_verdicts: return "missing-verdicts";
    case ErrorKind::judge_parse_error: return "judge-parse-error";
    case ErrorKind::item_set_mismatch: return "item-set-mismatch";
    case ErrorKind::degenerate_input: return "degenerate-input";
    case ErrorKind::config_error: return "config-error";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace roboabstain
