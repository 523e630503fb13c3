#pragma once

#include <optional>
#include <string>

#include "roboabstain/io.hpp"

namespace roboabstain {

/// Content-addressed JSON store: one file per key under dir/<key[0:2]>/.
/// Writes are atomic, so concurrent writers are safe. An empty directory
/// disables the cache.
class ResultCache {
 public:
  ResultCache() = default;
  explicit ResultCache(fs::path dir) : dir_(std::move(dir)) {}

  bool enabled() const { return !dir_.empty(); }
  const fs::path& dir() const { return dir_; }

  fs::path path_for(const std::string& key) const { return dir_ / key.substr(0, 2) / (key + ".json"); }

  std::optional<json> get(const std::string& key) const {
    if (!enabled()) return std::nullopt;
    const fs::path p = path_for(key);
    if (!fs::exists(p)) return std::nullopt;
    return read_json_file(p);
  }

  void put(const std::string& key, const json& value) const {
    if (enabled()) write_file_atomic(path_for(key), dump_pretty(value));
  }

 private:
  fs::path dir_;
};

}  // namespace roboabstain
