#pragma once

#include <array>
#include <chrono>
#include <ctime>
#include <string>
#include <vector>

#include "roboabstain/bundled_data.hpp"
#include "roboabstain/hash.hpp"
#include "roboabstain/io.hpp"

namespace roboabstain {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Stage names in pipeline order.
inline constexpr std::array<std::string_view, 7> kStages = {"ground",   "derive", "generate", "sample",
                                                           "evaluate", "judge",  "report"};

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string file_sha256(const fs::path& p) { return sha256_hex(read_file(p)); }

inline json bundled_prompt_hashes() {
  return {{"grounding", sha256_hex(bundled::grounding_prompt)},
          {"grounding_schema", sha256_hex(bundled::grounding_schema)},
          {"planner_default", sha256_hex(bundled::planner_default)},
          {"planner_defensive", sha256_hex(bundled::planner_defensive)},
          {"planner_icl", sha256_hex(bundled::planner_icl)},
          {"planner_dp_icl", sha256_hex(bundled::planner_dp_icl)},
          {"judge", sha256_hex(bundled::judge_prompt)}};
}

/// manifest.json in the run directory. Each command records its stage entry
/// (arguments, output hashes, failures, timestamps) so the replay command
/// can re-execute it from caches.
class RunManifest {
 public:
  static fs::path path_in(const fs::path& run_dir) { return run_dir / "manifest.json"; }

  static RunManifest load_or_create(const fs::path& run_dir) {
    RunManifest m;
    const fs::path p = path_in(run_dir);
    if (fs::exists(p)) {
      m.doc_ = read_json_file(p);
    } else {
      m.doc_ = json::object();
      m.doc_["tool"] = "roboabstain";
      m.doc_["stages"] = json::object();
    }
    m.doc_["version"] = kToolVersion;
    m.doc_["prompt_sha256"] = bundled_prompt_hashes();
    m.doc_["vocab_sha256"] = sha256_hex(bundled::vocab_json);
    return m;
  }

  json& doc() { return doc_; }
  const json& doc() const { return doc_; }

  void set(const std::string& key, json value) { doc_[key] = std::move(value); }

  void record_stage(const std::string& stage, const json& entry) {
    json stages = json::object();
    // keep pipeline order regardless of the order commands ran in
    for (auto name : kStages) {
      const std::string n(name);
      if (n == stage) stages[n] = entry;
      else if (doc_["stages"].contains(n)) stages[n] = doc_["stages"][n];
    }
    doc_["stages"] = std::move(stages);
  }

  bool has_stage(std::string_view stage) const { return doc_.at("stages").contains(std::string(stage)); }
  const json& stage(std::string_view stage) const { return doc_.at("stages").at(std::string(stage)); }

  void save(const fs::path& run_dir) const { write_file_atomic(path_in(run_dir), dump_pretty(doc_)); }

 private:
  json doc_;
};

}  // namespace roboabstain
