#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>

#include <nlohmann/json.hpp>

#include "roboabstain/error.hpp"

namespace roboabstain {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes via a uniquely named temporary and renames into place, so
/// concurrent writers of the same path never expose a partial file.
inline void write_file_atomic(const fs::path& path, std::string_view content) {
  static std::atomic<unsigned long> counter{0};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ostringstream tmp_name;
  tmp_name << path.filename().string() << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id())
           << "." << counter.fetch_add(1);
  fs::path tmp = path.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io_error, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorKind::io_error, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(ErrorKind::io_error, "rename to " + path.string() + ": " + ec.message());
  }
}

inline json parse_json(std::string_view text, const std::string& context) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::malformed_json, context + ": " + e.what());
  }
}

inline json read_json_file(const fs::path& path) { return parse_json(read_file(path), path.string()); }

/// Pretty JSON with a trailing newline; the canonical on-disk form.
inline std::string dump_pretty(const json& j) { return j.dump(2) + "\n"; }

/// Calls `fn(line_number, value)` for each nonblank line. Lines are
/// streamed; the file is never held in memory as a whole.
inline void for_each_jsonl(const fs::path& path, const std::function<void(std::size_t, json)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json value;
    try {
      value = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::malformed_line,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    fn(line_no, std::move(value));
  }
}

}  // namespace roboabstain
