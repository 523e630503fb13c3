#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "roboabstain/category.hpp"
#include "roboabstain/io.hpp"
#include "roboabstain/rng.hpp"
#include "roboabstain/templates.hpp"

namespace roboabstain {

struct BenchmarkItem {
  std::string item_id;  // image_hash + "/" + category
  std::string image_path;
  std::string image_hash;
  Category category = Category::missing_referent;
  std::string instruction;
  std::string template_id;
  std::optional<std::string> source_dataset;

  friend bool operator==(const BenchmarkItem&, const BenchmarkItem&) = default;
};

inline std::string make_item_id(const std::string& image_hash, Category c) {
  return image_hash + "/" + std::string(to_string(c));
}

/// Keeps one record per (image, category) group, chosen by a generator keyed
/// on (seed, image_hash, category). Groups are put in (template_id,
/// instruction) order first so the choice ignores input order.
inline std::vector<BenchmarkItem> sample_benchmark(const std::vector<InstructionRecord>& records, std::uint64_t seed) {
  std::map<std::pair<std::string, std::size_t>, std::vector<const InstructionRecord*>> groups;
  for (const auto& r : records) groups[{r.image_hash, category_index(r.category)}].push_back(&r);
  std::vector<BenchmarkItem> out;
  out.reserve(groups.size());
  for (auto& [key, group] : groups) {
    std::sort(group.begin(), group.end(), [](const InstructionRecord* a, const InstructionRecord* b) {
      if (a->template_id != b->template_id) return a->template_id < b->template_id;
      return a->instruction < b->instruction;
    });
    const Category c = kAllCategories[key.second];
    auto rng = SeededRng::for_key("sample", seed, key.first, to_string(c));
    const InstructionRecord& pick = *group[rng.below(group.size())];
    out.push_back({make_item_id(pick.image_hash, c), pick.image_path.value_or(""), pick.image_hash, c,
                   pick.instruction, pick.template_id, pick.source_dataset});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.item_id < b.item_id; });
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

inline constexpr std::string_view kUnknownSource = "unspecified";

struct StatsTable {
  std::vector<std::string> sources;  // sorted
  std::map<std::string, std::array<std::size_t, 8>> counts;

  std::size_t cell(const std::string& source, Category c) const {
    auto it = counts.find(source);
    return it == counts.end() ? 0 : it->second[category_index(c)];
  }
  std::size_t category_total(Category c) const {
    std::size_t n = 0;
    for (const auto& [_, row] : counts) n += row[category_index(c)];
    return n;
  }
  std::size_t source_total(const std::string& source) const {
    std::size_t n = 0;
    for (Category c : kAllCategories) n += cell(source, c);
    return n;
  }
  std::size_t total() const {
    std::size_t n = 0;
    for (Category c : kAllCategories) n += category_total(c);
    return n;
  }
};

inline StatsTable compute_statistics(const std::vector<BenchmarkItem>& items) {
  StatsTable t;
  for (const auto& item : items) {
    const std::string src = item.source_dataset.value_or(std::string(kUnknownSource));
    auto [it, inserted] = t.counts.try_emplace(src);
    if (inserted) it->second.fill(0);
    ++it->second[category_index(item.category)];
  }
  for (const auto& [src, _] : t.counts) t.sources.push_back(src);
  return t;
}

/// Rows are categories, columns are sources, then a Total column; last row
/// holds column totals.
inline std::string statistics_csv(const StatsTable& t) {
  std::ostringstream os;
  os << "category";
  for (const auto& s : t.sources) os << "," << s;
  os << ",total\n";
  for (Category c : kAllCategories) {
    os << to_string(c);
    for (const auto& s : t.sources) os << "," << t.cell(s, c);
    os << "," << t.category_total(c) << "\n";
  }
  os << "total";
  for (const auto& s : t.sources) os << "," << t.source_total(s);
  os << "," << t.total() << "\n";
  return os.str();
}

inline std::string statistics_markdown(const StatsTable& t) {
  std::ostringstream os;
  os << "| Category |";
  for (const auto& s : t.sources) os << " " << s << " |";
  os << " Total |\n|---|";
  for (std::size_t i = 0; i < t.sources.size(); ++i) os << "---:|";
  os << "---:|\n";
  for (Category c : kAllCategories) {
    os << "| " << display_name(c) << " |";
    for (const auto& s : t.sources) os << " " << t.cell(s, c) << " |";
    os << " " << t.category_total(c) << " |\n";
  }
  os << "| Total |";
  for (const auto& s : t.sources) os << " " << t.source_total(s) << " |";
  os << " " << t.total() << " |\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// JSONL persistence

inline json benchmark_item_to_json(const BenchmarkItem& item) {
  json j = {{"item_id", item.item_id},       {"image_path", item.image_path},
            {"image_hash", item.image_hash}, {"category", to_string(item.category)},
            {"instruction", item.instruction}, {"template_id", item.template_id}};
  j["source_dataset"] = item.source_dataset ? json(*item.source_dataset) : json(nullptr);
  return j;
}

inline BenchmarkItem benchmark_item_from_json(const json& j) {
  BenchmarkItem item;
  item.item_id = j.at("item_id").get<std::string>();
  item.image_path = j.at("image_path").get<std::string>();
  item.image_hash = j.at("image_hash").get<std::string>();
  item.category = parse_category(j.at("category").get<std::string>());
  item.instruction = j.at("instruction").get<std::string>();
  item.template_id = j.at("template_id").get<std::string>();
  if (j.contains("source_dataset") && !j["source_dataset"].is_null()) {
    item.source_dataset = j["source_dataset"].get<std::string>();
  }
  if (item.item_id != make_item_id(item.image_hash, item.category)) {
    throw Error(ErrorKind::malformed_line, "item_id does not match image_hash/category: " + item.item_id);
  }
  return item;
}

inline std::string serialize_benchmark(std::vector<BenchmarkItem> items) {
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.item_id < b.item_id; });
  std::string out;
  for (const auto& item : items) out += benchmark_item_to_json(item).dump() + "\n";
  return out;
}

inline void write_benchmark(const std::vector<BenchmarkItem>& items, const fs::path& path) {
  write_file_atomic(path, serialize_benchmark(items));
}

/// Streams the file line by line; a bad line raises malformed_line naming
/// its line number. Duplicate item ids are rejected the same way.
inline std::vector<BenchmarkItem> read_benchmark(const fs::path& path) {
  std::vector<BenchmarkItem> items;
  std::set<std::string> ids;
  for_each_jsonl(path, [&](std::size_t line_no, json j) {
    try {
      items.push_back(benchmark_item_from_json(j));
    } catch (const Error& e) {
      throw Error(ErrorKind::malformed_line, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const json::exception& e) {
      throw Error(ErrorKind::malformed_line, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!ids.insert(items.back().item_id).second) {
      throw Error(ErrorKind::malformed_line,
                  path.string() + ":" + std::to_string(line_no) + ": duplicate item_id " + items.back().item_id);
    }
  });
  return items;
}

}  // namespace roboabstain
