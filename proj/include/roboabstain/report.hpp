#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "roboabstain/category.hpp"
#include "roboabstain/dataset.hpp"
#include "roboabstain/judge.hpp"
#include "roboabstain/metrics.hpp"

namespace roboabstain {

/// Percentage with one decimal, halves rounded up, computed in integers so
/// that e.g. 2365/6069 always prints 39.0.
inline std::string format_rate(std::uint64_t count, std::uint64_t total) {
  if (total == 0) return "n/a";
  const std::uint64_t tenths = (2 * count * 1000 + total) / (2 * total);
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10) + "%";
}

/// "count (rate%)" table cell.
inline std::string format_count_rate(std::uint64_t count, std::uint64_t total) {
  return std::to_string(count) + " (" + format_rate(count, total) + ")";
}

struct ReportCell {
  std::size_t abstain = 0;
  std::size_t total = 0;    // items with a verdict
  std::size_t errored = 0;  // excluded from total
  std::optional<double> rate() const {
    if (total == 0) return std::nullopt;
    return static_cast<double>(abstain) / static_cast<double>(total);
  }
};

struct ReportRow {
  std::string model;
  std::string variant;
  std::array<ReportCell, 8> cells{};
  ReportCell overall;  // sum of the category cells
};

struct AbstentionReport {
  int repeat = 0;
  std::array<std::size_t, 8> category_items{};  // benchmark items per category
  std::size_t total_items = 0;
  std::vector<ReportRow> rows;  // sorted by (model, variant)
};

/// Counts Abstain verdicts of one repeat per (model, variant, category).
/// Judged records without a verdict, and benchmark items with no judged
/// record at all, are counted as errored and left out of the denominators.
inline AbstentionReport abstention_report(const std::vector<JudgedRecord>& judged,
                                          const std::vector<BenchmarkItem>& benchmark, int repeat = 0) {
  AbstentionReport rep;
  rep.repeat = repeat;
  std::map<std::string, Category> item_category;
  for (const auto& item : benchmark) {
    ++rep.category_items[category_index(item.category)];
    item_category[item.item_id] = item.category;
  }
  rep.total_items = benchmark.size();

  std::map<std::pair<std::string, std::string>, std::set<std::string>> seen;
  std::map<std::pair<std::string, std::string>, ReportRow> rows;
  for (const auto& j : judged) {
    if (j.repeat != repeat) continue;
    auto it = item_category.find(j.item_id);
    if (it == item_category.end()) continue;  // not part of this benchmark
    const auto key = std::make_pair(j.model, j.variant);
    if (!seen[key].insert(j.item_id).second) continue;
    auto& row = rows[key];
    row.model = j.model;
    row.variant = j.variant;
    auto& cell = row.cells[category_index(it->second)];
    if (!j.verdict) {
      ++cell.errored;
    } else {
      ++cell.total;
      if (*j.verdict == Verdict::abstain) ++cell.abstain;
    }
  }
  for (auto& [key, row] : rows) {
    const auto& got = seen[key];
    for (const auto& [id, c] : item_category) {
      if (!got.count(id)) ++row.cells[category_index(c)].errored;
    }
    for (const auto& cell : row.cells) {
      row.overall.abstain += cell.abstain;
      row.overall.total += cell.total;
      row.overall.errored += cell.errored;
    }
    rep.rows.push_back(row);
  }
  return rep;
}

namespace detail {

inline std::string variant_label(const std::string& variant) {
  for (auto v : kAllVariants) {
    if (to_string(v) == variant) return std::string(display_name(v));
  }
  return variant;
}

inline std::string number(double x) { return json(x).dump(); }

}  // namespace detail

/// One row per (model, variant), one column per category in the order
/// Missing Referent .. False Premise, then Overall. Column headers carry the
/// benchmark item counts; the first four categories are reference-grounding
/// failures, the next three execution-feasibility failures.
inline std::string report_markdown(const AbstentionReport& rep) {
  std::ostringstream os;
  os << "Reference Grounding: Missing Referent, Ambiguous Referent, Subjective Intent, Underspecified Intent. "
        "Execution Feasibility: Physical Infeasibility, Missing Capability, Contradictory.\n\n";
  os << "| Model | Prompt |";
  for (Category c : kAllCategories) os << " " << display_name(c) << " (" << rep.category_items[category_index(c)] << ") |";
  os << " Overall (" << rep.total_items << ") |\n|---|---|";
  for (std::size_t i = 0; i <= kAllCategories.size(); ++i) os << "---:|";
  os << "\n";
  for (const auto& row : rep.rows) {
    os << "| " << row.model << " | " << detail::variant_label(row.variant) << " |";
    for (const auto& cell : row.cells) os << " " << format_count_rate(cell.abstain, cell.total) << " |";
    os << " " << format_count_rate(row.overall.abstain, row.overall.total) << " |\n";
  }
  bool any_errors = false;
  for (const auto& row : rep.rows) any_errors = any_errors || row.overall.errored > 0;
  if (any_errors) {
    os << "\nErrored items (excluded from rates):\n\n| Model | Prompt |";
    for (Category c : kAllCategories) os << " " << display_name(c) << " |";
    os << " Overall |\n|---|---|";
    for (std::size_t i = 0; i <= kAllCategories.size(); ++i) os << "---:|";
    os << "\n";
    for (const auto& row : rep.rows) {
      os << "| " << row.model << " | " << detail::variant_label(row.variant) << " |";
      for (const auto& cell : row.cells) os << " " << cell.errored << " |";
      os << " " << row.overall.errored << " |\n";
    }
  }
  return os.str();
}

inline std::string report_csv(const AbstentionReport& rep) {
  std::ostringstream os;
  os << "model,variant,category,abstain,total,rate,errored\n";
  auto line = [&](const ReportRow& row, std::string_view cat, const ReportCell& cell) {
    os << row.model << "," << row.variant << "," << cat << "," << cell.abstain << "," << cell.total << ","
       << (cell.rate() ? detail::number(*cell.rate()) : "") << "," << cell.errored << "\n";
  };
  for (const auto& row : rep.rows) {
    for (Category c : kAllCategories) line(row, to_string(c), row.cells[category_index(c)]);
    line(row, "overall", row.overall);
  }
  return os.str();
}

inline json report_json(const AbstentionReport& rep) {
  auto cell_json = [](const ReportCell& cell) {
    return json{{"abstain", cell.abstain},
                {"total", cell.total},
                {"rate", cell.rate() ? json(*cell.rate()) : json(nullptr)},
                {"display", format_count_rate(cell.abstain, cell.total)},
                {"errored", cell.errored}};
  };
  json items = json::object();
  for (Category c : kAllCategories) items[std::string(to_string(c))] = rep.category_items[category_index(c)];
  items["overall"] = rep.total_items;
  json rows = json::array();
  for (const auto& row : rep.rows) {
    json cats = json::object();
    for (Category c : kAllCategories) cats[std::string(to_string(c))] = cell_json(row.cells[category_index(c)]);
    rows.push_back({{"model", row.model}, {"variant", row.variant}, {"categories", cats}, {"overall", cell_json(row.overall)}});
  }
  return {{"repeat", rep.repeat}, {"benchmark_items", items}, {"rows", rows}};
}

/// Judge-vs-human agreement block: accuracy, precision, recall, F1 and the
/// annotators' Fleiss kappa.
inline std::string agreement_markdown(const std::string& judge_label, const BinaryMetrics& m,
                                      const std::optional<double>& kappa) {
  auto fmt = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(3);
    s << *v;
    return s.str();
  };
  std::ostringstream os;
  os << "| Judge | Accuracy | Precision | Recall | F1 |\n|---|---:|---:|---:|---:|\n";
  os << "| " << judge_label << " | " << fmt(m.accuracy) << " | " << fmt(m.precision) << " | " << fmt(m.recall)
     << " | " << fmt(m.f1) << " |\n";
  os << "\nHuman inter-annotator Fleiss kappa: " << fmt(kappa) << "\n";
  return os.str();
}

}  // namespace roboabstain
