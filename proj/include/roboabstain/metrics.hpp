#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "roboabstain/error.hpp"
#include "roboabstain/io.hpp"
#include "roboabstain/verdict.hpp"

namespace roboabstain {

/// Agreement of predicted verdicts with reference labels; Abstain is the
/// positive class. Ratios with a zero denominator are absent.
struct BinaryMetrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

inline BinaryMetrics binary_metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  BinaryMetrics m{tp, fp, fn, tn};
  const std::size_t n = tp + fp + fn + tn;
  if (n == 0) throw Error(ErrorKind::degenerate_input, "no items to compare");
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(n);
  if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (m.precision && m.recall && *m.precision + *m.recall > 0.0) {
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  } else if (m.precision && m.recall) {  // both zero
    m.f1 = 0.0;
  }
  return m;
}

inline BinaryMetrics compute_binary_metrics(const std::map<std::string, Verdict>& predicted,
                                            const std::map<std::string, Verdict>& reference) {
  if (predicted.size() != reference.size()) {
    throw Error(ErrorKind::item_set_mismatch, std::to_string(predicted.size()) + " predictions vs " +
                                                  std::to_string(reference.size()) + " labels");
  }
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& [id, pred] : predicted) {
    auto it = reference.find(id);
    if (it == reference.end()) throw Error(ErrorKind::item_set_mismatch, "no label for " + id);
    const bool p = pred == Verdict::abstain, t = it->second == Verdict::abstain;
    if (p && t) ++tp;
    else if (p) ++fp;
    else if (t) ++fn;
    else ++tn;
  }
  return binary_metrics_from_counts(tp, fp, fn, tn);
}

// ---------------------------------------------------------------------------
// Fleiss kappa

/// counts[i][j] = number of raters putting item i in category j.
struct RatingsMatrix {
  std::vector<std::vector<int>> counts;
};

/// Fleiss kappa. Returns nullopt when chance agreement is 1 (all ratings in
/// one category), where the statistic is undefined. Structural problems
/// (fewer than 2 items/raters/categories, uneven rows) throw.
inline std::optional<double> fleiss_kappa(const RatingsMatrix& m) {
  const auto& rows = m.counts;
  if (rows.size() < 2) throw Error(ErrorKind::degenerate_input, "need at least 2 items");
  const std::size_t k = rows.front().size();
  if (k < 2) throw Error(ErrorKind::degenerate_input, "need at least 2 categories");
  long n = -1;
  for (const auto& row : rows) {
    if (row.size() != k) throw Error(ErrorKind::degenerate_input, "rows differ in category count");
    long sum = 0;
    for (int c : row) {
      if (c < 0) throw Error(ErrorKind::degenerate_input, "negative rating count");
      sum += c;
    }
    if (n < 0) n = sum;
    if (sum != n) throw Error(ErrorKind::degenerate_input, "rater count differs between items");
  }
  if (n < 2) throw Error(ErrorKind::degenerate_input, "need at least 2 raters per item");

  const double N = static_cast<double>(rows.size());
  const double nn = static_cast<double>(n);
  std::vector<double> col(k, 0.0);
  double p_bar = 0.0;
  for (const auto& row : rows) {
    double agree = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      agree += static_cast<double>(row[j]) * (row[j] - 1);
      col[j] += row[j];
    }
    p_bar += agree / (nn * (nn - 1.0));
  }
  p_bar /= N;
  double p_e = 0.0;
  for (double c : col) {
    const double p = c / (N * nn);
    p_e += p * p;
  }
  if (p_e >= 1.0) return std::nullopt;
  return (p_bar - p_e) / (1.0 - p_e);
}

// ---------------------------------------------------------------------------
// Human labels

namespace detail {

/// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF tolerated.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
      continue;
    }
    if (ch == '"' && field.empty()) {
      quoted = field_started = true;
    } else if (ch == ',') {
      row.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (field_started || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      field_started = false;
    } else {
      field += ch;
      field_started = true;
    }
  }
  if (quoted) throw Error(ErrorKind::malformed_line, "unterminated quoted CSV field");
  if (field_started || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

/// Human Abstain/Act labels keyed by item_id.
struct HumanLabels {
  std::vector<std::string> annotators;                                // sorted
  std::map<std::string, std::map<std::string, Verdict>> by_item;       // item -> annotator -> label
  std::map<std::string, Verdict> adjudicated;

  /// Adjudicated label when given, otherwise the strict majority of
  /// annotators. A tie without adjudication is an error.
  std::map<std::string, Verdict> reference() const {
    std::map<std::string, Verdict> out;
    for (const auto& [item, labels] : by_item) {
      if (auto it = adjudicated.find(item); it != adjudicated.end()) {
        out[item] = it->second;
        continue;
      }
      std::size_t abstain = 0;
      for (const auto& [_, v] : labels) abstain += v == Verdict::abstain;
      if (2 * abstain == labels.size()) {
        throw Error(ErrorKind::degenerate_input, "tied labels without adjudication for " + item);
      }
      out[item] = 2 * abstain > labels.size() ? Verdict::abstain : Verdict::act;
    }
    return out;
  }

  /// Items x {Abstain, Act} rating counts.
  RatingsMatrix ratings() const {
    RatingsMatrix m;
    for (const auto& [_, labels] : by_item) {
      std::vector<int> row(2, 0);
      for (const auto& [__, v] : labels) ++row[v == Verdict::abstain ? 0 : 1];
      m.counts.push_back(std::move(row));
    }
    return m;
  }
};

/// CSV with header columns item_id, annotator, label and an optional
/// adjudicated column (group decision; may be blank, must agree across an
/// item's rows).
inline HumanLabels parse_human_labels(const std::string& csv_text) {
  const auto rows = detail::parse_csv(csv_text);
  if (rows.empty()) throw Error(ErrorKind::malformed_line, "labels file is empty");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].size(); ++i) col[rows[0][i]] = i;
  for (const char* required : {"item_id", "annotator", "label"}) {
    if (!col.count(required)) throw Error(ErrorKind::malformed_line, std::string("labels header lacks ") + required);
  }
  const auto adj = col.find("adjudicated");
  HumanLabels out;
  std::set<std::string> annotators;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto fail = [&](const std::string& msg) {
      return Error(ErrorKind::malformed_line, "labels line " + std::to_string(r + 1) + ": " + msg);
    };
    if (row.size() != rows[0].size()) throw fail("expected " + std::to_string(rows[0].size()) + " fields");
    const std::string& item = row[col["item_id"]];
    const std::string& annotator = row[col["annotator"]];
    Verdict label;
    try {
      label = parse_verdict(row[col["label"]]);
    } catch (const Error&) {
      throw fail("label must be Abstain or Act");
    }
    if (!out.by_item[item].emplace(annotator, label).second) throw fail("duplicate label by " + annotator);
    annotators.insert(annotator);
    if (adj != col.end() && !row[adj->second].empty()) {
      Verdict a;
      try {
        a = parse_verdict(row[adj->second]);
      } catch (const Error&) {
        throw fail("adjudicated must be Abstain, Act or blank");
      }
      auto [it, inserted] = out.adjudicated.emplace(item, a);
      if (!inserted && it->second != a) throw fail("conflicting adjudicated labels for " + item);
    }
  }
  out.annotators.assign(annotators.begin(), annotators.end());
  return out;
}

inline HumanLabels load_human_labels(const fs::path& path) { return parse_human_labels(read_file(path)); }

inline json binary_metrics_to_json(const BinaryMetrics& m) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"tp", m.tp},
          {"fp", m.fp},
          {"fn", m.fn},
          {"tn", m.tn},
          {"accuracy", m.accuracy},
          {"precision", opt(m.precision)},
          {"recall", opt(m.recall)},
          {"f1", opt(m.f1)}};
}

}  // namespace roboabstain
