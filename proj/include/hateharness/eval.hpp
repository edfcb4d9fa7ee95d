#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hateharness/corpus.hpp"

namespace hateharness::eval {

using corpus::Label;

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
};

// Hate is the positive class.
inline ConfusionMatrix confusion(std::span<const Label> y_true, std::span<const Label> y_pred) {
  if (y_true.size() != y_pred.size())
    throw std::runtime_error("confusion: length mismatch (" + std::to_string(y_true.size()) +
                             " vs " + std::to_string(y_pred.size()) + ")");
  if (y_true.empty()) throw std::runtime_error("confusion: empty input");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool t = y_true[i] == Label::Hate;
    const bool p = y_pred[i] == Label::Hate;
    if (t && p) ++cm.tp;
    else if (!t && p) ++cm.fp;
    else if (t && !p) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

inline double accuracy(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw std::runtime_error("accuracy: empty confusion matrix");
  return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
}

// Matthews correlation coefficient; 0 by convention when any marginal is zero.
inline double mcc(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw std::runtime_error("mcc: empty confusion matrix");
  const double tp = static_cast<double>(cm.tp);
  const double fp = static_cast<double>(cm.fp);
  const double fn = static_cast<double>(cm.fn);
  const double tn = static_cast<double>(cm.tn);
  const double f1 = tp + fp, f2 = tp + fn, f3 = tn + fp, f4 = tn + fn;
  if (f1 == 0.0 || f2 == 0.0 || f3 == 0.0 || f4 == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(f1 * f2 * f3 * f4);
}

struct MetricsReport {
  std::string dataset;
  double accuracy = 0.0;
  double mcc = 0.0;
  bool valid = false;  // valid <=> mcc > 0
  bool bold_accuracy = false;
  bool bold_mcc = false;
};

inline MetricsReport make_report(std::string dataset, const ConfusionMatrix& cm) {
  MetricsReport r;
  r.dataset = std::move(dataset);
  r.accuracy = accuracy(cm);
  r.mcc = mcc(cm);
  r.valid = r.mcc > 0.0;
  return r;
}

// One rendered line of a results table. Placeholder rows stand for
// (training set, technique) cells that produced no valid result and render
// as "/" in the paper-table layout.
struct TableRow {
  std::string section;     // rows compete for the bold MCC within a section
  std::string train_label;
  std::string technique;
  std::string test_dataset;
  double accuracy = 0.0;
  double mcc = 0.0;
  bool valid = false;
  bool bold_accuracy = false;
  bool bold_mcc = false;
  bool placeholder = false;
};

// Bolding: accuracy is bold when it exceeds the non-hate portion of the test
// dataset; MCC is bold when it is the strict maximum among the valid rows of
// its section. Rows with mcc <= 0 are marked invalid.
inline void apply_report_rules(std::vector<TableRow>& rows,
                               const std::map<std::string, corpus::DatasetStats>& test_stats) {
  for (auto& row : rows) {
    if (row.placeholder) continue;
    auto it = test_stats.find(row.test_dataset);
    if (it == test_stats.end())
      throw std::runtime_error("apply_report_rules: missing stats for dataset '" +
                               row.test_dataset + "'");
    row.valid = row.mcc > 0.0;
    row.bold_accuracy = row.accuracy > it->second.portion_non_hate;
    row.bold_mcc = false;
  }
  std::map<std::string, double> section_max;
  std::map<std::string, int> max_count;
  for (const auto& row : rows) {
    if (row.placeholder || !row.valid) continue;
    auto [it, inserted] = section_max.emplace(row.section, row.mcc);
    if (inserted) {
      max_count[row.section] = 1;
    } else if (row.mcc > it->second) {
      it->second = row.mcc;
      max_count[row.section] = 1;
    } else if (row.mcc == it->second) {
      ++max_count[row.section];
    }
  }
  for (auto& row : rows) {
    if (row.placeholder || !row.valid) continue;
    row.bold_mcc = row.mcc == section_max[row.section] && max_count[row.section] == 1;
  }
}

inline std::vector<TableRow> valid_rows(const std::vector<TableRow>& rows) {
  std::vector<TableRow> out;
  for (const auto& r : rows)
    if (!r.placeholder && r.valid) out.push_back(r);
  return out;
}

inline std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline std::string render_markdown(std::span<const TableRow> rows) {
  std::string out =
      "| Training Set | Technique | Test Set | Accuracy | MCC |\n"
      "|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    out += "| " + r.train_label + " | " + r.technique + " | ";
    if (r.placeholder) {
      out += "/ | / | / |\n";
      continue;
    }
    const std::string acc = format_score(r.accuracy);
    const std::string m = format_score(r.mcc);
    out += r.test_dataset + " | ";
    out += r.bold_accuracy ? "**" + acc + "**" : acc;
    out += " | ";
    out += r.bold_mcc ? "**" + m + "**" : m;
    out += " |\n";
  }
  return out;
}

inline std::string render_csv(std::span<const TableRow> rows) {
  std::string out = "train_set,technique,test_set,accuracy,mcc,valid,bold_accuracy,bold_mcc\n";
  for (const auto& r : rows) {
    std::vector<std::string> fields;
    fields.push_back(r.train_label);
    fields.push_back(r.technique);
    if (r.placeholder) {
      fields.insert(fields.end(), {"/", "/", "/", "", "", ""});
    } else {
      fields.push_back(r.test_dataset);
      fields.push_back(format_score(r.accuracy));
      fields.push_back(format_score(r.mcc));
      fields.push_back(r.valid ? "true" : "false");
      fields.push_back(r.bold_accuracy ? "true" : "false");
      fields.push_back(r.bold_mcc ? "true" : "false");
    }
    std::ostringstream line;
    detail::write_csv_row(line, fields);
    out += line.str();
  }
  return out;
}

}  // namespace hateharness::eval
