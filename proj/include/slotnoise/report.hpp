#pragma once

// Result tables: one row per run, columns Clean | perturbation groups | Overall.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slotnoise/error.hpp"
#include "slotnoise/scorer.hpp"
#include "slotnoise/util.hpp"

namespace slotnoise {

inline const std::vector<std::string>& single_layout_columns() {
  static const std::vector<std::string> cols = {"Clean",          "Typos",   "Speech", "Paraphrase",
                                                "Simplification", "Verbose", "Overall"};
  return cols;
}

inline const std::vector<std::string>& mixed_layout_columns() {
  static const std::vector<std::string> cols = {"Clean",   "Typos",   "Speech",      "AppendIrr", "Spe+Typ",
                                                "Spe+App", "Ent+App", "Spe+App+Typ", "Overall"};
  return cols;
}

enum class ReportLayout { single, mixed, automatic };

inline ReportLayout parse_report_layout(const std::string& s) {
  if (s == "single") return ReportLayout::single;
  if (s == "mixed") return ReportLayout::mixed;
  if (s == "auto" || s == "automatic") return ReportLayout::automatic;
  throw ConfigError("unknown report layout '" + s + "' (expected single, mixed or auto)");
}

struct ReportRow {
  std::string name;
  std::vector<std::string> group_order;
  std::map<std::string, double> f1;  // group -> F1
  double overall_micro = 0;
  double overall_macro = 0;
};

inline ReportRow report_row(const std::string& name, const EvalResult& r) {
  ReportRow row;
  row.name = name;
  row.group_order = r.group_order;
  for (const auto& [g, s] : r.per_group) row.f1[g] = s.f1;
  row.overall_micro = r.overall.micro_f1;
  row.overall_macro = r.overall.macro_f1;
  return row;
}

struct ReportOptions {
  ReportLayout layout = ReportLayout::automatic;
  std::optional<std::string> baseline;  // row name
  bool macro_overall = false;           // Overall column shows the macro mean
};

struct Report {
  std::vector<std::string> columns;  // excluding the leading run-name column
  std::vector<ReportRow> rows;
  std::vector<std::vector<std::string>> cells;
  std::string text;
  std::string tsv;
};

// Difference of the two-decimal values, truncated toward zero to one decimal
// and always signed: 65.04 against 40.65 gives "(+24.3)".
inline std::string format_delta(double value, double baseline) {
  const long long cents = std::llround(value * 100.0) - std::llround(baseline * 100.0);
  const long long tenths = cents / 10;
  const long long mag = std::llabs(tenths);
  return std::string("(") + (tenths < 0 ? "-" : "+") + std::to_string(mag / 10) + "." + std::to_string(mag % 10) +
         ")";
}

namespace detail {

inline bool covers(const std::vector<std::string>& layout, const std::vector<ReportRow>& rows) {
  for (const auto& r : rows)
    for (const auto& g : r.group_order)
      if (std::find(layout.begin(), layout.end(), g) == layout.end()) return false;
  return true;
}

inline std::vector<std::string> report_columns(const std::vector<ReportRow>& rows, ReportLayout layout) {
  std::vector<std::string> cols;
  if (layout == ReportLayout::single) cols = single_layout_columns();
  else if (layout == ReportLayout::mixed) cols = mixed_layout_columns();
  else if (covers(single_layout_columns(), rows)) cols = single_layout_columns();
  else if (covers(mixed_layout_columns(), rows)) cols = mixed_layout_columns();
  else cols = {"Clean", "Overall"};
  // Groups the layout has no column for go in before Overall.
  std::vector<std::string> extra;
  for (const auto& r : rows)
    for (const auto& g : r.group_order)
      if (std::find(cols.begin(), cols.end(), g) == cols.end() &&
          std::find(extra.begin(), extra.end(), g) == extra.end())
        extra.push_back(g);
  cols.insert(cols.end() - 1, extra.begin(), extra.end());
  return cols;
}

inline std::optional<double> cell_value(const ReportRow& row, const std::string& col, bool macro) {
  if (col == "Overall") return macro ? row.overall_macro : row.overall_micro;
  auto it = row.f1.find(col);
  if (it == row.f1.end()) return std::nullopt;
  return it->second;
}

}  // namespace detail

// Missing cells print as "-". With a baseline, every cell that both rows
// have is annotated with its delta.
inline Report render_report(const std::vector<ReportRow>& rows, const ReportOptions& opts = {}) {
  if (rows.empty()) throw ConfigError("report needs at least one result");
  Report rep;
  rep.rows = rows;
  rep.columns = detail::report_columns(rows, opts.layout);

  const ReportRow* base = nullptr;
  if (opts.baseline) {
    for (const auto& r : rows)
      if (r.name == *opts.baseline) base = &r;
    if (!base) throw ConfigError("baseline run '" + *opts.baseline + "' is not among the reported results");
  }

  for (const auto& r : rows) {
    std::vector<std::string> line;
    for (const auto& c : rep.columns) {
      auto v = detail::cell_value(r, c, opts.macro_overall);
      if (!v) {
        line.emplace_back("-");
        continue;
      }
      std::string cell = format_fixed(*v, 2);
      if (base) {
        if (auto b = detail::cell_value(*base, c, opts.macro_overall)) cell += format_delta(*v, *b);
      }
      line.push_back(std::move(cell));
    }
    rep.cells.push_back(std::move(line));
  }

  // text table
  std::vector<std::size_t> width(rep.columns.size() + 1, 3);
  width[0] = std::max<std::size_t>(width[0], 3);
  for (const auto& r : rows) width[0] = std::max(width[0], utf8_chars(r.name).size());
  for (std::size_t c = 0; c < rep.columns.size(); ++c) {
    width[c + 1] = std::max(width[c + 1], rep.columns[c].size());
    for (const auto& line : rep.cells) width[c + 1] = std::max(width[c + 1], line[c].size());
  }
  auto pad_right = [](const std::string& s, std::size_t w) {
    const auto n = utf8_chars(s).size();
    return s + std::string(w > n ? w - n : 0, ' ');
  };
  auto pad_left = [](const std::string& s, std::size_t w) {
    return std::string(w > s.size() ? w - s.size() : 0, ' ') + s;
  };
  std::string header = pad_right("Run", width[0]);
  for (std::size_t c = 0; c < rep.columns.size(); ++c) header += "  " + pad_left(rep.columns[c], width[c + 1]);
  rep.text = header + "\n" + std::string(utf8_chars(header).size(), '-') + "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::string line = pad_right(rows[i].name, width[0]);
    for (std::size_t c = 0; c < rep.columns.size(); ++c) line += "  " + pad_left(rep.cells[i][c], width[c + 1]);
    rep.text += line + "\n";
  }
  rep.text += std::string("Overall: ") + (opts.macro_overall ? "macro" : "micro") +
              " F1 over the non-clean groups";
  if (base) rep.text += "; deltas against " + base->name;
  rep.text += "\n";

  // delimited table
  rep.tsv = "run";
  for (const auto& c : rep.columns) rep.tsv += "\t" + c;
  rep.tsv += "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rep.tsv += rows[i].name;
    for (const auto& cell : rep.cells[i]) rep.tsv += "\t" + cell;
    rep.tsv += "\n";
  }
  return rep;
}

inline void write_report(const Report& rep, const fs::path& dir, const std::string& stem = "report") {
  fs::create_directories(dir);
  std::ofstream(dir / (stem + ".txt"), std::ios::binary) << rep.text;
  std::ofstream(dir / (stem + ".tsv"), std::ios::binary) << rep.tsv;
}

}  // namespace slotnoise
