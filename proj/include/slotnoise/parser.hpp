#pragma once

// Generation parsing: free-form model output -> (surface, label) pairs.
//
// Each line is tried against three shapes, first match wins:
//   1. "e" is l   /   e is l          (also ';'-separated clauses)
//   2. l: e1, e2, ...
//   3. ("e", "l") items, any number per line

#include <nlohmann/json.hpp>

#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "slotnoise/corpus.hpp"
#include "slotnoise/util.hpp"

namespace slotnoise {

struct PredictedPair {
  std::string surface;
  std::string slot_type;

  friend bool operator==(const PredictedPair&, const PredictedPair&) = default;
};

struct Prediction {
  std::vector<PredictedPair> pairs;
  std::size_t dropped_unknown_labels = 0;
  std::string raw;
};

namespace detail {

inline constexpr std::string_view kQuotes[] = {"\"", "'", "`", "\xE2\x80\x9C", "\xE2\x80\x9D",
                                               "\xE2\x80\x98", "\xE2\x80\x99"};

inline bool starts_with_any_quote(std::string_view s, std::size_t& len) {
  for (auto q : kQuotes) {
    if (s.substr(0, q.size()) == q) {
      len = q.size();
      return true;
    }
  }
  return false;
}

inline bool ends_with_any_quote(std::string_view s, std::size_t& len) {
  for (auto q : kQuotes) {
    if (s.size() >= q.size() && s.substr(s.size() - q.size()) == q) {
      len = q.size();
      return true;
    }
  }
  return false;
}

inline std::string collapse_spaces(std::string_view s) {
  return join(split_whitespace(s), " ");
}

inline bool is_terminal_punct(char c) { return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?'; }

}  // namespace detail

// Lowercase, trim, strip wrapping quotes and terminal punctuation (repeated
// until stable), collapse internal whitespace.
inline std::string normalize_surface(std::string_view text) {
  std::string cur = detail::collapse_spaces(to_lower(text));
  for (;;) {
    const std::string before = cur;
    cur = std::string(trim(cur));
    while (!cur.empty() && detail::is_terminal_punct(cur.back())) cur.pop_back();
    cur = std::string(trim(cur));
    std::size_t ql = 0, qr = 0;
    if (cur.size() >= 2 && detail::starts_with_any_quote(cur, ql) && detail::ends_with_any_quote(cur, qr) &&
        ql + qr <= cur.size()) {
      cur = cur.substr(ql, cur.size() - ql - qr);
    }
    if (cur == before) break;
  }
  return cur;
}

// Normalized label key: surface normalization, leading article dropped,
// spaces, hyphens and underscores unified to '_'.
inline std::string normalize_label(std::string_view text) {
  std::string s = normalize_surface(text);
  for (std::string_view article : {"a ", "an ", "the "}) {
    if (s.rfind(article, 0) == 0) {
      s = s.substr(article.size());
      break;
    }
  }
  std::string out;
  for (char c : s) {
    if (c == ' ' || c == '_' || c == '-') {
      if (out.empty() || out.back() != '_') out.push_back('_');
    } else {
      out.push_back(c);
    }
  }
  return out;
}

class LabelMatcher {
 public:
  explicit LabelMatcher(const LabelSet& labels) {
    for (const auto& name : labels.names()) keys_.emplace(normalize_label(name), name);
  }

  const std::string* match(std::string_view raw) const {
    auto it = keys_.find(normalize_label(raw));
    return it == keys_.end() ? nullptr : &it->second;
  }

 private:
  std::unordered_map<std::string, std::string> keys_;
};

namespace detail {

// Drops list markers such as "1.", "2)", "-", "*", "•".
inline std::string_view strip_list_marker(std::string_view line) {
  line = trim(line);
  std::size_t i = 0;
  if (line.substr(0, 3) == "\xE2\x80\xA2") {
    i = 3;
  } else if (!line.empty() && (line[0] == '-' || line[0] == '*')) {
    i = 1;
  } else {
    while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
    if (i == 0 || i >= line.size() || (line[i] != '.' && line[i] != ')')) return line;
    ++i;
  }
  if (i < line.size() && !is_space(line[i])) return line;
  return trim(line.substr(i));
}

inline std::string_view strip_prefix_ci(std::string_view line, std::string_view prefix) {
  if (line.size() >= prefix.size() && iequals(line.substr(0, prefix.size()), prefix)) {
    return trim(line.substr(prefix.size()));
  }
  return line;
}

// Splits on ';' outside double quotes.
inline std::vector<std::string_view> split_clauses(std::string_view line) {
  std::vector<std::string_view> out;
  bool quoted = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == ';' && !quoted) {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  out.push_back(line.substr(start));
  return out;
}

// Position of the " is " that separates entity and label: the last one
// directly after a closing quote when the clause opens with a quote,
// otherwise the last one.
inline std::optional<std::pair<std::size_t, std::size_t>> find_copula(std::string_view clause) {
  std::vector<std::pair<std::size_t, std::size_t>> hits;  // [begin, end) of the separator
  for (std::size_t i = 0; i + 2 < clause.size(); ++i) {
    if (!is_space(clause[i])) continue;
    std::size_t j = i;
    while (j < clause.size() && is_space(clause[j])) ++j;
    if (j + 2 > clause.size() || !iequals(clause.substr(j, 2), "is")) continue;
    std::size_t k = j + 2;
    if (k >= clause.size() || !is_space(clause[k])) continue;
    while (k < clause.size() && is_space(clause[k])) ++k;
    hits.emplace_back(i, k);
  }
  if (hits.empty()) return std::nullopt;
  std::size_t ql = 0;
  if (starts_with_any_quote(clause, ql)) {
    for (auto it = hits.rbegin(); it != hits.rend(); ++it) {
      std::size_t qr = 0;
      if (ends_with_any_quote(clause.substr(0, it->first), qr) && it->first > ql) return *it;
    }
  }
  return hits.back();
}

}  // namespace detail

inline Prediction parse_predictions(const std::string& text, const LabelSet& labels) {
  Prediction pred;
  pred.raw = text;
  const LabelMatcher matcher(labels);
  auto emit = [&](std::string_view surface, std::string_view label) {
    const std::string norm = normalize_surface(surface);
    if (norm.empty()) return;
    if (const auto* canonical = matcher.match(label)) {
      pred.pairs.push_back({norm, *canonical});
    } else {
      ++pred.dropped_unknown_labels;
    }
  };
  static const std::regex kBracketItem(
      R"re(\(\s*["']([^"']*)["']\s*,\s*["']([^"']*)["']\s*\))re");

  std::stringstream ss(text);
  std::string raw_line;
  while (std::getline(ss, raw_line)) {
    std::string_view line = detail::strip_list_marker(raw_line);
    if (line.empty()) continue;
    line = detail::strip_prefix_ci(line, "entities:");
    // Echoed demonstration headers carry no pairs.
    if (line.size() >= 9 && iequals(line.substr(0, 9), "sentence:")) continue;

    // 1. "e" is l
    bool matched = false;
    if (!line.empty() && line[0] != '(' && line[0] != '[') {
      for (auto clause : detail::split_clauses(line)) {
        clause = trim(clause);
        auto cop = detail::find_copula(clause);
        if (!cop) continue;
        emit(clause.substr(0, cop->first), clause.substr(cop->second));
        matched = true;
      }
    }
    if (matched) continue;

    // 2. l: e1, e2
    if (auto colon = line.find(':'); colon != std::string_view::npos && colon > 0 && line[0] != '(' && line[0] != '[') {
      const auto label = line.substr(0, colon);
      std::stringstream items{std::string(line.substr(colon + 1))};
      std::string item;
      while (std::getline(items, item, ',')) {
        const auto norm = normalize_surface(item);
        if (norm.empty() || norm == "none" || norm == "n/a" || norm == "null") continue;
        emit(item, label);
        matched = true;
      }
      if (matched) continue;
    }

    // 3. ("e", "l")
    const std::string owned(line);
    for (std::sregex_iterator it(owned.begin(), owned.end(), kBracketItem), end; it != end; ++it) {
      emit((*it)[1].str(), (*it)[2].str());
    }
  }
  return pred;
}

inline nlohmann::json to_json(const Prediction& p) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& pr : p.pairs) pairs.push_back({{"surface", pr.surface}, {"type", pr.slot_type}});
  return {{"pairs", std::move(pairs)}, {"dropped_unknown_labels", p.dropped_unknown_labels}, {"raw", p.raw}};
}

inline Prediction prediction_from_json(const nlohmann::json& j) {
  Prediction p;
  for (const auto& pr : j.at("pairs")) p.pairs.push_back({pr.at("surface").get<std::string>(), pr.at("type").get<std::string>()});
  if (j.contains("dropped_unknown_labels")) p.dropped_unknown_labels = j.at("dropped_unknown_labels").get<std::size_t>();
  if (j.contains("raw")) p.raw = j.at("raw").get<std::string>();
  return p;
}

}  // namespace slotnoise
