#pragma once

#include <nlohmann/json.hpp>

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "slotnoise/corpus.hpp"
#include "slotnoise/error.hpp"
#include "slotnoise/parser.hpp"

namespace slotnoise {

enum class ScoreMode { text_match, strict_span };

inline std::string score_mode_name(ScoreMode m) { return m == ScoreMode::text_match ? "text_match" : "strict_span"; }

inline ScoreMode parse_score_mode(const std::string& s) {
  if (s == "text_match" || s == "text") return ScoreMode::text_match;
  if (s == "strict_span" || s == "strict") return ScoreMode::strict_span;
  throw ConfigError("unknown scoring mode '" + s + "' (expected text_match or strict_span)");
}

struct MatchCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const MatchCounts&, const MatchCounts&) = default;
};

// Precision, recall and F1 on a 0-100 scale; each is 0 when undefined.
struct Prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

inline Prf prf(const MatchCounts& c) {
  Prf r;
  if (c.tp + c.fp > 0) r.precision = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) r.recall = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (r.precision + r.recall > 0) r.f1 = 2 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

// Gold (normalized surface, type) pairs in span order.
inline std::vector<PredictedPair> gold_pairs(const LabeledExample& gold) {
  std::vector<PredictedPair> out;
  for (const auto& s : gold.spans) out.push_back({normalize_surface(gold.surface(s)), s.slot_type});
  return out;
}

// text_match: one-to-one multiset matching on (surface, type). strict_span:
// the predicted surface's leftmost occurrence in the utterance must also be
// exactly an unmatched gold span of the same type.
inline MatchCounts score_example(const LabeledExample& gold, const Prediction& pred,
                                 ScoreMode mode = ScoreMode::text_match) {
  MatchCounts c;
  const auto golds = gold_pairs(gold);
  if (mode == ScoreMode::text_match) {
    std::map<std::pair<std::string, std::string>, std::size_t> available;
    for (const auto& g : golds) ++available[{g.surface, g.slot_type}];
    for (const auto& p : pred.pairs) {
      auto it = available.find({p.surface, p.slot_type});
      if (it != available.end() && it->second > 0) {
        --it->second;
        ++c.tp;
      }
    }
  } else {
    std::vector<bool> used(gold.spans.size(), false);
    const std::size_t n = gold.tokens.size();
    for (const auto& p : pred.pairs) {
      const std::size_t width = split_whitespace(p.surface).size();
      if (width == 0 || width > n) continue;
      for (std::size_t i = 0; i + width <= n; ++i) {
        SlotSpan window{i, i + width - 1, p.slot_type};
        if (normalize_surface(gold.surface(window)) != p.surface) continue;
        for (std::size_t k = 0; k < gold.spans.size(); ++k) {
          if (!used[k] && gold.spans[k] == window) {
            used[k] = true;
            ++c.tp;
            break;
          }
        }
        break;  // leftmost occurrence only
      }
    }
  }
  c.fp = pred.pairs.size() - c.tp;
  c.fn = golds.size() - c.tp;
  return c;
}

struct ExampleScore {
  std::string id;
  std::string group;
  MatchCounts counts;
};

struct GroupScore {
  MatchCounts counts;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t support = 0;  // gold pairs
  std::size_t examples = 0;
};

struct OverallScore {
  double micro_precision = 0;
  double micro_recall = 0;
  double micro_f1 = 0;
  double macro_f1 = 0;
  std::vector<std::string> groups;  // groups the overall is taken over
};

struct EvalResult {
  std::vector<ExampleScore> per_example;
  std::vector<std::string> group_order;  // first appearance
  std::map<std::string, GroupScore> per_group;
  OverallScore overall;
  ScoreMode mode = ScoreMode::text_match;
  std::string config_hash;

  const GroupScore* group(const std::string& name) const {
    auto it = per_group.find(name);
    return it == per_group.end() ? nullptr : &it->second;
  }
};

inline bool is_clean_group(const std::string& name) { return to_lower(name) == "clean"; }

// Per-group micro scores plus Overall over the non-clean groups, both micro
// (pooled counts) and macro (mean of group F1). With no noisy group the
// overall falls back to every group.
inline EvalResult aggregate(const std::vector<ExampleScore>& results,
                            const std::map<std::string, std::string>& groups,
                            ScoreMode mode = ScoreMode::text_match) {
  EvalResult out;
  out.mode = mode;
  for (const auto& r : results) {
    auto it = groups.find(r.id);
    if (it == groups.end()) throw DataError("example '" + r.id + "' has no group assignment");
    ExampleScore s = r;
    s.group = it->second;
    auto [g, inserted] = out.per_group.try_emplace(s.group);
    if (inserted) out.group_order.push_back(s.group);
    g->second.counts += s.counts;
    g->second.examples += 1;
    out.per_example.push_back(std::move(s));
  }
  for (auto& [name, g] : out.per_group) {
    const Prf m = prf(g.counts);
    g.precision = m.precision;
    g.recall = m.recall;
    g.f1 = m.f1;
    g.support = g.counts.tp + g.counts.fn;
  }

  std::vector<std::string> noisy;
  for (const auto& name : out.group_order)
    if (!is_clean_group(name)) noisy.push_back(name);
  if (noisy.empty()) noisy = out.group_order;
  MatchCounts pooled;
  double f1_sum = 0;
  for (const auto& name : noisy) {
    pooled += out.per_group.at(name).counts;
    f1_sum += out.per_group.at(name).f1;
  }
  const Prf micro = prf(pooled);
  out.overall.micro_precision = micro.precision;
  out.overall.micro_recall = micro.recall;
  out.overall.micro_f1 = micro.f1;
  out.overall.macro_f1 = noisy.empty() ? 0.0 : f1_sum / static_cast<double>(noisy.size());
  out.overall.groups = noisy;
  return out;
}

// Convenience: every result already carries its group.
inline EvalResult aggregate(const std::vector<ExampleScore>& results, ScoreMode mode = ScoreMode::text_match) {
  std::map<std::string, std::string> groups;
  for (const auto& r : results) groups[r.id] = r.group;
  return aggregate(results, groups, mode);
}

// ---- persistence ----

inline nlohmann::ordered_json to_json(const EvalResult& r) {
  nlohmann::ordered_json j;
  j["mode"] = score_mode_name(r.mode);
  j["config_hash"] = r.config_hash;
  j["groups"] = nlohmann::ordered_json::array();
  for (const auto& name : r.group_order) {
    const auto& g = r.per_group.at(name);
    j["groups"].push_back({{"name", name},
                           {"tp", g.counts.tp},
                           {"fp", g.counts.fp},
                           {"fn", g.counts.fn},
                           {"examples", g.examples},
                           {"support", g.support},
                           {"precision", g.precision},
                           {"recall", g.recall},
                           {"f1", g.f1}});
  }
  j["overall"] = {{"groups", r.overall.groups},
                  {"micro_precision", r.overall.micro_precision},
                  {"micro_recall", r.overall.micro_recall},
                  {"micro_f1", r.overall.micro_f1},
                  {"macro_f1", r.overall.macro_f1}};
  j["per_example"] = nlohmann::ordered_json::array();
  for (const auto& e : r.per_example) {
    j["per_example"].push_back(
        {{"id", e.id}, {"group", e.group}, {"tp", e.counts.tp}, {"fp", e.counts.fp}, {"fn", e.counts.fn}});
  }
  return j;
}

// Rebuilt from per-example counts, so derived numbers are recomputed.
inline EvalResult eval_result_from_json(const nlohmann::json& j) {
  std::vector<ExampleScore> scores;
  std::map<std::string, std::string> groups;
  for (const auto& e : j.at("per_example")) {
    ExampleScore s;
    s.id = e.at("id").get<std::string>();
    s.group = e.at("group").get<std::string>();
    s.counts = {e.at("tp").get<std::size_t>(), e.at("fp").get<std::size_t>(), e.at("fn").get<std::size_t>()};
    groups[s.id] = s.group;
    scores.push_back(std::move(s));
  }
  auto r = aggregate(scores, groups, parse_score_mode(j.value("mode", std::string("text_match"))));
  r.config_hash = j.value("config_hash", std::string());
  return r;
}

}  // namespace slotnoise
