#pragma once

// Experiment orchestration: YAML run configs, the per-example pipeline
// (demos -> prompt -> model -> parse -> score), sweeps and run logs.

#include <yaml-cpp/yaml.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <cerrno>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "slotnoise/client.hpp"
#include "slotnoise/corpus.hpp"
#include "slotnoise/demos.hpp"
#include "slotnoise/error.hpp"
#include "slotnoise/parser.hpp"
#include "slotnoise/perturb.hpp"
#include "slotnoise/pools.hpp"
#include "slotnoise/prompts.hpp"
#include "slotnoise/report.hpp"
#include "slotnoise/scorer.hpp"

namespace slotnoise {

// ---- YAML -> JSON ----

// Plain scalars become numbers, booleans or null where they parse as such;
// quoted scalars stay strings.
inline nlohmann::json yaml_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined: return nullptr;
    case YAML::NodeType::Sequence: {
      auto arr = nlohmann::json::array();
      for (const auto& item : node) arr.push_back(yaml_to_json(item));
      return arr;
    }
    case YAML::NodeType::Map: {
      auto obj = nlohmann::json::object();
      for (const auto& kv : node) obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return obj;
    }
    case YAML::NodeType::Scalar: break;
  }
  const std::string s = node.Scalar();
  if (node.Tag() == "!") return s;
  if (s == "true" || s == "True" || s == "yes") return true;
  if (s == "false" || s == "False" || s == "no") return false;
  if (s == "~" || s == "null") return nullptr;
  if (!s.empty()) {
    char* end = nullptr;
    errno = 0;
    const long long i = std::strtoll(s.c_str(), &end, 10);
    if (*end == '\0' && errno == 0) {
      if (i >= 0) return static_cast<std::uint64_t>(i);
      return i;
    }
    const double d = std::strtod(s.c_str(), &end);
    if (*end == '\0') return d;
  }
  return s;
}

// ---- run config ----

struct SplitConfig {
  std::string group;
  fs::path path;         // load from file, or
  std::string from;      // perturb an earlier split
  nlohmann::json perturb;
};

struct PoolConfig {
  fs::path clean;  // build from a clean split plus specs, or
  fs::path dir;    // load a saved pool
  nlohmann::json specs = nlohmann::json::array();
};

struct DemoConfig {
  DemoMode mode = DemoMode::instance;
  DemoStrategy strategy = DemoStrategy::retrieve;
  PoolLabel pool = PoolLabel::clean;
  std::size_t k = 3;
  std::string embedding = "trigram";
};

struct RunConfig {
  std::string name = "run";
  std::vector<SplitConfig> test_splits;
  PoolConfig pool;
  DemoConfig demos;
  fs::path template_dir;
  std::string template_id;
  ModelConfig model;
  ScoreMode scoring = ScoreMode::text_match;
  std::uint64_t seed = 0;
  fs::path output_dir;  // empty: nothing is written
  fs::path cache_path;  // empty: <output_dir>/cache.jsonl
  fs::path labels_file;
  fs::path base_dir;    // relative paths resolve against this
  double max_error_fraction = 0.1;
  unsigned workers = 4;
  std::string source_text;
  nlohmann::json canonical = nlohmann::json::object();

  std::string hash() const { return sha256_hex(canonical.dump()); }

  void set_k(std::size_t k) {
    demos.k = k;
    canonical["demos"]["k"] = k;
  }
  void set_template(const std::string& id) {
    template_id = id;
    canonical["templates"]["id"] = id;
  }
  void set_demo_mode(DemoMode m) {
    demos.mode = m;
    canonical["demos"]["mode"] = demo_mode_name(m);
  }
  void set_demo_strategy(DemoStrategy s) {
    demos.strategy = s;
    canonical["demos"]["strategy"] = demo_strategy_name(s);
  }
  void set_demo_pool(PoolLabel p) {
    demos.pool = p;
    canonical["demos"]["pool"] = pool_label_name(p);
  }

  fs::path resolve(const fs::path& p) const { return p.empty() || p.is_absolute() ? p : base_dir / p; }
};

namespace detail {

inline const nlohmann::json& field(const nlohmann::json& j, const char* key) {
  static const nlohmann::json kNull;
  if (!j.is_object()) return kNull;
  auto it = j.find(key);
  return it == j.end() ? kNull : *it;
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  const auto& v = field(j, key);
  if (v.is_null()) return fallback;
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

inline ModelConfig model_from_json(const nlohmann::json& j, std::uint64_t seed) {
  ModelConfig m;
  m.seed = seed;
  if (j.is_null()) return m;
  if (!j.is_object()) throw ConfigError("'model' must be a mapping");
  m.kind = parse_model_kind(get_or<std::string>(j, "kind", "echo_gold"));
  m.endpoint = get_or<std::string>(j, "endpoint", m.endpoint);
  m.model = get_or<std::string>(j, "name", m.model);
  m.api_key_env = get_or<std::string>(j, "api_key_env", m.api_key_env);
  m.temperature = get_or<double>(j, "temperature", m.temperature);
  m.max_in_flight = get_or<unsigned>(j, "max_in_flight", m.max_in_flight);
  m.timeout_s = get_or<double>(j, "timeout", m.timeout_s);
  m.max_attempts = get_or<unsigned>(j, "max_attempts", m.max_attempts);
  m.backoff_initial_s = get_or<double>(j, "backoff", m.backoff_initial_s);
  m.error_rate = get_or<double>(j, "error_rate", m.error_rate);
  m.seed = get_or<std::uint64_t>(j, "seed", m.seed);
  m.fixed_response = get_or<std::string>(j, "response", m.fixed_response);
  m.validate();
  return m;
}

}  // namespace detail

// Relative paths in the config resolve against `base_dir` (the config
// file's directory when loaded from disk).
inline RunConfig parse_run_config(const std::string& text, const fs::path& base_dir = {}) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  const nlohmann::json j = yaml_to_json(root);
  if (!j.is_object()) throw ConfigError("config must be a mapping");
  static const std::vector<std::string> kKnown = {"name",   "seed",    "output_dir", "cache",   "labels",
                                                  "workers", "max_error_fraction", "test_splits", "pool",
                                                  "demos",  "templates", "model", "scoring"};
  for (const auto& [k, _] : j.items())
    if (std::find(kKnown.begin(), kKnown.end(), k) == kKnown.end())
      throw ConfigError("unknown config field '" + k + "'");

  using detail::field;
  using detail::get_or;
  RunConfig c;
  c.source_text = text;
  c.canonical = j;
  c.base_dir = base_dir;
  c.name = get_or<std::string>(j, "name", c.name);
  c.seed = get_or<std::uint64_t>(j, "seed", 0);
  c.output_dir = get_or<std::string>(j, "output_dir", "");
  c.cache_path = get_or<std::string>(j, "cache", "");
  c.labels_file = get_or<std::string>(j, "labels", "");
  c.workers = get_or<unsigned>(j, "workers", c.workers);
  c.max_error_fraction = get_or<double>(j, "max_error_fraction", c.max_error_fraction);
  if (!(c.max_error_fraction >= 0 && c.max_error_fraction <= 1))
    throw ConfigError("max_error_fraction must be in [0,1]");

  const auto& splits = field(j, "test_splits");
  if (!splits.is_array() || splits.empty()) throw ConfigError("config needs a non-empty 'test_splits' list");
  for (const auto& sj : splits) {
    SplitConfig s;
    s.group = get_or<std::string>(sj, "group", "");
    s.path = get_or<std::string>(sj, "path", "");
    s.from = get_or<std::string>(sj, "from", "");
    s.perturb = field(sj, "perturb");
    if (s.path.empty() == s.from.empty())
      throw ConfigError("each test split needs exactly one of 'path' or 'from'");
    if (!s.from.empty() && !s.perturb.is_object())
      throw ConfigError("split derived from '" + s.from + "' needs a 'perturb' mapping");
    if (s.group.empty() && s.path.empty() == false) throw ConfigError("split " + s.path.string() + " needs a 'group'");
    c.test_splits.push_back(std::move(s));
  }

  const auto& pool = field(j, "pool");
  if (!pool.is_null()) {
    c.pool.clean = get_or<std::string>(pool, "clean", "");
    c.pool.dir = get_or<std::string>(pool, "dir", "");
    if (field(pool, "specs").is_array()) c.pool.specs = field(pool, "specs");
    if (c.pool.clean.empty() == c.pool.dir.empty()) throw ConfigError("'pool' needs exactly one of 'clean' or 'dir'");
  }

  const auto& demos = field(j, "demos");
  c.demos.mode = parse_demo_mode(get_or<std::string>(demos, "mode", demo_mode_name(c.demos.mode)));
  c.demos.strategy = parse_demo_strategy(get_or<std::string>(demos, "strategy", demo_strategy_name(c.demos.strategy)));
  c.demos.pool = parse_pool_label(get_or<std::string>(demos, "pool", pool_label_name(c.demos.pool)));
  const auto k = get_or<long long>(demos, "k", static_cast<long long>(c.demos.k));
  if (k < 0) throw ConfigError("demos.k must be >= 0");
  c.demos.k = static_cast<std::size_t>(k);
  c.demos.embedding = get_or<std::string>(demos, "embedding", c.demos.embedding);

  const auto& templates = field(j, "templates");
  c.template_dir = get_or<std::string>(templates, "dir", "");
  c.template_id = get_or<std::string>(templates, "id", "");
  if (c.template_dir.empty() || c.template_id.empty()) throw ConfigError("'templates' needs 'dir' and 'id'");

  c.model = detail::model_from_json(field(j, "model"), c.seed);
  c.scoring = parse_score_mode(get_or<std::string>(j, "scoring", score_mode_name(c.scoring)));

  const bool needs_pool = c.demos.mode == DemoMode::entity || c.demos.k > 0;
  if (needs_pool && pool.is_null()) throw ConfigError("demonstrations need a 'pool' section (or demos.k: 0)");
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto c = parse_run_config(ss.str(), path.parent_path());
  return c;
}

// ---- prepared inputs ----

struct TestItem {
  std::string run_id;  // "<group>/<example id>"
  std::string group;
  LabeledExample gold;  // id is the run id
};

// Everything a run reads, loaded once and shared between sweep variants.
struct PreparedInputs {
  std::vector<TestItem> items;
  std::vector<std::string> group_order;
  std::map<std::string, PerturbationReport> perturbation_reports;
  std::shared_ptr<const DataPool> pool;
  LabelSet labels;
  TemplateRegistry templates;
  std::shared_ptr<EmbeddingProvider> embedder;
};

namespace detail {

inline nlohmann::json with_default_seed(nlohmann::json spec, std::uint64_t seed) {
  if (spec.is_object() && !spec.contains("seed")) spec["seed"] = seed;
  return spec;
}

}  // namespace detail

inline PreparedInputs prepare_inputs(const RunConfig& cfg) {
  PreparedInputs in;
  LoadOptions opts;
  if (!cfg.labels_file.empty()) opts.label_file = cfg.resolve(cfg.labels_file);

  // pool
  if (!cfg.pool.dir.empty()) {
    in.pool = std::make_shared<const DataPool>(load_pool(cfg.resolve(cfg.pool.dir), cfg.base_dir));
  } else if (!cfg.pool.clean.empty()) {
    auto clean = load_dataset(cfg.resolve(cfg.pool.clean), guess_dataset_format(cfg.resolve(cfg.pool.clean)), opts);
    AssetResolver resolver(cfg.base_dir);
    resolver.set_default_vocabulary(
        std::make_shared<const InsertVocabulary>(InsertVocabulary::from_examples(clean.examples)));
    std::vector<PerturbationSpec> specs;
    for (const auto& sj : cfg.pool.specs) {
      nlohmann::json spec = sj.is_string() ? nlohmann::json{{"kind", sj}} : sj;
      specs.push_back(spec_from_json(detail::with_default_seed(spec, cfg.seed), resolver));
    }
    in.pool = std::make_shared<const DataPool>(build_pool(clean, std::move(specs), cfg.workers));
  }
  if (in.pool) in.labels = in.pool->clean.labels;

  // test splits
  std::map<std::string, Dataset> loaded;
  AssetResolver resolver(cfg.base_dir);
  if (in.pool) {
    resolver.set_default_vocabulary(
        std::make_shared<const InsertVocabulary>(InsertVocabulary::from_examples(in.pool->clean.examples)));
  }
  for (const auto& s : cfg.test_splits) {
    Dataset ds;
    std::string group = s.group;
    if (!s.path.empty()) {
      const auto p = cfg.resolve(s.path);
      ds = load_dataset(p, guess_dataset_format(p), opts);
    } else {
      auto src = loaded.find(s.from);
      if (src == loaded.end()) throw ConfigError("split '" + s.from + "' must be listed before splits derived from it");
      if (!in.pool) {
        resolver.set_default_vocabulary(
            std::make_shared<const InsertVocabulary>(InsertVocabulary::from_examples(src->second.examples)));
      }
      const auto spec = spec_from_json(detail::with_default_seed(s.perturb, cfg.seed), resolver);
      if (group.empty()) group = column_name(spec);
      auto perturbed = perturb_dataset(src->second, spec, cfg.workers);
      in.perturbation_reports[group] = perturbed.report;
      ds = std::move(perturbed.dataset);
    }
    if (loaded.count(group)) throw ConfigError("duplicate test split group '" + group + "'");
    for (const auto& l : ds.labels.names()) in.labels.add(l);
    in.group_order.push_back(group);
    for (const auto& ex : ds.examples) {
      TestItem item;
      item.group = group;
      item.run_id = group + "/" + ex.id;
      item.gold = ex;
      item.gold.id = item.run_id;
      in.items.push_back(std::move(item));
    }
    loaded.emplace(group, std::move(ds));
  }

  in.templates = TemplateRegistry::load_dir(cfg.resolve(cfg.template_dir));
  in.templates.get(cfg.template_id);  // unknown id fails before any work
  in.embedder = std::make_shared<CachedEmbedder>(make_embedding_provider(cfg.demos.embedding));
  return in;
}

// ---- execution ----

struct ExampleRecord {
  std::string run_id;
  std::string group;
  std::string prompt;
  std::string prompt_hash;
  std::vector<std::string> demo_ids;
  std::optional<std::string> response;
  Prediction prediction;
  std::optional<std::string> error;
  MatchCounts counts;
};

struct RunOutcome {
  std::string name;
  EvalResult result;
  std::vector<ExampleRecord> records;
  std::size_t errors = 0;
  std::size_t backend_calls = 0;
  std::size_t cache_hits = 0;
  std::vector<std::string> warnings;
};

struct RunOptions {
  bool resume = false;
  std::shared_ptr<ResponseCache> cache;   // shared across runs when set
  std::shared_ptr<ModelClient> client;    // overrides cfg.model when set
  bool write_outputs = true;
};

namespace detail {

inline void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

inline void write_run_outputs(const RunConfig& cfg, const PreparedInputs& in, const RunOutcome& run) {
  const auto dir = cfg.resolve(cfg.output_dir);
  fs::create_directories(dir);
  {
    std::ofstream(dir / "config.yaml", std::ios::binary | std::ios::trunc) << cfg.source_text;
  }
  std::vector<std::string> prompts, responses, predictions, gold;
  nlohmann::ordered_json groups = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < run.records.size(); ++i) {
    const auto& r = run.records[i];
    prompts.push_back(nlohmann::ordered_json{{"id", r.run_id},
                                             {"group", r.group},
                                             {"prompt_hash", r.prompt_hash},
                                             {"demo_ids", r.demo_ids},
                                             {"prompt", r.prompt}}
                          .dump());
    nlohmann::ordered_json resp{{"id", r.run_id}, {"prompt_hash", r.prompt_hash}};
    if (r.response) resp["response"] = *r.response;
    if (r.error) resp["error"] = *r.error;
    responses.push_back(resp.dump());
    nlohmann::ordered_json pred{{"id", r.run_id}, {"group", r.group}};
    pred["pairs"] = nlohmann::ordered_json::array();
    for (const auto& p : r.prediction.pairs) pred["pairs"].push_back({{"surface", p.surface}, {"type", p.slot_type}});
    pred["dropped_unknown_labels"] = r.prediction.dropped_unknown_labels;
    pred["raw"] = r.prediction.raw;
    if (r.error) pred["error"] = *r.error;
    predictions.push_back(pred.dump());
    gold.push_back(to_json(in.items[i].gold).dump());
    groups[r.run_id] = r.group;
  }
  write_lines(dir / "prompts.jsonl", prompts);
  write_lines(dir / "responses.jsonl", responses);
  write_lines(dir / "predictions.jsonl", predictions);
  write_lines(dir / "gold.jsonl", gold);
  std::ofstream(dir / "groups.json", std::ios::binary | std::ios::trunc) << groups.dump(2) << '\n';
  std::ofstream(dir / "labels.txt", std::ios::binary | std::ios::trunc) << join(in.labels.names(), "\n") << '\n';
  auto result = to_json(run.result);
  result["name"] = run.name;
  result["errors"] = run.errors;
  std::ofstream(dir / "result.json", std::ios::binary | std::ios::trunc) << result.dump(2) << '\n';
  write_report(render_report({report_row(run.name, run.result)}), dir);
}

}  // namespace detail

inline std::shared_ptr<ResponseCache> open_cache(const RunConfig& cfg, bool resume) {
  if (!cfg.cache_path.empty()) return std::make_shared<ResponseCache>(cfg.resolve(cfg.cache_path));
  if (cfg.output_dir.empty()) return std::make_shared<ResponseCache>();
  const auto path = cfg.resolve(cfg.output_dir) / "cache.jsonl";
  if (!resume) fs::remove(path);
  return std::make_shared<ResponseCache>(path);
}

// One pass over every prepared test example with the demo, template and
// model settings of `cfg`.
inline RunOutcome execute_run(const RunConfig& cfg, const PreparedInputs& in, const RunOptions& opts = {}) {
  const auto& tmpl = in.templates.get(cfg.template_id);
  const bool needs_pool = cfg.demos.mode == DemoMode::entity || cfg.demos.k > 0;
  if (needs_pool && !in.pool) throw ConfigError("demonstrations need a pool");
  auto cache = opts.cache ? opts.cache : open_cache(cfg, opts.resume);
  auto client = opts.client ? opts.client : std::shared_ptr<ModelClient>(make_client(cfg.model));

  RunOutcome run;
  run.name = cfg.name;
  run.warnings = cache->warnings();
  run.records.resize(in.items.size());
  CompletionStats stats;

  auto process = [&](std::size_t i) {
    const auto& item = in.items[i];
    auto& rec = run.records[i];
    rec.run_id = item.run_id;
    rec.group = item.group;
    try {
      DemonstrationSet demos;
      if (cfg.demos.mode == DemoMode::entity) {
        demos = build_entity_demos(item.gold, *in.pool, cfg.demos.pool, in.labels, cfg.demos.strategy, cfg.seed,
                                   in.embedder.get());
      } else if (cfg.demos.k > 0) {
        demos = build_instance_demos(item.gold, *in.pool, cfg.demos.pool, cfg.demos.strategy, cfg.demos.k, cfg.seed,
                                     in.embedder.get());
      }
      for (const auto& d : demos.items) rec.demo_ids.insert(rec.demo_ids.end(), d.source_ids.begin(), d.source_ids.end());
      rec.prompt = render_prompt(tmpl, in.labels, demos.empty() ? nullptr : &demos, item.gold);
      rec.prompt_hash = sha256_hex(rec.prompt);
      rec.response = cached_complete(rec.prompt, cfg.model, *cache, *client, SideChannel{&item.gold, &in.labels}, &stats);
      rec.prediction = parse_predictions(*rec.response, in.labels);
    } catch (const Error& e) {
      rec.error = e.what();
      rec.prediction = Prediction{};
    }
    rec.counts = score_example(item.gold, rec.prediction, cfg.scoring);
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(cfg.workers, static_cast<unsigned>(in.items.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < in.items.size(); ++i) process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> failures(workers);
    {
      std::vector<std::jthread> threads;
      for (unsigned w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
          try {
            for (std::size_t i = next++; i < in.items.size(); i = next++) process(i);
          } catch (...) {
            failures[w] = std::current_exception();
          }
        });
      }
    }
    for (auto& f : failures)
      if (f) std::rethrow_exception(f);
  }

  std::vector<ExampleScore> scores;
  std::map<std::string, std::string> groups;
  for (const auto& rec : run.records) {
    scores.push_back({rec.run_id, rec.group, rec.counts});
    groups[rec.run_id] = rec.group;
    if (rec.error) ++run.errors;
  }
  run.result = aggregate(scores, groups, cfg.scoring);
  run.result.config_hash = cfg.hash();
  cache->compact();
  run.backend_calls = stats.backend_calls;
  run.cache_hits = stats.cache_hits;

  if (opts.write_outputs && !cfg.output_dir.empty()) detail::write_run_outputs(cfg, in, run);

  const double fraction = in.items.empty() ? 0.0 : static_cast<double>(run.errors) / static_cast<double>(in.items.size());
  if (fraction > cfg.max_error_fraction) {
    std::string first;
    for (const auto& rec : run.records)
      if (rec.error) {
        first = rec.run_id + ": " + *rec.error;
        break;
      }
    throw DataError("run failed: " + std::to_string(run.errors) + " of " + std::to_string(in.items.size()) +
                    " examples errored (first: " + first + ")");
  }
  return run;
}

inline RunOutcome run_experiment_full(const RunConfig& cfg, const RunOptions& opts = {}) {
  const auto in = prepare_inputs(cfg);
  return execute_run(cfg, in, opts);
}

inline EvalResult run_experiment(const RunConfig& cfg, const RunOptions& opts = {}) {
  return run_experiment_full(cfg, opts).result;
}

// ---- sweeps ----

struct SweepOutcome {
  std::map<std::size_t, EvalResult> by_k;
  std::vector<RunOutcome> runs;
  Report table;
};

// One run per k, sharing inputs and the response cache; each lands in
// <output_dir>/k<k> and the combined table in <output_dir>/sweep.{txt,tsv}.
inline SweepOutcome sweep_demo_count(const RunConfig& cfg, const std::vector<std::size_t>& ks,
                                     const RunOptions& opts = {}) {
  if (ks.empty()) throw ConfigError("sweep needs at least one k");
  if (cfg.demos.mode != DemoMode::instance) throw ConfigError("demo-count sweeps need instance demonstrations");
  const auto in = prepare_inputs(cfg);
  RunOptions shared = opts;
  if (!shared.cache) shared.cache = open_cache(cfg, opts.resume);
  SweepOutcome out;
  std::vector<ReportRow> rows;
  for (auto k : ks) {
    RunConfig variant = cfg;
    variant.set_k(k);
    variant.name = "k=" + std::to_string(k);
    if (!cfg.output_dir.empty()) variant.output_dir = cfg.resolve(cfg.output_dir) / ("k" + std::to_string(k));
    auto run = execute_run(variant, in, shared);
    rows.push_back(report_row(variant.name, run.result));
    out.by_k[k] = run.result;
    out.runs.push_back(std::move(run));
  }
  out.table = render_report(rows);
  if (!cfg.output_dir.empty()) write_report(out.table, cfg.resolve(cfg.output_dir), "sweep");
  return out;
}

struct TemplateComparison {
  std::vector<RunOutcome> runs;
  Report table;
};

inline TemplateComparison compare_templates(const RunConfig& cfg, const std::vector<std::string>& ids,
                                            const RunOptions& opts = {}) {
  if (ids.empty()) throw ConfigError("template comparison needs at least one template id");
  const auto in = prepare_inputs(cfg);
  for (const auto& id : ids) in.templates.get(id);
  RunOptions shared = opts;
  if (!shared.cache) shared.cache = open_cache(cfg, opts.resume);
  TemplateComparison out;
  std::vector<ReportRow> rows;
  for (const auto& id : ids) {
    RunConfig variant = cfg;
    variant.set_template(id);
    variant.name = id;
    if (!cfg.output_dir.empty()) variant.output_dir = cfg.resolve(cfg.output_dir) / id;
    auto run = execute_run(variant, in, shared);
    rows.push_back(report_row(id, run.result));
    out.runs.push_back(std::move(run));
  }
  out.table = render_report(rows);
  if (!cfg.output_dir.empty()) write_report(out.table, cfg.resolve(cfg.output_dir), "templates");
  return out;
}

// ---- offline rescoring ----

struct RescoreInputs {
  fs::path gold;         // gold.jsonl
  fs::path predictions;  // predictions.jsonl
  fs::path groups;       // groups.json
  ScoreMode mode = ScoreMode::text_match;
  bool reparse = false;  // parse the logged raw responses again
  std::optional<LabelSet> labels;
};

// Recomputes a run's EvalResult from its logs. Predictions and groups must
// cover exactly the gold ids; an empty predictions file scores every example
// as predicting nothing.
inline EvalResult rescore_run(const RescoreInputs& r) {
  const auto gold = load_dataset(r.gold, DatasetFormat::jsonl_spans);
  LabelSet labels = r.labels ? *r.labels : gold.labels;

  std::map<std::string, Prediction> preds;
  {
    std::ifstream in(r.predictions, std::ios::binary);
    if (!in) throw DataError("cannot read predictions " + r.predictions.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      try {
        auto j = nlohmann::json::parse(line);
        auto id = j.at("id").get<std::string>();
        Prediction p = prediction_from_json(j);
        if (r.reparse) p = parse_predictions(p.raw, labels);
        if (!preds.emplace(id, std::move(p)).second) throw DataError("duplicate prediction for '" + id + "'");
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(r.predictions.string(), lineno, e.what());
      }
    }
  }
  std::map<std::string, std::string> groups;
  {
    std::ifstream in(r.groups, std::ios::binary);
    if (!in) throw DataError("cannot read groups " + r.groups.string());
    try {
      nlohmann::json j;
      in >> j;
      groups = j.get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(r.groups.string(), 1, e.what());
    }
  }

  std::vector<std::string> orphans;
  std::map<std::string, bool> gold_ids;
  for (const auto& ex : gold.examples) gold_ids[ex.id] = true;
  for (const auto& [id, _] : preds)
    if (!gold_ids.count(id)) orphans.push_back("prediction " + id);
  for (const auto& [id, _] : groups)
    if (!gold_ids.count(id)) orphans.push_back("group entry " + id);
  for (const auto& ex : gold.examples) {
    if (!groups.count(ex.id)) orphans.push_back("gold " + ex.id + " (no group)");
    if (!preds.empty() && !preds.count(ex.id)) orphans.push_back("gold " + ex.id + " (no prediction)");
  }
  if (!orphans.empty()) {
    const std::size_t shown = std::min<std::size_t>(orphans.size(), 20);
    std::vector<std::string> head(orphans.begin(), orphans.begin() + static_cast<std::ptrdiff_t>(shown));
    throw DataError("ids do not line up across gold, predictions and groups: " + join(head, ", ") +
                    (orphans.size() > shown ? " (+" + std::to_string(orphans.size() - shown) + " more)" : ""));
  }

  std::vector<ExampleScore> scores;
  const Prediction empty;
  for (const auto& ex : gold.examples) {
    auto it = preds.find(ex.id);
    scores.push_back({ex.id, groups.at(ex.id), score_example(ex, it == preds.end() ? empty : it->second, r.mode)});
  }
  return aggregate(scores, groups, r.mode);
}

}  // namespace slotnoise
