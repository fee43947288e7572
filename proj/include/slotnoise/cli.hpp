#pragma once

// Command-line front end. Exit codes: 0 success, 1 data or provider error,
// 2 configuration or usage error.

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "slotnoise/corpus.hpp"
#include "slotnoise/error.hpp"
#include "slotnoise/harness.hpp"
#include "slotnoise/perturb.hpp"
#include "slotnoise/pools.hpp"
#include "slotnoise/prompts.hpp"
#include "slotnoise/report.hpp"
#include "slotnoise/scorer.hpp"

namespace slotnoise {

namespace cli {

struct AssetFlags {
  std::string homophones;
  std::string irrelevant;
  std::string paraphrase;
  std::string vocabulary;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--homophones", homophones, "Homophone lexicon (word<TAB>alt,alt)");
    cmd->add_option("--irrelevant", irrelevant, "Irrelevant-sentence pool, one per line");
    cmd->add_option("--paraphrase", paraphrase, "Paraphrase provider: identity or an http(s) URL");
    cmd->add_option("--vocabulary", vocabulary, "Dataset whose unigrams feed word insertion (default: the input)");
  }

  nlohmann::json json() const {
    nlohmann::json a = nlohmann::json::object();
    if (!homophones.empty()) a["homophones"] = homophones;
    if (!irrelevant.empty()) a["irrelevant"] = irrelevant;
    if (!paraphrase.empty()) a["paraphrase"] = paraphrase;
    if (!vocabulary.empty()) a["vocabulary"] = vocabulary;
    return a;
  }
};

struct SpecFlags {
  std::string kind;
  double p = 0.1;
  std::uint64_t seed = 0;
  std::string members;
  AssetFlags assets;

  void add_to(CLI::App* cmd, bool kind_required) {
    auto* k = cmd->add_option("--kind", kind, "Perturbation kind (char_typos, word_homophone, ..., composite)");
    if (kind_required) k->required();
    cmd->add_option("--p", p, "Perturbation probability")->capture_default_str();
    cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
    cmd->add_option("--members", members, "Composite members, comma separated (e.g. speech,typos)");
    assets.add_to(cmd);
  }

  nlohmann::json json() const {
    nlohmann::json j = {{"kind", kind}, {"p", p}, {"seed", seed}};
    if (auto a = assets.json(); !a.empty()) j["assets"] = a;
    const auto parsed = parse_kind(kind);
    if (parsed == PerturbKind::Composite) {
      if (members.empty()) throw ConfigError("--kind composite needs --members");
      j["members"] = nlohmann::json::array();
      std::stringstream ss(members);
      std::string m;
      while (std::getline(ss, m, ',')) {
        if (!trim(m).empty()) j["members"].push_back(std::string(trim(m)));
      }
    } else if (!members.empty()) {
      throw ConfigError("--members only applies to --kind composite");
    }
    return j;
  }
};

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!trim(item).empty()) out.emplace_back(trim(item));
  }
  return out;
}

inline Dataset load_input(const std::string& path, const std::string& format, const std::string& labels) {
  if (!fs::exists(path)) throw DataError("input not found: " + path);
  LoadOptions opts;
  if (!labels.empty()) opts.label_file = labels;
  const auto fmt = format.empty() ? guess_dataset_format(path) : parse_dataset_format(format);
  return load_dataset(path, fmt, opts);
}

inline void print_run_summary(const RunOutcome& run, std::ostream& err) {
  for (const auto& w : run.warnings) err << "warning: " << w << '\n';
  err << run.name << ": " << run.records.size() << " examples, " << run.errors << " errored, "
      << run.backend_calls << " model calls, " << run.cache_hits << " cache hits\n";
  std::size_t shown = 0;
  for (const auto& rec : run.records) {
    if (!rec.error) continue;
    if (shown++ == 5) {
      err << "  ...\n";
      break;
    }
    err << "  " << rec.run_id << ": " << *rec.error << '\n';
  }
}

inline RunConfig load_config_with_overrides(const std::string& path, const std::string& out_dir,
                                            const std::optional<std::uint64_t>& seed) {
  auto cfg = load_run_config(path);
  if (!out_dir.empty()) {
    cfg.output_dir = fs::absolute(out_dir);
    cfg.canonical["output_dir"] = out_dir;
  }
  if (seed) {
    cfg.seed = *seed;
    cfg.canonical["seed"] = *seed;
    if (!cfg.canonical.contains("model") || !cfg.canonical["model"].contains("seed")) cfg.model.seed = *seed;
  }
  return cfg;
}

// "name=path" or a result.json / run directory named after its directory.
inline ReportRow load_report_row(const std::string& arg) {
  std::string name;
  fs::path path = arg;
  if (auto eq = arg.find('='); eq != std::string::npos) {
    name = arg.substr(0, eq);
    path = arg.substr(eq + 1);
  }
  if (fs::is_directory(path)) path /= "result.json";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read result " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 1, e.what());
  }
  if (name.empty()) name = j.value("name", path.parent_path().filename().string());
  return report_row(name, eval_result_from_json(j));
}

}  // namespace cli

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robustness evaluation for slot filling with in-context learning", "slotnoise"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "slotnoise 0.1.0");

  // augment
  auto* augment = app.add_subcommand("augment", "Perturb a dataset");
  std::string aug_in, aug_out, aug_format, aug_labels;
  unsigned aug_workers = 1;
  cli::SpecFlags aug_spec;
  augment->add_option("--in", aug_in, "Input dataset (.jsonl spans or CoNLL BIO)")->required();
  augment->add_option("--out", aug_out, "Output .jsonl")->required();
  augment->add_option("--format", aug_format, "Input format: jsonl or conll (default: by extension)");
  augment->add_option("--labels", aug_labels, "Label inventory file");
  augment->add_option("--workers", aug_workers, "Worker threads")->capture_default_str();
  aug_spec.add_to(augment, true);

  // pool
  auto* pool = app.add_subcommand("pool", "Build a candidate demonstration pool");
  std::string pool_in, pool_out, pool_specs, pool_labels;
  unsigned pool_workers = 1;
  cli::SpecFlags pool_spec;
  pool->add_option("--in", pool_in, "Clean training split")->required();
  pool->add_option("--out", pool_out, "Pool directory")->required();
  pool->add_option("--config", pool_specs, "YAML file with a 'specs' list");
  pool->add_option("--labels", pool_labels, "Label inventory file");
  pool->add_option("--workers", pool_workers, "Worker threads")->capture_default_str();
  pool_spec.add_to(pool, false);

  // eval / sweep / demo-preview / templates share a config
  std::string config_path, out_override;
  std::optional<std::uint64_t> seed_override;
  bool resume = false;
  auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Run config (YAML)")->required();
    cmd->add_option("--out", out_override, "Override the output directory");
    cmd->add_option("--seed", seed_override, "Override the global seed");
    cmd->add_flag("--resume", resume, "Reuse cached responses in the output directory");
  };

  auto* eval = app.add_subcommand("eval", "Run an experiment");
  add_run_flags(eval);

  auto* sweep = app.add_subcommand("sweep", "Vary the number of instance demonstrations");
  std::string sweep_ks = "0,1,2,3,4,5";
  add_run_flags(sweep);
  sweep->add_option("--ks", sweep_ks, "Demonstration counts, comma separated")->capture_default_str();

  auto* preview = app.add_subcommand("demo-preview", "Print rendered prompts without calling a model");
  std::size_t preview_limit = 3;
  std::string preview_id;
  preview->add_option("--config", config_path, "Run config (YAML)")->required();
  preview->add_option("--limit", preview_limit, "Number of prompts")->capture_default_str();
  preview->add_option("--id", preview_id, "Only this run id (group/example id)");
  preview->add_option("--seed", seed_override, "Override the global seed");

  auto* templates = app.add_subcommand("templates", "List templates or compare them on a config");
  std::string tmpl_dir, tmpl_ids;
  templates->add_option("--dir", tmpl_dir, "Template directory to list");
  templates->add_option("--config", config_path, "Run config; compares --ids on it");
  templates->add_option("--ids", tmpl_ids, "Template ids, comma separated");
  templates->add_option("--out", out_override, "Override the output directory");
  templates->add_option("--seed", seed_override, "Override the global seed");
  templates->add_flag("--resume", resume, "Reuse cached responses");

  auto* score = app.add_subcommand("score", "Rescore logged predictions offline");
  std::string score_run, score_gold, score_pred, score_groups, score_mode = "text_match", score_out, score_labels;
  bool reparse = false;
  score->add_option("--in", score_run, "Run directory (gold.jsonl, predictions.jsonl, groups.json)");
  score->add_option("--gold", score_gold, "Gold examples (.jsonl)");
  score->add_option("--predictions", score_pred, "Predictions (.jsonl)");
  score->add_option("--groups", score_groups, "Group assignment (.json)");
  score->add_option("--mode", score_mode, "text_match or strict_span")->capture_default_str();
  score->add_option("--labels", score_labels, "Label inventory for --reparse");
  score->add_flag("--reparse", reparse, "Parse the raw responses again");
  score->add_option("--out", score_out, "Write result.json and report files here");

  auto* report = app.add_subcommand("report", "Render result tables");
  std::vector<std::string> report_in;
  std::string baseline, layout = "auto", report_out;
  bool macro = false;
  report->add_option("--in", report_in, "result.json or run directory, optionally name=path")->required();
  report->add_option("--baseline", baseline, "Row to annotate deltas against");
  report->add_option("--layout", layout, "single, mixed or auto")->capture_default_str();
  report->add_flag("--macro", macro, "Overall column as the macro mean");
  report->add_option("--out", report_out, "Write report.txt and report.tsv here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion& e) {
    out << e.what() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*augment) {
      const auto spec_json = aug_spec.json();
      auto ds = cli::load_input(aug_in, aug_format, aug_labels);
      AssetResolver resolver;
      resolver.set_default_vocabulary(
          std::make_shared<const InsertVocabulary>(InsertVocabulary::from_examples(ds.examples)));
      const auto spec = spec_from_json(spec_json, resolver);
      auto result = perturb_dataset(ds, spec, aug_workers);
      save_dataset(result.dataset, aug_out);
      err << column_name(spec) << " (" << spec.name() << "): " << result.report.summary() << '\n';
      for (const auto& n : result.report.notes) err << "  " << n << '\n';
      return 0;
    }

    if (*pool) {
      auto ds = cli::load_input(pool_in, "", pool_labels);
      AssetResolver resolver(pool_specs.empty() ? fs::path{} : fs::path(pool_specs).parent_path());
      resolver.set_default_vocabulary(
          std::make_shared<const InsertVocabulary>(InsertVocabulary::from_examples(ds.examples)));
      std::vector<PerturbationSpec> specs;
      if (!pool_specs.empty()) {
        YAML::Node root;
        try {
          root = YAML::LoadFile(pool_specs);
        } catch (const YAML::Exception& e) {
          throw ConfigError(pool_specs + ": " + e.what());
        }
        auto j = yaml_to_json(root);
        const auto& list = j.is_array() ? j : detail::field(j, "specs");
        if (!list.is_array()) throw ConfigError(pool_specs + ": expected a 'specs' list");
        for (const auto& sj : list) {
          nlohmann::json s = sj.is_string() ? nlohmann::json{{"kind", sj}} : sj;
          if (!s.contains("seed")) s["seed"] = pool_spec.seed;
          specs.push_back(spec_from_json(s, resolver));
        }
      }
      if (!pool_spec.kind.empty()) specs.push_back(spec_from_json(pool_spec.json(), resolver));
      if (specs.empty()) throw ConfigError("pool needs --config or --kind");
      const auto built = build_pool(ds, std::move(specs), pool_workers);
      save_pool(built, pool_out);
      err << "pool: " << built.clean.size() << " clean, " << built.augmented.size() << " augmented\n";
      return 0;
    }

    if (*eval) {
      const auto cfg = cli::load_config_with_overrides(config_path, out_override, seed_override);
      RunOptions opts;
      opts.resume = resume;
      const auto in = prepare_inputs(cfg);
      const auto run = execute_run(cfg, in, opts);
      cli::print_run_summary(run, err);
      out << render_report({report_row(cfg.name, run.result)}).text;
      return 0;
    }

    if (*sweep) {
      const auto cfg = cli::load_config_with_overrides(config_path, out_override, seed_override);
      std::vector<std::size_t> ks;
      for (const auto& k : cli::split_list(sweep_ks)) {
        try {
          const long long v = std::stoll(k);
          if (v < 0) throw std::invalid_argument(k);
          ks.push_back(static_cast<std::size_t>(v));
        } catch (const std::logic_error&) {
          throw ConfigError("--ks entries must be non-negative integers, got '" + k + "'");
        }
      }
      RunOptions opts;
      opts.resume = resume;
      const auto res = sweep_demo_count(cfg, ks, opts);
      for (const auto& r : res.runs) cli::print_run_summary(r, err);
      out << res.table.text;
      return 0;
    }

    if (*preview) {
      const auto cfg = cli::load_config_with_overrides(config_path, "", seed_override);
      const auto in = prepare_inputs(cfg);
      const auto& tmpl = in.templates.get(cfg.template_id);
      std::size_t shown = 0;
      for (const auto& item : in.items) {
        if (!preview_id.empty() && item.run_id != preview_id) continue;
        if (preview_id.empty() && shown >= preview_limit) break;
        DemonstrationSet demos;
        if (cfg.demos.mode == DemoMode::entity) {
          demos = build_entity_demos(item.gold, *in.pool, cfg.demos.pool, in.labels, cfg.demos.strategy, cfg.seed,
                                     in.embedder.get());
        } else if (cfg.demos.k > 0) {
          demos = build_instance_demos(item.gold, *in.pool, cfg.demos.pool, cfg.demos.strategy, cfg.demos.k,
                                       cfg.seed, in.embedder.get());
        }
        out << "=== " << item.run_id << " ===\n"
            << render_prompt(tmpl, in.labels, demos.empty() ? nullptr : &demos, item.gold) << '\n';
        ++shown;
      }
      if (shown == 0) throw DataError(preview_id.empty() ? "no test examples" : "unknown run id '" + preview_id + "'");
      return 0;
    }

    if (*templates) {
      if (!config_path.empty()) {
        const auto cfg = cli::load_config_with_overrides(config_path, out_override, seed_override);
        auto ids = cli::split_list(tmpl_ids);
        if (ids.empty()) ids = prepare_inputs(cfg).templates.ids();
        RunOptions opts;
        opts.resume = resume;
        const auto res = compare_templates(cfg, ids, opts);
        for (const auto& r : res.runs) cli::print_run_summary(r, err);
        out << res.table.text;
        return 0;
      }
      if (tmpl_dir.empty()) throw ConfigError("templates needs --dir or --config");
      const auto reg = TemplateRegistry::load_dir(tmpl_dir);
      for (const auto& id : reg.ids()) out << id << '\t' << reg.get(id).language_tag << '\n';
      return 0;
    }

    if (*score) {
      RescoreInputs r;
      if (!score_run.empty()) {
        r.gold = fs::path(score_run) / "gold.jsonl";
        r.predictions = fs::path(score_run) / "predictions.jsonl";
        r.groups = fs::path(score_run) / "groups.json";
        if (fs::exists(fs::path(score_run) / "labels.txt")) r.labels = load_label_file(fs::path(score_run) / "labels.txt");
      }
      if (!score_gold.empty()) r.gold = score_gold;
      if (!score_pred.empty()) r.predictions = score_pred;
      if (!score_groups.empty()) r.groups = score_groups;
      if (!score_labels.empty()) r.labels = load_label_file(score_labels);
      if (r.gold.empty() || r.predictions.empty() || r.groups.empty())
        throw ConfigError("score needs --in or all of --gold, --predictions and --groups");
      r.mode = parse_score_mode(score_mode);
      r.reparse = reparse;
      auto result = rescore_run(r);
      std::string name = "rescored";
      if (!score_run.empty()) {
        std::ifstream rj(fs::path(score_run) / "result.json");
        nlohmann::json j;
        if (rj && nlohmann::json::accept(rj)) {
          rj.clear();
          rj.seekg(0);
          rj >> j;
          name = j.value("name", name);
          result.config_hash = j.value("config_hash", std::string());
        }
      }
      const auto rep = render_report({report_row(name, result)});
      if (!score_out.empty()) {
        fs::create_directories(score_out);
        auto j = to_json(result);
        j["name"] = name;
        std::ofstream(fs::path(score_out) / "result.json", std::ios::binary) << j.dump(2) << '\n';
        write_report(rep, score_out);
      }
      out << rep.text;
      return 0;
    }

    if (*report) {
      std::vector<ReportRow> rows;
      for (const auto& arg : report_in) rows.push_back(cli::load_report_row(arg));
      ReportOptions opts;
      opts.layout = parse_report_layout(layout);
      opts.macro_overall = macro;
      if (!baseline.empty()) opts.baseline = baseline;
      const auto rep = render_report(rows, opts);
      if (!report_out.empty()) write_report(rep, report_out);
      out << rep.text;
      return 0;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return 1;
  } catch (const ProviderError& e) {
    err << "provider error: " << e.what() << '\n';
    return 1;
  } catch (const YAML::Exception& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("slotnoise");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace slotnoise
