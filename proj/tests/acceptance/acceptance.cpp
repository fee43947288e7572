// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "slotnoise/cli.hpp"
#include "slotnoise/harness.hpp"
#include "table_fixtures.hpp"
#include "test_support.hpp"

namespace {

using namespace slotnoise;

// Thrown by a check to report the first violated property.
struct Violation {
  std::string what;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Violation{what};
}

std::string num(double v, int digits = 2) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(digits);
  ss << v;
  return ss.str();
}

std::vector<oracle::Span> as_oracle(const std::vector<SlotSpan>& spans) {
  std::vector<oracle::Span> out;
  for (const auto& s : spans) out.push_back({s.start, s.end, s.slot_type});
  return out;
}

std::shared_ptr<const HomophoneLexicon> unique_token_lexicon(std::size_t n) {
  auto lex = std::make_shared<HomophoneLexicon>();
  for (std::size_t i = 0; i < n; ++i) lex->add("w" + std::to_string(i), {"h" + std::to_string(i)});
  return lex;
}

RunConfig bundled(const std::string& name) {
  auto cfg = load_run_config(support::source_dir() / "configs" / (name + ".yaml"));
  cfg.output_dir.clear();
  return cfg;
}

std::string oracle_end_to_end() {
  const auto start = std::chrono::steady_clock::now();
  std::size_t runs = 0, examples = 0;
  RunOptions opts;
  opts.write_outputs = false;
  for (const char* name : {"single", "mixed"}) {
    auto cfg = bundled(name);
    const auto in = prepare_inputs(cfg);
    for (auto mode : {DemoMode::entity, DemoMode::instance}) {
      const std::vector<std::size_t> ks = mode == DemoMode::entity ? std::vector<std::size_t>{0}
                                                                   : std::vector<std::size_t>{0, 1, 3, 5};
      for (auto strategy : {DemoStrategy::random, DemoStrategy::retrieve})
        for (auto pool : {PoolLabel::clean, PoolLabel::augment, PoolLabel::mixed})
          for (auto k : ks)
            for (const char* tmpl : {"T1", "T2", "T3"}) {
              cfg.set_demo_mode(mode);
              cfg.set_demo_strategy(strategy);
              cfg.set_demo_pool(pool);
              cfg.set_k(k);
              cfg.set_template(tmpl);
              opts.cache = std::make_shared<ResponseCache>();
              const auto run = execute_run(cfg, in, opts);
              const std::string where = std::string(name) + " " + demo_mode_name(mode) + "/" +
                                        demo_strategy_name(strategy) + "/" + pool_label_name(pool) + "/k=" +
                                        std::to_string(k) + "/" + tmpl;
              require(run.errors == 0, where + ": " + std::to_string(run.errors) + " errored");
              for (const auto& [g, s] : run.result.per_group)
                require(s.f1 == 100.0, where + " group " + g + " F1 " + num(s.f1));
              require(run.result.overall.micro_f1 == 100.0, where + " overall " + num(run.result.overall.micro_f1));
              ++runs;
              examples += run.records.size();
            }
    }
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  require(seconds < 10.0, "took " + num(seconds) + " s");
  return std::to_string(runs) + " runs, " + std::to_string(examples) + " examples, F1 100.00, " + num(seconds) + " s";
}

std::string noisy_oracle_calibration() {
  const auto dir = support::scratch("acceptance-noisy");
  std::mt19937_64 gen(101);
  Dataset ds;
  for (std::size_t i = 0; i < 500; ++i) {
    auto ex = support::random_example(gen, "s" + std::to_string(i));
    ex.tokens.push_back("u" + std::to_string(i));
    ds.examples.push_back(ex);
  }
  save_dataset(ds, dir / "test.jsonl");
  std::ofstream(dir / "test.labels") << "artist\ncity\ngenre\ntime\n";
  const auto templates = (support::source_dir() / "assets" / "templates").string();
  std::string detail;
  for (double e : {0.1, 0.3, 0.5}) {
    auto cfg = parse_run_config("name: calib\nworkers: 4\ntest_splits:\n  - {group: Clean, path: test.jsonl}\n"
                                "demos: {mode: instance, k: 0}\n"
                                "templates: {dir: '" + templates + "', id: T1}\n"
                                "model: {kind: noisy_oracle, error_rate: " + num(e, 1) + ", seed: 7}\n",
                                dir);
    const auto r = run_experiment(cfg);
    std::size_t gold = 0;
    for (const auto& [_, g] : r.per_group) gold += g.counts.tp + g.counts.fn;
    require(gold >= 500, "only " + std::to_string(gold) + " gold pairs");
    const double recall = r.overall.micro_recall / 100.0;
    const double se = std::sqrt(e * (1 - e) / static_cast<double>(gold));
    const double z = std::abs(recall - (1 - e)) / se;
    require(z <= 3.0, "e=" + num(e, 1) + " recall " + num(recall, 4) + " is " + num(z) + " SE from " + num(1 - e, 1));
    detail += (detail.empty() ? "" : ", ") + std::string("e=") + num(e, 1) + " recall " + num(recall, 4) + " (" +
              num(z) + " SE, n=" + std::to_string(gold) + ")";
  }
  return detail;
}

std::string perturbation_rate() {
  PerturbAssets assets;
  assets.homophones = unique_token_lexicon(12);
  std::string detail;
  for (auto kind : {PerturbKind::CharTypos, PerturbKind::WordHomophone}) {
    for (double p : {0.1, 0.3, 1.0}) {
      std::mt19937_64 gen(211);
      PerturbationReport total;
      for (int i = 0; i < 2500; ++i) {
        auto ex = support::random_example(gen, "r" + std::to_string(i), kind == PerturbKind::WordHomophone);
        total += apply_perturbation(ex, make_spec(kind, p, gen(), assets)).report;
      }
      const std::string where = std::string(kind_name(kind)) + " p=" + num(p, 1);
      require(total.eligible >= 10000, where + ": only " + std::to_string(total.eligible) + " eligible");
      require(oracle::within_binomial_band(total.edited, total.eligible, p),
              where + ": " + std::to_string(total.edited) + "/" + std::to_string(total.eligible));
      detail += (detail.empty() ? "" : ", ") + where + " " + num(static_cast<double>(total.edited) /
                                                                     static_cast<double>(total.eligible), 4);
    }
  }
  return detail;
}

std::string edit_distance_property() {
  std::mt19937_64 gen(223);
  std::size_t edited = 0;
  for (int i = 0; i < 1000; ++i) {
    auto ex = support::random_example(gen, "t" + std::to_string(i));
    ex.tokens.push_back("caf\xC3\xA9");
    auto out = perturb_char_typos(ex, make_spec(PerturbKind::CharTypos, 1.0, gen()));
    require(out.example.tokens.size() == ex.tokens.size(), "token count changed");
    std::size_t changed = 0;
    for (std::size_t t = 0; t < ex.tokens.size(); ++t) {
      if (out.example.tokens[t] == ex.tokens[t]) continue;
      const auto d = oracle::levenshtein(ex.tokens[t], out.example.tokens[t]);
      require(d == 1, ex.tokens[t] + " -> " + out.example.tokens[t] + " has distance " + std::to_string(d));
      ++edited;
      ++changed;
    }
    require(changed == out.report.edited, "report counts " + std::to_string(out.report.edited) + " edits, saw " +
                                              std::to_string(changed));
  }
  require(edited > 5000, "only " + std::to_string(edited) + " edited tokens");
  return std::to_string(edited) + " edited tokens, all at distance 1";
}

std::string span_remap_equivalence() {
  PerturbAssets assets;
  assets.homophones = unique_token_lexicon(12);
  std::vector<std::string> vocab;
  for (int i = 0; i < 20; ++i) vocab.push_back("v" + std::to_string(i));
  assets.vocabulary = std::make_shared<const InsertVocabulary>(InsertVocabulary::from_words(vocab));
  std::mt19937_64 gen(227);
  for (auto kind : {PerturbKind::WordDelete, PerturbKind::WordInsert, PerturbKind::WordHomophone}) {
    for (int i = 0; i < 1000; ++i) {
      auto ex = support::random_example(gen, "m" + std::to_string(i), true);
      const double p = static_cast<double>(gen() % 101) / 100.0;
      auto out = apply_perturbation(ex, make_spec(kind, p, gen(), assets));
      // Homophone replacement keeps every position, so survivors are tracked by index.
      const auto after = kind == PerturbKind::WordHomophone ? ex.tokens : out.example.tokens;
      require(out.example.tokens.size() == after.size(), "token count changed");
      require(as_oracle(out.example.spans) == oracle::remap_by_survivors(ex.tokens, as_oracle(ex.spans), after),
              std::string(kind_name(kind)) + " example " + std::to_string(i));
      validate_example(out.example);
    }
  }
  return "3 operators x 1000 pairs";
}

std::string bio_round_trip() {
  const std::vector<std::string> alphabet = {"O", "B-a", "I-a", "B-b", "I-b"};
  std::size_t checked = 0;
  for (std::size_t n = 0; n <= 6; ++n) {
    std::vector<std::size_t> digits(n, 0);
    while (true) {
      std::vector<std::string> tags;
      for (auto d : digits) tags.push_back(alphabet[d]);
      require(spans_to_bio(bio_to_spans(tags).spans, n) == oracle::canonical_bio(tags), "sequence of length " +
                                                                                         std::to_string(n));
      ++checked;
      std::size_t i = 0;
      while (i < n && ++digits[i] == alphabet.size()) digits[i++] = 0;
      if (i == n) break;
    }
  }
  std::mt19937_64 gen(229);
  for (int trial = 0; trial < 5000; ++trial) {
    auto ex = support::random_example(gen, "r", false, 10);
    const auto back = bio_to_spans(spans_to_bio(ex.spans, ex.tokens.size()));
    require(back.spans == ex.spans && back.repairs == 0, "random trial " + std::to_string(trial));
  }
  return std::to_string(checked) + " exhaustive sequences, 5000 random";
}

std::string retrieval_correctness() {
  std::mt19937_64 gen(233);
  std::vector<LabeledExample> pool;
  for (int i = 0; i < 950; ++i) pool.push_back(support::random_example(gen, "p" + std::to_string(1000 + i)));
  for (int i = 0; i < 50; ++i) {
    auto dup = pool[static_cast<std::size_t>(i)];
    dup.id = "p0" + std::to_string(i);
    pool.push_back(dup);
  }
  std::vector<const LabeledExample*> cands;
  for (const auto& ex : pool) cands.push_back(&ex);
  TrigramEmbedder e;
  for (int q = 0; q < 20; ++q) {
    const auto query = support::random_example(gen, "q");
    std::vector<double> scores;
    std::vector<std::string> ids;
    const auto qv = e.embed_one(query.utterance());
    for (const auto* c : cands) {
      scores.push_back(cosine(qv, e.embed_one(c->utterance())));
      ids.push_back(c->id);
    }
    auto shuffled = cands;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    for (std::size_t k : {1u, 5u, 10u}) {
      const auto expected = oracle::top_k_by_full_sort(scores, ids, k);
      const auto got = rank_by_similarity(query, cands, k, e);
      const auto again = rank_by_similarity(query, shuffled, k, e);
      require(got.size() == k && again.size() == k, "wrong size for k=" + std::to_string(k));
      for (std::size_t i = 0; i < k; ++i) {
        require(got[i].example->id == ids[expected[i]], "query " + std::to_string(q) + " k=" + std::to_string(k));
        require(again[i].example->id == got[i].example->id, "order dependence at query " + std::to_string(q));
      }
    }
  }
  return std::to_string(cands.size()) + " candidates, 20 queries, k in {1, 5, 10}";
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = oracle::read_file(e.path());
  return files;
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != 0) throw Violation{args[0] + " exited " + std::to_string(code) + ": " + err.str()};
  return code;
}

std::string determinism() {
  const auto dir = support::scratch("acceptance-determinism");
  const auto src = support::source_dir();
  const std::vector<std::string> augment = {"augment", "--in", (src / "data/train.jsonl").string(), "--out",
                                            (dir / "aug.jsonl").string(), "--kind", "composite", "--members",
                                            "word_homophone,char_typos", "--p", "0.4", "--seed", "9",
                                            "--homophones", (src / "assets/homophones.tsv").string()};
  cli(augment);
  const auto aug1 = oracle::read_file(dir / "aug.jsonl");
  cli(augment);
  require(!aug1.empty() && oracle::read_file(dir / "aug.jsonl") == aug1, "augment output differs");

  auto text = oracle::read_file(src / "configs" / "mixed.yaml");
  for (std::size_t pos; (pos = text.find("../")) != std::string::npos;) text.replace(pos, 3, src.string() + "/");
  std::ofstream(dir / "mixed.yaml", std::ios::binary) << text;
  const std::vector<std::string> eval = {"eval", "--config", (dir / "mixed.yaml").string(), "--out",
                                         (dir / "run").string()};
  cli(eval);
  const auto run1 = snapshot(dir / "run");
  cli(eval);
  require(snapshot(dir / "run") == run1, "eval outputs differ");
  return "augment 1 file, eval " + std::to_string(run1.size()) + " files identical";
}

std::string composite_semantics() {
  PerturbAssets assets;
  assets.homophones = unique_token_lexicon(12);
  assets.irrelevant = std::make_shared<const SentencePool>(SentencePool::from_lines({"w3 w4 filler", "noise here"}));
  assets.vocabulary = std::make_shared<const InsertVocabulary>(InsertVocabulary::from_words({"v1", "v2", "v3"}));
  const std::vector<PerturbKind> kinds = {PerturbKind::CharTypos, PerturbKind::WordHomophone, PerturbKind::WordDelete,
                                          PerturbKind::WordInsert, PerturbKind::SentenceAppendIrr};
  auto level = [](PerturbKind k) {
    return k == PerturbKind::SentenceAppendIrr || k == PerturbKind::SentenceParaphrase ? 0
           : k == PerturbKind::CharTypos                                                ? 2
                                                                                        : 1;
  };
  std::mt19937_64 gen(239);
  for (int i = 0; i < 1000; ++i) {
    const auto ex = support::random_example(gen, "c" + std::to_string(i), true);
    std::vector<PerturbationSpec> members;
    const std::size_t m = 1 + gen() % 3;
    for (std::size_t j = 0; j < m; ++j)
      members.push_back(make_spec(kinds[gen() % kinds.size()], static_cast<double>(gen() % 101) / 100.0, gen(), assets));
    auto ordered = members;
    std::stable_sort(ordered.begin(), ordered.end(),
                     [&](const auto& a, const auto& b) { return level(a.kind) < level(b.kind); });
    LabeledExample expected = ex;
    for (const auto& s : ordered) expected = apply_perturbation(expected, s).example;
    require(apply_composite(ex, compose(members)).example == expected, "example " + std::to_string(i));
  }
  return "1000 random composites";
}

std::string report_fidelity() {
  const std::vector<std::string> table1 = {"Clean", "Typos", "Speech", "Paraphrase", "Simplification", "Verbose",
                                           "Overall"};
  const std::vector<std::string> table3 = {"Clean",   "Typos",   "Speech",      "AppendIrr", "Spe+Typ",
                                           "Spe+App", "Ent+App", "Spe+App+Typ", "Overall"};
  ReportOptions opts;
  opts.baseline = "ChatGPT";
  const auto rep = render_report({report_row("ChatGPT", fixtures::fixture_result(fixtures::chatgpt_counts())),
                                  report_row("+Instance", fixtures::fixture_result(fixtures::instance_counts()))},
                                 opts);
  require(rep.columns == table1, "single-perturbation columns differ");
  require(rep.cells[1][1] == "65.04(+24.3)", "Typos cell is " + rep.cells[1][1]);

  RunOptions quiet;
  quiet.write_outputs = false;
  const auto mixed = execute_run(bundled("mixed"), prepare_inputs(bundled("mixed")), quiet);
  const auto rep3 = render_report({report_row("mixed", mixed.result)});
  require(rep3.columns == table3, "mixed-perturbation columns differ");
  for (const auto& cell : rep3.cells[0]) require(cell != "-", "mixed run left an empty column");
  return "7 and 9 columns, Typos " + rep.cells[1][1];
}

// Model-style variants of an entity listing; none may change the parse.
std::string fuzz(const std::string& rendered, std::mt19937_64& gen) {
  std::string out;
  std::size_t n = 0, start = 0;
  while (start < rendered.size()) {
    auto nl = rendered.find('\n', start);
    std::string line = rendered.substr(start, nl - start);
    start = nl == std::string::npos ? rendered.size() : nl + 1;
    ++n;
    switch (gen() % 5) {
      case 0: line = std::to_string(n) + ". " + line; break;
      case 1: line = std::to_string(n) + ") " + line; break;
      case 2: line = "* " + line; break;
      case 3: line = "\t" + line + "   "; break;
      default: break;
    }
    if (gen() % 2) line.pop_back();
    out += std::string(gen() % 4, ' ') + line + (gen() % 3 == 0 ? "\r\n\n" : "\n");
  }
  return out;
}

std::string parser_round_trip() {
  std::mt19937_64 gen(241);
  const auto labels = support::labels();
  std::size_t pairs = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto ex = support::random_example(gen, "e" + std::to_string(i));
    const auto rendered = render_entity_lines(surface_pairs(ex));
    const auto pred = parse_predictions(rendered, labels);
    require(pred.pairs == gold_pairs(ex), "example " + std::to_string(i) + " did not round trip");
    for (int v = 0; v < 3; ++v)
      require(parse_predictions(fuzz(rendered, gen), labels).pairs == pred.pairs,
              "fuzzed variant of example " + std::to_string(i));
    pairs += pred.pairs.size();
  }
  return "1000 examples, " + std::to_string(pairs) + " pairs, 3000 fuzzed variants";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<std::string()>>> criteria = {
      {"oracle end-to-end", oracle_end_to_end},
      {"noisy-oracle calibration", noisy_oracle_calibration},
      {"perturbation rate", perturbation_rate},
      {"edit-distance property", edit_distance_property},
      {"span-remap equivalence", span_remap_equivalence},
      {"BIO round trip", bio_round_trip},
      {"retrieval correctness", retrieval_correctness},
      {"determinism", determinism},
      {"composite semantics", composite_semantics},
      {"report fidelity", report_fidelity},
      {"parser round trip", parser_round_trip},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    try {
      const auto detail = check();
      std::cout << "PASS " << name << ": " << detail << "\n";
    } catch (const Violation& v) {
      ++failed;
      std::cout << "FAIL " << name << ": " << v.what << "\n";
    } catch (const std::exception& e) {
      ++failed;
      std::cout << "FAIL " << name << ": " << e.what() << "\n";
    }
    std::cout.flush();
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed\n";
  return failed;
}
