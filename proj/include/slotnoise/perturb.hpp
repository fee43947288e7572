#pragma once

// Character, word and sentence level perturbations with span remapping.
//
// Every operator is a pure function of (example, spec): all randomness comes
// from spec.seed. Dataset-level application derives a per-example seed from
// (spec seed, example id), so output does not depend on iteration order.

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "slotnoise/corpus.hpp"
#include "slotnoise/error.hpp"
#include "slotnoise/util.hpp"

namespace slotnoise {

enum class PerturbKind {
  CharTypos,
  WordHomophone,
  WordDelete,
  WordInsert,
  SentenceAppendIrr,
  SentenceParaphrase,
  Composite,
};

inline std::string kind_name(PerturbKind k) {
  switch (k) {
    case PerturbKind::CharTypos: return "char_typos";
    case PerturbKind::WordHomophone: return "word_homophone";
    case PerturbKind::WordDelete: return "word_delete";
    case PerturbKind::WordInsert: return "word_insert";
    case PerturbKind::SentenceAppendIrr: return "append_irr";
    case PerturbKind::SentenceParaphrase: return "paraphrase";
    case PerturbKind::Composite: return "composite";
  }
  return "unknown";
}

// Accepts canonical names plus the short aliases used on the command line
// (typos, speech, appendirr, ...).
inline PerturbKind parse_kind(const std::string& raw) {
  const std::string name = to_lower(raw);
  static const std::map<std::string, PerturbKind> kNames = {
      {"char_typos", PerturbKind::CharTypos},       {"typos", PerturbKind::CharTypos},
      {"word_homophone", PerturbKind::WordHomophone}, {"homophone", PerturbKind::WordHomophone},
      {"speech", PerturbKind::WordHomophone},       {"word_delete", PerturbKind::WordDelete},
      {"delete", PerturbKind::WordDelete},          {"word_insert", PerturbKind::WordInsert},
      {"insert", PerturbKind::WordInsert},          {"append_irr", PerturbKind::SentenceAppendIrr},
      {"appendirr", PerturbKind::SentenceAppendIrr}, {"paraphrase", PerturbKind::SentenceParaphrase},
      {"composite", PerturbKind::Composite},
  };
  auto it = kNames.find(name);
  if (it == kNames.end()) throw ConfigError("unknown perturbation kind '" + raw + "'");
  return it->second;
}

// Application order inside a composite: sentence, then word, then char.
inline int kind_level(PerturbKind k) {
  switch (k) {
    case PerturbKind::SentenceAppendIrr:
    case PerturbKind::SentenceParaphrase: return 0;
    case PerturbKind::WordHomophone:
    case PerturbKind::WordDelete:
    case PerturbKind::WordInsert: return 1;
    case PerturbKind::CharTypos: return 2;
    case PerturbKind::Composite: break;
  }
  return -1;
}

// ---- assets ----

// word -> homophones. Keys are lowercase.
class HomophoneLexicon {
 public:
  void add(const std::string& word, const std::vector<std::string>& homophones) {
    const std::string key = to_lower(word);
    auto& list = entries_[key];
    for (const auto& h : homophones) {
      if (h.empty() || iequals(h, key) || std::any_of(h.begin(), h.end(), is_space)) continue;
      if (std::find(list.begin(), list.end(), h) == list.end()) list.push_back(h);
    }
    if (list.empty()) entries_.erase(key);
  }

  const std::vector<std::string>* find(const std::string& token) const {
    auto it = entries_.find(to_lower(token));
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return entries_.size(); }

  // Lines of "word<TAB>homophone1,homophone2".
  static HomophoneLexicon load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open homophone lexicon " + path.string());
    HomophoneLexicon lex;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty() || line[0] == '#') continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos) {
        throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                          ": expected 'word<TAB>homophone,...'");
      }
      std::vector<std::string> alts;
      std::stringstream ss(line.substr(tab + 1));
      std::string alt;
      while (std::getline(ss, alt, ',')) {
        auto t = std::string(trim(alt));
        if (!t.empty()) alts.push_back(t);
      }
      lex.add(std::string(trim(std::string_view(line).substr(0, tab))), alts);
    }
    return lex;
  }

 private:
  std::unordered_map<std::string, std::vector<std::string>> entries_;
};

// Irrelevant sentences for AppendIrr, one per line, stored tokenized.
struct SentencePool {
  std::vector<std::vector<std::string>> sentences;

  static SentencePool load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open sentence pool " + path.string());
    SentencePool pool;
    std::string line;
    while (std::getline(in, line)) {
      auto toks = split_whitespace(line);
      if (!toks.empty()) pool.sentences.push_back(std::move(toks));
    }
    return pool;
  }

  static SentencePool from_lines(const std::vector<std::string>& lines) {
    SentencePool pool;
    for (const auto& l : lines) {
      auto toks = split_whitespace(l);
      if (!toks.empty()) pool.sentences.push_back(std::move(toks));
    }
    return pool;
  }
};

// Unigram distribution over a corpus, for word insertion.
class InsertVocabulary {
 public:
  static InsertVocabulary from_examples(const std::vector<LabeledExample>& examples) {
    std::map<std::string, std::uint64_t> counts;
    for (const auto& ex : examples)
      for (const auto& t : ex.tokens) ++counts[t];
    InsertVocabulary v;
    std::uint64_t total = 0;
    for (const auto& [word, n] : counts) {
      total += n;
      v.words_.push_back(word);
      v.cumulative_.push_back(total);
    }
    return v;
  }

  static InsertVocabulary from_words(const std::vector<std::string>& words) {
    InsertVocabulary v;
    std::uint64_t total = 0;
    for (const auto& w : words) {
      v.words_.push_back(w);
      v.cumulative_.push_back(++total);
    }
    return v;
  }

  bool empty() const { return words_.empty(); }
  const std::vector<std::string>& words() const { return words_; }

  const std::string& draw(Rng& rng) const {
    const std::uint64_t r = rng.below(static_cast<std::size_t>(cumulative_.back()));
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
    return words_[static_cast<std::size_t>(it - cumulative_.begin())];
  }

 private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> cumulative_;
};

class ParaphraseProvider {
 public:
  virtual ~ParaphraseProvider() = default;
  virtual std::string rewrite(const std::string& text) = 0;
  virtual std::string name() const = 0;
};

class IdentityParaphraser final : public ParaphraseProvider {
 public:
  std::string rewrite(const std::string& text) override { return text; }
  std::string name() const override { return "identity"; }
};

// POST {"text": str} -> {"text": str}
class HttpParaphraser final : public ParaphraseProvider {
 public:
  explicit HttpParaphraser(std::string url, int timeout_s = 30)
      : url_(std::move(url)), timeout_s_(timeout_s) {}

  std::string rewrite(const std::string& text) override {
    auto [base, path] = split_url(url_);
    httplib::Client cli(base);
    cli.set_connection_timeout(timeout_s_);
    cli.set_read_timeout(timeout_s_);
    auto res = cli.Post(path, nlohmann::json{{"text", text}}.dump(), "application/json");
    if (!res) throw ProviderError(url_, "paraphrase provider unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200) {
      throw ProviderError(url_, "paraphrase provider returned HTTP " + std::to_string(res->status), res->status);
    }
    try {
      return nlohmann::json::parse(res->body).at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(url_, std::string("bad paraphrase response: ") + e.what(), res->status);
    }
  }

  std::string name() const override { return url_; }

  // "http://host:port/a/b" -> {"http://host:port", "/a/b"}
  static std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme = url.find("://");
    auto slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
  }

 private:
  std::string url_;
  int timeout_s_;
};

inline std::shared_ptr<ParaphraseProvider> make_paraphrase_provider(const std::string& name) {
  if (name.empty() || name == "identity") return std::make_shared<IdentityParaphraser>();
  if (name.rfind("http://", 0) == 0 || name.rfind("https://", 0) == 0) {
    return std::make_shared<HttpParaphraser>(name);
  }
  throw ConfigError("unknown paraphrase provider '" + name + "'");
}

struct PerturbAssets {
  std::shared_ptr<const HomophoneLexicon> homophones;
  std::shared_ptr<const SentencePool> irrelevant;
  std::shared_ptr<const InsertVocabulary> vocabulary;
  std::shared_ptr<ParaphraseProvider> paraphraser;
  // asset role -> source path or provider name, for manifests.
  std::map<std::string, std::string> sources;
};

// ---- spec ----

struct PerturbationSpec {
  PerturbKind kind = PerturbKind::CharTypos;
  double p = 0.1;
  std::uint64_t seed = 0;
  PerturbAssets assets;
  std::vector<PerturbationSpec> members;  // Composite only

  bool is_composite() const { return kind == PerturbKind::Composite; }

  void validate() const {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("probability p must be in [0,1], got " + std::to_string(p));
    if (is_composite()) {
      if (members.empty()) throw ConfigError("composite perturbation needs at least one member");
      for (const auto& m : members) {
        if (m.is_composite()) throw ConfigError("composite perturbations cannot be nested");
        m.validate();
      }
    } else if (!members.empty()) {
      throw ConfigError(kind_name(kind) + " spec cannot have members");
    }
  }

  // Members sorted into application order (stable within a level).
  std::vector<const PerturbationSpec*> canonical_members() const {
    std::vector<const PerturbationSpec*> out;
    for (const auto& m : members) out.push_back(&m);
    std::stable_sort(out.begin(), out.end(), [](const auto* a, const auto* b) {
      return kind_level(a->kind) < kind_level(b->kind);
    });
    return out;
  }

  // "char_typos", or "append_irr+word_homophone" for composites.
  std::string name() const {
    if (!is_composite()) return kind_name(kind);
    std::vector<std::string> names;
    for (const auto* m : canonical_members()) names.push_back(kind_name(m->kind));
    return join(names, "+");
  }
};

inline PerturbationSpec make_spec(PerturbKind kind, double p, std::uint64_t seed = 0,
                                  PerturbAssets assets = {}) {
  PerturbationSpec s;
  s.kind = kind;
  s.p = p;
  s.seed = seed;
  s.assets = std::move(assets);
  return s;
}

inline PerturbationSpec compose(std::vector<PerturbationSpec> specs) {
  PerturbationSpec c;
  c.kind = PerturbKind::Composite;
  c.members = std::move(specs);
  c.validate();
  if (!c.members.empty()) c.seed = c.members.front().seed;
  return c;
}

// Column name used in report tables: Typos, Speech, AppendIrr, and the
// abbreviated composites (Spe+Typ, Spe+App, Ent+App, Spe+App+Typ).
inline std::string column_name(const PerturbationSpec& spec) {
  auto single = [](PerturbKind k) -> std::string {
    switch (k) {
      case PerturbKind::CharTypos: return "Typos";
      case PerturbKind::WordHomophone: return "Speech";
      case PerturbKind::WordDelete: return "WordDelete";
      case PerturbKind::WordInsert: return "WordInsert";
      case PerturbKind::SentenceAppendIrr: return "AppendIrr";
      case PerturbKind::SentenceParaphrase: return "Paraphrase";
      case PerturbKind::Composite: break;
    }
    return "Composite";
  };
  if (!spec.is_composite()) return single(spec.kind);
  if (spec.members.size() == 1) return single(spec.members.front().kind);

  // Abbreviation and its position in the composite name.
  static const std::map<PerturbKind, std::pair<int, std::string>> kAbbrev = {
      {PerturbKind::WordHomophone, {0, "Spe"}}, {PerturbKind::WordDelete, {1, "Del"}},
      {PerturbKind::WordInsert, {2, "Ins"}},    {PerturbKind::SentenceAppendIrr, {3, "App"}},
      {PerturbKind::SentenceParaphrase, {4, "Par"}}, {PerturbKind::CharTypos, {5, "Typ"}},
  };
  std::vector<std::pair<int, std::string>> parts;
  for (const auto& m : spec.members) parts.push_back(kAbbrev.at(m.kind));
  std::sort(parts.begin(), parts.end());
  parts.erase(std::unique(parts.begin(), parts.end()), parts.end());
  std::vector<std::string> names;
  for (const auto& p : parts) names.push_back(p.second);
  std::string out = join(names, "+");
  // Typos + AppendIrr is headed "Ent+App" in the mixed-perturbation table.
  if (out == "App+Typ") return "Ent+App";
  return out;
}

// ---- report ----

struct PerturbationReport {
  std::size_t examples = 0;
  std::size_t eligible = 0;  // units that could be edited (tokens, gaps, utterances)
  std::size_t edited = 0;    // units actually edited
  std::size_t edited_chars = 0;
  std::size_t inserted_tokens = 0;
  std::size_t deleted_tokens = 0;
  std::size_t original_spans = 0;
  std::size_t dropped_spans = 0;
  std::size_t repaired_spans = 0;  // spans that survived deletion but shrank
  std::size_t rejected = 0;        // paraphrases passed through unchanged
  std::vector<std::string> notes;

  double realized_edit_rate() const {
    return eligible == 0 ? 0.0 : static_cast<double>(edited) / static_cast<double>(eligible);
  }

  PerturbationReport& operator+=(const PerturbationReport& o) {
    examples += o.examples;
    eligible += o.eligible;
    edited += o.edited;
    edited_chars += o.edited_chars;
    inserted_tokens += o.inserted_tokens;
    deleted_tokens += o.deleted_tokens;
    original_spans += o.original_spans;
    dropped_spans += o.dropped_spans;
    repaired_spans += o.repaired_spans;
    rejected += o.rejected;
    notes.insert(notes.end(), o.notes.begin(), o.notes.end());
    return *this;
  }

  std::string summary() const {
    std::ostringstream os;
    os << "examples=" << examples << " eligible=" << eligible << " edited=" << edited
       << " rate=" << format_fixed(realized_edit_rate(), 4) << " chars=" << edited_chars
       << " inserted=" << inserted_tokens << " deleted=" << deleted_tokens
       << " spans=" << original_spans << " dropped=" << dropped_spans
       << " shrunk=" << repaired_spans << " rejected=" << rejected;
    return os.str();
  }
};

struct Perturbed {
  LabeledExample example;
  PerturbationReport report;
};

namespace detail {

inline Perturbed start(const LabeledExample& ex, PerturbKind kind) {
  Perturbed out{ex, {}};
  out.report.examples = 1;
  out.report.original_spans = ex.spans.size();
  out.example.provenance.kinds.push_back(kind_name(kind));
  return out;
}

inline void require_kind(const PerturbationSpec& spec, PerturbKind kind) {
  if (spec.kind != kind) {
    throw ConfigError("expected a " + kind_name(kind) + " spec, got " + kind_name(spec.kind));
  }
  spec.validate();
}

inline char random_letter(Rng& rng) { return static_cast<char>('a' + rng.below(26)); }

}  // namespace detail

// ---- operators ----

// Each token is selected with probability p and gets exactly one character
// insert, delete or substitute. Single-character tokens are never deleted.
inline Perturbed perturb_char_typos(const LabeledExample& ex, const PerturbationSpec& spec) {
  detail::require_kind(spec, PerturbKind::CharTypos);
  Perturbed out = detail::start(ex, spec.kind);
  Rng rng(spec.seed);
  for (auto& token : out.example.tokens) {
    ++out.report.eligible;
    if (!rng.bernoulli(spec.p)) continue;
    auto chars = utf8_chars(token);
    const std::size_t n = chars.size();
    enum { kInsert, kSubstitute, kDelete };
    const std::size_t op = n == 1 ? rng.below(2) : rng.below(3);
    if (op == kInsert) {
      const std::size_t pos = rng.below(n + 1);
      chars.insert(chars.begin() + static_cast<std::ptrdiff_t>(pos), std::string(1, detail::random_letter(rng)));
    } else if (op == kSubstitute) {
      const std::size_t pos = rng.below(n);
      const std::string& old = chars[pos];
      char c;
      if (old.size() == 1 && old[0] >= 'a' && old[0] <= 'z') {
        // 25 letters other than the original.
        c = static_cast<char>('a' + rng.below(25));
        if (c >= old[0]) ++c;
      } else {
        c = detail::random_letter(rng);
      }
      chars[pos] = std::string(1, c);
    } else {
      chars.erase(chars.begin() + static_cast<std::ptrdiff_t>(rng.below(n)));
    }
    token = join(chars, "");
    ++out.report.edited;
    ++out.report.edited_chars;
  }
  return out;
}

// Tokens with a lexicon entry are replaced with probability p by a uniformly
// chosen homophone.
inline Perturbed perturb_word_homophone(const LabeledExample& ex, const PerturbationSpec& spec) {
  detail::require_kind(spec, PerturbKind::WordHomophone);
  if (!spec.assets.homophones) throw ConfigError("word_homophone requires a homophone lexicon");
  Perturbed out = detail::start(ex, spec.kind);
  Rng rng(spec.seed);
  for (auto& token : out.example.tokens) {
    const auto* alts = spec.assets.homophones->find(token);
    if (!alts) continue;
    ++out.report.eligible;
    if (!rng.bernoulli(spec.p)) continue;
    token = (*alts)[rng.below(alts->size())];
    ++out.report.edited;
  }
  return out;
}

// Each token is deleted with probability p; at least one token survives.
// Spans shrink to their surviving tokens and are dropped when none survive.
inline Perturbed perturb_word_delete(const LabeledExample& ex, const PerturbationSpec& spec) {
  detail::require_kind(spec, PerturbKind::WordDelete);
  Perturbed out = detail::start(ex, spec.kind);
  const std::size_t n = ex.tokens.size();
  if (n < 2) {
    out.report.notes.push_back(ex.id + ": single-token example left unchanged");
    return out;
  }
  Rng rng(spec.seed);
  std::vector<bool> keep(n);
  for (std::size_t i = 0; i < n; ++i) keep[i] = !rng.bernoulli(spec.p);
  out.report.eligible = n;
  if (std::none_of(keep.begin(), keep.end(), [](bool k) { return k; })) keep[rng.below(n)] = true;

  std::vector<std::optional<std::size_t>> new_index(n);
  out.example.tokens.clear();
  for (std::size_t i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    new_index[i] = out.example.tokens.size();
    out.example.tokens.push_back(ex.tokens[i]);
  }
  out.report.deleted_tokens = n - out.example.tokens.size();
  out.report.edited = out.report.deleted_tokens;

  out.example.spans.clear();
  for (const auto& s : ex.spans) {
    std::optional<std::size_t> first, last;
    for (std::size_t i = s.start; i <= s.end; ++i) {
      if (!new_index[i]) continue;
      if (!first) first = new_index[i];
      last = new_index[i];
    }
    if (!first) {
      ++out.report.dropped_spans;
      continue;
    }
    if (*last - *first + 1 < s.length()) ++out.report.repaired_spans;
    out.example.spans.push_back({*first, *last, s.slot_type});
  }
  return out;
}

// At every gap not strictly inside a span (including both ends) a vocabulary
// word is inserted with probability p.
inline Perturbed perturb_word_insert(const LabeledExample& ex, const PerturbationSpec& spec) {
  detail::require_kind(spec, PerturbKind::WordInsert);
  if (!spec.assets.vocabulary || spec.assets.vocabulary->empty()) {
    throw ConfigError("word_insert requires a non-empty insertion vocabulary");
  }
  Perturbed out = detail::start(ex, spec.kind);
  const std::size_t n = ex.tokens.size();
  // Gap g sits before token g; it is interior to s when s.start < g <= s.end.
  std::vector<bool> interior(n + 1, false);
  for (const auto& s : ex.spans)
    for (std::size_t g = s.start + 1; g <= s.end; ++g) interior[g] = true;

  Rng rng(spec.seed);
  std::vector<std::size_t> new_index(n);
  out.example.tokens.clear();
  for (std::size_t g = 0; g <= n; ++g) {
    if (!interior[g]) {
      ++out.report.eligible;
      if (rng.bernoulli(spec.p)) {
        out.example.tokens.push_back(spec.assets.vocabulary->draw(rng));
        ++out.report.edited;
        ++out.report.inserted_tokens;
      }
    }
    if (g < n) {
      new_index[g] = out.example.tokens.size();
      out.example.tokens.push_back(ex.tokens[g]);
    }
  }
  for (auto& s : out.example.spans) {
    s.start = new_index[s.start];
    s.end = new_index[s.end];
  }
  return out;
}

// With probability p, appends one sentence from the irrelevant pool.
inline Perturbed perturb_append_irr(const LabeledExample& ex, const PerturbationSpec& spec) {
  detail::require_kind(spec, PerturbKind::SentenceAppendIrr);
  if (!spec.assets.irrelevant || spec.assets.irrelevant->sentences.empty()) {
    throw ConfigError("append_irr requires a non-empty irrelevant-sentence pool");
  }
  Perturbed out = detail::start(ex, spec.kind);
  Rng rng(spec.seed);
  out.report.eligible = 1;
  if (rng.bernoulli(spec.p)) {
    const auto& pool = spec.assets.irrelevant->sentences;
    const auto& sentence = pool[rng.below(pool.size())];
    out.example.tokens.insert(out.example.tokens.end(), sentence.begin(), sentence.end());
    out.report.edited = 1;
    out.report.inserted_tokens = sentence.size();
  }
  return out;
}

// Relocates each gold surface in `tokens` by leftmost case-insensitive match,
// skipping positions already claimed by an earlier span. Returns nullopt when
// some surface cannot be found.
inline std::optional<std::vector<SlotSpan>> relocate_spans(const LabeledExample& ex,
                                                           const std::vector<std::string>& tokens) {
  std::vector<bool> claimed(tokens.size(), false);
  std::vector<SlotSpan> out;
  for (const auto& s : ex.spans) {
    const std::size_t len = s.length();
    bool placed = false;
    for (std::size_t i = 0; i + len <= tokens.size() && !placed; ++i) {
      bool ok = true;
      for (std::size_t k = 0; k < len && ok; ++k) {
        ok = !claimed[i + k] && iequals(tokens[i + k], ex.tokens[s.start + k]);
      }
      if (!ok) continue;
      for (std::size_t k = 0; k < len; ++k) claimed[i + k] = true;
      out.push_back({i, i + len - 1, s.slot_type});
      placed = true;
    }
    if (!placed) return std::nullopt;
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  return out;
}

// With probability p, the utterance is rewritten by the provider. A rewrite
// that loses any gold surface is rejected and the example passes through.
inline Perturbed perturb_paraphrase(const LabeledExample& ex, const PerturbationSpec& spec,
                                    ParaphraseProvider& provider) {
  detail::require_kind(spec, PerturbKind::SentenceParaphrase);
  Perturbed out = detail::start(ex, spec.kind);
  Rng rng(spec.seed);
  out.report.eligible = 1;
  if (!rng.bernoulli(spec.p)) return out;

  const std::string original = ex.utterance();
  const std::string rewritten = provider.rewrite(original);
  if (rewritten == original) return out;

  auto tokens = split_whitespace(rewritten);
  std::optional<std::vector<SlotSpan>> spans;
  if (!tokens.empty()) spans = relocate_spans(ex, tokens);
  if (!spans) {
    ++out.report.rejected;
    out.report.notes.push_back(ex.id + ": paraphrase rejected, gold entity not found verbatim");
    return out;
  }
  out.example.tokens = std::move(tokens);
  out.example.spans = std::move(*spans);
  out.report.edited = 1;
  return out;
}

inline Perturbed perturb_paraphrase(const LabeledExample& ex, const PerturbationSpec& spec) {
  if (spec.assets.paraphraser) return perturb_paraphrase(ex, spec, *spec.assets.paraphraser);
  IdentityParaphraser identity;
  return perturb_paraphrase(ex, spec, identity);
}

inline Perturbed apply_perturbation(const LabeledExample& ex, const PerturbationSpec& spec);

// Members run sentence -> word -> char regardless of their listed order; the
// applied order is what ends up in the provenance.
inline Perturbed apply_composite(const LabeledExample& ex, const PerturbationSpec& composite) {
  if (!composite.is_composite()) throw ConfigError("apply_composite needs a composite spec");
  composite.validate();
  Perturbed out{ex, {}};
  for (const auto* member : composite.canonical_members()) {
    Perturbed step = apply_perturbation(out.example, *member);
    out.example = std::move(step.example);
    out.report += step.report;
  }
  out.report.examples = 1;
  out.report.original_spans = ex.spans.size();
  return out;
}

inline Perturbed apply_perturbation(const LabeledExample& ex, const PerturbationSpec& spec) {
  switch (spec.kind) {
    case PerturbKind::CharTypos: return perturb_char_typos(ex, spec);
    case PerturbKind::WordHomophone: return perturb_word_homophone(ex, spec);
    case PerturbKind::WordDelete: return perturb_word_delete(ex, spec);
    case PerturbKind::WordInsert: return perturb_word_insert(ex, spec);
    case PerturbKind::SentenceAppendIrr: return perturb_append_irr(ex, spec);
    case PerturbKind::SentenceParaphrase: return perturb_paraphrase(ex, spec);
    case PerturbKind::Composite: return apply_composite(ex, spec);
  }
  throw ConfigError("unhandled perturbation kind");
}

// Copy of `spec` whose seeds (members included) are keyed to one example id.
inline PerturbationSpec spec_for_example(const PerturbationSpec& spec, const std::string& id) {
  PerturbationSpec s = spec;
  s.seed = derive_seed(spec.seed, id);
  for (auto& m : s.members) m.seed = derive_seed(m.seed, id);
  return s;
}

struct PerturbedDataset {
  Dataset dataset;
  PerturbationReport report;
};

inline PerturbedDataset perturb_dataset(const Dataset& ds, const PerturbationSpec& spec,
                                        unsigned workers = 1) {
  spec.validate();
  std::vector<Perturbed> results(ds.examples.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < ds.examples.size(); i += stride) {
      const auto& ex = ds.examples[i];
      results[i] = apply_perturbation(ex, spec_for_example(spec, ex.id));
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(ds.examples.size())));
  if (workers <= 1) {
    work(0, 1);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            work(w, workers);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  PerturbedDataset out;
  out.dataset.labels = ds.labels;
  out.dataset.split_name = ds.split_name + "~" + spec.name();
  out.dataset.examples.reserve(results.size());
  for (auto& r : results) {
    validate_example(r.example, &ds.labels);
    out.report += r.report;
    out.dataset.examples.push_back(std::move(r.example));
  }
  return out;
}

}  // namespace slotnoise
