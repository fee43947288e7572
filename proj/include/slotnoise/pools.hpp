#pragma once

// Candidate pools for demonstration selection: the clean training split, an
// augmented copy of it per perturbation spec, and their union.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "slotnoise/corpus.hpp"
#include "slotnoise/perturb.hpp"

namespace slotnoise {

enum class PoolLabel { clean, augment, mixed };

inline std::string pool_label_name(PoolLabel p) {
  switch (p) {
    case PoolLabel::clean: return "clean";
    case PoolLabel::augment: return "augment";
    case PoolLabel::mixed: return "mixed";
  }
  return "clean";
}

inline PoolLabel parse_pool_label(const std::string& raw) {
  const auto s = to_lower(raw);
  if (s == "clean") return PoolLabel::clean;
  if (s == "augment" || s == "augmented") return PoolLabel::augment;
  if (s == "mixed" || s == "clean+augment") return PoolLabel::mixed;
  throw ConfigError("unknown pool '" + raw + "' (expected clean, augment or mixed)");
}

// ---- asset resolution ----

// Loads perturbation assets by role, sharing one instance per source.
class AssetResolver {
 public:
  explicit AssetResolver(fs::path base_dir = {}) : base_(std::move(base_dir)) {}

  // Default insertion vocabulary when a spec names none (or names "clean").
  void set_default_vocabulary(std::shared_ptr<const InsertVocabulary> v) { vocab_ = std::move(v); }

  fs::path resolve_path(const std::string& p) const {
    fs::path path(p);
    return path.is_absolute() || base_.empty() ? path : base_ / path;
  }

  PerturbAssets resolve(const std::map<std::string, std::string>& sources, PerturbKind kind) {
    PerturbAssets a;
    a.sources = sources;
    auto get = [&](const std::string& role) -> std::optional<std::string> {
      auto it = sources.find(role);
      if (it == sources.end() || it->second.empty()) return std::nullopt;
      return it->second;
    };
    if (auto s = get("homophones")) {
      auto& slot = homophones_[*s];
      if (!slot) slot = std::make_shared<const HomophoneLexicon>(HomophoneLexicon::load(resolve_path(*s)));
      a.homophones = slot;
    }
    if (auto s = get("irrelevant")) {
      auto& slot = irrelevant_[*s];
      if (!slot) slot = std::make_shared<const SentencePool>(SentencePool::load(resolve_path(*s)));
      a.irrelevant = slot;
    }
    if (auto s = get("paraphrase")) {
      auto& slot = paraphrase_[*s];
      if (!slot) slot = make_paraphrase_provider(*s);
      a.paraphraser = slot;
    }
    auto vocab = get("vocabulary");
    if (vocab && *vocab != "clean") {
      auto& slot = vocabularies_[*vocab];
      if (!slot) {
        auto ds = load_dataset(resolve_path(*vocab));
        slot = std::make_shared<const InsertVocabulary>(InsertVocabulary::from_examples(ds.examples));
      }
      a.vocabulary = slot;
    } else if (kind == PerturbKind::WordInsert || kind == PerturbKind::Composite) {
      a.vocabulary = vocab_;
      if (a.vocabulary) a.sources["vocabulary"] = "clean";
    }
    return a;
  }

 private:
  fs::path base_;
  std::shared_ptr<const InsertVocabulary> vocab_;
  std::map<std::string, std::shared_ptr<const HomophoneLexicon>> homophones_;
  std::map<std::string, std::shared_ptr<const SentencePool>> irrelevant_;
  std::map<std::string, std::shared_ptr<ParaphraseProvider>> paraphrase_;
  std::map<std::string, std::shared_ptr<const InsertVocabulary>> vocabularies_;
};

// ---- spec serialization ----

inline nlohmann::json spec_to_json(const PerturbationSpec& spec) {
  nlohmann::json j;
  j["kind"] = kind_name(spec.kind);
  if (spec.is_composite()) {
    j["members"] = nlohmann::json::array();
    for (const auto& m : spec.members) j["members"].push_back(spec_to_json(m));
  } else {
    j["p"] = spec.p;
    j["seed"] = spec.seed;
    if (!spec.assets.sources.empty()) j["assets"] = spec.assets.sources;
  }
  return j;
}

// Member specs inherit `assets` and `seed` from the composite when absent.
inline PerturbationSpec spec_from_json(const nlohmann::json& j, AssetResolver& resolver,
                                       const nlohmann::json& inherited = {}) {
  PerturbationSpec s;
  s.kind = parse_kind(j.at("kind").get<std::string>());
  std::map<std::string, std::string> sources;
  if (inherited.is_object() && inherited.contains("assets")) {
    sources = inherited.at("assets").get<std::map<std::string, std::string>>();
  }
  if (j.contains("assets")) {
    for (auto& [k, v] : j.at("assets").get<std::map<std::string, std::string>>()) sources[k] = v;
  }
  if (inherited.is_object() && inherited.contains("seed")) s.seed = inherited.at("seed").get<std::uint64_t>();
  if (inherited.is_object() && inherited.contains("p")) s.p = inherited.at("p").get<double>();
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("p")) s.p = j.at("p").get<double>();

  if (s.is_composite()) {
    nlohmann::json ctx = {{"assets", sources}, {"seed", s.seed}, {"p", s.p}};
    std::vector<PerturbationSpec> members;
    for (std::size_t i = 0; i < j.at("members").size(); ++i) {
      const auto& mj = j.at("members")[i];
      nlohmann::json member = mj.is_string() ? nlohmann::json{{"kind", mj}} : mj;
      // Members share the composite seed unless given their own; offset them so
      // two members never draw the same stream.
      nlohmann::json member_ctx = ctx;
      member_ctx["seed"] = s.seed + i;
      members.push_back(spec_from_json(member, resolver, member_ctx));
    }
    return compose(std::move(members));
  }
  s.assets = resolver.resolve(sources, s.kind);
  s.validate();
  return s;
}

// ---- pool ----

struct DataPool {
  Dataset clean;
  Dataset augmented;
  std::vector<PerturbationSpec> specs;

  std::vector<const LabeledExample*> view(PoolLabel label) const {
    std::vector<const LabeledExample*> out;
    if (label != PoolLabel::augment)
      for (const auto& ex : clean.examples) out.push_back(&ex);
    if (label != PoolLabel::clean)
      for (const auto& ex : augmented.examples) out.push_back(&ex);
    return out;
  }

  std::size_t size(PoolLabel label) const {
    switch (label) {
      case PoolLabel::clean: return clean.size();
      case PoolLabel::augment: return augmented.size();
      case PoolLabel::mixed: return clean.size() + augmented.size();
    }
    return 0;
  }
};

// Augmented ids are "<clean id>~<spec name>", with ".<n>" appended for the
// n-th (n >= 2) spec of the same name.
inline std::string augmented_id(const std::string& id, const std::string& spec_name, std::size_t occurrence) {
  std::string out = id + "~" + spec_name;
  if (occurrence > 1) out += "." + std::to_string(occurrence);
  return out;
}

struct AugmentedIdParts {
  std::string base_id;
  std::string spec_name;
  std::size_t occurrence = 1;
};

inline std::optional<AugmentedIdParts> parse_augmented_id(const std::string& id) {
  auto tilde = id.rfind('~');
  if (tilde == std::string::npos) return std::nullopt;
  AugmentedIdParts parts;
  parts.base_id = id.substr(0, tilde);
  parts.spec_name = id.substr(tilde + 1);
  if (auto dot = parts.spec_name.rfind('.'); dot != std::string::npos) {
    const auto digits = parts.spec_name.substr(dot + 1);
    if (!digits.empty() && std::all_of(digits.begin(), digits.end(), ::isdigit)) {
      parts.occurrence = std::stoul(digits);
      parts.spec_name.resize(dot);
    }
  }
  return parts;
}

// One full perturbed copy of `clean` per spec. Word-insert specs without a
// vocabulary draw from the clean pool's unigrams.
inline DataPool build_pool(const Dataset& clean, std::vector<PerturbationSpec> specs, unsigned workers = 1) {
  DataPool pool;
  pool.clean = clean;
  pool.augmented.labels = clean.labels;
  pool.augmented.split_name = clean.split_name + "~augment";

  std::shared_ptr<const InsertVocabulary> vocab;
  auto fill_vocab = [&](PerturbationSpec& s) {
    if (s.kind != PerturbKind::WordInsert || s.assets.vocabulary) return;
    if (!vocab) vocab = std::make_shared<const InsertVocabulary>(InsertVocabulary::from_examples(clean.examples));
    s.assets.vocabulary = vocab;
    s.assets.sources["vocabulary"] = "clean";
  };
  for (auto& s : specs) {
    fill_vocab(s);
    for (auto& m : s.members) fill_vocab(m);
  }

  std::map<std::string, std::size_t> occurrences;
  for (const auto& spec : specs) {
    const std::string name = spec.name();
    const std::size_t occ = ++occurrences[name];
    auto perturbed = perturb_dataset(clean, spec, workers);
    for (auto& ex : perturbed.dataset.examples) {
      ex.id = augmented_id(ex.id, name, occ);
      pool.augmented.examples.push_back(std::move(ex));
    }
  }
  pool.specs = std::move(specs);
  validate_dataset(pool.augmented);
  return pool;
}

inline void save_pool(const DataPool& pool, const fs::path& dir) {
  fs::create_directories(dir);
  save_dataset(pool.clean, dir / "clean.jsonl");
  save_dataset(pool.augmented, dir / "augmented.jsonl");
  nlohmann::json manifest;
  manifest["labels"] = pool.clean.labels.names();
  manifest["clean_count"] = pool.clean.size();
  manifest["augmented_count"] = pool.augmented.size();
  manifest["specs"] = nlohmann::json::array();
  for (const auto& s : pool.specs) manifest["specs"].push_back(spec_to_json(s));
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << '\n';
}

// Specs are restored from the manifest with their assets resolved relative
// to `asset_base` (the pool directory when empty).
inline DataPool load_pool(const fs::path& dir, const fs::path& asset_base = {}) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("no manifest.json in pool directory " + dir.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError((dir / "manifest.json").string(), 1, e.what());
  }
  DataPool pool;
  pool.clean = load_dataset(dir / "clean.jsonl", DatasetFormat::jsonl_spans);
  pool.clean.labels = LabelSet(manifest.at("labels").get<std::vector<std::string>>());
  pool.augmented = load_dataset(dir / "augmented.jsonl", DatasetFormat::jsonl_spans);
  pool.augmented.labels = pool.clean.labels;
  validate_dataset(pool.clean);
  validate_dataset(pool.augmented);

  AssetResolver resolver(asset_base.empty() ? dir : asset_base);
  resolver.set_default_vocabulary(
      std::make_shared<const InsertVocabulary>(InsertVocabulary::from_examples(pool.clean.examples)));
  for (const auto& sj : manifest.at("specs")) pool.specs.push_back(spec_from_json(sj, resolver));
  return pool;
}

}  // namespace slotnoise
