#pragma once

// Task demonstrations: entity-oriented ("e" is l) and instance-oriented
// (full utterance plus its entity list), chosen at random or by embedding
// similarity to the test utterance.

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "slotnoise/corpus.hpp"
#include "slotnoise/perturb.hpp"
#include "slotnoise/pools.hpp"
#include "slotnoise/util.hpp"

namespace slotnoise {

// ---- embeddings ----

// Unit-length vector, or all zeros for empty text.
struct EmbeddingVector {
  std::vector<double> values;

  double norm() const {
    double s = 0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
  }

  void normalize() {
    const double n = norm();
    if (n > 0)
      for (double& v : values) v /= n;
  }
};

inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  const std::size_t n = std::min(a.values.size(), b.values.size());
  double dot = 0;
  for (std::size_t i = 0; i < n; ++i) dot += a.values[i] * b.values[i];
  const double na = a.norm(), nb = b.norm();
  if (na == 0 || nb == 0) return 0.0;
  return dot / (na * nb);
}

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) = 0;
  virtual std::string name() const = 0;

  EmbeddingVector embed(const std::string& text) { return embed_batch({text}).front(); }
};

// Hashed character-trigram term frequencies, L2-normalized.
class TrigramEmbedder final : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDefaultDim = 256;

  explicit TrigramEmbedder(std::size_t dim = kDefaultDim) : dim_(dim) {}

  // Trigrams of the ASCII-lowercased bytes; a text shorter than three bytes
  // is a single gram.
  static std::vector<std::string> trigrams(std::string_view text) {
    const std::string lower = to_lower(text);
    std::vector<std::string> out;
    if (lower.empty()) return out;
    if (lower.size() < 3) return {lower};
    for (std::size_t i = 0; i + 3 <= lower.size(); ++i) out.push_back(lower.substr(i, 3));
    return out;
  }

  std::size_t bucket(std::string_view gram) const { return fnv1a64(gram) % dim_; }

  EmbeddingVector embed_one(std::string_view text) const {
    EmbeddingVector v;
    v.values.assign(dim_, 0.0);
    for (const auto& g : trigrams(text)) v.values[bucket(g)] += 1.0;
    v.normalize();
    return v;
  }

  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
  }

  std::string name() const override { return "trigram-" + std::to_string(dim_); }

 private:
  std::size_t dim_;
};

// POST {"texts": [str]} -> {"vectors": [[float]]}
class RemoteEmbedder final : public EmbeddingProvider {
 public:
  explicit RemoteEmbedder(std::string url, int timeout_s = 60) : url_(std::move(url)), timeout_s_(timeout_s) {}

  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
    auto [base, path] = HttpParaphraser::split_url(url_);
    httplib::Client cli(base);
    cli.set_connection_timeout(timeout_s_);
    cli.set_read_timeout(timeout_s_);
    auto res = cli.Post(path, nlohmann::json{{"texts", texts}}.dump(), "application/json");
    if (!res) throw ProviderError(url_, "embedding provider unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200) {
      throw ProviderError(url_, "embedding provider returned HTTP " + std::to_string(res->status), res->status);
    }
    std::vector<EmbeddingVector> out;
    try {
      auto vectors = nlohmann::json::parse(res->body).at("vectors");
      for (const auto& v : vectors) {
        EmbeddingVector e{v.get<std::vector<double>>()};
        e.normalize();
        out.push_back(std::move(e));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(url_, std::string("bad embedding response: ") + e.what(), res->status);
    }
    if (out.size() != texts.size()) throw ProviderError(url_, "embedding count does not match request");
    return out;
  }

  std::string name() const override { return url_; }

 private:
  std::string url_;
  int timeout_s_;
};

// Memoizes another provider by text. Thread-safe.
class CachedEmbedder final : public EmbeddingProvider {
 public:
  explicit CachedEmbedder(std::shared_ptr<EmbeddingProvider> inner) : inner_(std::move(inner)) {}

  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
    std::vector<std::string> missing;
    {
      std::lock_guard lock(mu_);
      for (const auto& t : texts)
        if (!cache_.count(t)) missing.push_back(t);
    }
    if (!missing.empty()) {
      std::sort(missing.begin(), missing.end());
      missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
      auto vecs = inner_->embed_batch(missing);
      std::lock_guard lock(mu_);
      for (std::size_t i = 0; i < missing.size(); ++i) cache_.emplace(missing[i], std::move(vecs[i]));
    }
    std::lock_guard lock(mu_);
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(cache_.at(t));
    return out;
  }

  std::string name() const override { return inner_->name(); }

 private:
  std::shared_ptr<EmbeddingProvider> inner_;
  std::mutex mu_;
  std::unordered_map<std::string, EmbeddingVector> cache_;
};

inline std::shared_ptr<EmbeddingProvider> make_embedding_provider(const std::string& name) {
  if (name.empty() || name == "trigram" || name == "local") return std::make_shared<TrigramEmbedder>();
  if (name.rfind("http://", 0) == 0 || name.rfind("https://", 0) == 0) {
    return std::make_shared<RemoteEmbedder>(name);
  }
  throw ConfigError("unknown embedding provider '" + name + "'");
}

inline EmbeddingVector embed(const std::string& text, EmbeddingProvider& provider) {
  return provider.embed(text);
}

// ---- ranking ----

struct ScoredExample {
  const LabeledExample* example = nullptr;
  double score = 0.0;
};

// Descending cosine to the query utterance; ties by ascending id. Returns
// min(k, |candidates|) entries.
inline std::vector<ScoredExample> rank_by_similarity(const LabeledExample& query,
                                                     const std::vector<const LabeledExample*>& candidates,
                                                     std::size_t k, EmbeddingProvider& provider) {
  std::vector<std::string> texts;
  texts.reserve(candidates.size() + 1);
  texts.push_back(query.utterance());
  for (const auto* c : candidates) texts.push_back(c->utterance());
  auto vecs = provider.embed_batch(texts);

  std::vector<ScoredExample> scored(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    scored[i] = {candidates[i], cosine(vecs[0], vecs[i + 1])};
  }
  auto before = [](const ScoredExample& a, const ScoredExample& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.example->id < b.example->id;
  };
  const std::size_t top = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(top), scored.end(), before);
  scored.resize(top);
  return scored;
}

// ---- demonstrations ----

enum class DemoMode { entity, instance };
enum class DemoStrategy { random, retrieve };

inline DemoMode parse_demo_mode(const std::string& s) {
  const auto v = to_lower(s);
  if (v == "entity") return DemoMode::entity;
  if (v == "instance") return DemoMode::instance;
  throw ConfigError("unknown demonstration mode '" + s + "' (expected entity or instance)");
}

inline DemoStrategy parse_demo_strategy(const std::string& s) {
  const auto v = to_lower(s);
  if (v == "random") return DemoStrategy::random;
  if (v == "retrieve" || v == "retrieval" || v == "similarity") return DemoStrategy::retrieve;
  throw ConfigError("unknown demonstration strategy '" + s + "' (expected random or retrieve)");
}

inline std::string demo_mode_name(DemoMode m) { return m == DemoMode::entity ? "entity" : "instance"; }
inline std::string demo_strategy_name(DemoStrategy s) { return s == DemoStrategy::random ? "random" : "retrieve"; }

struct DemoItem {
  std::string rendered;  // newline-terminated
  std::vector<std::string> source_ids;
};

struct DemonstrationSet {
  DemoMode mode = DemoMode::entity;
  std::vector<DemoItem> items;
  PoolLabel pool_label = PoolLabel::clean;
  DemoStrategy strategy = DemoStrategy::random;
  std::size_t k = 0;            // items produced
  std::size_t requested_k = 0;  // instance mode: k asked for

  bool empty() const { return items.empty(); }

  std::string text() const {
    std::string out;
    for (const auto& it : items) out += it.rendered;
    return out;
  }
};

// "e" is l
inline std::string render_entity_clause(const std::string& surface, const std::string& label) {
  return "\"" + surface + "\" is " + label;
}

inline std::string render_entity_demo(const std::string& surface, const std::string& label) {
  return render_entity_clause(surface, label) + ".\n";
}

inline std::string render_instance_demo(const LabeledExample& ex) {
  std::string out = "Sentence: " + ex.utterance() + "\nEntities: ";
  if (ex.spans.empty()) {
    out += "none";
  } else {
    for (std::size_t i = 0; i < ex.spans.size(); ++i) {
      if (i > 0) out += "; ";
      out += render_entity_clause(ex.surface(ex.spans[i]), ex.spans[i].slot_type);
    }
  }
  out += "\n";
  return out;
}

// One entity per label, in label order. Random picks uniformly over every
// (example, span) of that type; retrieve takes the first span of that type
// in the most similar example that has one.
inline DemonstrationSet build_entity_demos(const LabeledExample& input, const DataPool& pool, PoolLabel pool_label,
                                           const LabelSet& labels, DemoStrategy strategy, std::uint64_t seed,
                                           EmbeddingProvider* provider = nullptr) {
  DemonstrationSet out;
  out.mode = DemoMode::entity;
  out.pool_label = pool_label;
  out.strategy = strategy;
  const auto candidates = pool.view(pool_label);

  std::vector<std::string> unsupported;
  if (strategy == DemoStrategy::random) {
    Rng rng(derive_seed(seed, input.id));
    for (const auto& label : labels.names()) {
      std::vector<std::pair<const LabeledExample*, const SlotSpan*>> options;
      for (const auto* ex : candidates)
        for (const auto& s : ex->spans)
          if (s.slot_type == label) options.emplace_back(ex, &s);
      if (options.empty()) {
        unsupported.push_back(label);
        continue;
      }
      const auto& [ex, span] = options[rng.below(options.size())];
      out.items.push_back({render_entity_demo(ex->surface(*span), label), {ex->id}});
    }
  } else {
    TrigramEmbedder local;
    EmbeddingProvider& emb = provider ? *provider : local;
    const auto ranked = rank_by_similarity(input, candidates, candidates.size(), emb);
    for (const auto& label : labels.names()) {
      bool found = false;
      for (const auto& r : ranked) {
        auto it = std::find_if(r.example->spans.begin(), r.example->spans.end(),
                               [&](const SlotSpan& s) { return s.slot_type == label; });
        if (it == r.example->spans.end()) continue;
        out.items.push_back({render_entity_demo(r.example->surface(*it), label), {r.example->id}});
        found = true;
        break;
      }
      if (!found) unsupported.push_back(label);
    }
  }
  if (!unsupported.empty()) {
    throw DataError("no " + pool_label_name(pool_label) + " pool example carries label(s): " +
                    join(unsupported, ", "));
  }
  out.k = out.items.size();
  out.requested_k = out.k;
  return out;
}

// k examples, uniformly without replacement or the top-k by similarity.
inline DemonstrationSet build_instance_demos(const LabeledExample& input, const DataPool& pool, PoolLabel pool_label,
                                             DemoStrategy strategy, std::size_t k, std::uint64_t seed,
                                             EmbeddingProvider* provider = nullptr) {
  DemonstrationSet out;
  out.mode = DemoMode::instance;
  out.pool_label = pool_label;
  out.strategy = strategy;
  out.requested_k = k;
  if (k == 0) return out;
  const auto candidates = pool.view(pool_label);
  if (candidates.empty()) throw DataError("the " + pool_label_name(pool_label) + " pool is empty");

  std::vector<const LabeledExample*> chosen;
  if (strategy == DemoStrategy::random) {
    Rng rng(derive_seed(seed, input.id));
    std::vector<std::size_t> idx(candidates.size());
    std::iota(idx.begin(), idx.end(), 0);
    const std::size_t take = std::min(k, idx.size());
    for (std::size_t i = 0; i < take; ++i) {
      std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
      chosen.push_back(candidates[idx[i]]);
    }
  } else {
    TrigramEmbedder local;
    EmbeddingProvider& emb = provider ? *provider : local;
    for (const auto& r : rank_by_similarity(input, candidates, k, emb)) chosen.push_back(r.example);
  }
  for (const auto* ex : chosen) out.items.push_back({render_instance_demo(*ex), {ex->id}});
  out.k = out.items.size();
  return out;
}

}  // namespace slotnoise
