#pragma once

// Model invocation: a remote chat-completion client and deterministic mocks,
// plus an append-only response cache that makes runs resumable.

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "slotnoise/corpus.hpp"
#include "slotnoise/demos.hpp"
#include "slotnoise/error.hpp"
#include "slotnoise/perturb.hpp"
#include "slotnoise/util.hpp"

namespace slotnoise {

enum class ModelKind { remote, echo_gold, fixed, noisy_oracle };

inline std::string model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::remote: return "remote";
    case ModelKind::echo_gold: return "echo_gold";
    case ModelKind::fixed: return "fixed";
    case ModelKind::noisy_oracle: return "noisy_oracle";
  }
  return "remote";
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "remote") return ModelKind::remote;
  if (s == "echo_gold") return ModelKind::echo_gold;
  if (s == "fixed") return ModelKind::fixed;
  if (s == "noisy_oracle") return ModelKind::noisy_oracle;
  throw ConfigError("unknown model kind '" + s + "' (expected remote, echo_gold, fixed or noisy_oracle)");
}

struct ModelConfig {
  ModelKind kind = ModelKind::echo_gold;
  // remote
  std::string endpoint = "https://api.openai.com/v1";
  std::string model = "gpt-3.5-turbo";
  std::string api_key_env = "OPENAI_API_KEY";
  double temperature = 0.0;
  unsigned max_in_flight = 4;
  double timeout_s = 60.0;
  unsigned max_attempts = 5;
  double backoff_initial_s = 1.0;
  // noisy_oracle
  double error_rate = 0.0;
  std::uint64_t seed = 0;
  // fixed
  std::string fixed_response;

  void validate() const {
    if (!(error_rate >= 0.0 && error_rate <= 1.0)) throw ConfigError("error_rate must be in [0,1]");
    if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
    if (timeout_s <= 0) throw ConfigError("timeout must be positive");
  }

  // Model name as it enters the cache key.
  std::string identity() const {
    switch (kind) {
      case ModelKind::remote: return model;
      case ModelKind::echo_gold: return "mock:echo_gold";
      case ModelKind::fixed: return "mock:fixed:" + sha256_hex(fixed_response).substr(0, 16);
      case ModelKind::noisy_oracle:
        return "mock:noisy_oracle:" + format_fixed(error_rate, 6) + ":" + std::to_string(seed);
    }
    return model;
  }
};

// What mocks may peek at: the gold example and the label inventory.
struct SideChannel {
  const LabeledExample* gold = nullptr;
  const LabelSet* labels = nullptr;
};

class ModelClient {
 public:
  virtual ~ModelClient() = default;
  virtual std::string complete(const std::string& prompt, const SideChannel& side) = 0;
};

// One `"e" is l.` line per span.
inline std::string render_entity_lines(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::string out;
  for (const auto& [surface, label] : pairs) out += render_entity_demo(surface, label);
  return out;
}

inline std::vector<std::pair<std::string, std::string>> surface_pairs(const LabeledExample& ex) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : ex.spans) out.emplace_back(ex.surface(s), s.slot_type);
  return out;
}

namespace detail {

inline const LabeledExample& require_gold(const SideChannel& side, const char* who) {
  if (!side.gold) throw ConfigError(std::string(who) + " client needs the gold example side channel");
  return *side.gold;
}

}  // namespace detail

class EchoGoldClient final : public ModelClient {
 public:
  std::string complete(const std::string&, const SideChannel& side) override {
    return render_entity_lines(surface_pairs(detail::require_gold(side, "echo_gold")));
  }
};

class FixedClient final : public ModelClient {
 public:
  explicit FixedClient(std::string response) : response_(std::move(response)) {}
  std::string complete(const std::string&, const SideChannel&) override { return response_; }

 private:
  std::string response_;
};

// Echoes gold, except that each span is corrupted with probability
// error_rate: dropped or relabelled (uniformly among the other labels), one
// or the other with equal odds. Seeded by (seed, prompt).
class NoisyOracleClient final : public ModelClient {
 public:
  NoisyOracleClient(double error_rate, std::uint64_t seed) : error_rate_(error_rate), seed_(seed) {}

  std::string complete(const std::string& prompt, const SideChannel& side) override {
    const auto& gold = detail::require_gold(side, "noisy_oracle");
    Rng rng(derive_seed(seed_, prompt));
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [surface, label] : surface_pairs(gold)) {
      if (!rng.bernoulli(error_rate_)) {
        out.emplace_back(surface, label);
        continue;
      }
      const bool drop = rng.bernoulli(0.5);
      std::vector<std::string> others;
      if (side.labels)
        for (const auto& l : side.labels->names())
          if (l != label) others.push_back(l);
      if (drop || others.empty()) continue;
      out.emplace_back(surface, others[rng.below(others.size())]);
    }
    return render_entity_lines(out);
  }

 private:
  double error_rate_;
  std::uint64_t seed_;
};

// POST <endpoint>/chat/completions with {"model", "messages", "temperature"};
// bearer token from the environment variable named in the config. Retries
// 429 and 5xx with exponential backoff.
class RemoteChatClient final : public ModelClient {
 public:
  explicit RemoteChatClient(ModelConfig cfg) : cfg_(std::move(cfg)), slots_(cfg_.max_in_flight) {}

  std::string complete(const std::string& prompt, const SideChannel&) override {
    const std::string url = cfg_.endpoint;
    auto [base, prefix] = HttpParaphraser::split_url(url);
    if (prefix == "/") prefix.clear();
    const std::string path = prefix + "/chat/completions";
    const nlohmann::json body = {{"model", cfg_.model},
                                 {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                                 {"temperature", cfg_.temperature}};
    httplib::Headers headers;
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    slots_.acquire();
    struct Release {
      std::counting_semaphore<1024>& s;
      ~Release() { s.release(); }
    } release{slots_};

    int last_status = 0;
    double delay = cfg_.backoff_initial_s;
    for (unsigned attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
      httplib::Client cli(base);
      const auto secs = static_cast<time_t>(cfg_.timeout_s);
      const auto usecs = static_cast<time_t>((cfg_.timeout_s - static_cast<double>(secs)) * 1e6);
      cli.set_connection_timeout(secs, usecs);
      cli.set_read_timeout(secs, usecs);
      cli.set_write_timeout(secs, usecs);
      auto res = cli.Post(path, headers, body.dump(), "application/json");
      if (!res) {
        const auto err = res.error();
        throw ProviderError(url, (err == httplib::Error::Read ? "request timed out or connection dropped: "
                                                               : "request failed: ") +
                                     httplib::to_string(err));
      }
      last_status = res->status;
      if (res->status == 200) {
        try {
          return nlohmann::json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
          throw ProviderError(url, std::string("malformed completion response: ") + e.what(), res->status);
        }
      }
      const bool retryable = res->status == 429 || res->status >= 500;
      if (!retryable || attempt == cfg_.max_attempts) break;
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
      delay *= 2;
    }
    throw ProviderError(url, "HTTP " + std::to_string(last_status) + " after retries", last_status);
  }

 private:
  ModelConfig cfg_;
  std::counting_semaphore<1024> slots_;
};

inline std::unique_ptr<ModelClient> make_client(const ModelConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case ModelKind::remote: return std::make_unique<RemoteChatClient>(cfg);
    case ModelKind::echo_gold: return std::make_unique<EchoGoldClient>();
    case ModelKind::fixed: return std::make_unique<FixedClient>(cfg.fixed_response);
    case ModelKind::noisy_oracle: return std::make_unique<NoisyOracleClient>(cfg.error_rate, cfg.seed);
  }
  throw ConfigError("unhandled model kind");
}

inline std::string complete(const std::string& prompt, const ModelConfig& cfg, const SideChannel& side = {}) {
  return make_client(cfg)->complete(prompt, side);
}

// ---- response cache ----

// key -> response, persisted as one JSON record per line. Unreadable lines
// are skipped (treated as misses) and reported through warnings().
class ResponseCache {
 public:
  ResponseCache() = default;

  explicit ResponseCache(fs::path file) : file_(std::move(file)) {
    std::ifstream in(file_);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      try {
        auto j = nlohmann::json::parse(line);
        entries_.try_emplace(j.at("key").get<std::string>(), j.at("response").get<std::string>());
      } catch (const nlohmann::json::exception&) {
        warnings_.push_back(file_.string() + ":" + std::to_string(lineno) + ": corrupt cache entry ignored");
      }
    }
    if (file_.has_parent_path()) fs::create_directories(file_.parent_path());
    // A torn final line must not swallow the next record.
    if (fs::exists(file_) && fs::file_size(file_) > 0) {
      std::ifstream tail(file_, std::ios::binary);
      tail.seekg(-1, std::ios::end);
      if (tail.get() != '\n') std::ofstream(file_, std::ios::binary | std::ios::app) << '\n';
    }
  }

  static std::string key(const std::string& model, const std::string& prompt, double temperature) {
    return sha256_hex(nlohmann::json::array({model, prompt, format_fixed(temperature, 6)}).dump());
  }

  std::optional<std::string> get(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void put(const std::string& key, const std::string& response) {
    std::lock_guard lock(mu_);
    if (!entries_.try_emplace(key, response).second) return;
    if (file_.empty()) return;
    std::ofstream out(file_, std::ios::binary | std::ios::app);
    out << nlohmann::json{{"key", key}, {"response", response}}.dump() << '\n';
    out.flush();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

  // Rewrites the file with one record per key, sorted by key, so that a
  // finished run leaves the same bytes however its requests interleaved.
  void compact() {
    std::lock_guard lock(mu_);
    if (file_.empty()) return;
    std::vector<std::pair<std::string, std::string>> sorted(entries_.begin(), entries_.end());
    std::sort(sorted.begin(), sorted.end());
    const fs::path tmp = file_.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      for (const auto& [k, v] : sorted) out << nlohmann::json{{"key", k}, {"response", v}}.dump() << '\n';
    }
    fs::rename(tmp, file_);
  }

  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  fs::path file_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::string> entries_;
  std::vector<std::string> warnings_;
};

struct CompletionStats {
  std::atomic<std::size_t> backend_calls{0};
  std::atomic<std::size_t> cache_hits{0};
};

inline std::string cached_complete(const std::string& prompt, const ModelConfig& cfg, ResponseCache& cache,
                                   ModelClient& client, const SideChannel& side = {},
                                   CompletionStats* stats = nullptr) {
  const auto k = ResponseCache::key(cfg.identity(), prompt, cfg.temperature);
  if (auto hit = cache.get(k)) {
    if (stats) ++stats->cache_hits;
    return *hit;
  }
  if (stats) ++stats->backend_calls;
  std::string response = client.complete(prompt, side);
  cache.put(k, response);
  return response;
}

}  // namespace slotnoise
