#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "slotnoise/corpus.hpp"
#include "slotnoise/demos.hpp"
#include "slotnoise/error.hpp"

namespace slotnoise {

inline constexpr std::string_view kLabelsSlot = "{labels}";
inline constexpr std::string_view kDemosSlot = "{demonstrations}";
inline constexpr std::string_view kInputSlot = "{input}";

inline std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size())) ++n;
  return n;
}

struct PromptTemplate {
  std::string id;
  std::string language_tag;
  std::string body;

  // Each placeholder must appear exactly once.
  void validate() const {
    if (id.empty()) throw ConfigError("template without id");
    for (auto slot : {kLabelsSlot, kDemosSlot, kInputSlot}) {
      const auto n = count_occurrences(body, slot);
      if (n != 1) {
        throw ConfigError("template '" + id + "' must contain " + std::string(slot) + " exactly once (found " +
                          std::to_string(n) + ")");
      }
    }
  }
};

// Single left-to-right pass, so substituted text is never re-expanded.
inline std::string render_prompt(const PromptTemplate& t, const LabelSet& labels, const DemonstrationSet* demos,
                                 const LabeledExample& input) {
  const std::array<std::pair<std::string_view, std::string>, 3> fills = {{
      {kLabelsSlot, join(labels.names(), ", ")},
      {kDemosSlot, demos ? demos->text() : std::string()},
      {kInputSlot, input.utterance()},
  }};
  std::string out;
  std::size_t pos = 0;
  while (pos < t.body.size()) {
    std::size_t next = std::string::npos;
    const std::pair<std::string_view, std::string>* which = nullptr;
    for (const auto& f : fills) {
      auto at = t.body.find(f.first, pos);
      if (at < next) {
        next = at;
        which = &f;
      }
    }
    if (!which) {
      out.append(t.body, pos, std::string::npos);
      break;
    }
    out.append(t.body, pos, next - pos);
    out += which->second;
    pos = next + which->first.size();
  }
  return out;
}

inline std::string render_prompt(const PromptTemplate& t, const LabelSet& labels, const DemonstrationSet& demos,
                                 const LabeledExample& input) {
  return render_prompt(t, labels, &demos, input);
}

// Header line "id: <id> lang: <tag>", then the body.
inline PromptTemplate parse_template(const std::string& text, const std::string& source = "<template>") {
  auto nl = text.find('\n');
  std::string header = text.substr(0, nl);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  PromptTemplate t;
  t.body = nl == std::string::npos ? std::string() : text.substr(nl + 1);
  auto fields = split_whitespace(header);
  for (std::size_t i = 0; i + 1 < fields.size(); i += 2) {
    if (fields[i] == "id:") t.id = fields[i + 1];
    else if (fields[i] == "lang:") t.language_tag = fields[i + 1];
    else throw ConfigError(source + ": unexpected header field '" + fields[i] + "'");
  }
  if (t.id.empty()) throw ConfigError(source + ": header must start with 'id: <id> lang: <tag>'");
  try {
    t.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return t;
}

class TemplateRegistry {
 public:
  void add(PromptTemplate t) {
    t.validate();
    if (templates_.count(t.id)) throw ConfigError("duplicate template id '" + t.id + "'");
    auto id = t.id;
    templates_.emplace(std::move(id), std::move(t));
  }

  const PromptTemplate& get(const std::string& id) const {
    auto it = templates_.find(id);
    if (it == templates_.end()) {
      throw ConfigError("unknown template id '" + id + "' (known: " + join(ids(), ", ") + ")");
    }
    return it->second;
  }

  bool contains(const std::string& id) const { return templates_.count(id) > 0; }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : templates_) out.push_back(id);
    return out;
  }

  std::size_t size() const { return templates_.size(); }

  // Every *.txt file in `dir` is one template.
  static TemplateRegistry load_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ConfigError("template directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    TemplateRegistry reg;
    for (const auto& f : files) {
      std::ifstream in(f, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      reg.add(parse_template(ss.str(), f.string()));
    }
    return reg;
  }

 private:
  std::map<std::string, PromptTemplate> templates_;
};

}  // namespace slotnoise
