#pragma once

// Slot-filling data model: labelled utterances with token-level slot spans,
// BIO conversion, and dataset IO.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "slotnoise/error.hpp"
#include "slotnoise/util.hpp"

namespace slotnoise {

namespace fs = std::filesystem;

// Ordered set of slot-type names.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(const std::vector<std::string>& names) {
    for (const auto& n : names) {
      if (!add(n)) throw ConfigError("duplicate label '" + n + "'");
    }
  }

  // Appends a label; returns false if already present.
  bool add(const std::string& name) {
    if (name.empty() || name.find('\n') != std::string::npos ||
        name.find('\r') != std::string::npos) {
      throw ConfigError("invalid label name '" + name + "'");
    }
    if (index_.count(name)) return false;
    index_.emplace(name, names_.size());
    names_.push_back(name);
    return true;
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  std::optional<std::size_t> index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  bool empty() const { return names_.empty(); }

  friend bool operator==(const LabelSet& a, const LabelSet& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct SlotSpan {
  std::size_t start = 0;  // first token, inclusive
  std::size_t end = 0;    // last token, inclusive
  std::string slot_type;

  std::size_t length() const { return end - start + 1; }
  friend bool operator==(const SlotSpan&, const SlotSpan&) = default;
};

// Clean, or the ordered list of perturbation kinds that produced the example.
struct Provenance {
  std::vector<std::string> kinds;

  bool is_clean() const { return kinds.empty(); }

  std::string to_string() const {
    if (kinds.empty()) return "clean";
    return "perturbed(" + join(kinds, ",") + ")";
  }

  static Provenance parse(const std::string& text) {
    Provenance p;
    if (text.empty() || text == "clean") return p;
    const std::string prefix = "perturbed(";
    if (text.rfind(prefix, 0) != 0 || text.back() != ')') {
      throw DataError("bad provenance '" + text + "'");
    }
    std::string inner = text.substr(prefix.size(), text.size() - prefix.size() - 1);
    std::stringstream ss(inner);
    std::string kind;
    while (std::getline(ss, kind, ',')) {
      if (!kind.empty()) p.kinds.push_back(kind);
    }
    return p;
  }

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct LabeledExample {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<SlotSpan> spans;
  Provenance provenance;

  std::string utterance() const { return join(tokens, " "); }

  std::string surface(const SlotSpan& s) const {
    std::string out;
    for (std::size_t i = s.start; i <= s.end; ++i) {
      if (i > s.start) out.push_back(' ');
      out += tokens[i];
    }
    return out;
  }

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

struct Dataset {
  std::vector<LabeledExample> examples;
  LabelSet labels;
  std::string split_name;
  // Dangling I- tags repaired while importing BIO columns.
  std::size_t bio_repairs = 0;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
};

// ---- validation ----

// Token and span invariants against the example's own token list. When
// `labels` is given, span types must belong to it.
inline void validate_example(const LabeledExample& ex, const LabelSet* labels = nullptr) {
  if (ex.id.empty()) throw ValidationError(ex.id, "empty id");
  if (ex.tokens.empty()) throw ValidationError(ex.id, "no tokens");
  for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
    const auto& t = ex.tokens[i];
    if (t.empty()) throw ValidationError(ex.id, "token " + std::to_string(i) + " is empty");
    if (std::any_of(t.begin(), t.end(), is_space)) {
      throw ValidationError(ex.id, "token " + std::to_string(i) + " contains whitespace");
    }
  }
  for (std::size_t k = 0; k < ex.spans.size(); ++k) {
    const auto& s = ex.spans[k];
    if (s.start > s.end || s.end >= ex.tokens.size()) {
      throw ValidationError(ex.id, "span {" + std::to_string(s.start) + "," +
                                       std::to_string(s.end) + "} out of range");
    }
    if (s.slot_type.empty() || s.slot_type.find_first_of("\r\n") != std::string::npos) {
      throw ValidationError(ex.id, "invalid slot type '" + s.slot_type + "'");
    }
    if (labels && !labels->contains(s.slot_type)) {
      throw ValidationError(ex.id, "unknown slot type '" + s.slot_type + "'");
    }
    if (k > 0 && ex.spans[k - 1].end >= s.start) {
      throw ValidationError(ex.id, "spans overlap or are unsorted at span " + std::to_string(k));
    }
  }
}

inline void validate_dataset(const Dataset& ds) {
  std::unordered_set<std::string> seen;
  for (const auto& ex : ds.examples) {
    validate_example(ex, &ds.labels);
    if (!seen.insert(ex.id).second) throw ValidationError(ex.id, "duplicate id");
  }
}

// Label set observed in the examples, in order of first appearance.
inline LabelSet observed_labels(const std::vector<LabeledExample>& examples) {
  LabelSet out;
  for (const auto& ex : examples)
    for (const auto& s : ex.spans) out.add(s.slot_type);
  return out;
}

// ---- BIO ----

struct BioDecoded {
  std::vector<SlotSpan> spans;
  std::size_t repairs = 0;
};

// Maximal B-then-I runs become spans. An I-t that does not continue a run of
// type t opens a new span, as if it were B-t, and is counted as a repair.
inline BioDecoded bio_to_spans(const std::vector<std::string>& tags) {
  BioDecoded out;
  std::optional<SlotSpan> open;
  auto close = [&] {
    if (open) out.spans.push_back(*open);
    open.reset();
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& tag = tags[i];
    if (tag == "O") {
      close();
      continue;
    }
    if (tag.size() < 3 || tag[1] != '-' || (tag[0] != 'B' && tag[0] != 'I')) {
      throw DataError("malformed BIO tag '" + tag + "' at position " + std::to_string(i));
    }
    std::string type = tag.substr(2);
    if (tag[0] == 'I' && open && open->slot_type == type) {
      open->end = i;
      continue;
    }
    if (tag[0] == 'I') ++out.repairs;
    close();
    open = SlotSpan{i, i, std::move(type)};
  }
  close();
  return out;
}

inline std::vector<std::string> spans_to_bio(const std::vector<SlotSpan>& spans, std::size_t n) {
  std::vector<std::string> tags(n, "O");
  std::size_t next_free = 0;
  for (const auto& s : spans) {
    if (s.start > s.end || s.end >= n) {
      throw DataError("span {" + std::to_string(s.start) + "," + std::to_string(s.end) +
                      "} out of range for " + std::to_string(n) + " tokens");
    }
    if (s.start < next_free) throw DataError("overlapping or unsorted spans");
    tags[s.start] = "B-" + s.slot_type;
    for (std::size_t i = s.start + 1; i <= s.end; ++i) tags[i] = "I-" + s.slot_type;
    next_free = s.end + 1;
  }
  return tags;
}

// ---- JSON records ----

inline nlohmann::json to_json(const LabeledExample& ex) {
  nlohmann::json spans = nlohmann::json::array();
  for (const auto& s : ex.spans) {
    spans.push_back({{"start", s.start}, {"end", s.end}, {"type", s.slot_type}});
  }
  return {{"id", ex.id},
          {"tokens", ex.tokens},
          {"spans", std::move(spans)},
          {"provenance", ex.provenance.to_string()}};
}

inline LabeledExample example_from_json(const nlohmann::json& j) {
  LabeledExample ex;
  ex.id = j.at("id").get<std::string>();
  ex.tokens = j.at("tokens").get<std::vector<std::string>>();
  if (j.contains("spans")) {
    for (const auto& s : j.at("spans")) {
      ex.spans.push_back({s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>(),
                          s.at("type").get<std::string>()});
    }
  }
  if (j.contains("provenance")) ex.provenance = Provenance::parse(j.at("provenance").get<std::string>());
  return ex;
}

// ---- dataset IO ----

enum class DatasetFormat { jsonl_spans, conll_bio };

inline DatasetFormat parse_dataset_format(const std::string& name) {
  if (name == "jsonl_spans" || name == "jsonl") return DatasetFormat::jsonl_spans;
  if (name == "conll_bio" || name == "conll") return DatasetFormat::conll_bio;
  throw ConfigError("unknown dataset format '" + name + "'");
}

inline DatasetFormat guess_dataset_format(const fs::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".conll" || ext == ".bio" || ext == ".tsv") ? DatasetFormat::conll_bio
                                                             : DatasetFormat::jsonl_spans;
}

inline LabelSet load_label_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open label file " + path.string());
  LabelSet labels;
  std::string line;
  while (std::getline(in, line)) {
    auto name = std::string(trim(line));
    if (!name.empty() && !labels.add(name)) {
      throw ConfigError(path.string() + ": duplicate label '" + name + "'");
    }
  }
  return labels;
}

struct LoadOptions {
  // Fixed label inventory. Defaults to `<path stem>.labels` next to the data
  // file when that exists; otherwise the observed slot types are used.
  std::optional<fs::path> label_file;
  std::string split_name;
};

namespace detail {

inline std::vector<LabeledExample> read_jsonl(std::istream& in, const std::string& source) {
  std::vector<LabeledExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(example_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, lineno, e.what());
    } catch (const DataError& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return out;
}

inline std::vector<LabeledExample> read_conll(std::istream& in, const std::string& source,
                                              const std::string& stem, std::size_t& repairs) {
  std::vector<LabeledExample> out;
  std::vector<std::string> tokens, tags;
  auto flush = [&](std::size_t lineno) {
    if (tokens.empty()) return;
    LabeledExample ex;
    ex.id = stem + "-" + std::to_string(out.size());
    try {
      auto decoded = bio_to_spans(tags);
      repairs += decoded.repairs;
      ex.spans = std::move(decoded.spans);
    } catch (const DataError& e) {
      throw ParseError(source, lineno, e.what());
    }
    ex.tokens = std::move(tokens);
    out.push_back(std::move(ex));
    tokens.clear();
    tags.clear();
  };
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) {
      flush(lineno);
      continue;
    }
    std::string token, tag;
    if (auto tab = line.find('\t'); tab != std::string::npos) {
      token = std::string(trim(std::string_view(line).substr(0, tab)));
      tag = std::string(trim(std::string_view(line).substr(tab + 1)));
    } else {
      auto fields = split_whitespace(line);
      if (fields.size() != 2) throw ParseError(source, lineno, "expected 'token<TAB>tag'");
      token = fields[0];
      tag = fields[1];
    }
    if (token.empty() || tag.empty()) throw ParseError(source, lineno, "expected 'token<TAB>tag'");
    tokens.push_back(std::move(token));
    tags.push_back(std::move(tag));
  }
  flush(lineno);
  return out;
}

}  // namespace detail

inline Dataset load_dataset(const fs::path& path, DatasetFormat format, const LoadOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  Dataset ds;
  ds.split_name = opts.split_name.empty() ? path.stem().string() : opts.split_name;
  if (format == DatasetFormat::jsonl_spans) {
    ds.examples = detail::read_jsonl(in, path.string());
  } else {
    ds.examples = detail::read_conll(in, path.string(), path.stem().string(), ds.bio_repairs);
  }

  for (const auto& ex : ds.examples) validate_example(ex);

  std::optional<fs::path> label_file = opts.label_file;
  if (!label_file) {
    auto sibling = path;
    sibling.replace_extension(".labels");
    if (fs::exists(sibling)) label_file = sibling;
  }
  ds.labels = label_file ? load_label_file(*label_file) : observed_labels(ds.examples);
  validate_dataset(ds);
  return ds;
}

inline Dataset load_dataset(const fs::path& path) {
  return load_dataset(path, guess_dataset_format(path));
}

inline void write_jsonl(std::ostream& out, const std::vector<LabeledExample>& examples) {
  for (const auto& ex : examples) out << to_json(ex).dump() << '\n';
}

inline void save_dataset(const Dataset& ds, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_jsonl(out, ds.examples);
}

}  // namespace slotnoise
