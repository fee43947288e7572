#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "slotnoise/corpus.hpp"
#include "test_support.hpp"

namespace {

using namespace slotnoise;

LabeledExample make(std::vector<std::string> tokens, std::vector<SlotSpan> spans, std::string id = "x") {
  LabeledExample ex;
  ex.id = std::move(id);
  ex.tokens = std::move(tokens);
  ex.spans = std::move(spans);
  return ex;
}

TEST(LabelSet, KeepsInsertionOrderAndRejectsDuplicates) {
  LabelSet l;
  EXPECT_TRUE(l.add("song"));
  EXPECT_TRUE(l.add("artist"));
  EXPECT_FALSE(l.add("song"));
  EXPECT_EQ(l.names(), (std::vector<std::string>{"song", "artist"}));
  EXPECT_EQ(l.index_of("artist"), 1u);
  EXPECT_THROW(l.add(""), ConfigError);
}

TEST(Validate, AcceptsWellFormed) {
  EXPECT_NO_THROW(validate_example(make({"play", "jazz"}, {{1, 1, "genre"}})));
}

TEST(Validate, RejectsOverlapAndOutOfRange) {
  EXPECT_THROW(validate_example(make({"a", "b", "c"}, {{0, 1, "x"}, {1, 2, "y"}})), ValidationError);
  EXPECT_THROW(validate_example(make({"a"}, {{0, 1, "x"}})), ValidationError);
  EXPECT_THROW(validate_example(make({"a", "b"}, {{1, 0, "x"}})), ValidationError);
}

TEST(Validate, RejectsEmptyAndWhitespaceTokens) {
  EXPECT_THROW(validate_example(make({"a", ""}, {})), ValidationError);
  EXPECT_THROW(validate_example(make({"a b"}, {})), ValidationError);
}

TEST(Validate, ErrorNamesTheExample) {
  try {
    validate_example(make({"a"}, {{0, 3, "x"}}, "ex-17"));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.example_id(), "ex-17");
    EXPECT_NE(std::string(e.what()).find("ex-17"), std::string::npos);
  }
}

TEST(Validate, RejectsUnknownLabel) {
  LabelSet l({"genre"});
  EXPECT_THROW(validate_example(make({"a"}, {{0, 0, "city"}}), &l), ValidationError);
}

TEST(Validate, DuplicateIdsInDataset) {
  Dataset ds;
  ds.examples = {make({"a"}, {}, "same"), make({"b"}, {}, "same")};
  EXPECT_THROW(validate_dataset(ds), ValidationError);
}

TEST(Bio, DecodesSimpleRuns) {
  auto d = bio_to_spans({"O", "B-song", "I-song", "O", "B-artist"});
  ASSERT_EQ(d.spans.size(), 2u);
  EXPECT_EQ(d.spans[0], (SlotSpan{1, 2, "song"}));
  EXPECT_EQ(d.spans[1], (SlotSpan{4, 4, "artist"}));
  EXPECT_EQ(d.repairs, 0u);
}

TEST(Bio, DanglingInsideOpensSpanAndCountsRepair) {
  auto d = bio_to_spans({"O", "I-city", "I-city", "I-time"});
  ASSERT_EQ(d.spans.size(), 2u);
  EXPECT_EQ(d.spans[0], (SlotSpan{1, 2, "city"}));
  EXPECT_EQ(d.spans[1], (SlotSpan{3, 3, "time"}));
  EXPECT_EQ(d.repairs, 2u);
}

TEST(Bio, MalformedTagThrows) {
  EXPECT_THROW(bio_to_spans({"X-song"}), DataError);
  EXPECT_THROW(bio_to_spans({"B"}), DataError);
}

TEST(Bio, ExhaustiveRoundTripIsCanonicalRepair) {
  const std::vector<std::string> alphabet = {"O", "B-a", "I-a", "B-b", "I-b"};
  std::size_t checked = 0;
  for (std::size_t n = 0; n <= 6; ++n) {
    std::vector<std::size_t> digits(n, 0);
    while (true) {
      std::vector<std::string> tags;
      for (auto d : digits) tags.push_back(alphabet[d]);
      const auto decoded = bio_to_spans(tags);
      ASSERT_EQ(spans_to_bio(decoded.spans, n), oracle::canonical_bio(tags));
      ++checked;
      std::size_t i = 0;
      while (i < n && ++digits[i] == alphabet.size()) digits[i++] = 0;
      if (i == n) break;
    }
  }
  EXPECT_EQ(checked, 1u + 5 + 25 + 125 + 625 + 3125 + 15625);
}

TEST(Bio, RandomSpanRoundTrip) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 2000; ++trial) {
    auto ex = support::random_example(gen, "r", false, 10);
    const auto tags = spans_to_bio(ex.spans, ex.tokens.size());
    const auto back = bio_to_spans(tags);
    EXPECT_EQ(back.spans, ex.spans);
    EXPECT_EQ(back.repairs, 0u);
  }
}

TEST(Bio, EncodeRejectsOverlap) {
  EXPECT_THROW(spans_to_bio({{0, 1, "a"}, {1, 2, "b"}}, 3), DataError);
  EXPECT_THROW(spans_to_bio({{0, 3, "a"}}, 3), DataError);
}

TEST(Json, RoundTrip) {
  auto ex = make({"play", "miles", "davis"}, {{1, 2, "artist"}}, "id1");
  ex.provenance.kinds = {"char_typos", "append_irr"};
  EXPECT_EQ(example_from_json(to_json(ex)), ex);
  EXPECT_EQ(to_json(ex)["provenance"], "perturbed(char_typos,append_irr)");
}

TEST(Provenance, ParseAndFormat) {
  EXPECT_EQ(Provenance{}.to_string(), "clean");
  EXPECT_TRUE(Provenance::parse("clean").kinds.empty());
  EXPECT_EQ(Provenance::parse("perturbed(word_delete)").kinds, std::vector<std::string>{"word_delete"});
  EXPECT_THROW(Provenance::parse("noisy"), DataError);
}

TEST(Load, JsonlWithSiblingLabels) {
  auto dir = support::scratch("corpus-jsonl");
  {
    std::ofstream(dir / "split.jsonl") << R"({"id":"a","tokens":["play","jazz"],"spans":[{"start":1,"end":1,"type":"genre"}]})"
                                       << "\n\n"
                                       << R"({"id":"b","tokens":["hello"]})" << "\n";
    std::ofstream(dir / "split.labels") << "genre\ncity\n";
  }
  auto ds = load_dataset(dir / "split.jsonl");
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.labels.names(), (std::vector<std::string>{"genre", "city"}));
  EXPECT_EQ(ds.split_name, "split");
}

TEST(Load, JsonlParseErrorCarriesLine) {
  auto dir = support::scratch("corpus-bad");
  std::ofstream(dir / "bad.jsonl") << R"({"id":"a","tokens":["x"]})" << "\n{not json\n";
  try {
    load_dataset(dir / "bad.jsonl");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Load, JsonlInvalidSpanIsValidationError) {
  auto dir = support::scratch("corpus-invalid");
  std::ofstream(dir / "bad.jsonl") << R"({"id":"q","tokens":["x"],"spans":[{"start":0,"end":4,"type":"t"}]})" << "\n";
  EXPECT_THROW(load_dataset(dir / "bad.jsonl"), ValidationError);
}

TEST(Load, ConllRepairsAreCounted) {
  auto dir = support::scratch("corpus-conll");
  std::ofstream(dir / "d.conll") << "play\tO\nmiles\tI-artist\ndavis\tI-artist\n\nrain\tO\nin\tO\nparis\tB-city\n";
  auto ds = load_dataset(dir / "d.conll");
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.bio_repairs, 1u);
  EXPECT_EQ(ds.examples[0].spans, (std::vector<SlotSpan>{{1, 2, "artist"}}));
  EXPECT_EQ(ds.examples[1].id, "d-1");
  EXPECT_EQ(ds.labels.names(), (std::vector<std::string>{"artist", "city"}));
}

TEST(Load, SaveThenLoadIsIdentity) {
  auto dir = support::scratch("corpus-save");
  std::mt19937_64 gen(1);
  Dataset ds;
  for (int i = 0; i < 50; ++i) ds.examples.push_back(support::random_example(gen, "e" + std::to_string(i)));
  ds.labels = observed_labels(ds.examples);
  save_dataset(ds, dir / "out.jsonl");
  auto back = load_dataset(dir / "out.jsonl");
  EXPECT_EQ(back.examples, ds.examples);
}

TEST(Load, MissingFileIsDataError) {
  EXPECT_THROW(load_dataset("/nonexistent/file.jsonl"), DataError);
}

TEST(Load, BundledFixturesAreValid) {
  const auto data = support::source_dir() / "data";
  LoadOptions opts;
  opts.label_file = data / "slots.labels";
  for (const char* name : {"train.jsonl", "test_clean.jsonl", "test_paraphrase.jsonl", "test_simplification.jsonl",
                           "test_verbose.jsonl"}) {
    auto ds = load_dataset(data / name, DatasetFormat::jsonl_spans, opts);
    EXPECT_FALSE(ds.empty()) << name;
    EXPECT_EQ(ds.labels.size(), 8u);
  }
}

}  // namespace
