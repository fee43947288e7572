#include <gtest/gtest.h>

#include "slotnoise/prompts.hpp"
#include "test_support.hpp"

namespace {

using namespace slotnoise;

PromptTemplate tpl(std::string body) { return {"X", "en", std::move(body)}; }

LabeledExample input(std::vector<std::string> tokens) {
  LabeledExample ex;
  ex.id = "in";
  ex.tokens = std::move(tokens);
  return ex;
}

TEST(Template, ValidateRequiresEachSlotOnce) {
  EXPECT_NO_THROW(tpl("{labels}|{demonstrations}|{input}").validate());
  EXPECT_THROW(tpl("{labels}|{input}").validate(), ConfigError);
  EXPECT_THROW(tpl("{labels}{labels}|{demonstrations}|{input}").validate(), ConfigError);
  EXPECT_THROW((PromptTemplate{"", "en", "{labels}{demonstrations}{input}"}.validate()), ConfigError);
}

TEST(Render, FillsSlots) {
  DemonstrationSet demos;
  demos.items = {{"\"jazz\" is genre.\n", {"a"}}, {"\"paris\" is city.\n", {"b"}}};
  auto out = render_prompt(tpl("L: {labels}\n{demonstrations}S: {input}"), LabelSet({"genre", "city"}), demos,
                           input({"play", "jazz"}));
  EXPECT_EQ(out, "L: genre, city\n\"jazz\" is genre.\n\"paris\" is city.\nS: play jazz");
}

TEST(Render, SubstitutedTextIsNotReExpanded) {
  DemonstrationSet demos;
  demos.items = {{"{input} {labels}\n", {"a"}}};
  auto out = render_prompt(tpl("{demonstrations}|{input}|{labels}"), LabelSet({"x"}), demos,
                           input({"{demonstrations}"}));
  EXPECT_EQ(out, "{input} {labels}\n|{demonstrations}|x");
}

TEST(Render, ZeroShotHasEmptyDemos) {
  auto out = render_prompt(tpl("[{demonstrations}]{labels}{input}"), LabelSet({"x"}), nullptr, input({"a"}));
  EXPECT_EQ(out, "[]xa");
}

TEST(Parse, HeaderFields) {
  auto t = parse_template("id: T9 lang: zh\r\nbody {labels} {demonstrations} {input}\n", "t.txt");
  EXPECT_EQ(t.id, "T9");
  EXPECT_EQ(t.language_tag, "zh");
  EXPECT_EQ(t.body, "body {labels} {demonstrations} {input}\n");
  EXPECT_THROW(parse_template("name: T9\n{labels}{demonstrations}{input}"), ConfigError);
  EXPECT_THROW(parse_template("lang: en\n{labels}{demonstrations}{input}"), ConfigError);
  try {
    parse_template("id: T9 lang: en\n{labels}{input}", "bad.txt");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.txt"), std::string::npos);
  }
}

TEST(Registry, UnknownIdNamesIt) {
  TemplateRegistry reg;
  reg.add(tpl("{labels}{demonstrations}{input}"));
  EXPECT_THROW(reg.add(tpl("{labels}{demonstrations}{input}")), ConfigError);
  try {
    reg.get("T7");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("T7"), std::string::npos);
  }
}

TEST(Registry, BundledTemplates) {
  auto reg = TemplateRegistry::load_dir(support::source_dir() / "assets" / "templates");
  EXPECT_EQ(reg.ids(), (std::vector<std::string>{"T1", "T2", "T3"}));
  EXPECT_EQ(reg.get("T3").language_tag, "zh");
  EXPECT_THROW(TemplateRegistry::load_dir("/nonexistent"), ConfigError);

  DemonstrationSet demos;
  demos.items = {{"\"jazz\" is genre.\n", {"a"}}};
  for (const auto& id : reg.ids()) {
    auto out = render_prompt(reg.get(id), LabelSet({"genre"}), demos, input({"play", "jazz"}));
    EXPECT_NE(out.find("\"jazz\" is genre."), std::string::npos) << id;
    EXPECT_NE(out.find("play jazz"), std::string::npos) << id;
    EXPECT_EQ(out.find("{input}"), std::string::npos) << id;
  }
}

}  // namespace
