#include <doctest.h>

#include <sstream>

#include "absparse/abstraction.hpp"

using namespace absparse;

namespace {

const Lexicon& lex() {
  static const Lexicon l = Lexicon::load(std::string(ABSPARSE_DATA_DIR) + "/lexicon.tsv");
  return l;
}

std::vector<std::string> toks(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

const char* kTable1Program =
    "Equal 3 Count Filter ALL_ITEMS lambda And And IsYellow x IsSquare x "
    "IsTouchingWall x Side.Any";

}  // namespace

TEST_CASE("shipped lexicon satisfies the cluster contract") {
  const Lexicon& l = lex();
  CHECK(l.named_count(Cluster::Color) == 3);
  CHECK(l.named_count(Cluster::Size) == 3);
  CHECK(l.named_count(Cluster::Shape) == 4);
  CHECK(l.named_count(Cluster::Num) >= 2);
  CHECK(l.named_count(Cluster::QuantMod) == 5);
  CHECK(l.named_count(Cluster::Location) == 2);
  CHECK(l.named_count(Cluster::SpaceRel) == 6);

  const LexiconEntry* e = l.find_utterance("at least");
  REQUIRE(e != nullptr);
  CHECK(e->cluster == Cluster::QuantMod);
  CHECK(TokenInventory::instance().sig(e->program_token).name == "GreaterEqual");

  // generic numerals: digits and number words
  CHECK(l.find_utterance("7") != nullptr);
  CHECK(l.find_utterance("seven") != nullptr);
  CHECK(l.find_utterance("7")->generic);
}

TEST_CASE("abstract_utterance replaces lexicon tokens with cluster labels") {
  const auto x = toks("there are exactly 3 yellow square touching the wall");
  const AbstractUtterance xbar = abstract_utterance(x, lex());
  CHECK(xbar.key() == "there are C-QuantMod C-Num C-Color C-Shape touching the wall");
  REQUIRE(xbar.slots.size() == 4);
  CHECK(xbar.slots[0].original == "exactly");
  CHECK(xbar.slots[1].original == "3");
  CHECK(xbar.slots[2].original == "yellow");
  CHECK(xbar.slots[3].original == "square");

  // a different surface form maps to the same abstract utterance
  const auto y = toks("there are at least 2 blue circle touching the wall");
  CHECK(abstract_utterance(y, lex()).key() == xbar.key());

  // no lexicon tokens: unchanged, zero slots
  const auto plain = toks("the wall is a wall");
  const AbstractUtterance pbar = abstract_utterance(plain, lex());
  CHECK(pbar.tokens == plain);
  CHECK(pbar.slots.empty());

  // idempotent on its own token output
  CHECK(abstract_utterance(xbar.tokens, lex()).tokens == xbar.tokens);
}

TEST_CASE("abstract_program aligns program slots to utterance slots") {
  const auto x = toks("there are exactly 3 yellow square touching the wall");
  const Program z = Program::parse(kTable1Program);
  const AbstractProgram zbar = abstract_program(x, z, lex());
  CHECK(zbar.tokens_text() ==
        "C-QuantMod C-Num Count Filter ALL_ITEMS lambda And And C-Color x C-Shape x "
        "IsTouchingWall x Side.Any");
  REQUIRE(zbar.alignment.size() == 4);
  CHECK(zbar.alignment == std::vector<int>{0, 1, 2, 3});

  // a program with no lexicon-mapped tokens stays concrete
  const Program plain = Program::parse("Exist ALL_ITEMS");
  const AbstractProgram pbar = abstract_program(x, plain, lex());
  CHECK(pbar.tokens_text() == "Exist ALL_ITEMS");
  CHECK(pbar.alignment.empty());
}

TEST_CASE("repeated tokens align leftmost-unused-first") {
  const auto x = toks("a yellow item above a yellow item");
  const Program z = Program::parse(
      "Exist Filter GetAbove Filter ALL_ITEMS lambda IsYellow x lambda IsYellow x");
  const AbstractProgram zbar = abstract_program(x, z, lex());
  REQUIRE(zbar.alignment.size() == 3);  // GetAbove + two colors
  // slots in program order: GetAbove, inner IsYellow, outer IsYellow
  CHECK(zbar.alignment[0] == 1);  // "above"
  CHECK(zbar.alignment[1] == 0);  // first "yellow"
  CHECK(zbar.alignment[2] == 2);  // second "yellow"
  // each utterance slot used at most once
  CHECK(zbar.alignment != std::vector<int>{1, 0, 0});
}

TEST_CASE("deabstract instantiates via the new utterance's tokens") {
  const auto x = toks("there are exactly 3 yellow square touching the wall");
  const Program z = Program::parse(kTable1Program);
  const AbstractProgram zbar = abstract_program(x, z, lex());

  const auto y = toks("there are at least 2 blue circle touching the wall");
  const AbstractUtterance ybar = abstract_utterance(y, lex());
  const Program zy = deabstract(zbar, ybar, lex());
  CHECK(zy.text() ==
        "GreaterEqual 2 Count Filter ALL_ITEMS lambda And And IsBlue x IsCircle x "
        "IsTouchingWall x Side.Any");

  // round trip: de-abstracting against the original utterance recovers z
  CHECK(deabstract(zbar, abstract_utterance(x, lex()), lex()) == z);

  // empty alignment: concrete program unchanged
  const AbstractProgram plain = abstract_program(x, Program::parse("Exist ALL_ITEMS"), lex());
  CHECK(deabstract(plain, ybar, lex()) == Program::parse("Exist ALL_ITEMS"));

  // missing aligned slot is an error the caller can drop
  const AbstractUtterance no_slots = abstract_utterance(toks("nothing here"), lex());
  CHECK_THROWS_AS(deabstract(zbar, no_slots, lex()), DeabstractError);
}

TEST_CASE("prefix de-abstraction substitutes only slots inside the prefix") {
  const auto x = toks("there are exactly 3 yellow square touching the wall");
  const Program z = Program::parse(kTable1Program);
  const AbstractProgram zbar = abstract_program(x, z, lex());
  const AbstractUtterance xbar = abstract_utterance(x, lex());

  const auto prefix = deabstract_prefix(zbar, xbar, lex(), 3);
  REQUIRE(prefix.size() == 3);
  const auto& inv = TokenInventory::instance();
  CHECK(prefix[0] == inv.id("Equal"));
  CHECK(prefix[1] == inv.id("3"));
  CHECK(prefix[2] == inv.id("Count"));

  CHECK(deabstract_prefix(zbar, xbar, lex(), 9999).size() == z.tokens.size());
  CHECK(deabstract_prefix(zbar, xbar, lex(), 1).size() == 1);
}

TEST_CASE("abstract pair serialization round-trips") {
  const auto x = toks("there are exactly 3 yellow square touching the wall");
  const Program z = Program::parse(kTable1Program);
  AbstractPair pair;
  pair.utterance = abstract_utterance(x, lex());
  pair.program = abstract_program(pair.utterance, z, lex());

  const std::string text = serialize_abstract_pair(pair);
  std::istringstream in(text);
  std::string l1, l2, l3;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  const AbstractPair back = parse_abstract_pair(l1, l2, l3);
  CHECK(back.utterance.tokens == pair.utterance.tokens);
  CHECK(back.program == pair.program);
}

TEST_CASE("signature-mixing lexicons are rejected at load") {
  const auto& inv = TokenInventory::instance();
  std::vector<LexiconEntry> bad = {
      {Cluster::SpaceRel, "above", inv.id("GetAbove"), false},
      {Cluster::SpaceRel, "corner", inv.id("IsTouchingCorner"), false},
  };
  CHECK_THROWS_WITH_AS(Lexicon::from_entries(bad, false), doctest::Contains("signature"),
                       Error);
}
