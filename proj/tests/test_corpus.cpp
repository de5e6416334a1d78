#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"

#include "karum/corpus.hpp"
#include "karum/rng.hpp"
#include "karum/unicode.hpp"

using namespace karum;

namespace {

Letter make_letter(std::string id, std::vector<std::string> senders,
                   std::vector<std::string> recipients,
                   FirstBlock first = FirstBlock::Senders) {
  Letter letter;
  letter.id = std::move(id);
  letter.senders = std::move(senders);
  letter.recipients = std::move(recipients);
  letter.first_block = first;
  return letter;
}

// The introductory-formula example: two senders, three recipients, senders
// written first.
Letter formula_example() {
  return make_letter("ex1", {"Aššur-idī", "Aššur-nādā"},
                     {"Amur-Ištar", "Alāhum", "Aššur-taklāku"});
}

using MentionId = std::pair<Role, std::int32_t>;
using NamePair = std::pair<std::string, std::string>;

std::set<std::pair<MentionId, MentionId>> as_mention_set(const std::vector<PairwiseOrder>& pairs) {
  std::set<std::pair<MentionId, MentionId>> out;
  for (const PairwiseOrder& p : pairs) {
    out.insert({{p.higher.role, p.higher.pos}, {p.lower.role, p.lower.pos}});
  }
  return out;
}

std::set<NamePair> as_name_set(const Letter& letter, const std::vector<PairwiseOrder>& pairs) {
  std::set<NamePair> out;
  for (const PairwiseOrder& p : pairs) {
    out.insert({letter.token(p.higher.role, static_cast<std::size_t>(p.higher.pos)),
                letter.token(p.lower.role, static_cast<std::size_t>(p.lower.pos))});
  }
  return out;
}

// Independent oracle: literal application of the two extraction rules with a
// set union, no shared code with extract_pairs.
std::set<std::pair<MentionId, MentionId>> oracle_pairs(const Letter& letter) {
  std::set<std::pair<MentionId, MentionId>> out;
  auto tok = [&](MentionId m) { return letter.token(m.first, static_cast<std::size_t>(m.second)); };
  auto add = [&](MentionId hi, MentionId lo) {
    if (hi == lo) return;
    if (hi.first == lo.first && tok(hi) == tok(lo)) return;
    out.insert({hi, lo});
  };
  // within-block order
  for (Role role : {Role::Sender, Role::Recipient}) {
    const auto n = static_cast<std::int32_t>(letter.block(role).size());
    for (std::int32_t i = 0; i < n; ++i) {
      for (std::int32_t j = i + 1; j < n; ++j) add({role, i}, {role, j});
    }
  }
  // first-mentioned dominates everyone
  const MentionId first{letter.first_role(), 0};
  for (Role role : {Role::Sender, Role::Recipient}) {
    const auto n = static_cast<std::int32_t>(letter.block(role).size());
    for (std::int32_t i = 0; i < n; ++i) add(first, {role, i});
  }
  return out;
}

}  // namespace

TEST_CASE("formula example yields exactly the seven orderings") {
  const Letter letter = formula_example();
  const auto pairs = extract_pairs(letter);
  CHECK(pairs.size() == 7);
  const std::set<NamePair> expected = {
      {"Aššur-idī", "Aššur-nādā"},   {"Aššur-idī", "Amur-Ištar"},
      {"Aššur-idī", "Alāhum"},       {"Aššur-idī", "Aššur-taklāku"},
      {"Amur-Ištar", "Alāhum"},      {"Amur-Ištar", "Aššur-taklāku"},
      {"Alāhum", "Aššur-taklāku"}};
  CHECK(as_name_set(letter, pairs) == expected);
}

TEST_CASE("two mentions give one pair, one mention gives none") {
  const Letter two = make_letter("l1", {"A"}, {"B"});
  const auto pairs = extract_pairs(two);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].higher == MentionRef{Role::Sender, 0});
  CHECK(pairs[0].lower == MentionRef{Role::Recipient, 0});

  const Letter one = make_letter("l2", {"A"}, {});
  CHECK(extract_pairs(one).empty());
}

TEST_CASE("extraction matches the brute-force oracle for all block sizes up to 5") {
  for (int s = 0; s <= 5; ++s) {
    for (int r = 0; r <= 5; ++r) {
      if (s + r == 0) continue;
      std::vector<std::string> senders;
      std::vector<std::string> recipients;
      for (int i = 0; i < s; ++i) senders.push_back("s" + std::to_string(i));
      for (int i = 0; i < r; ++i) recipients.push_back("r" + std::to_string(i));
      for (FirstBlock fb : {FirstBlock::Senders, FirstBlock::Recipients}) {
        if (fb == FirstBlock::Senders && s == 0) continue;
        if (fb == FirstBlock::Recipients && r == 0) continue;
        const Letter letter = make_letter("x", senders, recipients, fb);
        const auto pairs = extract_pairs(letter);
        CHECK(as_mention_set(pairs) == oracle_pairs(letter));
        CHECK(pairs.size() == as_mention_set(pairs).size());  // no duplicates emitted
        // within-block pairs plus first-mentioned over all others, minus the
        // first-mentioned's own within-block pairs counted once
        const int b = fb == FirstBlock::Senders ? s : r;
        const auto expected = s * (s - 1) / 2 + r * (r - 1) / 2 + (s + r - 1) - (b - 1);
        CHECK(static_cast<int>(pairs.size()) == expected);
      }
    }
  }
}

TEST_CASE("extraction matches the oracle on letters with repeated names") {
  RngStream rng(2024);
  const std::vector<std::string> pool = {"A", "B", "C", "D"};
  for (int trial = 0; trial < 500; ++trial) {
    Letter letter;
    letter.id = "t" + std::to_string(trial);
    const int s = rng.uniform_int(4);
    const int r = rng.uniform_int(4);
    if (s + r == 0) continue;
    for (int i = 0; i < s; ++i) letter.senders.push_back(pool[static_cast<std::size_t>(rng.uniform_int(4))]);
    for (int i = 0; i < r; ++i) letter.recipients.push_back(pool[static_cast<std::size_t>(rng.uniform_int(4))]);
    letter.first_block = s == 0                  ? FirstBlock::Recipients
                         : r == 0                ? FirstBlock::Senders
                         : rng.bernoulli(0.5) ? FirstBlock::Senders
                                                 : FirstBlock::Recipients;
    const auto pairs = extract_pairs(letter);
    CHECK(as_mention_set(pairs) == oracle_pairs(letter));

    // never (m, m); never both directions between the same two mentions
    const auto set = as_mention_set(pairs);
    for (const auto& [hi, lo] : set) {
      CHECK(hi != lo);
      CHECK(set.count({lo, hi}) == 0);
    }
    // both name-level directions appear only when one of the names is
    // mentioned more than once in the letter (across blocks, or twice within
    // one block with another name in between)
    const auto names = as_name_set(letter, pairs);
    auto occurrences = [&](const std::string& tok) {
      std::size_t n = 0;
      for (Role role : {Role::Sender, Role::Recipient}) {
        for (const auto& t : letter.block(role)) {
          if (t == tok) ++n;
        }
      }
      return n;
    };
    for (const auto& np : names) {
      if (names.count({np.second, np.first}) == 0) continue;
      CHECK((occurrences(np.first) >= 2 || occurrences(np.second) >= 2));
    }
  }
}

TEST_CASE("duplicate name within a block: warns, keeps pairs against other names") {
  const Letter letter = make_letter("dup", {"A", "A", "B"}, {});
  std::vector<std::string> warnings;
  const auto pairs = extract_pairs(letter, &warnings);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("'A'") != std::string::npos);
  const std::set<std::pair<MentionId, MentionId>> expected = {
      {{Role::Sender, 0}, {Role::Sender, 2}}, {{Role::Sender, 1}, {Role::Sender, 2}}};
  CHECK(as_mention_set(pairs) == expected);
}

TEST_CASE("same name in both blocks is kept as two distinct mentions") {
  const Letter letter = make_letter("xb", {"A"}, {"A"});
  const auto pairs = extract_pairs(letter);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].higher == MentionRef{Role::Sender, 0});
  CHECK(pairs[0].lower == MentionRef{Role::Recipient, 0});
}

TEST_CASE("parse_corpus reads the formula example") {
  std::istringstream in(
      R"({"id":"ex1","senders":["Aššur-idī","Aššur-nādā"],"recipients":["Amur-Ištar","Alāhum","Aššur-taklāku"],"first_block":"senders"})"
      "\n");
  const auto corpus = parse_corpus(in);
  REQUIRE(corpus.size() == 1);
  CHECK(corpus[0] == formula_example());
}

TEST_CASE("parse_corpus normalizes tokens to NFC and strips whitespace") {
  // "Aš..." is the fully decomposed spelling of the same name
  std::istringstream in(
      "{\"id\":\"n1\",\"senders\":[\" As\\u030cs\\u030cur-idi\\u0304 \"],"
      "\"recipients\":[\"B\"],\"first_block\":\"senders\"}\n");
  const auto corpus = parse_corpus(in);
  REQUIRE(corpus.size() == 1);
  CHECK(corpus[0].senders[0] == "Aššur-idī");
}

TEST_CASE("nfc normalization matches reference vectors") {
  // expected bytes generated with an independent Unicode implementation
  CHECK(nfc("As\xcc\x8cs\xcc\x8cur-idi\xcc\x84") == "A\xc5\xa1\xc5\xa1ur-id\xc4\xab");
  CHECK(nfc("A\xc5\xa1\xc5\xa1ur-n\xc4\x81"
            "d\xc4\x81") == "A\xc5\xa1\xc5\xa1ur-n\xc4\x81"
                            "d\xc4\x81");
  CHECK(nfc("h\xcc\xae"
            "amus\xcc\x8c"
            "tum") == "\xe1\xb8\xab"
                      "amu\xc5\xa1tum");
  // combining marks reorder canonically before composition
  CHECK(nfc("e\xcc\x81\xcc\xa7x") == "\xc8\xa9\xcc\x81x");
  CHECK(normalize_name_token("  Inna\xcc\x84ya\t") == "Inn\xc4\x81ya");
}

TEST_CASE("parse_corpus edge cases and errors") {
  SUBCASE("empty input gives an empty corpus") {
    std::istringstream in("");
    CHECK(parse_corpus(in).empty());
  }
  SUBCASE("blank lines are skipped") {
    std::istringstream in(
        "\n  \n{\"id\":\"a\",\"senders\":[\"X\"],\"recipients\":[],\"first_block\":\"senders\"}\n\n");
    CHECK(parse_corpus(in).size() == 1);
  }
  SUBCASE("both blocks empty") {
    std::istringstream in(R"({"id":"a","senders":[],"recipients":[],"first_block":"senders"})");
    CHECK_THROWS_WITH_AS(parse_corpus(in), doctest::Contains("both blocks empty"),
                         ValidationError);
  }
  SUBCASE("first_block names an empty block") {
    std::istringstream in(
        R"({"id":"a","senders":[],"recipients":["B"],"first_block":"senders"})");
    CHECK_THROWS_WITH_AS(parse_corpus(in), doctest::Contains("empty block"), ValidationError);
  }
  SUBCASE("malformed json cites the line number") {
    std::istringstream in(
        "{\"id\":\"a\",\"senders\":[\"X\"],\"recipients\":[],\"first_block\":\"senders\"}\n"
        "{\"id\":\"b\",\"senders\":[\"X\"],\"recipients\":[],\"first_block\":\"senders\"}\n"
        "{not json\n");
    CHECK_THROWS_WITH_AS(parse_corpus(in), doctest::Contains("line 3"), ParseError);
  }
  SUBCASE("missing field") {
    std::istringstream in(R"({"id":"a","senders":["X"],"first_block":"senders"})");
    CHECK_THROWS_WITH_AS(parse_corpus(in), doctest::Contains("recipients"), ParseError);
  }
  SUBCASE("wrong field type") {
    std::istringstream in(R"({"id":"a","senders":"X","recipients":[],"first_block":"senders"})");
    CHECK_THROWS_AS(parse_corpus(in), ParseError);
  }
  SUBCASE("bad first_block value") {
    std::istringstream in(R"({"id":"a","senders":["X"],"recipients":[],"first_block":"sender"})");
    CHECK_THROWS_AS(parse_corpus(in), ParseError);
  }
  SUBCASE("duplicate letter ids are rejected") {
    std::istringstream in(
        "{\"id\":\"a\",\"senders\":[\"X\"],\"recipients\":[],\"first_block\":\"senders\"}\n"
        "{\"id\":\"a\",\"senders\":[\"Y\"],\"recipients\":[],\"first_block\":\"senders\"}\n");
    CHECK_THROWS_WITH_AS(parse_corpus(in), doctest::Contains("duplicate letter id"), ParseError);
  }
  SUBCASE("token empty after normalization") {
    std::istringstream in(R"({"id":"a","senders":["  "],"recipients":[],"first_block":"senders"})");
    CHECK_THROWS_WITH_AS(parse_corpus(in), doctest::Contains("empty"), ValidationError);
  }
}

TEST_CASE("parse/serialize round-trip is the identity") {
  std::istringstream in(
      R"({"id":"ex1","senders":["Aššur-idī","Aššur-nādā"],"recipients":["Amur-Ištar","Alāhum","Aššur-taklāku"],"first_block":"senders"})"
      "\n"
      R"({"id":"TC1,33","senders":["Innāya"],"recipients":["Puzur-Aššur"],"first_block":"recipients"})"
      "\n");
  const auto corpus = parse_corpus(in);
  std::ostringstream out;
  write_corpus(out, corpus);
  std::istringstream again(out.str());
  CHECK(parse_corpus(again) == corpus);
}

TEST_CASE("build_vocabulary dedupes in first-appearance order") {
  SUBCASE("repeated tokens") {
    const std::vector<Letter> corpus = {make_letter("a", {"A", "B"}, {"A"})};
    const Vocabulary vocab = build_vocabulary(corpus);
    CHECK(vocab.size() == 2);
    CHECK(vocab.id_of("A") == 0);
    CHECK(vocab.id_of("B") == 1);
    CHECK(vocab.token(0) == "A");
    CHECK(vocab.id_of("C") == -1);
  }
  SUBCASE("empty corpus") { CHECK(build_vocabulary({}).size() == 0); }
  SUBCASE("formula example has five distinct names") {
    CHECK(build_vocabulary({formula_example()}).size() == 5);
  }
}

TEST_CASE("corpus_stats") {
  SUBCASE("formula example") {
    CHECK(corpus_stats({formula_example()}) == CorpusStats{1, 5, 5, 7});
  }
  SUBCASE("empty corpus") { CHECK(corpus_stats({}) == CorpusStats{0, 0, 0, 0}); }
  SUBCASE("two copies with distinct ids: pairs dedupe only within a letter") {
    Letter second = formula_example();
    second.id = "ex2";
    CHECK(corpus_stats({formula_example(), second}) == CorpusStats{2, 10, 5, 14});
  }
}

TEST_CASE("pairs csv export") {
  std::ostringstream out;
  write_pairs_csv(out, {make_letter("TC1,33", {"A"}, {"B"})});
  CHECK(out.str() ==
        "letter_id,higher_name,higher_role,higher_pos,lower_name,lower_role,lower_pos\n"
        "\"TC1,33\",A,sender,0,B,recipient,0\n");
}

TEST_CASE("corpus index flattens mentions in sweep order") {
  const std::vector<Letter> letters = {make_letter("l1", {"A", "B"}, {"C"}),
                                       make_letter("l2", {"B"}, {"D"})};
  const CorpusIndex index(letters);
  REQUIRE(index.num_mentions() == 5);
  CHECK(index.vocab().size() == 4);
  CHECK(index.mentions()[0].name == index.vocab().id_of("A"));
  CHECK(index.mentions()[3].name == index.vocab().id_of("B"));
  CHECK(index.key_of(0) == "l1#s0");
  CHECK(index.key_of(2) == "l1#r0");
  CHECK(index.find_mention("l2#r0") == 4);
  CHECK(index.find_mention("l2#r1") == std::nullopt);
  CHECK(index.find_mention("zz#s0") == std::nullopt);
  CHECK(index.find_letter("l2") == 1);

  // pairs of l1: A>=B (block order) and A>=C (first mention); l2: B>=D
  CHECK(index.pairs().size() == 3);
  CHECK(index.incident(0).size() == 2);  // A on the higher side twice
  REQUIRE(index.incident(2).size() == 1);  // C only dominated by the first mention
  CHECK(index.incident(2)[0].sign == -1.0);
  CHECK(index.incident(2)[0].other == 0);
}
