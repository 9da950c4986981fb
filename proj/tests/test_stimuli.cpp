#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <fstream>
#include <set>

#include "braindec/common.hpp"
#include "braindec/stimuli.hpp"
#include "doctest.h"

using namespace braindec;
using namespace braindec::stimuli;

namespace {

const std::string kExampleFile = std::string(BRAINDEC_DATA_DIR) + "/stimuli_example.jsonl";

StimulusSentence example_sentence() {
  Corpus c = load_corpus(kExampleFile);
  return *c.find(Condition::Sentence, 1);
}

std::multiset<std::string> surfaces(const std::vector<Word>& words) {
  std::multiset<std::string> s;
  for (const auto& w : words) s.insert(w.surface);
  return s;
}

}  // namespace

TEST_CASE("load_corpus reads the example triple with alignment intact") {
  const Corpus c = load_corpus(kExampleFile);
  CHECK(c.sentences.size() == 3);
  CHECK(c.n_per_condition == 1);

  const auto* sen = c.find(Condition::Sentence, 1);
  const auto* jab = c.find(Condition::Jabberwocky, 1);
  const auto* wl = c.find(Condition::WordList, 1);
  REQUIRE(sen);
  REQUIRE(jab);
  REQUIRE(wl);
  CHECK(sen->words[0].surface == "lange");
  CHECK(jab->source_id == 1);
  CHECK(wl->source_id == 1);
  REQUIRE(wl->permutation.has_value());
  // Reconstructed permutation maps each word-list slot to its source slot.
  for (std::size_t i = 0; i < wl->words.size(); ++i)
    CHECK(sen->words[(*wl->permutation)[i]].surface == wl->words[i].surface);
}

TEST_CASE("load_corpus accepts an empty file") {
  const std::string path = "empty_stimuli.jsonl";
  std::ofstream(path).close();
  const Corpus c = load_corpus(path);
  CHECK(c.sentences.empty());
  CHECK(c.n_per_condition == 0);
}

TEST_CASE("load_corpus rejects a jabberwocky shorter than its source") {
  const std::string path = "bad_stimuli.jsonl";
  {
    std::ifstream in(kExampleFile);
    std::ofstream out(path);
    std::string line;
    std::getline(in, line);
    out << line << "\n";
    out << R"({"id": 1, "condition": "jabberwocky", "source_id": 1, "words": [)"
        << R"({"surface": "lalve", "pos": "Adj", "onset_ms": 0},)"
        << R"({"surface": "wanzen", "pos": "N", "onset_ms": 400},)"
        << R"({"surface": "botren", "pos": "V", "onset_ms": 800},)"
        << R"({"surface": "raasjes", "pos": "N", "onset_ms": 1200},)"
        << R"({"surface": "en", "pos": "Conj", "onset_ms": 1600},)"
        << R"({"surface": "de", "pos": "Det", "onset_ms": 2000},)"
        << R"({"surface": "reeve", "pos": "Adj", "onset_ms": 2400},)"
        << R"({"surface": "rorden", "pos": "N", "onset_ms": 2800},)"
        << R"({"surface": "brargen", "pos": "V", "onset_ms": 3200}]})" << "\n";
  }
  CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains("1"), ValidationError);
}

TEST_CASE("load_corpus rejects malformed JSON lines") {
  const std::string path = "malformed_stimuli.jsonl";
  std::ofstream(path) << "{not json\n";
  CHECK_THROWS_AS(load_corpus(path), ValidationError);
}

TEST_CASE("content_words drops exactly the determiner and conjunction") {
  const auto sen = example_sentence();
  const auto content = content_words(sen);
  REQUIRE(content.size() == 8);
  for (const auto& w : content) CHECK_FALSE(w.is_function_word());
  CHECK(content[0].surface == "lange");
  CHECK(content[4].surface == "lieve");  // "en de" removed between
}

TEST_CASE("content_words handles all-function and no-function sentences") {
  StimulusSentence s;
  s.words = {{"de", Pos::Det, 0.0}, {"en", Pos::Conj, 100.0}};
  CHECK(content_words(s).empty());

  StimulusSentence t;
  t.words = {{"mannen", Pos::N, 0.0}, {"bouwen", Pos::V, 100.0}};
  const auto kept = content_words(t);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].surface == "mannen");
}

TEST_CASE("content_words is idempotent") {
  const auto sen = example_sentence();
  StimulusSentence lifted;
  lifted.words = content_words(sen);
  const auto again = content_words(lifted);
  REQUIRE(again.size() == lifted.words.size());
  for (std::size_t i = 0; i < again.size(); ++i)
    CHECK(again[i].surface == lifted.words[i].surface);
}

TEST_CASE("make_wordlist follows template B and preserves the multiset") {
  const auto sen = example_sentence();
  const auto wl = make_wordlist(sen, 42, WordListTemplate::B);
  CHECK(wl.condition == Condition::WordList);
  CHECK(wl.source_id == 1);
  for (int i = 0; i < 4; ++i) CHECK(wl.words[i].pos == Pos::N);
  CHECK(wl.words[4].pos == Pos::Det);
  CHECK(wl.words[5].pos == Pos::Conj);
  CHECK(surfaces(wl.words) == surfaces(sen.words));
  wl.validate();

  const auto again = make_wordlist(sen, 42, WordListTemplate::B);
  for (std::size_t i = 0; i < wl.words.size(); ++i)
    CHECK(wl.words[i].surface == again.words[i].surface);

  const auto wl_a = make_wordlist(sen, 42, WordListTemplate::A);
  CHECK(wl_a.words[0].pos == Pos::V);
}

TEST_CASE("make_wordlist rejects infeasible POS multisets") {
  auto sen = example_sentence();
  sen.words[2].pos = Pos::N;  // 5 nouns, 1 verb
  CHECK_THROWS_AS(make_wordlist(sen, 1, WordListTemplate::A), ValidationError);
}

TEST_CASE("pseudoword_transform keeps length, suffix and character classes") {
  const Word w{"mannen", Pos::N, 400.0};
  const Word p = pseudoword_transform(w, 7);
  CHECK(p.surface.size() == 6);
  CHECK(p.surface.substr(4) == "en");
  CHECK(p.surface != "mannen");
  CHECK(p.pos == Pos::N);
  for (std::size_t i = 0; i < p.surface.size(); ++i)
    CHECK(is_vowel(p.surface[i]) == is_vowel(w.surface[i]));
}

TEST_CASE("pseudoword_transform rejects function words") {
  const Word det{"de", Pos::Det, 0.0};
  CHECK_THROWS_AS(pseudoword_transform(det, 1), ValidationError);
}

TEST_CASE("pseudoword_transform on a single letter substitutes within class") {
  const Word w{"u", Pos::N, 0.0};
  const Word p = pseudoword_transform(w, 3);
  CHECK(p.surface.size() == 1);
  CHECK(is_vowel(p.surface[0]));
}

TEST_CASE("pseudoword_transform never breaks the skeleton over many draws") {
  const std::vector<std::string> words = {"bouwen", "huisjes", "planken", "grote", "stille",
                                          "vogels", "tafels",  "deuren"};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const auto& s : words) {
      const Word p = pseudoword_transform({s, Pos::N, 0.0}, seed);
      REQUIRE(p.surface.size() == s.size());
      CHECK(p.surface.substr(s.size() - 2) == s.substr(s.size() - 2));
      for (std::size_t i = 0; i < s.size(); ++i)
        CHECK(is_vowel(p.surface[i]) == is_vowel(s[i]));
      if (s.size() >= 3) CHECK(p.surface != s);
    }
  }
}

TEST_CASE("make_jabberwocky preserves POS, count and function words") {
  const auto sen = example_sentence();
  const auto jab = make_jabberwocky(sen, 11);
  REQUIRE(jab.words.size() == sen.words.size());
  for (std::size_t i = 0; i < jab.words.size(); ++i)
    CHECK(jab.words[i].pos == sen.words[i].pos);
  CHECK(jab.words[4].surface == "en");
  CHECK(jab.words[5].surface == "de");
  jab.validate();
}

TEST_CASE("save_corpus round-trips through load_corpus") {
  const Corpus c = load_corpus(kExampleFile);
  save_corpus("roundtrip_stimuli.jsonl", c);
  const Corpus c2 = load_corpus("roundtrip_stimuli.jsonl");
  REQUIRE(c2.sentences.size() == c.sentences.size());
  const auto* a = c.find(Condition::Jabberwocky, 1);
  const auto* b = c2.find(Condition::Jabberwocky, 1);
  for (std::size_t i = 0; i < a->words.size(); ++i) {
    CHECK(a->words[i].surface == b->words[i].surface);
    CHECK(a->words[i].onset_ms == b->words[i].onset_ms);
  }
}
