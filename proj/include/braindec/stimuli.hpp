#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace braindec::stimuli {

enum class Condition { Sentence, Jabberwocky, WordList };

std::string condition_name(Condition c);
Condition parse_condition(const std::string& name);

enum class Pos { Adj, N, V, Conj, Det };

std::string pos_name(Pos p);
Pos parse_pos(const std::string& name);

inline bool is_function_pos(Pos p) { return p == Pos::Det || p == Pos::Conj; }

struct Word {
  std::string surface;
  Pos pos = Pos::N;
  double onset_ms = 0.0;

  bool is_function_word() const { return is_function_pos(pos); }
};

// The two infeasible word-list orderings.
enum class WordListTemplate { A, B };

struct StimulusSentence {
  int id = 0;
  Condition condition = Condition::Sentence;
  std::vector<Word> words;
  std::optional<int> source_id;
  std::optional<std::vector<int>> permutation;  // word-list reordering of the source

  void validate() const;  // POS template + basic word checks
};

struct Corpus {
  std::map<std::pair<int, int>, StimulusSentence> sentences;  // (condition, id) -> sentence
  int n_per_condition = 0;

  const StimulusSentence* find(Condition c, int id) const;
  std::vector<const StimulusSentence*> by_condition(Condition c) const;
  void validate() const;  // cross-condition alignment
};

// The 10-word clause template shared by Sentence and Jabberwocky.
const std::vector<Pos>& sentence_template();
const std::vector<Pos>& wordlist_template(WordListTemplate t);

// JSON-lines stimulus file: one object per line with
// {id, condition, source_id?, words: [{surface, pos, onset_ms}]}.
Corpus load_corpus(const std::string& path);
void save_corpus(const std::string& path, const Corpus& corpus);

// Drops determiners and conjunctions, preserving order.
std::vector<Word> content_words(const StimulusSentence& s);

// Rearranges a Sentence's words into the requested word-list template.
// Order within each POS class is drawn from the seed.
StimulusSentence make_wordlist(const StimulusSentence& s, std::uint64_t seed,
                               WordListTemplate tmpl);

// Within-class (vowel<->vowel, consonant<->consonant) substitution keeping
// length and the final 2-character suffix. Function words are rejected.
Word pseudoword_transform(const Word& w, std::uint64_t seed);

// Jabberwocky counterpart of a Sentence: pseudo-word content words, intact
// function words, alignment link recorded.
StimulusSentence make_jabberwocky(const StimulusSentence& s, std::uint64_t seed);

bool is_vowel(char c);

}  // namespace braindec::stimuli
