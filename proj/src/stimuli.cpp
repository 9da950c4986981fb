#include "braindec/stimuli.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "braindec/common.hpp"
#include "json.hpp"

namespace braindec::stimuli {

using nlohmann::json;

std::string condition_name(Condition c) {
  switch (c) {
    case Condition::Sentence: return "sentence";
    case Condition::Jabberwocky: return "jabberwocky";
    case Condition::WordList: return "wordlist";
  }
  return "?";
}

Condition parse_condition(const std::string& name) {
  if (name == "sentence") return Condition::Sentence;
  if (name == "jabberwocky") return Condition::Jabberwocky;
  if (name == "wordlist") return Condition::WordList;
  throw ValidationError("unknown condition '" + name + "'");
}

std::string pos_name(Pos p) {
  switch (p) {
    case Pos::Adj: return "Adj";
    case Pos::N: return "N";
    case Pos::V: return "V";
    case Pos::Conj: return "Conj";
    case Pos::Det: return "Det";
  }
  return "?";
}

Pos parse_pos(const std::string& name) {
  if (name == "Adj") return Pos::Adj;
  if (name == "N") return Pos::N;
  if (name == "V") return Pos::V;
  if (name == "Conj") return Pos::Conj;
  if (name == "Det") return Pos::Det;
  throw ValidationError("unknown POS tag '" + name + "'");
}

const std::vector<Pos>& sentence_template() {
  static const std::vector<Pos> t = {Pos::Adj, Pos::N, Pos::V,   Pos::N, Pos::Conj,
                                     Pos::Det, Pos::Adj, Pos::N, Pos::V, Pos::N};
  return t;
}

const std::vector<Pos>& wordlist_template(WordListTemplate t) {
  static const std::vector<Pos> a = {Pos::V, Pos::V, Pos::Adj, Pos::Adj, Pos::Det,
                                     Pos::Conj, Pos::N, Pos::N, Pos::N, Pos::N};
  static const std::vector<Pos> b = {Pos::N, Pos::N, Pos::N, Pos::N, Pos::Det,
                                     Pos::Conj, Pos::V, Pos::V, Pos::Adj, Pos::Adj};
  return t == WordListTemplate::A ? a : b;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

namespace {

bool in_alphabet(char c) { return c >= 'a' && c <= 'z'; }

void validate_word(const Word& w, int sentence_id) {
  if (w.surface.empty())
    throw ValidationError("sentence " + std::to_string(sentence_id) + ": empty word surface");
  for (char c : w.surface)
    if (!in_alphabet(c))
      throw ValidationError("sentence " + std::to_string(sentence_id) + ": surface '" +
                            w.surface + "' has characters outside the alphabet");
  if (w.onset_ms < 0.0)
    throw ValidationError("sentence " + std::to_string(sentence_id) + ": negative onset");
}

bool matches(const std::vector<Word>& words, const std::vector<Pos>& tmpl) {
  if (words.size() != tmpl.size()) return false;
  for (std::size_t i = 0; i < words.size(); ++i)
    if (words[i].pos != tmpl[i]) return false;
  return true;
}

std::vector<std::string> sorted_surfaces(const std::vector<Word>& words) {
  std::vector<std::string> s;
  s.reserve(words.size());
  for (const auto& w : words) s.push_back(w.surface);
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace

void StimulusSentence::validate() const {
  for (const auto& w : words) validate_word(w, id);
  if (condition == Condition::Sentence || condition == Condition::Jabberwocky) {
    if (!matches(words, sentence_template()))
      throw ValidationError("sentence " + std::to_string(id) + " (" +
                            condition_name(condition) + "): POS sequence does not match the "
                            "[Adj N V N Conj Det Adj N V N] template");
  } else {
    if (!matches(words, wordlist_template(WordListTemplate::A)) &&
        !matches(words, wordlist_template(WordListTemplate::B)))
      throw ValidationError("sentence " + std::to_string(id) +
                            " (wordlist): POS sequence matches neither word-list template");
  }
  if (condition != Condition::Sentence && !source_id)
    throw ValidationError("sentence " + std::to_string(id) + " (" + condition_name(condition) +
                          "): missing source_id alignment link");
}

const StimulusSentence* Corpus::find(Condition c, int id) const {
  auto it = sentences.find({static_cast<int>(c), id});
  return it == sentences.end() ? nullptr : &it->second;
}

std::vector<const StimulusSentence*> Corpus::by_condition(Condition c) const {
  std::vector<const StimulusSentence*> out;
  for (const auto& [key, s] : sentences)
    if (key.first == static_cast<int>(c)) out.push_back(&s);
  return out;
}

void Corpus::validate() const {
  for (const auto& [key, s] : sentences) {
    s.validate();
    if (s.condition == Condition::Sentence) continue;
    const StimulusSentence* src = find(Condition::Sentence, s.source_id.value_or(s.id));
    if (!src)
      throw ValidationError("sentence " + std::to_string(s.id) + " (" +
                            condition_name(s.condition) + "): no Sentence counterpart with id " +
                            std::to_string(s.source_id.value_or(s.id)));
    if (s.condition == Condition::Jabberwocky) {
      if (s.words.size() != src->words.size())
        throw ValidationError("sentence " + std::to_string(s.id) +
                              " (jabberwocky): word count differs from source");
      for (std::size_t i = 0; i < s.words.size(); ++i)
        if (s.words[i].pos != src->words[i].pos)
          throw ValidationError("sentence " + std::to_string(s.id) +
                                " (jabberwocky): POS mismatch with source at position " +
                                std::to_string(i));
    } else {
      if (sorted_surfaces(s.words) != sorted_surfaces(src->words))
        throw ValidationError("sentence " + std::to_string(s.id) +
                              " (wordlist): surface multiset differs from source");
      if (!s.permutation || s.permutation->size() != s.words.size())
        throw ValidationError("sentence " + std::to_string(s.id) +
                              " (wordlist): missing or malformed permutation");
      std::vector<bool> seen(s.words.size(), false);
      for (int p : *s.permutation) {
        if (p < 0 || p >= static_cast<int>(s.words.size()) || seen[p])
          throw ValidationError("sentence " + std::to_string(s.id) +
                                " (wordlist): permutation is not a bijection");
        seen[p] = true;
      }
    }
  }
}

namespace {

// The file format carries no permutation; rebuild it by matching each
// word-list surface to the first unused source position with that surface.
std::vector<int> reconstruct_permutation(const StimulusSentence& wl,
                                         const StimulusSentence& src) {
  std::vector<int> perm(wl.words.size(), -1);
  std::vector<bool> used(src.words.size(), false);
  for (std::size_t i = 0; i < wl.words.size(); ++i) {
    bool found = false;
    for (std::size_t j = 0; j < src.words.size(); ++j) {
      if (!used[j] && src.words[j].surface == wl.words[i].surface) {
        perm[i] = static_cast<int>(j);
        used[j] = true;
        found = true;
        break;
      }
    }
    if (!found)
      throw ValidationError("sentence " + std::to_string(wl.id) +
                            " (wordlist): surface '" + wl.words[i].surface +
                            "' has no unused counterpart in source");
  }
  return perm;
}

}  // namespace

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open stimulus file '" + path + "'");
  Corpus corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError("parse error in '" + path + "' line " + std::to_string(line_no) +
                            ": " + e.what());
    }
    StimulusSentence s;
    try {
      s.id = j.at("id").get<int>();
      s.condition = parse_condition(j.at("condition").get<std::string>());
      if (j.contains("source_id")) s.source_id = j.at("source_id").get<int>();
      for (const auto& jw : j.at("words")) {
        Word w;
        w.surface = jw.at("surface").get<std::string>();
        w.pos = parse_pos(jw.at("pos").get<std::string>());
        w.onset_ms = jw.at("onset_ms").get<double>();
        s.words.push_back(std::move(w));
      }
    } catch (const json::exception& e) {
      throw ValidationError("parse error in '" + path + "' line " + std::to_string(line_no) +
                            ": " + e.what());
    }
    if (s.condition != Condition::Sentence && !s.source_id) s.source_id = s.id;
    corpus.sentences.emplace(std::make_pair(static_cast<int>(s.condition), s.id), std::move(s));
  }
  // Word lists need their permutation reconstructed before validation.
  for (auto& [key, s] : corpus.sentences) {
    if (s.condition != Condition::WordList) continue;
    const StimulusSentence* src = corpus.find(Condition::Sentence, s.source_id.value_or(s.id));
    if (!src)
      throw ValidationError("sentence " + std::to_string(s.id) +
                            " (wordlist): no Sentence counterpart with id " +
                            std::to_string(s.source_id.value_or(s.id)));
    s.permutation = reconstruct_permutation(s, *src);
  }
  corpus.validate();
  int n = 0;
  for (const auto& [key, s] : corpus.sentences)
    if (s.condition == Condition::Sentence) ++n;
  corpus.n_per_condition = n;
  return corpus;
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write stimulus file '" + path + "'");
  for (const auto& [key, s] : corpus.sentences) {
    json j;
    j["id"] = s.id;
    j["condition"] = condition_name(s.condition);
    if (s.source_id) j["source_id"] = *s.source_id;
    json words = json::array();
    for (const auto& w : s.words)
      words.push_back({{"surface", w.surface}, {"pos", pos_name(w.pos)}, {"onset_ms", w.onset_ms}});
    j["words"] = std::move(words);
    out << j.dump() << "\n";
  }
}

std::vector<Word> content_words(const StimulusSentence& s) {
  std::vector<Word> out;
  out.reserve(s.words.size());
  for (const auto& w : s.words)
    if (!w.is_function_word()) out.push_back(w);
  return out;
}

StimulusSentence make_wordlist(const StimulusSentence& s, std::uint64_t seed,
                               WordListTemplate tmpl) {
  if (s.condition != Condition::Sentence)
    throw ValidationError("make_wordlist: input must be a Sentence-condition stimulus");
  const std::vector<Pos>& target = wordlist_template(tmpl);

  std::map<Pos, std::vector<int>> by_pos;
  for (std::size_t i = 0; i < s.words.size(); ++i) by_pos[s.words[i].pos].push_back(static_cast<int>(i));

  std::map<Pos, int> needed;
  for (Pos p : target) ++needed[p];
  for (const auto& [pos, count] : needed)
    if (static_cast<int>(by_pos[pos].size()) != count)
      throw ValidationError("make_wordlist: template infeasible for sentence " +
                            std::to_string(s.id) + " (needs " + std::to_string(count) + " " +
                            pos_name(pos) + ", has " + std::to_string(by_pos[pos].size()) + ")");

  for (auto& [pos, idxs] : by_pos) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(pos)));
    std::shuffle(idxs.begin(), idxs.end(), rng);
  }

  StimulusSentence out;
  out.id = s.id;
  out.condition = Condition::WordList;
  out.source_id = s.id;
  std::vector<int> perm;
  std::map<Pos, std::size_t> next;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const int src_idx = by_pos[target[i]][next[target[i]]++];
    Word w = s.words[src_idx];
    w.onset_ms = s.words[i].onset_ms;  // word-list timing follows slot order
    out.words.push_back(std::move(w));
    perm.push_back(src_idx);
  }
  out.permutation = std::move(perm);
  return out;
}

Word pseudoword_transform(const Word& w, std::uint64_t seed) {
  if (w.is_function_word())
    throw ValidationError("pseudoword_transform: function word '" + w.surface +
                          "' must stay intact");
  static const std::string vowels = "aeiou";
  static const std::string consonants = "bcdfghjklmnpqrstvwxyz";

  Word out = w;
  const std::size_t len = w.surface.size();
  std::mt19937_64 rng(mix_seed(seed, std::hash<std::string>{}(w.surface)));

  auto substitute = [&](char c) {
    const std::string& cls = is_vowel(c) ? vowels : consonants;
    std::uniform_int_distribution<std::size_t> pick(0, cls.size() - 1);
    return cls[pick(rng)];
  };

  if (len == 1) {
    out.surface[0] = substitute(w.surface[0]);
    return out;
  }
  if (len == 2) return out;  // whole word is the preserved suffix

  const std::size_t mutable_len = len - 2;
  for (std::size_t i = 0; i < mutable_len; ++i) out.surface[i] = substitute(w.surface[i]);
  if (out.surface == w.surface) {
    // Force a change at the first mutable position, staying in class.
    const char c = w.surface[0];
    const std::string& cls = is_vowel(c) ? vowels : consonants;
    const std::size_t at = cls.find(c);
    out.surface[0] = cls[(at + 1) % cls.size()];
  }
  return out;
}

StimulusSentence make_jabberwocky(const StimulusSentence& s, std::uint64_t seed) {
  if (s.condition != Condition::Sentence)
    throw ValidationError("make_jabberwocky: input must be a Sentence-condition stimulus");
  StimulusSentence out;
  out.id = s.id;
  out.condition = Condition::Jabberwocky;
  out.source_id = s.id;
  out.words = s.words;
  for (std::size_t i = 0; i < out.words.size(); ++i)
    if (!out.words[i].is_function_word())
      out.words[i] = pseudoword_transform(out.words[i], mix_seed(seed, i));
  return out;
}

}  // namespace braindec::stimuli
