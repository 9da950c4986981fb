#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

#include "braindec/charlm.hpp"
#include "braindec/common.hpp"
#include "doctest.h"

using namespace braindec;
using namespace braindec::charlm;

namespace {

const std::string kTinyCorpus = std::string(BRAINDEC_DATA_DIR) + "/corpus_tiny_nl.txt";

ModelConfig tiny_config() {
  ModelConfig c;
  c.char_embed_dim = 6;
  c.max_word_len = 10;
  c.filter_widths = {1, 2, 3};
  c.filters_per_width = {6, 6, 6};
  c.highway_layers = 1;
  c.lstm_hidden_dim = 12;
  return c;
}

ModelWeights tiny_model(std::uint64_t seed = 1) {
  const auto corpus = load_text_corpus(kTinyCorpus);
  return ModelWeights::init(tiny_config(), corpus.char_vocab, corpus.word_vocab, seed);
}

bool same_vec(const std::vector<double>& a, const std::vector<double>& b) { return a == b; }

}  // namespace

TEST_CASE("encode_word_chars pads, truncates and keeps the end marker") {
  const auto corpus = load_text_corpus(kTinyCorpus);
  const auto& cv = corpus.char_vocab;

  const auto de = encode_word_chars("de", cv, 8);
  REQUIRE(de.size() == 8);
  CHECK(de[0] == CharVocab::kBow);
  CHECK(de[1] == cv.id_of('d'));
  CHECK(de[2] == cv.id_of('e'));
  CHECK(de[3] == CharVocab::kEow);
  for (int i = 4; i < 8; ++i) CHECK(de[i] == CharVocab::kPad);

  const auto longword = encode_word_chars("abcdefghij", cv, 6);
  REQUIRE(longword.size() == 6);
  CHECK(longword[0] == CharVocab::kBow);
  CHECK(longword[5] == CharVocab::kEow);

  // Unknown characters map to the reserved id instead of failing.
  const auto odd = encode_word_chars("q#x", cv, 8);
  CHECK(odd[2] == CharVocab::kUnk);
}

TEST_CASE("zero weights give the uniform next-word distribution") {
  const auto corpus = load_text_corpus(kTinyCorpus);
  const auto w = ModelWeights::zeros(tiny_config(), corpus.char_vocab, corpus.word_vocab);
  const auto r = forward_word(w, LstmState::zero(w.config), "mannen");
  const double expected = -std::log(static_cast<double>(w.config.word_vocab_size));
  for (double lp : r.log_probs) CHECK(std::abs(lp - expected) < 1e-12);
}

TEST_CASE("forward_word is deterministic and yields a probability vector") {
  const auto w = tiny_model();
  const auto state = LstmState::zero(w.config);
  const auto a = forward_word(w, state, "bouwen");
  const auto b = forward_word(w, state, "bouwen");
  CHECK(same_vec(a.log_probs, b.log_probs));
  CHECK(same_vec(a.activations.lstm3, b.activations.lstm3));

  double sum = 0.0;
  for (double lp : a.log_probs) {
    sum += std::exp(lp);
    CHECK(std::isfinite(lp));
  }
  CHECK(std::abs(sum - 1.0) < 1e-6);
}

TEST_CASE("pseudo-words always pass through and stay valid distributions") {
  const auto w = tiny_model();
  LstmState state = LstmState::zero(w.config);
  for (const auto& pseudo : {"lalve", "wanzen", "botren", "raasjes", "sponken", "xyzzyq"}) {
    const auto r = forward_word(w, state, pseudo);
    double sum = 0.0;
    for (double lp : r.log_probs) sum += std::exp(lp);
    CHECK(std::abs(sum - 1.0) < 1e-6);
    state = r.state;
  }
}

TEST_CASE("extract_representations drops function-word positions") {
  const auto w = tiny_model();
  stimuli::StimulusSentence s;
  s.id = 1;
  s.condition = stimuli::Condition::Sentence;
  const auto& tmpl = stimuli::sentence_template();
  const std::vector<std::string> surfaces = {"lange", "mannen", "bouwen", "huisjes", "en",
                                             "de",    "lieve",  "honden", "brengen", "planken"};
  for (std::size_t i = 0; i < tmpl.size(); ++i)
    s.words.push_back({surfaces[i], tmpl[i], static_cast<double>(i) * 400.0});

  const auto acts = extract_representations(w, s);
  CHECK(acts.size() == 8);
  CHECK(acts[0].embedding.size() ==
        static_cast<std::size_t>(w.config.embedding_feature_dim()));
  CHECK(acts[0].conv.size() == static_cast<std::size_t>(w.config.conv_feature_dim()));
  CHECK(acts[0].lstm2.size() == static_cast<std::size_t>(w.config.lstm_hidden_dim));
}

TEST_CASE("equal prefixes give identical first-word activations") {
  const auto w = tiny_model();
  const std::vector<std::string> a = {"mannen", "bouwen"};
  const std::vector<std::string> b = {"mannen", "dragen"};
  const auto ra = extract_layer_sequence(w, a);
  const auto rb = extract_layer_sequence(w, b);
  CHECK(same_vec(ra[0].lstm1, rb[0].lstm1));
  CHECK(same_vec(ra[0].lstm2, rb[0].lstm2));
  CHECK(same_vec(ra[0].lstm3, rb[0].lstm3));
}

TEST_CASE("representations are causal and embedding/conv are word-local") {
  const auto w = tiny_model(3);
  std::mt19937_64 rng(99);
  const std::vector<std::string> bank = {"lange", "mannen", "bouwen", "huisjes", "lieve",
                                         "honden", "brengen", "planken", "vogels", "tafels"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> tokens(6);
    for (auto& t : tokens) t = bank[rng() % bank.size()];

    // Causality: changing a later word never changes earlier activations.
    auto changed = tokens;
    changed[4] = tokens[4] == "vogels" ? "tafels" : "vogels";
    const auto base = extract_layer_sequence(w, tokens);
    const auto after = extract_layer_sequence(w, changed);
    for (int t = 0; t < 4; ++t) {
      CHECK(same_vec(base[t].lstm1, after[t].lstm1));
      CHECK(same_vec(base[t].lstm2, after[t].lstm2));
      CHECK(same_vec(base[t].lstm3, after[t].lstm3));
      CHECK(same_vec(base[t].embedding, after[t].embedding));
      CHECK(same_vec(base[t].conv, after[t].conv));
    }

    // Locality: embedding/conv at position t ignore the preceding context.
    auto permuted = tokens;
    std::shuffle(permuted.begin(), permuted.end() - 1, rng);
    permuted.back() = tokens.back();
    const auto perm = extract_layer_sequence(w, permuted);
    CHECK(same_vec(base.back().embedding, perm.back().embedding));
    CHECK(same_vec(base.back().conv, perm.back().conv));
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  const auto w = tiny_model(7);
  const std::vector<std::vector<std::string>> batch = {
      {"lange", "mannen", "bouwen", "huisjes"},
      {"de", "lieve", "honden"},
  };
  const auto res = gradient_check(w, batch, 200, 5);
  CHECK(res.n_checked >= 200);
  CHECK(res.max_rel_error < 1e-4);

  // Same seed, same value.
  const auto res2 = gradient_check(w, batch, 200, 5);
  CHECK(res.max_rel_error == res2.max_rel_error);
}

TEST_CASE("a single-word vocabulary has zero loss and zero gradients") {
  const auto corpus = load_text_corpus(kTinyCorpus);
  WordVocab wv;
  wv.words = {"mannen"};
  wv.to_id["mannen"] = 0;
  auto cfg = tiny_config();
  const auto w = ModelWeights::init(cfg, corpus.char_vocab, wv, 2);
  const auto res = gradient_check(w, {{"mannen", "mannen", "mannen"}}, 50, 1);
  CHECK(res.grad_norm < 1e-8);
}

TEST_CASE("training is seed-deterministic and epochs=0 returns the init") {
  const auto corpus = load_text_corpus(kTinyCorpus);
  TrainConfig tcfg;
  tcfg.epochs = 2;
  tcfg.seed = 11;

  auto r1 = train(tiny_config(), tcfg, corpus);
  auto r2 = train(tiny_config(), tcfg, corpus);
  auto b1 = param_blocks(r1.weights);
  auto b2 = param_blocks(r2.weights);
  for (std::size_t i = 0; i < b1.size(); ++i)
    for (std::size_t k = 0; k < b1[i].size; ++k) CHECK(b1[i].data[k] == b2[i].data[k]);

  TrainConfig zero = tcfg;
  zero.epochs = 0;
  auto r0 = train(tiny_config(), zero, corpus);
  auto init = ModelWeights::init(r0.weights.config, corpus.char_vocab, corpus.word_vocab, 11);
  auto bi = param_blocks(init);
  auto b0 = param_blocks(r0.weights);
  for (std::size_t i = 0; i < bi.size(); ++i)
    for (std::size_t k = 0; k < bi[i].size; ++k) CHECK(bi[i].data[k] == b0[i].data[k]);
  CHECK(r0.loss_curve.empty());
}

TEST_CASE("the model memorizes a 10-sentence corpus") {
  const auto corpus = load_text_corpus(kTinyCorpus);
  ModelConfig cfg = tiny_config();
  cfg.char_embed_dim = 8;
  cfg.lstm_hidden_dim = 48;
  cfg.filters_per_width = {16, 16, 16};

  // Overfit-scale recipe: one stream, short windows, gentle decay. 200 tiny
  // epochs give far fewer updates than a corpus-scale epoch, so the default
  // decay rate would starve the step budget long before memorization.
  TrainConfig tcfg;
  tcfg.epochs = 200;
  tcfg.batch_size = 1;
  tcfg.sequence_length = 3;
  tcfg.decay_rate = 0.05;
  tcfg.seed = 4;
  const auto result = train(cfg, tcfg, corpus);
  CHECK(result.loss_curve.back() < result.loss_curve.front());

  // Training perplexity on the corpus stream itself.
  std::vector<std::string> inputs(corpus.tokens.begin(), corpus.tokens.end() - 1);
  std::vector<std::string> targets(corpus.tokens.begin() + 1, corpus.tokens.end());
  const double ppl = perplexity(result.weights, inputs, targets);
  CHECK(ppl < 1.5);
}

TEST_CASE("the default training recipe carries the reference values") {
  const TrainConfig t;
  CHECK(t.epochs == 40);
  CHECK(t.batch_size == 50);
  CHECK(t.sequence_length == 20);
  CHECK(t.initial_lr == 0.8);
  CHECK(t.decay_rate == 0.5);
}

TEST_CASE("perplexity of the uniform model equals the vocabulary size") {
  const auto corpus = load_text_corpus(kTinyCorpus);
  const auto w = ModelWeights::zeros(tiny_config(), corpus.char_vocab, corpus.word_vocab);
  const std::vector<std::string> inputs = {"lange", "mannen", "bouwen"};
  const std::vector<std::string> targets = {"mannen", "bouwen", "huisjes"};
  const double ppl = perplexity(w, inputs, targets);
  const double v = static_cast<double>(w.config.word_vocab_size);
  CHECK(std::abs(ppl - v) <= 1e-9 * v);
}

TEST_CASE("perplexity supports mismatched input/target streams and rejects empty ones") {
  const auto w = tiny_model();
  const std::vector<std::string> jab = {"lalve", "wanzen", "botren"};
  const std::vector<std::string> sen_next = {"mannen", "bouwen", "huisjes"};
  CHECK(perplexity(w, jab, sen_next) > 0.0);
  CHECK_THROWS_AS(perplexity(w, {}, {}), ValidationError);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  auto w = tiny_model(13);
  save_checkpoint("lm_roundtrip.ckpt", w);
  auto back = load_checkpoint("lm_roundtrip.ckpt");

  auto ba = param_blocks(w);
  auto bb = param_blocks(back);
  REQUIRE(ba.size() == bb.size());
  for (std::size_t i = 0; i < ba.size(); ++i) {
    REQUIRE(ba[i].size == bb[i].size);
    for (std::size_t k = 0; k < ba[i].size; ++k) CHECK(ba[i].data[k] == bb[i].data[k]);
  }
  CHECK(back.char_vocab.chars == w.char_vocab.chars);
  CHECK(back.word_vocab.words == w.word_vocab.words);
}

TEST_CASE("checkpoints with edited headers are rejected") {
  auto w = tiny_model(13);
  save_checkpoint("lm_tamper.ckpt", w);

  // Edit the config: a different hidden size no longer matches the blocks.
  {
    std::ifstream in("lm_tamper.ckpt", std::ios::binary);
    std::string header;
    std::getline(in, header);
    std::string rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string from = "\"lstm_hidden_dim\":12";
    const auto at = header.find(from);
    REQUIRE(at != std::string::npos);
    header.replace(at, from.size(), "\"lstm_hidden_dim\":13");
    std::ofstream out("lm_tamper_shape.ckpt", std::ios::binary);
    out << header << "\n" << rest;
  }
  CHECK_THROWS_AS(load_checkpoint("lm_tamper_shape.ckpt"), ValidationError);

  // Edit the character vocabulary: hash mismatch.
  {
    std::ifstream in("lm_tamper.ckpt", std::ios::binary);
    std::string header;
    std::getline(in, header);
    std::string rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string from = "\"char_vocab\":\"";
    const auto at = header.find(from);
    REQUIRE(at != std::string::npos);
    header[at + from.size()] = '#';
    std::ofstream out("lm_tamper_vocab.ckpt", std::ios::binary);
    out << header << "\n" << rest;
  }
  CHECK_THROWS_WITH_AS(load_checkpoint("lm_tamper_vocab.ckpt"), doctest::Contains("vocabulary"),
                       ValidationError);
}
