#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "braindec/linalg.hpp"
#include "braindec/stimuli.hpp"

namespace braindec::charlm {

struct ModelConfig {
  int char_embed_dim = 15;
  int max_word_len = 16;  // includes the begin/end-of-word markers
  std::vector<int> filter_widths = {1, 2, 3, 4, 5, 6};
  std::vector<int> filters_per_width = {25, 50, 75, 100, 125, 150};
  int highway_layers = 1;
  int lstm_hidden_dim = 300;
  static constexpr int lstm_layers = 3;
  int word_vocab_size = 0;  // filled from the vocabulary
  int char_vocab_size = 0;

  int conv_feature_dim() const;
  int embedding_feature_dim() const { return char_embed_dim * max_word_len; }
  void validate() const;
};

// Character ids: 0 is padding (implicit all-zero, untrainable embedding),
// 1 the unknown-character id that makes arbitrary pseudo-words processable,
// 2/3 the begin/end-of-word markers, then the observed characters.
struct CharVocab {
  static constexpr int kPad = 0, kUnk = 1, kBow = 2, kEow = 3;
  std::string chars;  // characters with ids 4..

  int size() const { return 4 + static_cast<int>(chars.size()); }
  int id_of(char c) const;
  static CharVocab build(std::span<const std::string> tokens);
  std::string hash() const;
};

struct WordVocab {
  static constexpr int kUnk = 0, kEos = 1;
  std::vector<std::string> words;  // words[0] = "<unk>", words[1] = "<eos>"
  std::unordered_map<std::string, int> to_id;

  int size() const { return static_cast<int>(words.size()); }
  int id_of(const std::string& w) const;  // OOV maps to kUnk
  static WordVocab build(std::span<const std::string> tokens);
  std::string hash() const;
};

struct TokenizedCorpus {
  WordVocab word_vocab;
  CharVocab char_vocab;
  std::vector<std::string> tokens;  // lines joined, "<eos>" after each line
  std::vector<int> token_ids;
};

TokenizedCorpus build_corpus(const std::vector<std::string>& lines);
TokenizedCorpus load_text_corpus(const std::string& path);  // one sentence per line

// The five representation families extracted per word position.
struct LayerActivations {
  std::vector<double> embedding;  // char embeddings concatenated, zero-padded
  std::vector<double> conv;       // max-pooled convolution outputs concatenated
  std::vector<double> lstm1, lstm2, lstm3;

  const std::vector<double>& by_name(const std::string& layer) const;
};

const std::array<std::string, 5>& layer_names();
int layer_dim(const ModelConfig& cfg, const std::string& layer);

struct LstmLayerWeights {
  linalg::Matrix w;       // 4h x input, gate order [input, forget, cell, output]
  linalg::Matrix u;       // 4h x h
  std::vector<double> b;  // 4h
};

struct ModelWeights {
  ModelConfig config;
  CharVocab char_vocab;
  WordVocab word_vocab;

  linalg::Matrix char_embedding;            // C x e; row 0 (pad) stays zero
  std::vector<linalg::Matrix> conv_kernel;  // per width: n_filters x (width*e)
  std::vector<std::vector<double>> conv_bias;
  std::vector<linalg::Matrix> hw_gate_w, hw_transform_w;  // M x M per highway layer
  std::vector<std::vector<double>> hw_gate_b, hw_transform_b;
  std::array<LstmLayerWeights, 3> lstm;
  linalg::Matrix out_w;  // V x h
  std::vector<double> out_b;

  static ModelWeights init(const ModelConfig& cfg, const CharVocab& cv, const WordVocab& wv,
                           std::uint64_t seed);
  static ModelWeights zeros(const ModelConfig& cfg, const CharVocab& cv, const WordVocab& wv);
};

// Trainable parameters in checkpoint order. The pad embedding row is not a
// parameter and is excluded.
struct ParamBlock {
  std::string name;
  double* data;
  std::size_t size;
};
std::vector<ParamBlock> param_blocks(ModelWeights& w);

struct LstmState {
  std::array<std::vector<double>, 3> h, c;
  static LstmState zero(const ModelConfig& cfg);
};

// [BOW] + char ids + [EOW], truncated/zero-padded to max_word_len.
std::vector<int> encode_word_chars(const std::string& surface, const CharVocab& vocab,
                                   int max_word_len);

struct ForwardResult {
  LayerActivations activations;
  std::vector<double> log_probs;  // next-word log-distribution
  LstmState state;
};

ForwardResult forward_word(const ModelWeights& weights, const LstmState& state,
                           const std::string& surface);

// Per-content-word activations; function words are fed for context but their
// positions are dropped. State is zeroed at sentence start.
std::vector<LayerActivations> extract_representations(const ModelWeights& weights,
                                                      const stimuli::StimulusSentence& sentence);

// Same, keeping every position (probing-task inputs are plain token lists).
std::vector<LayerActivations> extract_layer_sequence(const ModelWeights& weights,
                                                     std::span<const std::string> tokens);

struct TrainConfig {
  int epochs = 40;
  int batch_size = 50;
  int sequence_length = 20;
  double initial_lr = 0.8;
  double decay_rate = 0.5;  // inverse time decay, stepped per epoch
  double gradient_clip = 5.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  ModelWeights weights;
  std::vector<double> loss_curve;  // per-epoch mean cross-entropy
};

TrainResult train(const ModelConfig& cfg, const TrainConfig& tcfg, const TokenizedCorpus& corpus);

// exp(mean_t -log p(target_t | inputs_1..t)); inputs and targets may differ
// (cross-condition evaluation feeds pseudo-words, scores real next words).
double perplexity(const ModelWeights& weights, std::span<const std::string> inputs,
                  std::span<const std::string> targets);

struct GradientCheckResult {
  double max_rel_error = 0.0;
  double grad_norm = 0.0;
  int n_checked = 0;
};

// Central finite differences (step 1e-5) against the analytic gradients on
// randomly sampled parameters spanning every weight family.
GradientCheckResult gradient_check(const ModelWeights& weights,
                                   const std::vector<std::vector<std::string>>& sequences,
                                   int min_samples = 200, std::uint64_t seed = 0);

// Checkpoint: one JSON header line (config, vocabularies + hashes, block
// table, format version) followed by raw little-endian doubles per block.
void save_checkpoint(const std::string& path, const ModelWeights& weights);
ModelWeights load_checkpoint(const std::string& path);

}  // namespace braindec::charlm
