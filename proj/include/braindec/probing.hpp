#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "braindec/linalg.hpp"

namespace braindec::probing {

enum class Split { Train, Dev, Test };
enum class TaskKind { Semantic, Syntactic };

struct ProbeExample {
  std::vector<std::string> tokens;
  int label = 0;
  Split split = Split::Train;
};

struct ProbeTask {
  std::string name;
  TaskKind kind = TaskKind::Semantic;
  int n_classes = 2;
  std::vector<ProbeExample> examples;

  void validate() const;
};

// JSON: {name, kind, n_classes, examples: [{tokens, label, split}]}.
ProbeTask load_probe_task(const std::string& path);
void save_probe_task(const std::string& path, const ProbeTask& task);

// Elementwise mean over the per-word vectors (order-invariant by definition).
std::vector<double> sentence_embedding(std::span<const std::vector<double>> word_vectors);

struct MlpConfig {
  std::vector<int> hidden_sizes = {100, 100};
  int epochs = 50;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

// Two-hidden-layer rectifier MLP with softmax cross-entropy, per-example SGD
// in a seeded shuffled order.
class MlpClassifier {
 public:
  MlpClassifier() = default;
  MlpClassifier(int input_dim, int n_classes, const MlpConfig& cfg);

  void train_epoch(const linalg::Matrix& x, std::span<const int> labels, std::uint64_t epoch_seed);
  int predict(std::span<const double> x) const;
  double accuracy(const linalg::Matrix& x, std::span<const int> labels) const;

 private:
  std::vector<double> forward(std::span<const double> x, std::vector<std::vector<double>>* cache) const;

  MlpConfig cfg_;
  int input_dim_ = 0, n_classes_ = 0;
  std::vector<linalg::Matrix> w_;
  std::vector<std::vector<double>> b_;
};

struct ProbeResult {
  MlpClassifier model;
  double test_accuracy = 0.0;
};

// Trains on the task's Train split, reports accuracy on its Test split.
// `embeddings` rows align with task.examples.
ProbeResult train_probe(const ProbeTask& task, const linalg::Matrix& embeddings,
                        const MlpConfig& cfg);

struct WordOrderExample {
  std::vector<double> pair_vec;  // two word representations concatenated
  int label = 0;                 // 1 when the first half's word came first
  bool test = false;
};

// Draws within-sentence position pairs (distinct positions), randomizing the
// concatenation order per example. Whole sentences are held out for testing
// so the probe cannot memorize individual word vectors.
std::vector<WordOrderExample> make_word_order_examples(
    const std::vector<linalg::Matrix>& sentence_reps, int pairs_per_sentence,
    double test_fraction, std::uint64_t seed);

// Binary held-out accuracy of the word-order classifier.
double word_order_probe(std::span<const WordOrderExample> examples, const MlpConfig& cfg);

}  // namespace braindec::probing
