#include "braindec/probing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "braindec/common.hpp"
#include "json.hpp"

namespace braindec::probing {

using linalg::Matrix;

void ProbeTask::validate() const {
  if (n_classes < 2) throw ValidationError("probe task '" + name + "': n_classes must be >= 2");
  bool has_train = false, has_test = false;
  for (const auto& ex : examples) {
    if (ex.label < 0 || ex.label >= n_classes)
      throw ValidationError("probe task '" + name + "': label " + std::to_string(ex.label) +
                            " outside [0, " + std::to_string(n_classes) + ")");
    if (ex.tokens.empty())
      throw ValidationError("probe task '" + name + "': example with no tokens");
    has_train |= ex.split == Split::Train;
    has_test |= ex.split == Split::Test;
  }
  if (!has_train || !has_test)
    throw ValidationError("probe task '" + name + "': needs non-empty train and test splits");
}

namespace {

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "dev") return Split::Dev;
  if (s == "test") return Split::Test;
  throw ValidationError("unknown split '" + s + "'");
}

std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "?";
}

}  // namespace

ProbeTask load_probe_task(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open probe task '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("probe task '" + path + "': " + e.what());
  }
  ProbeTask task;
  try {
    task.name = j.at("name").get<std::string>();
    task.kind = j.at("kind").get<std::string>() == "syntactic" ? TaskKind::Syntactic
                                                               : TaskKind::Semantic;
    task.n_classes = j.at("n_classes").get<int>();
    for (const auto& je : j.at("examples")) {
      ProbeExample ex;
      ex.tokens = je.at("tokens").get<std::vector<std::string>>();
      ex.label = je.at("label").get<int>();
      ex.split = parse_split(je.at("split").get<std::string>());
      task.examples.push_back(std::move(ex));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("probe task '" + path + "': " + e.what());
  }
  task.validate();
  return task;
}

void save_probe_task(const std::string& path, const ProbeTask& task) {
  nlohmann::json j;
  j["name"] = task.name;
  j["kind"] = task.kind == TaskKind::Syntactic ? "syntactic" : "semantic";
  j["n_classes"] = task.n_classes;
  nlohmann::json examples = nlohmann::json::array();
  for (const auto& ex : task.examples)
    examples.push_back(
        {{"tokens", ex.tokens}, {"label", ex.label}, {"split", split_name(ex.split)}});
  j["examples"] = std::move(examples);
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write probe task '" + path + "'");
  out << j.dump(2) << "\n";
}

std::vector<double> sentence_embedding(std::span<const std::vector<double>> word_vectors) {
  if (word_vectors.empty()) throw ValidationError("sentence_embedding: empty sentence");
  std::vector<double> mean(word_vectors[0].size(), 0.0);
  for (const auto& v : word_vectors) {
    if (v.size() != mean.size())
      throw ValidationError("sentence_embedding: inconsistent vector lengths");
    linalg::axpy(mean.data(), 1.0, v.data(), v.size());
  }
  const double inv = 1.0 / static_cast<double>(word_vectors.size());
  for (double& m : mean) m *= inv;
  return mean;
}

void MlpConfig::validate() const {
  if (hidden_sizes.empty()) throw ValidationError("mlp config: no hidden layers");
  for (int h : hidden_sizes)
    if (h <= 0) throw ValidationError("mlp config: hidden sizes must be positive");
  if (epochs < 1 || learning_rate <= 0.0)
    throw ValidationError("mlp config: epochs and learning_rate must be positive");
}

MlpClassifier::MlpClassifier(int input_dim, int n_classes, const MlpConfig& cfg)
    : cfg_(cfg), input_dim_(input_dim), n_classes_(n_classes) {
  cfg.validate();
  std::mt19937_64 rng(mix_seed(cfg.seed, 0x6d6c70ull));
  std::vector<int> dims = {input_dim};
  dims.insert(dims.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
  dims.push_back(n_classes);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Matrix w(dims[l + 1], dims[l]);
    const double r = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    std::uniform_real_distribution<double> u(-r, r);
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    w_.push_back(std::move(w));
    b_.emplace_back(dims[l + 1], 0.0);
  }
}

std::vector<double> MlpClassifier::forward(std::span<const double> x,
                                           std::vector<std::vector<double>>* cache) const {
  std::vector<double> cur(x.begin(), x.end());
  if (cache) cache->push_back(cur);
  for (std::size_t l = 0; l < w_.size(); ++l) {
    std::vector<double> next(w_[l].rows());
    for (std::size_t r = 0; r < w_[l].rows(); ++r)
      next[r] = linalg::dot(w_[l].row(r), cur.data(), w_[l].cols()) + b_[l][r];
    if (l + 1 < w_.size())
      for (double& v : next) v = std::max(0.0, v);  // rectifier
    cur = std::move(next);
    if (cache) cache->push_back(cur);
  }
  // softmax
  double mx = cur[0];
  for (double v : cur) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : cur) z += std::exp(v - mx);
  for (double& v : cur) v = std::exp(v - mx) / z;
  return cur;
}

void MlpClassifier::train_epoch(const Matrix& x, std::span<const int> labels,
                                std::uint64_t epoch_seed) {
  std::vector<int> order(x.rows());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(epoch_seed);
  std::shuffle(order.begin(), order.end(), rng);

  for (int idx : order) {
    std::vector<std::vector<double>> acts;  // input + post-activation per layer
    std::vector<double> probs = forward({x.row(idx), x.cols()}, &acts);

    std::vector<double> delta = probs;
    delta[labels[idx]] -= 1.0;
    for (int l = static_cast<int>(w_.size()) - 1; l >= 0; --l) {
      const std::vector<double>& in = acts[l];
      std::vector<double> din(in.size(), 0.0);
      for (std::size_t r = 0; r < w_[l].rows(); ++r) {
        linalg::axpy(din.data(), delta[r], w_[l].row(r), w_[l].cols());
        linalg::axpy(w_[l].row(r), -cfg_.learning_rate * delta[r], in.data(), in.size());
        b_[l][r] -= cfg_.learning_rate * delta[r];
      }
      if (l > 0) {
        // Through the rectifier: acts[l] holds the post-ReLU values.
        for (std::size_t i = 0; i < din.size(); ++i)
          if (acts[l][i] <= 0.0) din[i] = 0.0;
        delta = std::move(din);
      }
    }
  }
}

int MlpClassifier::predict(std::span<const double> x) const {
  const auto probs = forward(x, nullptr);
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

double MlpClassifier::accuracy(const Matrix& x, std::span<const int> labels) const {
  if (x.rows() == 0) return 0.0;
  long hits = 0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    if (predict({x.row(i), x.cols()}) == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(x.rows());
}

ProbeResult train_probe(const ProbeTask& task, const Matrix& embeddings, const MlpConfig& cfg) {
  task.validate();
  if (embeddings.rows() != task.examples.size())
    throw ValidationError("train_probe: embeddings not aligned with task examples");

  std::vector<int> train_rows, test_rows;
  for (std::size_t i = 0; i < task.examples.size(); ++i) {
    if (task.examples[i].split == Split::Train) train_rows.push_back(static_cast<int>(i));
    if (task.examples[i].split == Split::Test) test_rows.push_back(static_cast<int>(i));
  }

  auto gather = [&](const std::vector<int>& rows, Matrix& x, std::vector<int>& y) {
    x = Matrix(rows.size(), embeddings.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy(embeddings.row(rows[i]), embeddings.row(rows[i]) + embeddings.cols(), x.row(i));
      y.push_back(task.examples[rows[i]].label);
    }
  };
  Matrix x_train, x_test;
  std::vector<int> y_train, y_test;
  gather(train_rows, x_train, y_train);
  gather(test_rows, x_test, y_test);
  for (std::size_t i = 0; i < embeddings.size(); ++i)
    if (!std::isfinite(embeddings.data()[i]))
      throw ValidationError("train_probe: non-finite embedding");

  // Train-split standardization; raw layer activations vary wildly in scale.
  const auto stats = linalg::Standardizer::fit(x_train);
  stats.apply_inplace(x_train);
  stats.apply_inplace(x_test);

  ProbeResult res;
  res.model = MlpClassifier(static_cast<int>(embeddings.cols()), task.n_classes, cfg);
  for (int e = 0; e < cfg.epochs; ++e)
    res.model.train_epoch(x_train, y_train, mix_seed(cfg.seed, 0x65706f63ull, e));
  res.test_accuracy = res.model.accuracy(x_test, y_test);
  return res;
}

std::vector<WordOrderExample> make_word_order_examples(
    const std::vector<Matrix>& sentence_reps, int pairs_per_sentence, double test_fraction,
    std::uint64_t seed) {
  if (pairs_per_sentence < 1)
    throw ValidationError("make_word_order_examples: pairs_per_sentence must be >= 1");
  std::vector<WordOrderExample> out;
  for (std::size_t si = 0; si < sentence_reps.size(); ++si) {
    const Matrix& reps = sentence_reps[si];
    if (reps.rows() < 2)
      throw ValidationError("make_word_order_examples: sentence " + std::to_string(si) +
                            " has fewer than 2 word positions");
    std::mt19937_64 rng(mix_seed(seed, 0x776f7264ull, si));
    std::uniform_int_distribution<int> pos(0, static_cast<int>(reps.rows()) - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    // Held out whole sentences: a pair from a test sentence never shares its
    // word vectors with a training example.
    const bool test_sentence = unit(rng) < test_fraction;
    for (int k = 0; k < pairs_per_sentence; ++k) {
      int a = pos(rng), b = pos(rng);
      while (b == a) b = pos(rng);  // positions must be distinct
      const int first = std::min(a, b), second = std::max(a, b);
      WordOrderExample ex;
      // Randomize which word occupies the first half of the input.
      const bool earlier_first = unit(rng) < 0.5;
      const int lead = earlier_first ? first : second;
      const int trail = earlier_first ? second : first;
      ex.pair_vec.assign(reps.row(lead), reps.row(lead) + reps.cols());
      ex.pair_vec.insert(ex.pair_vec.end(), reps.row(trail), reps.row(trail) + reps.cols());
      ex.label = earlier_first ? 1 : 0;
      ex.test = test_sentence;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

double word_order_probe(std::span<const WordOrderExample> examples, const MlpConfig& cfg) {
  std::vector<int> train_rows, test_rows;
  for (std::size_t i = 0; i < examples.size(); ++i)
    (examples[i].test ? test_rows : train_rows).push_back(static_cast<int>(i));
  if (train_rows.empty() || test_rows.empty())
    throw ValidationError("word_order_probe: needs non-empty train and test subsets");

  const std::size_t dim = examples[0].pair_vec.size();
  auto gather = [&](const std::vector<int>& rows, Matrix& x, std::vector<int>& y) {
    x = Matrix(rows.size(), dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy(examples[rows[i]].pair_vec.begin(), examples[rows[i]].pair_vec.end(), x.row(i));
      y.push_back(examples[rows[i]].label);
    }
  };
  Matrix x_train, x_test;
  std::vector<int> y_train, y_test;
  gather(train_rows, x_train, y_train);
  gather(test_rows, x_test, y_test);

  MlpClassifier model(static_cast<int>(dim), 2, cfg);
  for (int e = 0; e < cfg.epochs; ++e)
    model.train_epoch(x_train, y_train, mix_seed(cfg.seed, 0x6f726465ull, e));
  return model.accuracy(x_test, y_test);
}

}  // namespace braindec::probing
