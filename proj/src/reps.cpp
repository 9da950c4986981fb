#include "braindec/reps.hpp"

#include <algorithm>

#include "braindec/common.hpp"

namespace braindec::reps {

ByCondition extract_tables(const charlm::ModelWeights& weights, const stimuli::Corpus& corpus) {
  ByCondition out;
  for (const auto cond : {stimuli::Condition::Sentence, stimuli::Condition::Jabberwocky,
                          stimuli::Condition::WordList}) {
    const auto sentences = corpus.by_condition(cond);
    if (sentences.empty()) continue;

    RepTable table;
    std::vector<std::vector<charlm::LayerActivations>> acts;
    acts.reserve(sentences.size());
    for (const auto* s : sentences) {
      acts.push_back(charlm::extract_representations(weights, *s));
      for (int k = 0; k < static_cast<int>(acts.back().size()); ++k)
        table.keys.push_back({s->id, k});
    }

    for (const auto& layer : charlm::layer_names()) {
      const int dim = charlm::layer_dim(weights.config, layer);
      linalg::Matrix m(table.keys.size(), dim);
      std::size_t row = 0;
      for (const auto& sentence_acts : acts)
        for (const auto& a : sentence_acts) {
          const auto& v = a.by_name(layer);
          std::copy(v.begin(), v.end(), m.row(row++));
        }
      table.layers.emplace(layer, std::move(m));
    }
    out.emplace(cond, std::move(table));
  }
  return out;
}

}  // namespace braindec::reps
