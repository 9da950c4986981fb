#pragma once

#include <map>
#include <string>

#include "braindec/charlm.hpp"
#include "braindec/decoder.hpp"
#include "braindec/stimuli.hpp"

namespace braindec::reps {

// One condition's representations: rows aligned to (sentence_id, word_index)
// content-word keys, one matrix per layer family.
struct RepTable {
  std::vector<decoder::RowKey> keys;
  std::map<std::string, linalg::Matrix> layers;
};

using ByCondition = std::map<stimuli::Condition, RepTable>;

// Runs the model over every sentence of the corpus and stacks the per-word
// activations. Keys are sorted by (sentence_id, word_index) within each
// condition, so conditions with matching ids align row-by-row.
ByCondition extract_tables(const charlm::ModelWeights& weights, const stimuli::Corpus& corpus);

}  // namespace braindec::reps
