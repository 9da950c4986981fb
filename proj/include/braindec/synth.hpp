#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "braindec/eeg.hpp"
#include "braindec/reps.hpp"
#include "braindec/stimuli.hpp"

namespace braindec::synth {

struct SynthConfig {
  int n_sentences = 80;
  int words_per_sentence = 10;  // template length; the 10-word clause structure
  int channels = 64;
  int rate_hz = 500;
  int window_ms = 400;
  int n_subjects = 1;
  double noise_sigma = 0.0;  // per-subject Gaussian noise, microvolt scale
  std::vector<std::string> planted_layers;
  bool shared_across_conditions = true;
  std::uint64_t seed = 0;

  int window_samples() const;
  int feature_dim() const { return channels * window_samples(); }
  void validate() const;
};

struct PlantedEntry {
  std::string layer;
  stimuli::Condition condition = stimuli::Condition::Sentence;
  linalg::Matrix a;  // P x D, drawn 1/sqrt(P)-scaled standard normal, rank P
};

struct PlantedMapping {
  bool shared_across_conditions = true;
  std::vector<PlantedEntry> entries;

  const linalg::Matrix* find(const std::string& layer, stimuli::Condition c) const;
};

struct GenerateResult {
  std::vector<eeg::EegEpoch> epochs;  // per subject x sentence x condition
  PlantedMapping mapping;
};

// Window content for each content word with representation y is the flat
// vector y * A plus per-subject Gaussian noise; function-word windows and
// gaps carry noise only. Subject averaging therefore shrinks the noise by
// 1/sqrt(n_subjects) while the planted signal is untouched.
GenerateResult generate(const SynthConfig& cfg, const stimuli::Corpus& corpus,
                        const reps::ByCondition& representations);

// Pure seeded Gaussian epochs with no dependence on any representation.
std::vector<eeg::EegEpoch> generate_null(const SynthConfig& cfg, const stimuli::Corpus& corpus);

// Template-conforming random corpus (Sentence + Jabberwocky + WordList per
// id) drawn from a small bundled word bank; onsets tile at window_ms.
stimuli::Corpus generate_corpus(int n_sentences, std::uint64_t seed, int onset_spacing_ms = 400);

// Ground-truth sidecar for test assertions: seed, sigma, planted layers.
void write_ground_truth(const std::string& path, const SynthConfig& cfg,
                        const PlantedMapping& mapping);

}  // namespace braindec::synth
