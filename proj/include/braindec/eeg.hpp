#pragma once

#include <optional>
#include <string>
#include <vector>

#include "braindec/linalg.hpp"
#include "braindec/stimuli.hpp"

namespace braindec::eeg {

using stimuli::Condition;

// subject_id < 0 marks a cross-subject average.
constexpr int kAveragedSubject = -1;

struct EegEpoch {
  int subject_id = 0;
  int sentence_id = 0;
  Condition condition = Condition::Sentence;
  int sampling_rate_hz = 500;
  int channels = 64;
  linalg::Matrix data;  // channels x samples, microvolts

  bool averaged() const { return subject_id == kAveragedSubject; }
  std::size_t samples() const { return data.cols(); }
  void validate(const std::string& origin = "") const;
};

struct WordFeature {
  int sentence_id = 0;
  Condition condition = Condition::Sentence;
  int word_index = 0;  // index into the sentence's content words
  std::vector<double> vec;
};

// Epoch file: "# channels=<c> rate_hz=<r> subject=<s> sentence=<id> condition=<cond>"
// followed by c rows of comma-separated floats.
EegEpoch load_epoch_csv(const std::string& path);
void save_epoch_csv(const std::string& path, const EegEpoch& epoch);

// Manifest: JSON array of epoch file paths.
std::vector<EegEpoch> load_epochs(const std::string& manifest_path);
void save_manifest(const std::string& path, const std::vector<std::string>& files);

// One averaged epoch per (sentence, condition); compensated summation keeps
// the result independent of grouping order to well below 1e-12.
std::vector<EegEpoch> average_subjects(const std::vector<EegEpoch>& epochs);

// The channels x window_samples slice starting at round(onset_ms * rate / 1000).
linalg::Matrix extract_word_window(const EegEpoch& epoch, double onset_ms,
                                   double window_ms = 400.0);

// Row-major concatenation, channel 0 first.
std::vector<double> flatten_features(const linalg::Matrix& window);

// Featurize one averaged epoch against its stimulus sentence: one feature per
// content word, windows taken at the original word onsets.
std::vector<WordFeature> featurize_epoch(const EegEpoch& epoch,
                                         const stimuli::StimulusSentence& sentence,
                                         double window_ms = 400.0);

struct StandardizeResult {
  std::vector<WordFeature> features;
  linalg::Standardizer stats;
};

// Z-scores feature vectors per dimension. With no stats given, fits them on
// the input (training use); with stats given, applies them (test use).
StandardizeResult standardize(const std::vector<WordFeature>& features,
                              const std::optional<linalg::Standardizer>& stats = std::nullopt);

}  // namespace braindec::eeg
