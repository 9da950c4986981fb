#include "braindec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "braindec/common.hpp"
#include "json.hpp"

namespace braindec::synth {

using linalg::Matrix;
using stimuli::Condition;

namespace {

constexpr std::uint64_t kMapTag = 0x6d617070ull;
constexpr std::uint64_t kNoiseTag = 0x6e6f6973ull;
constexpr std::uint64_t kBankTag = 0x62616e6bull;

const std::vector<std::string>& noun_bank() {
  static const std::vector<std::string> v = {"mannen", "huisjes", "honden",  "planken",
                                             "vrouwen", "boeken", "katten",  "stoelen",
                                             "ramen",   "deuren", "vogels",  "tafels"};
  return v;
}
const std::vector<std::string>& verb_bank() {
  static const std::vector<std::string> v = {"bouwen", "brengen", "zien",   "maken",
                                             "dragen", "vinden",  "zoeken", "tellen"};
  return v;
}
const std::vector<std::string>& adj_bank() {
  static const std::vector<std::string> v = {"lange", "lieve", "oude",  "mooie",
                                             "kleine", "grote", "jonge", "stille"};
  return v;
}

}  // namespace

int SynthConfig::window_samples() const {
  const long long num = static_cast<long long>(window_ms) * rate_hz;
  if (window_ms <= 0 || rate_hz <= 0 || num % 1000 != 0)
    throw ValidationError("synth config: window_ms * rate_hz must be an integer sample count");
  return static_cast<int>(num / 1000);
}

void SynthConfig::validate() const {
  if (n_sentences < 1 || channels < 1 || n_subjects < 1)
    throw ValidationError("synth config: counts must be positive");
  if (noise_sigma < 0.0) throw ValidationError("synth config: negative noise_sigma");
  if (words_per_sentence != static_cast<int>(stimuli::sentence_template().size()))
    throw ValidationError("synth config: words_per_sentence must equal the template length (" +
                          std::to_string(stimuli::sentence_template().size()) + ")");
  (void)window_samples();
  for (const auto& l : planted_layers) {
    bool known = false;
    for (const auto& name : charlm::layer_names()) known |= (name == l);
    if (!known) throw ValidationError("synth config: unknown planted layer '" + l + "'");
  }
}

const Matrix* PlantedMapping::find(const std::string& layer, Condition c) const {
  for (const auto& e : entries)
    if (e.layer == layer && (shared_across_conditions || e.condition == c)) return &e.a;
  return nullptr;
}

namespace {

Matrix draw_mapping(int p, int d, std::uint64_t seed) {
  for (int attempt = 0;; ++attempt) {
    std::mt19937_64 rng(mix_seed(seed, kMapTag, static_cast<std::uint64_t>(attempt)));
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix a(p, d);
    const double scale = 1.0 / std::sqrt(static_cast<double>(p));
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = normal(rng) * scale;
    // Full row rank iff A A^T is positive definite.
    Matrix g = linalg::gram(a);
    if (linalg::cholesky_inplace(g)) return a;
    if (attempt > 8) throw ComputeError("synth: could not draw a full-rank mapping");
  }
}

double epoch_duration_samples(const stimuli::StimulusSentence& s, const SynthConfig& cfg) {
  double max_onset = 0.0;
  for (const auto& w : s.words) max_onset = std::max(max_onset, w.onset_ms);
  const double start = std::round(max_onset * cfg.rate_hz / 1000.0);
  return start + cfg.window_samples();
}

}  // namespace

GenerateResult generate(const SynthConfig& cfg, const stimuli::Corpus& corpus,
                        const reps::ByCondition& representations) {
  cfg.validate();
  const int d = cfg.feature_dim();
  const int ws = cfg.window_samples();

  GenerateResult result;
  result.mapping.shared_across_conditions = cfg.shared_across_conditions;

  // Draw mappings per planted layer (per condition unless shared).
  for (const auto& layer : cfg.planted_layers) {
    std::vector<Condition> conds;
    if (cfg.shared_across_conditions) {
      conds = {Condition::Sentence};
    } else {
      for (const auto& [c, table] : representations) conds.push_back(c);
    }
    for (Condition c : conds) {
      const auto it = representations.begin();
      if (it == representations.end())
        throw ValidationError("synth: no representations supplied");
      const auto layer_it = it->second.layers.find(layer);
      if (layer_it == it->second.layers.end())
        throw ValidationError("synth: representations missing planted layer '" + layer + "'");
      const int p = static_cast<int>(layer_it->second.cols());
      if (d < p)
        throw ValidationError("synth: feature dim D=" + std::to_string(d) +
                              " smaller than planted layer dim P=" + std::to_string(p));
      result.mapping.entries.push_back(
          {layer, c,
           draw_mapping(p, d,
                        mix_seed(cfg.seed, std::hash<std::string>{}(layer),
                                 cfg.shared_across_conditions ? 0ull
                                                              : static_cast<std::uint64_t>(c)))});
    }
  }

  for (const auto& [cond, table] : representations) {
    const auto sentences = corpus.by_condition(cond);
    for (const auto* sentence : sentences) {
      const long n_samples = static_cast<long>(epoch_duration_samples(*sentence, cfg));
      // Planted signal, shared by every subject of this sentence.
      Matrix signal(cfg.channels, n_samples);
      const auto content = stimuli::content_words(*sentence);
      for (int k = 0; k < static_cast<int>(content.size()); ++k) {
        // Row in the aligned table for (sentence, content word k).
        const decoder::RowKey key{sentence->id, k};
        const auto at = std::lower_bound(table.keys.begin(), table.keys.end(), key);
        if (at == table.keys.end() || !(*at == key))
          throw ValidationError("synth: representations missing key (sentence " +
                                std::to_string(sentence->id) + ", word " + std::to_string(k) +
                                ")");
        const std::size_t row = static_cast<std::size_t>(at - table.keys.begin());
        const long start = std::lround(content[k].onset_ms * cfg.rate_hz / 1000.0);

        for (const auto& layer : cfg.planted_layers) {
          const Matrix* a = result.mapping.find(layer, cond);
          if (!a) continue;
          const Matrix& reps_m = table.layers.at(layer);
          // flat = y * A laid out channel-major to match flatten_features.
          std::vector<double> flat(d, 0.0);
          for (std::size_t pi = 0; pi < reps_m.cols(); ++pi) {
            const double ypi = reps_m(row, pi);
            if (ypi != 0.0) linalg::axpy(flat.data(), ypi, a->row(pi), d);
          }
          for (int c = 0; c < cfg.channels; ++c)
            for (int s = 0; s < ws; ++s) signal(c, start + s) += flat[c * ws + s];
        }
      }

      for (int subj = 0; subj < cfg.n_subjects; ++subj) {
        eeg::EegEpoch epoch;
        epoch.subject_id = subj;
        epoch.sentence_id = sentence->id;
        epoch.condition = cond;
        epoch.sampling_rate_hz = cfg.rate_hz;
        epoch.channels = cfg.channels;
        epoch.data = signal;
        if (cfg.noise_sigma > 0.0) {
          std::mt19937_64 rng(mix_seed(cfg.seed, kNoiseTag,
                                       static_cast<std::uint64_t>(subj) * 1000003ull +
                                           static_cast<std::uint64_t>(sentence->id),
                                       static_cast<std::uint64_t>(cond)));
          std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
          for (std::size_t i = 0; i < epoch.data.size(); ++i) epoch.data.data()[i] += noise(rng);
        }
        result.epochs.push_back(std::move(epoch));
      }
    }
  }
  return result;
}

std::vector<eeg::EegEpoch> generate_null(const SynthConfig& cfg, const stimuli::Corpus& corpus) {
  cfg.validate();
  if (!(cfg.noise_sigma > 0.0))
    throw ValidationError("generate_null: noise_sigma must be positive");

  std::vector<eeg::EegEpoch> epochs;
  for (const auto& [key, sentence] : corpus.sentences) {
    const long n_samples = static_cast<long>(epoch_duration_samples(sentence, cfg));
    for (int subj = 0; subj < cfg.n_subjects; ++subj) {
      eeg::EegEpoch epoch;
      epoch.subject_id = subj;
      epoch.sentence_id = sentence.id;
      epoch.condition = sentence.condition;
      epoch.sampling_rate_hz = cfg.rate_hz;
      epoch.channels = cfg.channels;
      epoch.data = Matrix(cfg.channels, n_samples);
      std::mt19937_64 rng(mix_seed(cfg.seed, kNoiseTag,
                                   static_cast<std::uint64_t>(subj) * 1000003ull +
                                       static_cast<std::uint64_t>(sentence.id),
                                   static_cast<std::uint64_t>(sentence.condition)));
      std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
      for (std::size_t i = 0; i < epoch.data.size(); ++i) epoch.data.data()[i] = noise(rng);
      epochs.push_back(std::move(epoch));
    }
  }
  return epochs;
}

stimuli::Corpus generate_corpus(int n_sentences, std::uint64_t seed, int onset_spacing_ms) {
  if (n_sentences < 1) throw ValidationError("generate_corpus: n_sentences must be >= 1");
  stimuli::Corpus corpus;
  for (int id = 1; id <= n_sentences; ++id) {
    std::mt19937_64 rng(mix_seed(seed, kBankTag, static_cast<std::uint64_t>(id)));
    auto pick = [&rng](const std::vector<std::string>& bank, int n) {
      std::vector<std::string> chosen(bank.begin(), bank.end());
      std::shuffle(chosen.begin(), chosen.end(), rng);
      chosen.resize(n);
      return chosen;
    };
    const auto nouns = pick(noun_bank(), 4);
    const auto verbs = pick(verb_bank(), 2);
    const auto adjs = pick(adj_bank(), 2);

    stimuli::StimulusSentence s;
    s.id = id;
    s.condition = Condition::Sentence;
    const std::vector<std::string> surfaces = {adjs[0], nouns[0], verbs[0], nouns[1], "en",
                                               "de",    adjs[1], nouns[2], verbs[1], nouns[3]};
    const auto& tmpl = stimuli::sentence_template();
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
      stimuli::Word w;
      w.surface = surfaces[i];
      w.pos = tmpl[i];
      w.onset_ms = static_cast<double>(i) * onset_spacing_ms;
      s.words.push_back(std::move(w));
    }

    const auto jab = stimuli::make_jabberwocky(s, mix_seed(seed, 0x6a6162ull, id));
    const auto wl = stimuli::make_wordlist(
        s, mix_seed(seed, 0x776cull, id),
        id % 2 == 0 ? stimuli::WordListTemplate::A : stimuli::WordListTemplate::B);

    corpus.sentences.emplace(std::make_pair(static_cast<int>(Condition::Sentence), id), s);
    corpus.sentences.emplace(std::make_pair(static_cast<int>(Condition::Jabberwocky), id), jab);
    corpus.sentences.emplace(std::make_pair(static_cast<int>(Condition::WordList), id), wl);
  }
  corpus.n_per_condition = n_sentences;
  corpus.validate();
  return corpus;
}

void write_ground_truth(const std::string& path, const SynthConfig& cfg,
                        const PlantedMapping& mapping) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["noise_sigma"] = cfg.noise_sigma;
  j["planted_layers"] = cfg.planted_layers;
  j["shared_across_conditions"] = mapping.shared_across_conditions;
  j["n_subjects"] = cfg.n_subjects;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : mapping.entries)
    entries.push_back({{"layer", e.layer},
                       {"condition", stimuli::condition_name(e.condition)},
                       {"rows", e.a.rows()},
                       {"cols", e.a.cols()}});
  j["mappings"] = std::move(entries);
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write ground truth '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace braindec::synth
