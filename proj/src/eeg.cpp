#include "braindec/eeg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "braindec/common.hpp"
#include "json.hpp"

namespace braindec::eeg {

void EegEpoch::validate(const std::string& origin) const {
  const std::string where = origin.empty() ? "" : " in '" + origin + "'";
  if (channels <= 0 || sampling_rate_hz <= 0)
    throw ValidationError("epoch" + where + ": non-positive channels or sampling rate");
  if (data.rows() != static_cast<std::size_t>(channels))
    throw ValidationError("epoch" + where + ": data row count " + std::to_string(data.rows()) +
                          " != channels " + std::to_string(channels));
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!std::isfinite(data.data()[i]))
      throw ValidationError("epoch" + where + ": non-finite sample");
}

EegEpoch load_epoch_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open epoch file '" + path + "'");
  std::string header;
  if (!std::getline(in, header) || header.rfind("# ", 0) != 0)
    throw ValidationError("epoch file '" + path + "': missing header line");

  EegEpoch e;
  int got = 0;
  std::istringstream hs(header.substr(2));
  std::string tok;
  std::string cond;
  while (hs >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    if (key == "channels") { e.channels = std::stoi(val); ++got; }
    else if (key == "rate_hz") { e.sampling_rate_hz = std::stoi(val); ++got; }
    else if (key == "subject") { e.subject_id = std::stoi(val); ++got; }
    else if (key == "sentence") { e.sentence_id = std::stoi(val); ++got; }
    else if (key == "condition") { cond = val; ++got; }
  }
  if (got != 5)
    throw ValidationError("epoch file '" + path + "': incomplete header");
  e.condition = stimuli::parse_condition(cond);

  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ValidationError("epoch file '" + path + "': bad sample value '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() != static_cast<std::size_t>(e.channels))
    throw ValidationError("epoch file '" + path + "': expected " + std::to_string(e.channels) +
                          " channel rows, found " + std::to_string(rows.size()));
  const std::size_t samples = rows.empty() ? 0 : rows[0].size();
  for (const auto& r : rows)
    if (r.size() != samples)
      throw ValidationError("epoch file '" + path + "': ragged channel rows");

  e.data = linalg::Matrix(e.channels, samples);
  for (int c = 0; c < e.channels; ++c)
    std::copy(rows[c].begin(), rows[c].end(), e.data.row(c));
  e.validate(path);
  return e;
}

void save_epoch_csv(const std::string& path, const EegEpoch& epoch) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write epoch file '" + path + "'");
  out << "# channels=" << epoch.channels << " rate_hz=" << epoch.sampling_rate_hz
      << " subject=" << epoch.subject_id << " sentence=" << epoch.sentence_id
      << " condition=" << stimuli::condition_name(epoch.condition) << "\n";
  char buf[64];
  for (int c = 0; c < epoch.channels; ++c) {
    const double* row = epoch.data.row(c);
    for (std::size_t s = 0; s < epoch.samples(); ++s) {
      std::snprintf(buf, sizeof buf, "%.17g", row[s]);
      if (s) out << ',';
      out << buf;
    }
    out << "\n";
  }
}

std::vector<EegEpoch> load_epochs(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ValidationError("cannot open manifest '" + manifest_path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("manifest '" + manifest_path + "': " + e.what());
  }
  if (!j.is_array()) throw ValidationError("manifest '" + manifest_path + "': expected a JSON array");

  std::vector<EegEpoch> epochs;
  epochs.reserve(j.size());
  for (const auto& item : j) epochs.push_back(load_epoch_csv(item.get<std::string>()));

  for (std::size_t i = 1; i < epochs.size(); ++i) {
    if (epochs[i].channels != epochs[0].channels ||
        epochs[i].sampling_rate_hz != epochs[0].sampling_rate_hz)
      throw ValidationError("manifest '" + manifest_path + "': epoch '" +
                            j[i].get<std::string>() + "' has channels/rate inconsistent with '" +
                            j[0].get<std::string>() + "'");
  }
  return epochs;
}

void save_manifest(const std::string& path, const std::vector<std::string>& files) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write manifest '" + path + "'");
  out << nlohmann::json(files).dump(2) << "\n";
}

std::vector<EegEpoch> average_subjects(const std::vector<EegEpoch>& epochs) {
  std::map<std::pair<int, int>, std::vector<const EegEpoch*>> groups;
  for (const auto& e : epochs)
    groups[{static_cast<int>(e.condition), e.sentence_id}].push_back(&e);

  std::vector<EegEpoch> out;
  out.reserve(groups.size());
  for (auto& [key, group] : groups) {
    // Fixed accumulation order: sort by subject id.
    std::sort(group.begin(), group.end(),
              [](const EegEpoch* a, const EegEpoch* b) { return a->subject_id < b->subject_id; });
    const EegEpoch& first = *group[0];
    for (const EegEpoch* e : group)
      if (e->channels != first.channels || e->samples() != first.samples() ||
          e->sampling_rate_hz != first.sampling_rate_hz)
        throw ValidationError("average_subjects: inconsistent shapes for sentence " +
                              std::to_string(first.sentence_id) + " (" +
                              stimuli::condition_name(first.condition) + ")");

    EegEpoch avg;
    avg.subject_id = kAveragedSubject;
    avg.sentence_id = first.sentence_id;
    avg.condition = first.condition;
    avg.sampling_rate_hz = first.sampling_rate_hz;
    avg.channels = first.channels;
    avg.data = linalg::Matrix(first.channels, first.samples());

    const std::size_t n = avg.data.size();
    std::vector<double> comp(n, 0.0);  // Neumaier compensation terms
    double* sum = avg.data.data();
    for (const EegEpoch* e : group) {
      const double* src = e->data.data();
      for (std::size_t i = 0; i < n; ++i) {
        const double t = sum[i] + src[i];
        if (std::abs(sum[i]) >= std::abs(src[i]))
          comp[i] += (sum[i] - t) + src[i];
        else
          comp[i] += (src[i] - t) + sum[i];
        sum[i] = t;
      }
    }
    const double inv = 1.0 / static_cast<double>(group.size());
    for (std::size_t i = 0; i < n; ++i) sum[i] = (sum[i] + comp[i]) * inv;
    out.push_back(std::move(avg));
  }
  return out;
}

linalg::Matrix extract_word_window(const EegEpoch& epoch, double onset_ms, double window_ms) {
  const long long num = static_cast<long long>(window_ms) * epoch.sampling_rate_hz;
  if (window_ms <= 0 || num % 1000 != 0)
    throw ValidationError("extract_word_window: window of " + std::to_string(window_ms) +
                          " ms is not an integer number of samples at " +
                          std::to_string(epoch.sampling_rate_hz) + " Hz");
  const std::size_t window_samples = static_cast<std::size_t>(num / 1000);
  const std::size_t start =
      static_cast<std::size_t>(std::llround(onset_ms * epoch.sampling_rate_hz / 1000.0));
  if (start + window_samples > epoch.samples())
    throw ValidationError("extract_word_window: window [" + std::to_string(start) + ", " +
                          std::to_string(start + window_samples) + ") overruns epoch of " +
                          std::to_string(epoch.samples()) + " samples (sentence " +
                          std::to_string(epoch.sentence_id) + ")");

  linalg::Matrix w(epoch.channels, window_samples);
  for (int c = 0; c < epoch.channels; ++c) {
    const double* src = epoch.data.row(c) + start;
    std::copy(src, src + window_samples, w.row(c));
  }
  return w;
}

std::vector<double> flatten_features(const linalg::Matrix& window) {
  return {window.data(), window.data() + window.size()};
}

std::vector<WordFeature> featurize_epoch(const EegEpoch& epoch,
                                         const stimuli::StimulusSentence& sentence,
                                         double window_ms) {
  if (epoch.sentence_id != sentence.id || epoch.condition != sentence.condition)
    throw ValidationError("featurize_epoch: epoch/sentence mismatch (sentence " +
                          std::to_string(epoch.sentence_id) + " vs " +
                          std::to_string(sentence.id) + ")");
  std::vector<WordFeature> out;
  int idx = 0;
  for (const auto& w : sentence.words) {
    if (w.is_function_word()) continue;
    WordFeature f;
    f.sentence_id = sentence.id;
    f.condition = sentence.condition;
    f.word_index = idx++;
    f.vec = flatten_features(extract_word_window(epoch, w.onset_ms, window_ms));
    out.push_back(std::move(f));
  }
  return out;
}

StandardizeResult standardize(const std::vector<WordFeature>& features,
                              const std::optional<linalg::Standardizer>& stats) {
  StandardizeResult res;
  if (features.empty()) {
    if (stats) res.stats = *stats;
    return res;
  }
  const std::size_t d = features[0].vec.size();
  for (const auto& f : features)
    if (f.vec.size() != d)
      throw ValidationError("standardize: inconsistent feature dimensions");
  if (stats && stats->mean.size() != d)
    throw ValidationError("standardize: stats dimension " + std::to_string(stats->mean.size()) +
                          " != feature dimension " + std::to_string(d));

  linalg::Matrix x(features.size(), d);
  for (std::size_t i = 0; i < features.size(); ++i)
    std::copy(features[i].vec.begin(), features[i].vec.end(), x.row(i));

  res.stats = stats ? *stats : linalg::Standardizer::fit(x);
  res.stats.apply_inplace(x);

  res.features = features;
  for (std::size_t i = 0; i < features.size(); ++i)
    res.features[i].vec.assign(x.row(i), x.row(i) + d);
  return res;
}

}  // namespace braindec::eeg
