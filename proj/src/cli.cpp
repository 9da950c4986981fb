#include "braindec/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "braindec/common.hpp"
#include "braindec/eeg.hpp"
#include "braindec/reps.hpp"
#include "braindec/stats.hpp"
#include "json.hpp"

namespace braindec::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using stimuli::Condition;

namespace {

void check_known_keys(const json& j, const std::set<std::string>& known,
                      const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      throw ValidationError("config: unknown field '" + key + "' in " + where);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string condition_short(Condition c) {
  switch (c) {
    case Condition::Sentence: return "Sen";
    case Condition::Jabberwocky: return "Jab";
    case Condition::WordList: return "WL";
  }
  return "?";
}

}  // namespace

void RunConfig::validate() const {
  mc.validate();
  train.validate();
  probe.validate();
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("config: alpha must be in (0, 1)");
  if (run.perms < 1) throw ValidationError("config: perms must be >= 1");
  if (run.granularity != "sentence" && run.granularity != "word")
    throw ValidationError("config: granularity must be 'sentence' or 'word'");
  for (const auto& c : run.cases) decoder::find_case(c);
  for (const auto& l : run.layers) {
    bool known = false;
    for (const auto& name : charlm::layer_names()) known |= name == l;
    if (!known) throw ValidationError("config: unknown layer '" + l + "'");
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config '" + path + "': " + e.what());
  }

  RunConfig cfg;
  check_known_keys(j, {"seed", "threads", "alpha", "paths", "model", "train", "mc", "synth",
                       "run", "probe"},
                   "top level");
  cfg.seed = j.value("seed", cfg.seed);
  cfg.threads = j.value("threads", cfg.threads);
  cfg.alpha = j.value("alpha", cfg.alpha);

  if (j.contains("paths")) {
    const auto& p = j["paths"];
    check_known_keys(p, {"corpus", "epochs_manifest", "checkpoint", "train_corpus", "output_dir",
                         "probe_tasks"},
                     "paths");
    cfg.paths.corpus = p.value("corpus", cfg.paths.corpus);
    cfg.paths.epochs_manifest = p.value("epochs_manifest", cfg.paths.epochs_manifest);
    cfg.paths.checkpoint = p.value("checkpoint", cfg.paths.checkpoint);
    cfg.paths.train_corpus = p.value("train_corpus", cfg.paths.train_corpus);
    cfg.paths.output_dir = p.value("output_dir", cfg.paths.output_dir);
    if (p.contains("probe_tasks"))
      cfg.paths.probe_tasks = p["probe_tasks"].get<std::vector<std::string>>();
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    check_known_keys(m, {"char_embed_dim", "max_word_len", "filter_widths", "filters_per_width",
                         "highway_layers", "lstm_hidden_dim"},
                     "model");
    cfg.model.char_embed_dim = m.value("char_embed_dim", cfg.model.char_embed_dim);
    cfg.model.max_word_len = m.value("max_word_len", cfg.model.max_word_len);
    if (m.contains("filter_widths"))
      cfg.model.filter_widths = m["filter_widths"].get<std::vector<int>>();
    if (m.contains("filters_per_width"))
      cfg.model.filters_per_width = m["filters_per_width"].get<std::vector<int>>();
    cfg.model.highway_layers = m.value("highway_layers", cfg.model.highway_layers);
    cfg.model.lstm_hidden_dim = m.value("lstm_hidden_dim", cfg.model.lstm_hidden_dim);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    check_known_keys(t, {"epochs", "batch_size", "sequence_length", "initial_lr", "decay_rate",
                         "gradient_clip"},
                     "train");
    cfg.train.epochs = t.value("epochs", cfg.train.epochs);
    cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
    cfg.train.sequence_length = t.value("sequence_length", cfg.train.sequence_length);
    cfg.train.initial_lr = t.value("initial_lr", cfg.train.initial_lr);
    cfg.train.decay_rate = t.value("decay_rate", cfg.train.decay_rate);
    cfg.train.gradient_clip = t.value("gradient_clip", cfg.train.gradient_clip);
  }
  if (j.contains("mc")) {
    const auto& m = j["mc"];
    check_known_keys(m, {"n_trials", "test_fraction", "lambda_grid", "inner_folds",
                         "standardize_y"},
                     "mc");
    cfg.mc.n_trials = m.value("n_trials", cfg.mc.n_trials);
    cfg.mc.test_fraction = m.value("test_fraction", cfg.mc.test_fraction);
    if (m.contains("lambda_grid"))
      cfg.mc.lambda_grid = m["lambda_grid"].get<std::vector<double>>();
    cfg.mc.inner_folds = m.value("inner_folds", cfg.mc.inner_folds);
    cfg.mc.standardize_y = m.value("standardize_y", cfg.mc.standardize_y);
  }
  if (j.contains("synth")) {
    const auto& s = j["synth"];
    check_known_keys(s, {"n_sentences", "words_per_sentence", "channels", "rate_hz", "window_ms",
                         "n_subjects", "noise_sigma", "planted_layers",
                         "shared_across_conditions"},
                     "synth");
    cfg.synth.n_sentences = s.value("n_sentences", cfg.synth.n_sentences);
    cfg.synth.words_per_sentence = s.value("words_per_sentence", cfg.synth.words_per_sentence);
    cfg.synth.channels = s.value("channels", cfg.synth.channels);
    cfg.synth.rate_hz = s.value("rate_hz", cfg.synth.rate_hz);
    cfg.synth.window_ms = s.value("window_ms", cfg.synth.window_ms);
    cfg.synth.n_subjects = s.value("n_subjects", cfg.synth.n_subjects);
    cfg.synth.noise_sigma = s.value("noise_sigma", cfg.synth.noise_sigma);
    if (s.contains("planted_layers"))
      cfg.synth.planted_layers = s["planted_layers"].get<std::vector<std::string>>();
    cfg.synth.shared_across_conditions =
        s.value("shared_across_conditions", cfg.synth.shared_across_conditions);
  }
  if (j.contains("run")) {
    const auto& r = j["run"];
    check_known_keys(r, {"cases", "layers", "perms", "mse", "granularity"}, "run");
    if (r.contains("cases")) cfg.run.cases = r["cases"].get<std::vector<std::string>>();
    if (r.contains("layers")) cfg.run.layers = r["layers"].get<std::vector<std::string>>();
    cfg.run.perms = r.value("perms", cfg.run.perms);
    cfg.run.mse = r.value("mse", cfg.run.mse);
    cfg.run.granularity = r.value("granularity", cfg.run.granularity);
  }
  if (j.contains("probe")) {
    const auto& p = j["probe"];
    check_known_keys(p, {"hidden_sizes", "epochs", "learning_rate"}, "probe");
    if (p.contains("hidden_sizes"))
      cfg.probe.hidden_sizes = p["hidden_sizes"].get<std::vector<int>>();
    cfg.probe.epochs = p.value("epochs", cfg.probe.epochs);
    cfg.probe.learning_rate = p.value("learning_rate", cfg.probe.learning_rate);
  }

  cfg.synth.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  cfg.mc.seed = cfg.seed;
  cfg.probe.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

namespace {

stimuli::Corpus obtain_corpus(const RunConfig& cfg, bool allow_generate) {
  if (!cfg.paths.corpus.empty() && fs::exists(cfg.paths.corpus))
    return stimuli::load_corpus(cfg.paths.corpus);
  if (!allow_generate)
    throw ValidationError("corpus file '" + cfg.paths.corpus + "' not found");
  return synth::generate_corpus(cfg.synth.n_sentences, cfg.seed, cfg.synth.window_ms);
}

charlm::ModelWeights obtain_weights(const RunConfig& cfg, const stimuli::Corpus& corpus,
                                    bool allow_random) {
  if (!cfg.paths.checkpoint.empty() && fs::exists(cfg.paths.checkpoint))
    return charlm::load_checkpoint(cfg.paths.checkpoint);
  if (!allow_random)
    throw ValidationError("checkpoint '" + cfg.paths.checkpoint + "' not found");
  // Random weights seeded from the config: enough for planted-signal work,
  // no training required.
  std::vector<std::string> lines;
  for (const auto& [key, s] : corpus.sentences) {
    std::string line;
    for (const auto& w : s.words) {
      if (!line.empty()) line += ' ';
      line += w.surface;
    }
    lines.push_back(std::move(line));
  }
  const auto tokenized = charlm::build_corpus(lines);
  return charlm::ModelWeights::init(cfg.model, tokenized.char_vocab, tokenized.word_vocab,
                                    cfg.seed);
}

}  // namespace

int cmd_synth(const RunConfig& cfg) {
  cfg.validate();
  cfg.synth.validate();
  const fs::path out_dir(cfg.paths.output_dir);
  const fs::path epoch_dir = out_dir / "epochs";
  fs::create_directories(epoch_dir);

  stimuli::Corpus corpus = obtain_corpus(cfg, true);
  if (cfg.paths.corpus.empty() || !fs::exists(cfg.paths.corpus))
    stimuli::save_corpus((out_dir / "stimuli.jsonl").string(), corpus);

  const auto weights = obtain_weights(cfg, corpus, true);
  // The planted signal is defined in terms of this model's representations;
  // persist the weights so `run` extracts the same ones.
  if (cfg.paths.checkpoint.empty() || !fs::exists(cfg.paths.checkpoint))
    charlm::save_checkpoint((out_dir / "lm.ckpt").string(), weights);
  const auto tables = reps::extract_tables(weights, corpus);
  const auto result = synth::generate(cfg.synth, corpus, tables);

  std::vector<std::string> files;
  for (const auto& epoch : result.epochs) {
    std::ostringstream name;
    name << "epoch_" << stimuli::condition_name(epoch.condition) << "_" << epoch.sentence_id
         << "_s" << epoch.subject_id << ".csv";
    const fs::path p = epoch_dir / name.str();
    eeg::save_epoch_csv(p.string(), epoch);
    files.push_back(p.string());
  }
  eeg::save_manifest((out_dir / "manifest.json").string(), files);
  synth::write_ground_truth((out_dir / "ground_truth.json").string(), cfg.synth, result.mapping);

  std::cout << "synth: wrote " << files.size() << " epochs to " << epoch_dir.string() << "\n";
  return 0;
}

int cmd_train_lm(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.paths.train_corpus.empty())
    throw ValidationError("train-lm: paths.train_corpus is required");
  const fs::path out_dir(cfg.paths.output_dir);
  fs::create_directories(out_dir);

  const auto corpus = charlm::load_text_corpus(cfg.paths.train_corpus);
  const auto result = charlm::train(cfg.model, cfg.train, corpus);

  const std::string ckpt = cfg.paths.checkpoint.empty() ? (out_dir / "lm.ckpt").string()
                                                        : cfg.paths.checkpoint;
  charlm::save_checkpoint(ckpt, result.weights);

  std::ofstream curve(out_dir / "loss_curve.csv");
  curve << "epoch,loss,perplexity,lr\n";
  for (std::size_t e = 0; e < result.loss_curve.size(); ++e)
    curve << e << "," << fmt(result.loss_curve[e]) << "," << fmt(std::exp(result.loss_curve[e]))
          << "," << fmt(cfg.train.initial_lr / (1.0 + cfg.train.decay_rate * e)) << "\n";

  std::cout << "train-lm: checkpoint " << ckpt << " ("
            << (result.loss_curve.empty() ? std::string("no epochs")
                                          : "final loss " + fmt(result.loss_curve.back()))
            << ")\n";
  return 0;
}

namespace {

struct CaseLayerResult {
  decoder::AnalysisCase analysis_case;
  std::string layer;
  std::vector<decoder::TrialRecord> records;
  double observed = 0.0;
  double p = 1.0;
  bool significant = false;
};

}  // namespace

int cmd_run(const RunConfig& cfg) {
  cfg.validate();
  const fs::path out_dir(cfg.paths.output_dir);
  fs::create_directories(out_dir);

  const auto corpus = obtain_corpus(cfg, false);
  const auto weights = obtain_weights(cfg, corpus, false);
  if (cfg.paths.epochs_manifest.empty())
    throw ValidationError("run: paths.epochs_manifest is required");
  const auto epochs = eeg::load_epochs(cfg.paths.epochs_manifest);
  if (epochs.empty()) throw ValidationError("run: manifest lists no epochs");
  const auto averaged = eeg::average_subjects(epochs);

  const auto tables = reps::extract_tables(weights, corpus);

  const auto cases = cfg.run.cases.empty()
                         ? std::vector<std::string>{"A1.1", "A1.2", "A1.3", "A2.1",
                                                    "A2.2", "A3.1", "A3.2"}
                         : cfg.run.cases;
  const auto layers = cfg.run.layers.empty()
                          ? std::vector<std::string>(charlm::layer_names().begin(),
                                                     charlm::layer_names().end())
                          : cfg.run.layers;

  // Conditions needed by the selected cases.
  std::set<Condition> needed;
  for (const auto& name : cases) {
    const auto c = decoder::find_case(name);
    needed.insert(c.train_eeg);
    needed.insert(c.train_rep);
    needed.insert(c.test_eeg);
    needed.insert(c.test_rep);
  }

  // EEG features per needed condition, aligned with the rep-table keys.
  std::map<Condition, linalg::Matrix> features;
  std::map<std::pair<int, int>, const eeg::EegEpoch*> epoch_index;
  for (const auto& e : averaged) epoch_index[{static_cast<int>(e.condition), e.sentence_id}] = &e;

  const std::vector<decoder::RowKey>* shared_keys = nullptr;
  for (Condition cond : needed) {
    const auto table_it = tables.find(cond);
    if (table_it == tables.end())
      throw ValidationError("run: corpus has no " + stimuli::condition_name(cond) + " sentences");
    const auto& table = table_it->second;
    if (shared_keys && table.keys != *shared_keys)
      throw ValidationError("run: per-condition keys are not aligned across conditions");
    shared_keys = &table.keys;

    linalg::Matrix x;
    std::size_t row = 0;
    for (const auto& key : table.keys) {
      const auto ep = epoch_index.find({static_cast<int>(cond), key.sentence_id});
      if (ep == epoch_index.end())
        throw ValidationError("run: no epoch for sentence " + std::to_string(key.sentence_id) +
                              " (" + stimuli::condition_name(cond) + ")");
      const auto* sentence = corpus.find(cond, key.sentence_id);
      const auto feats = eeg::featurize_epoch(*ep->second, *sentence, cfg.synth.window_ms);
      if (x.empty()) x = linalg::Matrix(table.keys.size(), feats[0].vec.size());
      for (const auto& f : feats) {
        if (row < table.keys.size() &&
            table.keys[row] == decoder::RowKey{f.sentence_id, f.word_index}) {
          std::copy(f.vec.begin(), f.vec.end(), x.row(row));
          ++row;
        }
      }
    }
    if (row != table.keys.size())
      throw ValidationError("run: feature rows (" + std::to_string(row) +
                            ") do not cover the representation keys (" +
                            std::to_string(table.keys.size()) + ") for " +
                            stimuli::condition_name(cond));
    features.emplace(cond, std::move(x));
  }

  const auto granularity = cfg.run.granularity == "word"
                               ? stats::PermutationGranularity::Word
                               : stats::PermutationGranularity::Sentence;

  std::vector<CaseLayerResult> results;
  for (const auto& case_name : cases) {
    const auto analysis_case = decoder::find_case(case_name);
    for (const auto& layer : layers) {
      decoder::AnalysisInputs inputs;
      inputs.keys = *shared_keys;
      for (Condition cond : needed) {
        inputs.eeg.emplace(cond, features.at(cond));
        inputs.rep.emplace(cond, tables.at(cond).layers.at(layer));
      }

      CaseLayerResult r;
      r.analysis_case = analysis_case;
      r.layer = layer;
      r.records = decoder::run_analysis(analysis_case, inputs, cfg.mc);
      r.observed = decoder::mean_accuracy(r.records);

      std::vector<int> sentence_of_row;
      for (const auto& k : inputs.keys) sentence_of_row.push_back(k.sentence_id);
      // All seven cases pair one representation condition with train and
      // test alike; permuting that condition's rows destroys the pairing.
      const Condition rep_cond = analysis_case.train_rep;
      const auto null = stats::permutation_null(
          inputs.rep.at(rep_cond), sentence_of_row, cfg.run.perms, granularity,
          mix_seed(cfg.seed, std::hash<std::string>{}(case_name + layer)),
          [&](const linalg::Matrix& shuffled) {
            decoder::AnalysisInputs permuted = inputs;
            permuted.rep[rep_cond] = shuffled;
            return decoder::mean_accuracy(decoder::run_analysis(analysis_case, permuted, cfg.mc));
          });
      r.p = stats::p_value(r.observed, null);
      stats::save_null(
          (out_dir / ("null_" + case_name + "_" + layer + ".csv")).string(), null);
      results.push_back(std::move(r));
      std::cout << "run: " << case_name << " " << layer << " acc=" << fmt(results.back().observed)
                << " p=" << fmt(results.back().p) << "\n";
    }
  }

  // One FDR family per invocation.
  std::vector<double> pvals;
  for (const auto& r : results) pvals.push_back(r.p);
  const auto fdr = stats::fdr_by(pvals, cfg.alpha);
  for (std::size_t i = 0; i < results.size(); ++i) results[i].significant = fdr.reject[i];

  std::ofstream records_csv(out_dir / "results.csv");
  records_csv << "analysis,case,layer,trial,lambda,acc_2v2,mse\n";
  for (const auto& r : results)
    for (const auto& t : r.records)
      records_csv << static_cast<int>(r.analysis_case.analysis) << "," << r.analysis_case.case_no
                  << "," << r.layer << "," << t.trial << "," << fmt(t.lambda) << ","
                  << fmt(t.acc_2v2) << "," << fmt(t.mse) << "\n";

  std::ofstream summary_csv(out_dir / "summary.csv");
  summary_csv << "analysis,case,train_eeg,train_rep,test_eeg,test_rep,layer,mean_acc,mean_mse,"
                 "p_value,significant\n";
  for (const auto& r : results)
    summary_csv << static_cast<int>(r.analysis_case.analysis) << "," << r.analysis_case.case_no
                << "," << condition_short(r.analysis_case.train_eeg) << ","
                << condition_short(r.analysis_case.train_rep) << ","
                << condition_short(r.analysis_case.test_eeg) << ","
                << condition_short(r.analysis_case.test_rep) << "," << r.layer << ","
                << fmt(r.observed) << "," << fmt(decoder::mean_mse(r.records)) << "," << fmt(r.p)
                << "," << (r.significant ? "*" : "") << "\n";

  json meta;
  meta["seed"] = cfg.seed;
  meta["alpha"] = cfg.alpha;
  meta["cases"] = cases;
  meta["layers"] = layers;
  meta["perms"] = cfg.run.perms;
  meta["granularity"] = cfg.run.granularity;
  meta["fdr_family_size"] = results.size();
  meta["mc"] = {{"n_trials", cfg.mc.n_trials},
                {"test_fraction", cfg.mc.test_fraction},
                {"inner_folds", cfg.mc.inner_folds},
                {"lambda_grid", cfg.mc.lambda_grid}};
  std::ofstream(out_dir / "run_meta.json") << meta.dump(2) << "\n";

  std::cout << "run: wrote results to " << out_dir.string() << "\n";
  return 0;
}

int cmd_probe(const RunConfig& cfg) {
  cfg.validate();
  const fs::path out_dir(cfg.paths.output_dir);
  fs::create_directories(out_dir);

  std::ofstream table(out_dir / "probe_results.csv");
  table << "task,kind,layer,accuracy\n";
  if (cfg.paths.probe_tasks.empty()) {
    std::cout << "probe: no tasks configured, empty table written\n";
    return 0;
  }

  const stimuli::Corpus corpus = obtain_corpus(cfg, true);
  const auto weights = obtain_weights(cfg, corpus, true);

  for (const auto& task_path : cfg.paths.probe_tasks) {
    const auto task = probing::load_probe_task(task_path);
    // Embed every example once per layer.
    std::map<std::string, linalg::Matrix> embeddings;
    for (const auto& layer : charlm::layer_names())
      embeddings.emplace(layer, linalg::Matrix(task.examples.size(),
                                               charlm::layer_dim(weights.config, layer)));
    for (std::size_t i = 0; i < task.examples.size(); ++i) {
      const auto acts = charlm::extract_layer_sequence(weights, task.examples[i].tokens);
      for (const auto& layer : charlm::layer_names()) {
        std::vector<std::vector<double>> vecs;
        vecs.reserve(acts.size());
        for (const auto& a : acts) vecs.push_back(a.by_name(layer));
        const auto emb = probing::sentence_embedding(vecs);
        std::copy(emb.begin(), emb.end(), embeddings.at(layer).row(i));
      }
    }
    for (const auto& layer : charlm::layer_names()) {
      const auto result = probing::train_probe(task, embeddings.at(layer), cfg.probe);
      table << task.name << "," << (task.kind == probing::TaskKind::Syntactic ? "syntactic"
                                                                              : "semantic")
            << "," << layer << "," << fmt(result.test_accuracy) << "\n";
      std::cout << "probe: " << task.name << " " << layer << " acc="
                << fmt(result.test_accuracy) << "\n";
    }
  }
  std::cout << "probe: wrote " << (out_dir / "probe_results.csv").string() << "\n";
  return 0;
}

namespace {

struct SummaryRow {
  int analysis = 0;
  int case_no = 0;
  std::string train_eeg, train_rep, test_eeg, test_rep, layer;
  double mean_acc = 0.0, mean_mse = 0.0, p = 1.0;
  bool significant = false;
};

std::vector<SummaryRow> load_summary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("report: cannot open '" + path + "'");
  std::vector<SummaryRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() == 10 && line.back() == ',') cells.push_back("");  // empty star column
    if (cells.size() < 11) throw ValidationError("report: malformed summary row '" + line + "'");
    SummaryRow r;
    r.analysis = std::stoi(cells[0]);
    r.case_no = std::stoi(cells[1]);
    r.train_eeg = cells[2];
    r.train_rep = cells[3];
    r.test_eeg = cells[4];
    r.test_rep = cells[5];
    r.layer = cells[6];
    r.mean_acc = std::stod(cells[7]);
    r.mean_mse = std::stod(cells[8]);
    r.p = std::stod(cells[9]);
    r.significant = cells[10] == "*";
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

int cmd_report(const RunConfig& cfg, const std::string& results_dir) {
  const fs::path dir(results_dir.empty() ? cfg.paths.output_dir : results_dir);
  const fs::path summary = dir / "summary.csv";
  if (!fs::exists(summary))
    throw ValidationError("report: no results in '" + dir.string() + "' (missing summary.csv)");
  const auto rows = load_summary(summary.string());
  if (rows.empty()) throw ValidationError("report: summary.csv has no rows");

  // Group rows into one series per (analysis, case).
  std::map<std::pair<int, int>, std::vector<const SummaryRow*>> series_rows;
  for (const auto& r : rows) series_rows[{r.analysis, r.case_no}].push_back(&r);

  json series = json::array();
  for (const auto& [key, gr] : series_rows) {
    json s;
    s["analysis"] = key.first;
    s["case"] = key.second;
    s["label"] = "train(" + gr[0]->train_eeg + "," + gr[0]->train_rep + ") test(" +
                 gr[0]->test_eeg + "," + gr[0]->test_rep + ")";
    json layers = json::array(), acc = json::array(), mse_vals = json::array(),
         stars = json::array();
    for (const auto* r : gr) {
      layers.push_back(r->layer);
      acc.push_back(r->mean_acc);
      mse_vals.push_back(r->mean_mse);
      stars.push_back(r->significant);
    }
    s["layers"] = std::move(layers);
    s["mean_acc"] = std::move(acc);
    s["mean_mse"] = std::move(mse_vals);
    s["stars"] = std::move(stars);
    series.push_back(std::move(s));
  }

  json plot;
  plot["metric"] = cfg.run.mse ? "mse" : "acc_2v2";
  plot["chance"] = 0.5;
  plot["series"] = std::move(series);

  const fs::path out = dir / (cfg.run.mse ? "plot_data_mse.json" : "plot_data.json");
  std::ofstream(out) << plot.dump(2) << "\n";
  std::cout << "report: wrote " << out.string() << "\n";
  return 0;
}

std::string render_reference_report(const std::string& fixture_path) {
  std::ifstream in(fixture_path);
  if (!in) throw ValidationError("cannot open fixture '" + fixture_path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("fixture '" + fixture_path + "': " + e.what());
  }

  std::ostringstream out;
  out << "# Reference results (" << j.at("source").get<std::string>() << ")\n";
  out << "\n## Decoding accuracy (2 vs 2), chance 0.5; * = significant\n";
  out << "analysis,case,train_eeg,train_rep,test_eeg,test_rep,layer,accuracy,significant\n";
  for (const auto& row : j.at("decoding_2v2")) {
    const auto analysis_case = decoder::find_case("A" + std::to_string(row.at("analysis").get<int>()) +
                                                  "." + std::to_string(row.at("case").get<int>()));
    out << static_cast<int>(analysis_case.analysis) << "," << analysis_case.case_no << ","
        << condition_short(analysis_case.train_eeg) << ","
        << condition_short(analysis_case.train_rep) << ","
        << condition_short(analysis_case.test_eeg) << ","
        << condition_short(analysis_case.test_rep) << "," << row.at("layer").get<std::string>()
        << "," << row.at("accuracy").get<std::string>() << ","
        << (row.at("significant").get<bool>() ? "*" : "") << "\n";
  }
  out << "\n## Non-contextual embedding baseline (2 vs 2)\n";
  out << "condition,accuracy\n";
  for (const auto& row : j.at("cbow_2v2"))
    out << row.at("condition").get<std::string>() << "," << row.at("accuracy").get<std::string>()
        << "\n";
  out << "\n## Language-model perplexity\n";
  out << "corpus,perplexity\n";
  for (const auto& row : j.at("perplexity"))
    out << row.at("corpus").get<std::string>() << "," << row.at("value").get<std::string>()
        << "\n";
  out << "\n## Word-order probe accuracy\n";
  out << j.at("word_order_accuracy").get<std::string>() << "\n";
  out << "\n## Probing-task accuracy (percent)\n";
  const auto& probing_j = j.at("probing");
  out << "task,kind";
  for (const auto& l : probing_j.at("layers")) out << "," << l.get<std::string>();
  out << "\n";
  for (const auto& row : probing_j.at("rows")) {
    out << row.at("task").get<std::string>() << "," << row.at("kind").get<std::string>();
    for (const auto& v : row.at("values")) out << "," << v.get<std::string>();
    out << "\n";
  }
  return out.str();
}

int cmd_report_reference(const std::string& fixture_path, const std::string& out_dir) {
  const std::string text = render_reference_report(fixture_path);
  fs::create_directories(out_dir);
  const fs::path out = fs::path(out_dir) / "reference_report.txt";
  std::ofstream(out) << text;
  std::cout << "report: wrote " << out.string() << "\n";
  return 0;
}

}  // namespace braindec::cli
