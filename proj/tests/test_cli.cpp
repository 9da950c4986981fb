#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "braindec/cli.hpp"
#include "braindec/common.hpp"
#include "braindec/eeg.hpp"
#include "doctest.h"

using namespace braindec;
using namespace braindec::cli;
namespace fs = std::filesystem;

namespace {

const std::string kDataDir = BRAINDEC_DATA_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// A config small enough to run the full pipeline in seconds.
RunConfig small_run_config(const std::string& out_dir, std::uint64_t seed) {
  RunConfig cfg;
  cfg.seed = seed;
  cfg.paths.output_dir = out_dir;
  cfg.model.char_embed_dim = 6;
  cfg.model.max_word_len = 10;
  cfg.model.filter_widths = {1, 2, 3};
  cfg.model.filters_per_width = {6, 6, 6};
  cfg.model.lstm_hidden_dim = 8;
  cfg.synth.n_sentences = 8;
  cfg.synth.channels = 4;
  cfg.synth.rate_hz = 125;
  cfg.synth.n_subjects = 2;
  cfg.synth.noise_sigma = 0.0;
  cfg.synth.planted_layers = {"LSTM2"};
  cfg.synth.seed = seed;
  cfg.mc.n_trials = 4;
  cfg.mc.test_fraction = 0.2;
  cfg.mc.lambda_grid = {0.1, 10.0};
  cfg.mc.inner_folds = 3;
  cfg.mc.seed = seed;
  cfg.run.cases = {"A1.1"};
  cfg.run.layers = {"LSTM2"};
  cfg.run.perms = 5;
  cfg.probe.hidden_sizes = {16, 16};
  cfg.probe.epochs = 30;
  cfg.probe.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("config files load with overrides and reject unknown fields") {
  std::ofstream("good_config.json") << R"({
    "seed": 99,
    "alpha": 0.01,
    "paths": {"output_dir": "cfg_out"},
    "mc": {"n_trials": 3, "lambda_grid": [0.5, 5.0]},
    "run": {"cases": ["A1.1", "A2.2"], "layers": ["LSTM1"], "perms": 7}
  })";
  const auto cfg = load_run_config("good_config.json");
  CHECK(cfg.seed == 99);
  CHECK(cfg.alpha == 0.01);
  CHECK(cfg.mc.n_trials == 3);
  CHECK(cfg.mc.seed == 99);
  CHECK(cfg.run.perms == 7);
  CHECK(cfg.run.cases.size() == 2);

  std::ofstream("bad_config.json") << R"({"seeed": 1})";
  CHECK_THROWS_WITH_AS(load_run_config("bad_config.json"), doctest::Contains("seeed"),
                       ValidationError);

  std::ofstream("bad_case.json") << R"({"run": {"cases": ["A9.1"]}})";
  CHECK_THROWS_AS(load_run_config("bad_case.json"), ValidationError);

  std::ofstream("bad_lambda.json") << R"({"mc": {"lambda_grid": [1000.0]}})";
  CHECK_THROWS_AS(load_run_config("bad_lambda.json"), ValidationError);
}

TEST_CASE("cmd_synth writes a loadable, byte-stable epoch set") {
  fs::remove_all("cli_synth_a");
  fs::remove_all("cli_synth_b");
  auto cfg = small_run_config("cli_synth_a", 77);
  CHECK(cmd_synth(cfg) == 0);
  CHECK(fs::exists("cli_synth_a/manifest.json"));
  CHECK(fs::exists("cli_synth_a/ground_truth.json"));
  CHECK(fs::exists("cli_synth_a/stimuli.jsonl"));

  const auto epochs = eeg::load_epochs("cli_synth_a/manifest.json");
  CHECK(epochs.size() == 8 * 3 * 2);  // sentences x conditions x subjects

  auto cfg_b = small_run_config("cli_synth_b", 77);
  CHECK(cmd_synth(cfg_b) == 0);
  // Same seed, different directory: byte-identical artifacts.
  for (const auto& entry : fs::directory_iterator("cli_synth_a/epochs")) {
    const auto other = fs::path("cli_synth_b/epochs") / entry.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(slurp(entry.path()) == slurp(other));
  }
  CHECK(slurp("cli_synth_a/stimuli.jsonl") == slurp("cli_synth_b/stimuli.jsonl"));
}

TEST_CASE("cmd_train_lm writes a loadable checkpoint and a loss curve") {
  fs::remove_all("cli_train");
  auto cfg = small_run_config("cli_train", 31);
  cfg.paths.train_corpus = kDataDir + "/corpus_tiny_nl.txt";
  cfg.paths.checkpoint = "cli_train/lm.ckpt";
  cfg.train.epochs = 3;
  cfg.train.batch_size = 2;
  cfg.train.sequence_length = 5;
  CHECK(cmd_train_lm(cfg) == 0);

  const auto weights = charlm::load_checkpoint("cli_train/lm.ckpt");
  CHECK(weights.config.lstm_hidden_dim == 8);

  const auto curve = slurp("cli_train/loss_curve.csv");
  CHECK(curve.find("epoch,loss,perplexity,lr") == 0);

  // Fail-fast on a config problem, before any compute.
  auto bad = cfg;
  bad.paths.train_corpus = "";
  CHECK_THROWS_AS(cmd_train_lm(bad), ValidationError);
}

TEST_CASE("cmd_run + cmd_report produce results, summary and plot data") {
  fs::remove_all("cli_run");
  auto cfg = small_run_config("cli_run", 55);
  CHECK(cmd_synth(cfg) == 0);

  // Reuse the synth outputs, including the checkpoint it persisted.
  cfg.paths.corpus = "cli_run/stimuli.jsonl";
  cfg.paths.epochs_manifest = "cli_run/manifest.json";
  cfg.paths.checkpoint = "cli_run/lm.ckpt";
  CHECK(cmd_run(cfg) == 0);
  CHECK(fs::exists("cli_run/results.csv"));
  CHECK(fs::exists("cli_run/summary.csv"));
  CHECK(fs::exists("cli_run/run_meta.json"));
  CHECK(fs::exists("cli_run/null_A1.1_LSTM2.csv"));

  const auto summary = slurp("cli_run/summary.csv");
  CHECK(summary.find("analysis,case,") == 0);
  CHECK(summary.find("LSTM2") != std::string::npos);

  const auto results = slurp("cli_run/results.csv");
  CHECK(results.find("analysis,case,layer,trial,lambda,acc_2v2,mse") == 0);

  CHECK(cmd_report(cfg, "cli_run") == 0);
  CHECK(fs::exists("cli_run/plot_data.json"));
  const auto plot = slurp("cli_run/plot_data.json");
  CHECK(plot.find("\"chance\": 0.5") != std::string::npos);

  auto mse_cfg = cfg;
  mse_cfg.run.mse = true;
  CHECK(cmd_report(mse_cfg, "cli_run") == 0);
  CHECK(fs::exists("cli_run/plot_data_mse.json"));

  fs::remove_all("cli_empty");
  fs::create_directories("cli_empty");
  CHECK_THROWS_WITH_AS(cmd_report(cfg, "cli_empty"), doctest::Contains("no results"),
                       ValidationError);
}

TEST_CASE("planted layers earn stars, null data earns none") {
  // Planted LSTM2, enough permutations for p = 1/(perms+1) <= alpha.
  // Untrained-model representations are position-dominated and the
  // sentence-granularity null preserves position alignment on purpose, so
  // the positive control shuffles at word granularity.
  fs::remove_all("cli_star");
  auto cfg = small_run_config("cli_star", 61);
  cfg.synth.n_sentences = 10;
  cfg.mc.n_trials = 4;
  cfg.run.perms = 19;
  cfg.run.granularity = "word";
  CHECK(cmd_synth(cfg) == 0);
  cfg.paths.corpus = "cli_star/stimuli.jsonl";
  cfg.paths.epochs_manifest = "cli_star/manifest.json";
  cfg.paths.checkpoint = "cli_star/lm.ckpt";
  CHECK(cmd_run(cfg) == 0);
  const auto starred = slurp("cli_star/summary.csv");
  CHECK(starred.find(",LSTM2,") != std::string::npos);
  CHECK(starred.substr(starred.rfind(',') + 1) == "*\n");

  // Pure-noise epochs: same pipeline, no star.
  fs::remove_all("cli_nostar");
  auto null_cfg = small_run_config("cli_nostar", 62);
  null_cfg.synth.n_sentences = 10;
  null_cfg.synth.planted_layers = {};
  null_cfg.synth.noise_sigma = 1.0;
  null_cfg.mc.n_trials = 4;
  null_cfg.run.perms = 19;
  null_cfg.run.granularity = "word";
  CHECK(cmd_synth(null_cfg) == 0);
  null_cfg.paths.corpus = "cli_nostar/stimuli.jsonl";
  null_cfg.paths.epochs_manifest = "cli_nostar/manifest.json";
  null_cfg.paths.checkpoint = "cli_nostar/lm.ckpt";
  CHECK(cmd_run(null_cfg) == 0);
  const auto unstarred = slurp("cli_nostar/summary.csv");
  CHECK(unstarred.substr(unstarred.rfind(',') + 1) == "\n");
}

TEST_CASE("a full seven-case run reports seven series plus the chance line") {
  fs::remove_all("cli_seven");
  auto cfg = small_run_config("cli_seven", 63);
  cfg.synth.n_sentences = 10;
  cfg.mc.n_trials = 3;
  cfg.run.cases = {};  // all seven
  cfg.run.layers = {"LSTM2"};
  cfg.run.perms = 5;
  CHECK(cmd_synth(cfg) == 0);
  cfg.paths.corpus = "cli_seven/stimuli.jsonl";
  cfg.paths.epochs_manifest = "cli_seven/manifest.json";
  cfg.paths.checkpoint = "cli_seven/lm.ckpt";
  CHECK(cmd_run(cfg) == 0);
  CHECK(cmd_report(cfg, "cli_seven") == 0);

  const auto plot = slurp("cli_seven/plot_data.json");
  CHECK(plot.find("\"chance\": 0.5") != std::string::npos);
  int series = 0;
  for (std::size_t at = plot.find("\"label\""); at != std::string::npos;
       at = plot.find("\"label\"", at + 1))
    ++series;
  CHECK(series == 7);
}

TEST_CASE("cmd_probe runs the bundled planted task") {
  fs::remove_all("cli_probe");
  auto cfg = small_run_config("cli_probe", 21);
  cfg.paths.probe_tasks = {kDataDir + "/probe_tasks/token_class.json"};
  CHECK(cmd_probe(cfg) == 0);
  const auto table = slurp("cli_probe/probe_results.csv");
  CHECK(table.find("task,kind,layer,accuracy") == 0);
  CHECK(table.find("token-class,semantic,LSTM2,") != std::string::npos);

  // The planted cell: token identity is literally the character content, so
  // the embedding layer must separate the classes.
  std::istringstream rows(table);
  std::string line;
  double embedding_acc = 0.0;
  while (std::getline(rows, line))
    if (line.rfind("token-class,semantic,Embedding,", 0) == 0)
      embedding_acc = std::stod(line.substr(line.rfind(',') + 1));
  CHECK(embedding_acc >= 0.95);

  // Empty task list: header-only table, success.
  fs::remove_all("cli_probe_empty");
  auto empty = small_run_config("cli_probe_empty", 22);
  CHECK(cmd_probe(empty) == 0);
  CHECK(slurp("cli_probe_empty/probe_results.csv") == "task,kind,layer,accuracy\n");

  // Malformed task file names the file.
  std::ofstream("broken_task.json") << "{oops";
  auto broken = small_run_config("cli_probe_bad", 23);
  broken.paths.probe_tasks = {"broken_task.json"};
  CHECK_THROWS_WITH_AS(cmd_probe(broken), doctest::Contains("broken_task.json"),
                       ValidationError);
}

TEST_CASE("the reference report renders the published fixtures") {
  const auto text = render_reference_report(kDataDir + "/fixtures/published_reference.json");
  CHECK(text.find("0.581") != std::string::npos);
  CHECK(text.find("0.600") != std::string::npos);
  CHECK(text.find("108.12") != std::string::npos);
  CHECK(text.find("1008.23") != std::string::npos);
  CHECK(text.find("80%") != std::string::npos);
  CHECK(text.find("Tense/Du,semantic,46.4,55.1,66.7,72.7,62.7") != std::string::npos);
  CHECK(text.find("Bigram shift,syntactic,43.1,53.1,70.8,69.4,58\n") != std::string::npos);
  // A3 rows inherit the swapped-EEG pairing from the case table.
  CHECK(text.find("3,1,Sen,Sen,Jab,Sen,LSTM1,0.571,*") != std::string::npos);

  // Rendering is a pure function of the fixture bytes.
  const auto again = render_reference_report(kDataDir + "/fixtures/published_reference.json");
  CHECK(text == again);
}

#ifdef BRAINDEC_BIN
TEST_CASE("the binary maps errors to the documented exit codes") {
  const std::string bin = BRAINDEC_BIN;
  // Validation failure: missing required inputs.
  const int validation = std::system((bin + " run --config does_not_exist.json > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(validation) == 1);
  // Success: reference report rendering.
  const int ok = std::system(
      (bin + " report --reference " + kDataDir +
       "/fixtures/published_reference.json --out cli_ref_out > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(ok) == 0);
  CHECK(fs::exists("cli_ref_out/reference_report.txt"));
}
#endif
