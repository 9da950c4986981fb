#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "braindec/charlm.hpp"
#include "braindec/decoder.hpp"
#include "braindec/probing.hpp"
#include "braindec/synth.hpp"

namespace braindec::cli {

// One structured config file (JSON, documented keys) drives every command;
// CLI flags override individual fields.
struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 0;  // 0 keeps the OpenMP default
  double alpha = 0.05;

  struct Paths {
    std::string corpus;
    std::string epochs_manifest;
    std::string checkpoint;
    std::string train_corpus;
    std::string output_dir = "out";
    std::vector<std::string> probe_tasks;
  } paths;

  charlm::ModelConfig model;
  charlm::TrainConfig train;
  decoder::McConfig mc;
  synth::SynthConfig synth;

  struct Run {
    std::vector<std::string> cases;   // empty = all seven
    std::vector<std::string> layers;  // empty = all five
    int perms = 1000;
    bool mse = false;
    std::string granularity = "sentence";  // permutation granularity
  } run;

  probing::MlpConfig probe;

  void validate() const;
};

RunConfig load_run_config(const std::string& path);

int cmd_synth(const RunConfig& cfg);
int cmd_train_lm(const RunConfig& cfg);
int cmd_run(const RunConfig& cfg);
int cmd_probe(const RunConfig& cfg);
int cmd_report(const RunConfig& cfg, const std::string& results_dir);

// Renders the bundled published-values fixture as a fixed-format text table.
std::string render_reference_report(const std::string& fixture_path);
int cmd_report_reference(const std::string& fixture_path, const std::string& out_dir);

}  // namespace braindec::cli
