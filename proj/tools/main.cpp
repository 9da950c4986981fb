#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "braindec/cli.hpp"
#include "braindec/common.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::int64_t seed = -1;
  int threads = -1;
  int perms = -1;
  bool mse = false;
  std::vector<std::string> layers;
  std::vector<std::string> cases;
};

braindec::cli::RunConfig resolve_config(const Overrides& ov) {
  braindec::cli::RunConfig cfg;
  if (!ov.config_path.empty()) cfg = braindec::cli::load_run_config(ov.config_path);
  if (ov.seed >= 0) {
    cfg.seed = static_cast<std::uint64_t>(ov.seed);
    cfg.synth.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    cfg.mc.seed = cfg.seed;
    cfg.probe.seed = cfg.seed;
  }
  if (ov.threads >= 0) cfg.threads = ov.threads;
  if (ov.perms >= 0) cfg.run.perms = ov.perms;
  if (ov.mse) cfg.run.mse = true;
  if (!ov.layers.empty()) cfg.run.layers = ov.layers;
  if (!ov.cases.empty()) cfg.run.cases = ov.cases;
#ifdef _OPENMP
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#endif
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG-to-language-model decoding pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  Overrides ov;
  app.add_option("--config", ov.config_path, "JSON config file");
  app.add_option("--seed", ov.seed, "Override the config seed");
  app.add_option("--threads", ov.threads, "Cap OpenMP worker threads");

  auto* synth = app.add_subcommand("synth", "Generate synthetic epochs with a planted mapping");
  auto* train = app.add_subcommand("train-lm", "Train the character-level language model");
  auto* run = app.add_subcommand("run", "Run the decoding analyses with permutation tests");
  run->add_option("--layers", ov.layers, "Representation layers to analyze")->delimiter(',');
  run->add_option("--cases", ov.cases, "Analysis cases (A1.1..A3.2)")->delimiter(',');
  run->add_option("--perms", ov.perms, "Permutations per null distribution");
  auto* probe = app.add_subcommand("probe", "Run the probing-task suite");
  auto* report = app.add_subcommand("report", "Emit plot data from results");
  std::string results_dir, reference_fixture, report_out = "out";
  report->add_option("--results", results_dir, "Results directory (defaults to output_dir)");
  report->add_option("--reference", reference_fixture,
                     "Render the published-values fixture instead of run results");
  report->add_option("--out", report_out, "Output directory for the reference report");
  report->add_flag("--mse", ov.mse, "Emit the mean-squared-error series");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return braindec::cli::cmd_synth(resolve_config(ov));
    if (*train) return braindec::cli::cmd_train_lm(resolve_config(ov));
    if (*run) return braindec::cli::cmd_run(resolve_config(ov));
    if (*probe) return braindec::cli::cmd_probe(resolve_config(ov));
    if (*report) {
      if (!reference_fixture.empty())
        return braindec::cli::cmd_report_reference(reference_fixture, report_out);
      return braindec::cli::cmd_report(resolve_config(ov), results_dir);
    }
  } catch (const braindec::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const braindec::ComputeError& e) {
    std::cerr << "compute error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
