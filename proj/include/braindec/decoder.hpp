#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "braindec/linalg.hpp"
#include "braindec/stats.hpp"
#include "braindec/stimuli.hpp"

namespace braindec::decoder {

using stimuli::Condition;

struct RowKey {
  int sentence_id = 0;
  int word_index = 0;
  auto operator<=>(const RowKey&) const = default;
};

struct DecodingDataset {
  linalg::Matrix x;  // n x D EEG features
  linalg::Matrix y;  // n x P representation vectors
  std::vector<RowKey> keys;
  Condition eeg_condition = Condition::Sentence;
  Condition rep_condition = Condition::Sentence;

  void validate() const;
};

struct RidgeModel {
  linalg::Matrix beta;  // D x P
  double lambda = 0.0;
  linalg::Standardizer x_stats;  // identity unless the caller fitted on raw data
  linalg::Standardizer y_stats;
};

// Minimizes |X b - Y|^2 + lambda |b|^2. Uses the n x n dual formulation
// b = X^T (X X^T + lambda I)^-1 Y whenever n < D.
RidgeModel fit_ridge(const linalg::Matrix& x, const linalg::Matrix& y, double lambda);
linalg::Matrix ridge_beta_primal(const linalg::Matrix& x, const linalg::Matrix& y, double lambda);
linalg::Matrix ridge_beta_dual(const linalg::Matrix& x, const linalg::Matrix& y, double lambda);

linalg::Matrix predict(const RidgeModel& model, const linalg::Matrix& x);

std::vector<double> default_lambda_grid();  // 12 log-spaced values in [0.1, 200]

struct McConfig {
  int n_trials = 200;
  double test_fraction = 0.1;
  std::vector<double> lambda_grid = default_lambda_grid();
  int inner_folds = 5;
  std::uint64_t seed = 0;
  bool standardize_y = true;

  void validate() const;
};

struct SweepResult {
  double best_lambda = 0.0;
  std::vector<double> grid;    // ascending
  std::vector<double> scores;  // mean validation 2-vs-2 accuracy per grid value
};

// Sentence-grouped inner cross-validation; ties break toward larger lambda.
SweepResult sweep_lambda(const linalg::Matrix& x, const linalg::Matrix& y,
                         std::span<const int> sentence_of_row, std::span<const double> grid,
                         int folds, std::uint64_t seed);

struct TrialRecord {
  int trial = 0;
  double lambda = 0.0;
  double acc_2v2 = 0.0;
  double mse = 0.0;
};

// Sentence ids held out by one MC trial; pure in (keys, cfg.seed, trial).
std::vector<int> mc_test_sentences(std::span<const RowKey> keys, const McConfig& cfg, int trial);

std::vector<TrialRecord> mc_cross_validate(const DecodingDataset& dataset, const McConfig& cfg);

double mean_accuracy(std::span<const TrialRecord> records);
double mean_mse(std::span<const TrialRecord> records);

enum class AnalysisId { A1 = 1, A2 = 2, A3 = 3 };

struct AnalysisCase {
  AnalysisId analysis = AnalysisId::A1;
  int case_no = 1;
  Condition train_eeg, train_rep, test_eeg, test_rep;

  std::string name() const;  // "A1.1" .. "A3.2"
};

// The seven constructible analysis/case rows.
const std::array<AnalysisCase, 7>& analysis_table();
AnalysisCase find_case(const std::string& name);

// Per-condition EEG/representation matrices sharing one aligned key list.
struct AnalysisInputs {
  std::vector<RowKey> keys;
  std::map<Condition, linalg::Matrix> eeg;
  std::map<Condition, linalg::Matrix> rep;

  void validate() const;
};

// A1: train/test within one condition. A2: EEG of one condition paired with
// the other condition's representations throughout. A3: train within one
// condition, substitute the other condition's EEG at test time only.
std::vector<TrialRecord> run_analysis(const AnalysisCase& c, const AnalysisInputs& inputs,
                                      const McConfig& cfg);

// Permutation null over the dataset's Y rows, each draw scored by the mean
// 2-vs-2 accuracy of the full MC pipeline (lambda sweep included).
stats::NullDistribution permutation_null_mc(const DecodingDataset& dataset, const McConfig& cfg,
                                            int n_perms,
                                            stats::PermutationGranularity granularity,
                                            std::uint64_t seed);

}  // namespace braindec::decoder
