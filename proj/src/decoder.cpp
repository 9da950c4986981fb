#include "braindec/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "braindec/common.hpp"

namespace braindec::decoder {

using linalg::Matrix;

namespace {

constexpr std::uint64_t kSplitTag = 0x73706c69ull;
constexpr std::uint64_t kSweepTag = 0x73776565ull;
constexpr std::uint64_t kPairTag = 0x70616972ull;
constexpr std::uint64_t kFoldTag = 0x666f6c64ull;

void check_finite(const Matrix& m, const char* what) {
  for (std::size_t i = 0; i < m.size(); ++i)
    if (!std::isfinite(m.data()[i]))
      throw ValidationError(std::string(what) + ": non-finite entry");
}

Matrix gather_rows(const Matrix& src, std::span<const int> rows) {
  Matrix out(rows.size(), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(src.row(rows[i]), src.row(rows[i]) + src.cols(), out.row(i));
  return out;
}

}  // namespace

void DecodingDataset::validate() const {
  if (x.rows() != y.rows())
    throw ValidationError("dataset: X and Y row counts differ");
  if (x.rows() != keys.size())
    throw ValidationError("dataset: keys not aligned with rows");
  check_finite(x, "dataset X");
  check_finite(y, "dataset Y");
}

Matrix ridge_beta_primal(const Matrix& x, const Matrix& y, double lambda) {
  const Matrix xt = linalg::transpose(x);
  Matrix g = linalg::matmul_bt(xt, xt);  // X^T X
  linalg::add_diagonal(g, lambda);
  if (!linalg::cholesky_inplace(g))
    throw ComputeError("fit_ridge: numerically singular system (lambda too small for "
                       "degenerate X)");
  return linalg::cholesky_solve(g, linalg::matmul(xt, y));
}

Matrix ridge_beta_dual(const Matrix& x, const Matrix& y, double lambda) {
  Matrix k = linalg::gram(x);  // X X^T
  linalg::add_diagonal(k, lambda);
  if (!linalg::cholesky_inplace(k))
    throw ComputeError("fit_ridge: numerically singular system (lambda too small for "
                       "degenerate X)");
  const Matrix alpha = linalg::cholesky_solve(k, y);
  return linalg::matmul(linalg::transpose(x), alpha);
}

RidgeModel fit_ridge(const Matrix& x, const Matrix& y, double lambda) {
  if (x.rows() < 2) throw ValidationError("fit_ridge: need at least 2 rows");
  if (x.rows() != y.rows()) throw ValidationError("fit_ridge: X and Y row counts differ");
  if (!(lambda > 0.0)) throw ValidationError("fit_ridge: lambda must be positive");

  RidgeModel model;
  model.lambda = lambda;
  model.beta = x.rows() < x.cols() ? ridge_beta_dual(x, y, lambda)
                                   : ridge_beta_primal(x, y, lambda);
  return model;
}

Matrix predict(const RidgeModel& model, const Matrix& x) {
  if (x.cols() != model.beta.rows())
    throw ValidationError("predict: feature dimension " + std::to_string(x.cols()) +
                          " does not match model (" + std::to_string(model.beta.rows()) + ")");
  if (model.x_stats.identity()) return linalg::matmul(x, model.beta);
  return linalg::matmul(model.x_stats.apply(x), model.beta);
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid(12);
  const double lo = std::log(0.1), hi = std::log(200.0);
  for (int i = 0; i < 12; ++i) grid[i] = std::exp(lo + (hi - lo) * i / 11.0);
  grid.front() = 0.1;
  grid.back() = 200.0;
  return grid;
}

void McConfig::validate() const {
  if (n_trials < 1) throw ValidationError("mc config: n_trials must be >= 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ValidationError("mc config: test_fraction must be in (0, 1)");
  if (lambda_grid.empty()) throw ValidationError("mc config: empty lambda grid");
  for (double l : lambda_grid)
    if (!(l >= 0.1 && l <= 200.0))
      throw ValidationError("mc config: lambda grid values must lie in [0.1, 200]");
  if (inner_folds < 2) throw ValidationError("mc config: inner_folds must be >= 2");
}

SweepResult sweep_lambda(const Matrix& x, const Matrix& y,
                         std::span<const int> sentence_of_row, std::span<const double> grid,
                         int folds, std::uint64_t seed) {
  if (grid.empty()) throw ValidationError("sweep_lambda: empty grid");
  if (x.rows() != sentence_of_row.size())
    throw ValidationError("sweep_lambda: row/sentence map size mismatch");

  std::vector<int> sids(sentence_of_row.begin(), sentence_of_row.end());
  std::sort(sids.begin(), sids.end());
  sids.erase(std::unique(sids.begin(), sids.end()), sids.end());
  if (static_cast<int>(sids.size()) < folds)
    throw ValidationError("sweep_lambda: fewer sentences (" + std::to_string(sids.size()) +
                          ") than folds (" + std::to_string(folds) + ")");

  std::mt19937_64 rng(mix_seed(seed, kFoldTag));
  std::shuffle(sids.begin(), sids.end(), rng);
  std::map<int, int> fold_of_sid;
  for (std::size_t i = 0; i < sids.size(); ++i) fold_of_sid[sids[i]] = static_cast<int>(i) % folds;

  SweepResult res;
  res.grid.assign(grid.begin(), grid.end());
  std::sort(res.grid.begin(), res.grid.end());
  res.scores.assign(res.grid.size(), 0.0);

  for (int f = 0; f < folds; ++f) {
    std::vector<int> fit_rows, val_rows;
    for (std::size_t r = 0; r < sentence_of_row.size(); ++r)
      (fold_of_sid[sentence_of_row[r]] == f ? val_rows : fit_rows).push_back(static_cast<int>(r));
    if (fit_rows.empty() || val_rows.size() < 2) continue;

    const Matrix x_fit = gather_rows(x, fit_rows);
    const Matrix y_fit = gather_rows(y, fit_rows);
    const Matrix x_val = gather_rows(x, val_rows);
    const Matrix y_val = gather_rows(y, val_rows);

    // Dual route: one gram per fold serves the whole grid.
    const Matrix k_fit = linalg::gram(x_fit);
    const Matrix k_val = linalg::matmul_bt(x_val, x_fit);
    const auto pairs = stats::draw_disjoint_pairs(static_cast<int>(val_rows.size()),
                                                  mix_seed(seed, kPairTag, f));

    for (std::size_t gi = 0; gi < res.grid.size(); ++gi) {
      Matrix k = k_fit;
      linalg::add_diagonal(k, res.grid[gi]);
      if (!linalg::cholesky_inplace(k))
        throw ComputeError("sweep_lambda: numerically singular system at lambda " +
                           std::to_string(res.grid[gi]));
      const Matrix alpha = linalg::cholesky_solve(k, y_fit);
      const Matrix pred = linalg::matmul(k_val, alpha);
      res.scores[gi] += stats::two_vs_two_pairs(y_val, pred, pairs).accuracy;
    }
  }

  for (double& s : res.scores) s /= static_cast<double>(folds);
  res.best_lambda = res.grid[0];
  double best = -1.0;
  for (std::size_t gi = 0; gi < res.grid.size(); ++gi) {
    if (res.scores[gi] >= best) {  // ties break toward larger lambda
      best = res.scores[gi];
      res.best_lambda = res.grid[gi];
    }
  }
  return res;
}

std::vector<int> mc_test_sentences(std::span<const RowKey> keys, const McConfig& cfg,
                                   int trial) {
  std::vector<int> sids;
  for (const auto& k : keys) sids.push_back(k.sentence_id);
  std::sort(sids.begin(), sids.end());
  sids.erase(std::unique(sids.begin(), sids.end()), sids.end());
  if (sids.size() < 2) throw ValidationError("mc trial: need at least 2 sentences");

  std::mt19937_64 rng(mix_seed(cfg.seed, kSplitTag, static_cast<std::uint64_t>(trial)));
  std::shuffle(sids.begin(), sids.end(), rng);
  const int n_test = std::clamp<int>(
      static_cast<int>(std::lround(cfg.test_fraction * static_cast<double>(sids.size()))), 1,
      static_cast<int>(sids.size()) - 1);
  sids.resize(n_test);
  return sids;
}

namespace {

struct TrialSources {
  const Matrix* train_x;
  const Matrix* train_y;
  const Matrix* test_x;
  const Matrix* test_y;
};

TrialRecord run_trial(const TrialSources& src, std::span<const RowKey> keys, const McConfig& cfg,
                      int trial) {
  const auto test_list = mc_test_sentences(keys, cfg, trial);
  const std::set<int> test_sids(test_list.begin(), test_list.end());

  std::vector<int> train_rows, test_rows, train_sid_of_row;
  for (std::size_t r = 0; r < keys.size(); ++r) {
    if (test_sids.count(keys[r].sentence_id)) {
      test_rows.push_back(static_cast<int>(r));
    } else {
      train_rows.push_back(static_cast<int>(r));
      train_sid_of_row.push_back(keys[r].sentence_id);
    }
  }

  Matrix x_train = gather_rows(*src.train_x, train_rows);
  Matrix y_train = gather_rows(*src.train_y, train_rows);
  Matrix x_test = gather_rows(*src.test_x, test_rows);
  Matrix y_test = gather_rows(*src.test_y, test_rows);

  // Train-fold statistics only; the test side reuses them.
  const auto x_stats = linalg::Standardizer::fit(x_train);
  x_stats.apply_inplace(x_train);
  x_stats.apply_inplace(x_test);
  if (cfg.standardize_y) {
    const auto y_stats = linalg::Standardizer::fit(y_train);
    y_stats.apply_inplace(y_train);
    y_stats.apply_inplace(y_test);
  }

  const auto sweep =
      sweep_lambda(x_train, y_train, train_sid_of_row, cfg.lambda_grid, cfg.inner_folds,
                   mix_seed(cfg.seed, kSweepTag, static_cast<std::uint64_t>(trial)));

  const RidgeModel model = fit_ridge(x_train, y_train, sweep.best_lambda);
  const Matrix pred = linalg::matmul(x_test, model.beta);

  TrialRecord rec;
  rec.trial = trial;
  rec.lambda = sweep.best_lambda;
  rec.acc_2v2 = stats::two_vs_two(y_test, pred,
                                  mix_seed(cfg.seed, kPairTag, static_cast<std::uint64_t>(trial)))
                    .accuracy;
  rec.mse = stats::mse(y_test, pred);
  return rec;
}

std::vector<TrialRecord> run_trials(const TrialSources& src, std::span<const RowKey> keys,
                                    const McConfig& cfg) {
  cfg.validate();
  std::vector<TrialRecord> records(cfg.n_trials);
  std::exception_ptr failure = nullptr;
#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < cfg.n_trials; ++t) {
    try {
      records[t] = run_trial(src, keys, cfg, t);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return records;
}

}  // namespace

std::vector<TrialRecord> mc_cross_validate(const DecodingDataset& dataset, const McConfig& cfg) {
  dataset.validate();
  const TrialSources src{&dataset.x, &dataset.y, &dataset.x, &dataset.y};
  return run_trials(src, dataset.keys, cfg);
}

double mean_accuracy(std::span<const TrialRecord> records) {
  double sum = 0.0;
  for (const auto& r : records) sum += r.acc_2v2;
  return records.empty() ? 0.0 : sum / static_cast<double>(records.size());
}

double mean_mse(std::span<const TrialRecord> records) {
  double sum = 0.0;
  for (const auto& r : records) sum += r.mse;
  return records.empty() ? 0.0 : sum / static_cast<double>(records.size());
}

std::string AnalysisCase::name() const {
  return "A" + std::to_string(static_cast<int>(analysis)) + "." + std::to_string(case_no);
}

const std::array<AnalysisCase, 7>& analysis_table() {
  using C = Condition;
  static const std::array<AnalysisCase, 7> table = {{
      {AnalysisId::A1, 1, C::Sentence, C::Sentence, C::Sentence, C::Sentence},
      {AnalysisId::A1, 2, C::Jabberwocky, C::Jabberwocky, C::Jabberwocky, C::Jabberwocky},
      {AnalysisId::A1, 3, C::WordList, C::WordList, C::WordList, C::WordList},
      {AnalysisId::A2, 1, C::Sentence, C::Jabberwocky, C::Sentence, C::Jabberwocky},
      {AnalysisId::A2, 2, C::Jabberwocky, C::Sentence, C::Jabberwocky, C::Sentence},
      {AnalysisId::A3, 1, C::Sentence, C::Sentence, C::Jabberwocky, C::Sentence},
      {AnalysisId::A3, 2, C::Jabberwocky, C::Jabberwocky, C::Sentence, C::Jabberwocky},
  }};
  return table;
}

AnalysisCase find_case(const std::string& name) {
  for (const auto& c : analysis_table())
    if (c.name() == name) return c;
  throw ValidationError("unknown analysis case '" + name + "' (expected A1.1..A3.2)");
}

void AnalysisInputs::validate() const {
  for (const auto& [cond, m] : eeg)
    if (m.rows() != keys.size())
      throw ValidationError("analysis inputs: EEG rows for " + stimuli::condition_name(cond) +
                            " not aligned with keys");
  for (const auto& [cond, m] : rep)
    if (m.rows() != keys.size())
      throw ValidationError("analysis inputs: representation rows for " +
                            stimuli::condition_name(cond) + " not aligned with keys");
}

std::vector<TrialRecord> run_analysis(const AnalysisCase& c, const AnalysisInputs& inputs,
                                      const McConfig& cfg) {
  inputs.validate();
  auto need = [&](const std::map<Condition, Matrix>& m, Condition cond,
                  const char* what) -> const Matrix& {
    const auto it = m.find(cond);
    if (it == m.end())
      throw ValidationError(std::string("run_analysis ") + c.name() + ": missing " + what +
                            " for condition " + stimuli::condition_name(cond));
    return it->second;
  };
  const TrialSources src{&need(inputs.eeg, c.train_eeg, "EEG"),
                         &need(inputs.rep, c.train_rep, "representations"),
                         &need(inputs.eeg, c.test_eeg, "EEG"),
                         &need(inputs.rep, c.test_rep, "representations")};
  return run_trials(src, inputs.keys, cfg);
}

stats::NullDistribution permutation_null_mc(const DecodingDataset& dataset, const McConfig& cfg,
                                            int n_perms,
                                            stats::PermutationGranularity granularity,
                                            std::uint64_t seed) {
  dataset.validate();
  std::vector<int> sentence_of_row;
  sentence_of_row.reserve(dataset.keys.size());
  for (const auto& k : dataset.keys) sentence_of_row.push_back(k.sentence_id);

  return stats::permutation_null(
      dataset.y, sentence_of_row, n_perms, granularity, seed,
      [&dataset, &cfg](const Matrix& shuffled_y) {
        DecodingDataset permuted = dataset;
        permuted.y = shuffled_y;
        return mean_accuracy(mc_cross_validate(permuted, cfg));
      });
}

}  // namespace braindec::decoder
