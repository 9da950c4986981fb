#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "braindec/linalg.hpp"

namespace braindec::stats {

// u.v / (|u||v|); a zero vector yields 0 so the test stays total.
double cosine(std::span<const double> u, std::span<const double> v);

struct TwoVsTwoOutcome {
  long n_tests = 0;
  long n_pass = 0;
  long n_ties = 0;      // exact equality, scored 0.5
  long n_zero_vectors = 0;  // zero-vector cosines encountered (flagged, not fatal)
  double accuracy = 0.0;
};

// Passes when cos(y_i, yhat_i) + cos(y_j, yhat_j) > cos(y_i, yhat_j) + cos(y_j, yhat_i).
TwoVsTwoOutcome two_vs_two_pairs(const linalg::Matrix& truth, const linalg::Matrix& predicted,
                                 std::span<const std::pair<int, int>> pairs);

// Seeded random disjoint pairing of rows (floor(n/2) pairs).
std::vector<std::pair<int, int>> draw_disjoint_pairs(int n_rows, std::uint64_t seed);

TwoVsTwoOutcome two_vs_two(const linalg::Matrix& truth, const linalg::Matrix& predicted,
                           std::uint64_t seed);

// Mean over all entries of the squared error.
double mse(const linalg::Matrix& truth, const linalg::Matrix& predicted);

enum class PermutationGranularity { Sentence, Word };

struct NullDistribution {
  std::vector<double> values;
  std::uint64_t seed = 0;
  PermutationGranularity granularity = PermutationGranularity::Sentence;
};

// Shuffles the rows of y at the requested granularity (sentence blocks by
// default; blocks must be equal-sized), evaluates `metric` on each shuffled
// copy. The identity permutation is excluded by construction. Values are
// ordered by permutation index, so the output does not depend on thread count.
NullDistribution permutation_null(const linalg::Matrix& y, std::span<const int> sentence_of_row,
                                  int n_perms, PermutationGranularity granularity,
                                  std::uint64_t seed,
                                  const std::function<double(const linalg::Matrix&)>& metric);

// (1 + #{null >= observed}) / (1 + n): one-sided, plus-one corrected.
double p_value(double observed, const NullDistribution& null);

struct FdrResult {
  std::vector<bool> reject;  // original order
  int k_star = 0;            // number of rejected hypotheses
  double threshold = 0.0;    // largest rejected p, 0 when none
};

// Benjamini-Hochberg-Yekutieli step-up with c(m) = sum_{k<=m} 1/k.
FdrResult fdr_by(std::span<const double> pvals, double alpha = 0.05);

void save_null(const std::string& path, const NullDistribution& null);
NullDistribution load_null(const std::string& path);

}  // namespace braindec::stats
