#include "braindec/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "braindec/common.hpp"

namespace braindec::stats {

using linalg::Matrix;

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ValidationError("cosine: length mismatch");
  const double uv = linalg::dot(u.data(), v.data(), u.size());
  const double uu = linalg::dot(u.data(), u.data(), u.size());
  const double vv = linalg::dot(v.data(), v.data(), v.size());
  if (uu == 0.0 || vv == 0.0) return 0.0;
  return uv / (std::sqrt(uu) * std::sqrt(vv));
}

namespace {

// Cosine that also reports whether a zero vector was involved.
double cosine_rows(const Matrix& a, int i, const Matrix& b, int j, bool& zero_seen) {
  const double uv = linalg::dot(a.row(i), b.row(j), a.cols());
  const double uu = linalg::dot(a.row(i), a.row(i), a.cols());
  const double vv = linalg::dot(b.row(j), b.row(j), b.cols());
  if (uu == 0.0 || vv == 0.0) {
    zero_seen = true;
    return 0.0;
  }
  return uv / (std::sqrt(uu) * std::sqrt(vv));
}

}  // namespace

TwoVsTwoOutcome two_vs_two_pairs(const Matrix& truth, const Matrix& predicted,
                                 std::span<const std::pair<int, int>> pairs) {
  if (truth.rows() != predicted.rows() || truth.cols() != predicted.cols())
    throw ValidationError("two_vs_two: shape mismatch between truth and predictions");
  if (truth.rows() < 2) throw ValidationError("two_vs_two: need at least 2 rows");

  TwoVsTwoOutcome out;
  for (const auto& [i, j] : pairs) {
    bool zero = false;
    const double matched = cosine_rows(truth, i, predicted, i, zero) +
                           cosine_rows(truth, j, predicted, j, zero);
    const double mismatched = cosine_rows(truth, i, predicted, j, zero) +
                              cosine_rows(truth, j, predicted, i, zero);
    if (zero) ++out.n_zero_vectors;
    ++out.n_tests;
    if (matched > mismatched)
      ++out.n_pass;
    else if (matched == mismatched)
      ++out.n_ties;
  }
  if (out.n_tests > 0)
    out.accuracy = (static_cast<double>(out.n_pass) + 0.5 * static_cast<double>(out.n_ties)) /
                   static_cast<double>(out.n_tests);
  return out;
}

std::vector<std::pair<int, int>> draw_disjoint_pairs(int n_rows, std::uint64_t seed) {
  std::vector<int> idx(n_rows);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, 0x32763270ull));
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(n_rows / 2);
  for (int k = 0; k + 1 < n_rows; k += 2) pairs.emplace_back(idx[k], idx[k + 1]);
  return pairs;
}

TwoVsTwoOutcome two_vs_two(const Matrix& truth, const Matrix& predicted, std::uint64_t seed) {
  const auto pairs = draw_disjoint_pairs(static_cast<int>(truth.rows()), seed);
  return two_vs_two_pairs(truth, predicted, pairs);
}

double mse(const Matrix& truth, const Matrix& predicted) {
  if (truth.rows() != predicted.rows() || truth.cols() != predicted.cols())
    throw ValidationError("mse: shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = truth.data()[i] - predicted.data()[i];
    sum += d * d;
  }
  return sum / static_cast<double>(truth.size());
}

namespace {

// Row permutation for one draw; resampled while it is the identity.
std::vector<int> draw_row_permutation(std::span<const int> sentence_of_row,
                                      PermutationGranularity granularity, std::mt19937_64& rng) {
  const int n = static_cast<int>(sentence_of_row.size());
  std::vector<int> perm(n);
  if (granularity == PermutationGranularity::Word) {
    if (n < 2) throw ValidationError("permutation_null: need at least 2 rows");
    std::iota(perm.begin(), perm.end(), 0);
    do {
      std::shuffle(perm.begin(), perm.end(), rng);
    } while (std::is_sorted(perm.begin(), perm.end()));
    return perm;
  }

  // Sentence blocks: group rows by sentence, permute block assignment.
  std::map<int, std::vector<int>> blocks;
  for (int r = 0; r < n; ++r) blocks[sentence_of_row[r]].push_back(r);
  const std::size_t block_len = blocks.begin()->second.size();
  for (const auto& [sid, rows] : blocks)
    if (rows.size() != block_len)
      throw ValidationError("permutation_null: sentence blocks must be equal-sized for "
                            "sentence-level shuffling (use word granularity)");
  if (blocks.size() < 2)
    throw ValidationError("permutation_null: need at least 2 sentences");

  std::vector<int> block_order(blocks.size());
  std::iota(block_order.begin(), block_order.end(), 0);
  do {
    std::shuffle(block_order.begin(), block_order.end(), rng);
  } while (std::is_sorted(block_order.begin(), block_order.end()));

  std::vector<const std::vector<int>*> block_rows;
  block_rows.reserve(blocks.size());
  for (const auto& [sid, rows] : blocks) block_rows.push_back(&rows);
  for (std::size_t b = 0; b < block_rows.size(); ++b) {
    const std::vector<int>& dst = *block_rows[b];
    const std::vector<int>& src = *block_rows[block_order[b]];
    for (std::size_t k = 0; k < block_len; ++k) perm[dst[k]] = src[k];
  }
  return perm;
}

}  // namespace

NullDistribution permutation_null(const Matrix& y, std::span<const int> sentence_of_row,
                                  int n_perms, PermutationGranularity granularity,
                                  std::uint64_t seed,
                                  const std::function<double(const Matrix&)>& metric) {
  if (y.rows() != sentence_of_row.size())
    throw ValidationError("permutation_null: row/sentence map size mismatch");
  if (n_perms < 1) throw ValidationError("permutation_null: n_perms must be >= 1");
  {
    // Validate the block structure up front; errors must not surface inside
    // the parallel loop.
    std::mt19937_64 probe_rng(seed);
    draw_row_permutation(sentence_of_row, granularity, probe_rng);
  }

  NullDistribution null;
  null.seed = seed;
  null.granularity = granularity;
  null.values.assign(n_perms, 0.0);

  std::exception_ptr failure = nullptr;
#pragma omp parallel for schedule(dynamic)
  for (int p = 0; p < n_perms; ++p) {
    try {
      std::mt19937_64 rng(mix_seed(seed, 0x7065726dull, static_cast<std::uint64_t>(p)));
      const auto perm = draw_row_permutation(sentence_of_row, granularity, rng);
      Matrix shuffled(y.rows(), y.cols());
      for (std::size_t r = 0; r < y.rows(); ++r)
        std::copy(y.row(perm[r]), y.row(perm[r]) + y.cols(), shuffled.row(r));
      null.values[p] = metric(shuffled);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return null;
}

double p_value(double observed, const NullDistribution& null) {
  if (null.values.empty()) throw ValidationError("p_value: empty null distribution");
  long ge = 0;
  for (double v : null.values)
    if (v >= observed) ++ge;
  return static_cast<double>(1 + ge) / static_cast<double>(1 + null.values.size());
}

FdrResult fdr_by(std::span<const double> pvals, double alpha) {
  for (double p : pvals)
    if (!(p >= 0.0 && p <= 1.0))
      throw ValidationError("fdr_by: p-value outside [0, 1]");

  FdrResult res;
  const int m = static_cast<int>(pvals.size());
  res.reject.assign(m, false);
  if (m == 0) return res;

  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return pvals[a] < pvals[b]; });

  double c_m = 0.0;
  for (int k = 1; k <= m; ++k) c_m += 1.0 / static_cast<double>(k);

  int k_star = 0;
  for (int i = m; i >= 1; --i) {
    if (pvals[order[i - 1]] <= alpha * static_cast<double>(i) / (static_cast<double>(m) * c_m)) {
      k_star = i;
      break;
    }
  }
  res.k_star = k_star;
  for (int i = 0; i < k_star; ++i) res.reject[order[i]] = true;
  if (k_star > 0) res.threshold = pvals[order[k_star - 1]];
  return res;
}

void save_null(const std::string& path, const NullDistribution& null) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write null distribution '" + path + "'");
  out << "# seed=" << null.seed << " granularity="
      << (null.granularity == PermutationGranularity::Sentence ? "sentence" : "word") << "\n";
  char buf[64];
  for (double v : null.values) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf << "\n";
  }
}

NullDistribution load_null(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open null distribution '" + path + "'");
  NullDistribution null;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0)
    throw ValidationError("null distribution '" + path + "': missing header comment");
  std::istringstream hs(line.substr(2));
  std::string tok;
  while (hs >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq);
    if (key == "seed") null.seed = std::stoull(tok.substr(eq + 1));
    if (key == "granularity")
      null.granularity = tok.substr(eq + 1) == "word" ? PermutationGranularity::Word
                                                      : PermutationGranularity::Sentence;
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    null.values.push_back(std::stod(line));
  }
  return null;
}

}  // namespace braindec::stats
