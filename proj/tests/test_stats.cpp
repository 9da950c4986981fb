#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "braindec/common.hpp"
#include "braindec/stats.hpp"
#include "doctest.h"

using namespace braindec;
using namespace braindec::stats;
using braindec::linalg::Matrix;

namespace {

Matrix random_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(n, d);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// Step-up BY evaluated directly from the definition, independent of fdr_by's
// implementation details.
std::vector<bool> by_oracle(const std::vector<double>& p, double alpha) {
  const int m = static_cast<int>(p.size());
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[a] < p[b]; });
  double c = 0.0;
  for (int k = 1; k <= m; ++k) c += 1.0 / k;
  int k_star = 0;
  for (int i = 1; i <= m; ++i)
    if (p[order[i - 1]] <= alpha * i / (m * c)) k_star = i;
  std::vector<bool> reject(m, false);
  for (int i = 0; i < k_star; ++i) reject[order[i]] = true;
  return reject;
}

std::vector<bool> bh_oracle(const std::vector<double>& p, double alpha) {
  const int m = static_cast<int>(p.size());
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[a] < p[b]; });
  int k_star = 0;
  for (int i = 1; i <= m; ++i)
    if (p[order[i - 1]] <= alpha * i / m) k_star = i;
  std::vector<bool> reject(m, false);
  for (int i = 0; i < k_star; ++i) reject[order[i]] = true;
  return reject;
}

}  // namespace

TEST_CASE("cosine basics") {
  const std::vector<double> e1 = {1, 0}, e2 = {0, 1};
  CHECK(cosine(e1, e1) == 1.0);
  CHECK(cosine(e1, e2) == 0.0);

  const std::vector<double> u = {1, 2, 3}, v = {4, 5, 6};
  const double expected = 32.0 / (std::sqrt(14.0) * std::sqrt(77.0));
  CHECK(std::abs(cosine(u, v) - expected) < 1e-12);
  CHECK(std::abs(cosine(u, v) - 0.9746318) < 1e-6);

  const std::vector<double> zero = {0, 0, 0};
  CHECK(cosine(zero, u) == 0.0);
  CHECK_THROWS_AS(cosine(e1, u), ValidationError);
}

TEST_CASE("two_vs_two passes the hand-computed pair and ties score half") {
  Matrix y(2, 2), yhat(2, 2);
  y(0, 0) = 1;
  y(1, 1) = 1;
  yhat(0, 0) = 1;
  yhat(0, 1) = 0.1;
  yhat(1, 0) = 0.1;
  yhat(1, 1) = 1;
  const std::vector<std::pair<int, int>> pairs = {{0, 1}};
  const auto out = two_vs_two_pairs(y, yhat, pairs);
  CHECK(out.n_tests == 1);
  CHECK(out.n_pass == 1);
  CHECK(out.accuracy == 1.0);

  // Identical predictions for both rows make matched and mismatched sums equal.
  Matrix same(2, 2);
  same(0, 0) = same(1, 0) = 0.6;
  same(0, 1) = same(1, 1) = 0.8;
  const auto tie = two_vs_two_pairs(y, same, pairs);
  CHECK(tie.n_ties == 1);
  CHECK(tie.accuracy == 0.5);
}

TEST_CASE("two_vs_two needs at least two rows") {
  Matrix y(1, 2), yhat(1, 2);
  CHECK_THROWS_AS(two_vs_two(y, yhat, 0), ValidationError);
}

TEST_CASE("random predictions sit at chance over 10000 tests") {
  long tests = 0, pass = 0, ties = 0;
  for (int rep = 0; tests < 10000; ++rep) {
    const Matrix y = random_rows(100, 5, 1000 + rep);
    const Matrix yhat = random_rows(100, 5, 5000 + rep);
    const auto out = two_vs_two(y, yhat, rep);
    tests += out.n_tests;
    pass += out.n_pass;
    ties += out.n_ties;
  }
  const double acc = (pass + 0.5 * ties) / static_cast<double>(tests);
  CHECK(acc > 0.48);
  CHECK(acc < 0.52);
}

TEST_CASE("two_vs_two outcome is invariant to per-vector positive rescaling") {
  const Matrix y = random_rows(40, 6, 2);
  const Matrix yhat = random_rows(40, 6, 3);
  Matrix scaled = yhat;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> scale(0.015, 90.0);
  for (std::size_t i = 0; i < scaled.rows(); ++i) {
    const double c = scale(rng);
    for (std::size_t j = 0; j < scaled.cols(); ++j) scaled(i, j) *= c;
  }
  const auto a = two_vs_two(y, yhat, 7);
  const auto b = two_vs_two(y, scaled, 7);
  CHECK(a.n_tests == b.n_tests);
  CHECK(a.n_pass == b.n_pass);
  CHECK(a.n_ties == b.n_ties);
  CHECK(a.accuracy == b.accuracy);
}

TEST_CASE("mse matches the elementwise oracle") {
  Matrix y(3, 2), yhat(3, 2);
  CHECK(mse(y, y) == 0.0);
  for (std::size_t i = 0; i < yhat.size(); ++i) yhat.data()[i] = 1.0;
  CHECK(mse(y, yhat) == 1.0);

  const Matrix a = random_rows(3, 2, 5), b = random_rows(3, 2, 6);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    sum += d * d;
  }
  CHECK(std::abs(mse(a, b) - sum / 6.0) < 1e-15);

  Matrix wrong(2, 2);
  CHECK_THROWS_AS(mse(a, wrong), ValidationError);
}

TEST_CASE("p_value implements the plus-one one-sided rule") {
  NullDistribution null;
  null.values.assign(1000, 0.5);
  CHECK(std::abs(p_value(0.9, null) - 1.0 / 1001.0) < 1e-15);
  CHECK(p_value(0.1, null) == 1.0);

  NullDistribution one;
  one.values = {0.7};
  CHECK(p_value(0.7, one) == 1.0);  // ties count as >=

  NullDistribution rnd;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 200; ++i) rnd.values.push_back(u(rng));
  double prev = 2.0;
  for (double obs = 0.0; obs <= 1.0; obs += 0.01) {
    const double p = p_value(obs, rnd);
    CHECK(p <= prev);
    CHECK(p >= 1.0 / 201.0);
    CHECK(p <= 1.0);
    prev = p;
  }

  NullDistribution empty;
  CHECK_THROWS_AS(p_value(0.5, empty), ValidationError);
}

TEST_CASE("fdr_by hand-worked example and edge cases") {
  const std::vector<double> p = {0.001, 0.02, 0.9};
  const auto res = fdr_by(p, 0.05);
  CHECK(res.reject == std::vector<bool>{true, false, false});
  CHECK(res.k_star == 1);

  const std::vector<double> ones = {1.0, 1.0, 1.0};
  CHECK(fdr_by(ones, 0.05).k_star == 0);

  const std::vector<double> single = {0.04};
  CHECK(fdr_by(single, 0.05).reject == std::vector<bool>{true});

  CHECK_THROWS_AS(fdr_by(std::vector<double>{-0.1}, 0.05), ValidationError);
  CHECK_THROWS_AS(fdr_by(std::vector<double>{1.5}, 0.05), ValidationError);
}

TEST_CASE("fdr_by matches the exhaustive step-up oracle and is dominated by BH") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> len(1, 8);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> p(len(rng));
    for (auto& v : p) {
      v = u(rng);
      if (u(rng) < 0.3) v *= 0.02;  // make small p-values common
    }
    const auto mine = fdr_by(p, 0.05);
    const auto oracle = by_oracle(p, 0.05);
    REQUIRE(mine.reject == oracle);
    const auto bh = bh_oracle(p, 0.05);
    for (std::size_t i = 0; i < p.size(); ++i)
      if (mine.reject[i]) CHECK(bh[i]);  // BY rejections are a subset of BH's
  }
}

TEST_CASE("permutation_null shuffles sentence blocks and excludes the identity") {
  const int n_sentences = 6, words = 3;
  Matrix y(n_sentences * words, 1);
  std::vector<int> sid;
  for (int s = 0; s < n_sentences; ++s)
    for (int w = 0; w < words; ++w) {
      y(s * words + w, 0) = s * 10 + w;
      sid.push_back(s + 100);
    }

  int n_metric_calls = 0;
  const auto null = permutation_null(
      y, sid, 64, PermutationGranularity::Sentence, 17, [&](const Matrix& shuffled) {
        ++n_metric_calls;
        bool identity = true;
        // Each block must be a source block with within-block order intact.
        for (int s = 0; s < n_sentences; ++s) {
          const int src = static_cast<int>(shuffled(s * words, 0)) / 10;
          for (int w = 0; w < words; ++w)
            REQUIRE(shuffled(s * words + w, 0) == src * 10 + w);
          identity &= src == s;
        }
        REQUIRE_FALSE(identity);
        return 0.0;
      });
  CHECK(null.values.size() == 64);
  CHECK(n_metric_calls == 64);
}

TEST_CASE("permutation_null is deterministic per seed and index") {
  const Matrix y = random_rows(12, 2, 21);
  const std::vector<int> sid = {0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3};
  auto metric = [](const Matrix& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += m.data()[i] * static_cast<double>(i);
    return s;
  };
  const auto a = permutation_null(y, sid, 16, PermutationGranularity::Sentence, 5, metric);
  const auto b = permutation_null(y, sid, 16, PermutationGranularity::Sentence, 5, metric);
  CHECK(a.values == b.values);
  const auto c = permutation_null(y, sid, 16, PermutationGranularity::Sentence, 6, metric);
  CHECK(a.values != c.values);
}

TEST_CASE("permutation_null word granularity handles uneven sentences") {
  const Matrix y = random_rows(5, 2, 22);
  const std::vector<int> sid = {0, 0, 0, 1, 1};  // uneven blocks
  CHECK_THROWS_AS(permutation_null(y, sid, 4, PermutationGranularity::Sentence, 1,
                                   [](const Matrix&) { return 0.0; }),
                  ValidationError);
  const auto null = permutation_null(y, sid, 8, PermutationGranularity::Word, 1,
                                     [](const Matrix& m) { return m(0, 0); });
  CHECK(null.values.size() == 8);
}

TEST_CASE("null distributions persist through CSV") {
  NullDistribution null;
  null.seed = 1234;
  null.granularity = PermutationGranularity::Word;
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 50; ++i) null.values.push_back(u(rng));

  save_null("null_roundtrip.csv", null);
  const auto back = load_null("null_roundtrip.csv");
  CHECK(back.seed == 1234);
  CHECK(back.granularity == PermutationGranularity::Word);
  CHECK(back.values == null.values);
}
