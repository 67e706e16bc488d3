#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include <vsnet/matching.hpp>

using namespace vsnet;

namespace {

WeightMatrix random_matrix(std::size_t n, std::mt19937_64& rng, double mask_p) {
  std::uniform_real_distribution<double> u(-5.0, 10.0);
  std::bernoulli_distribution keep(mask_p);
  WeightMatrix m(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      m.w(r, c) = u(rng);
      m.set_allowed(r, c, keep(rng));
    }
  return m;
}

// Independent enumeration, kept separate from brute_force_matching.
std::optional<double> enumerate_best(const WeightMatrix& m) {
  std::vector<std::size_t> p(m.size);
  std::iota(p.begin(), p.end(), std::size_t{0});
  std::optional<double> best;
  do {
    double s = 0.0;
    bool ok = true;
    for (std::size_t r = 0; r < m.size; ++r) {
      ok = ok && m.ok(r, p[r]);
      s += m.w(r, p[r]);
    }
    if (ok && (!best || s > *best))
      best = s;
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

bool is_permutation_within_mask(const WeightMatrix& m, const std::vector<std::size_t>& perm) {
  std::vector<char> seen(m.size, 0);
  for (std::size_t r = 0; r < perm.size(); ++r) {
    if (perm[r] >= m.size || seen[perm[r]] || !m.ok(r, perm[r]))
      return false;
    seen[perm[r]] = 1;
  }
  return perm.size() == m.size;
}

} // namespace

TEST(Hungarian, SingleCell) {
  WeightMatrix m(1);
  m.w(0, 0) = 5.0;
  const auto a = hungarian_max_weight(m);
  ASSERT_TRUE(a);
  EXPECT_EQ(a->perm, std::vector<std::size_t>{0});
  EXPECT_EQ(a->objective, 5.0);
}

TEST(Hungarian, DominantDiagonal) {
  WeightMatrix m(2);
  m.w(0, 0) = 2;
  m.w(0, 1) = 1;
  m.w(1, 0) = 1;
  m.w(1, 1) = 2;
  const auto a = hungarian_max_weight(m);
  ASSERT_TRUE(a);
  EXPECT_EQ(a->perm, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(a->objective, 4.0);
}

TEST(Hungarian, MaskForcesAntiDiagonal) {
  WeightMatrix m(2);
  m.w(0, 0) = 100;
  m.w(1, 1) = 100;
  m.set_allowed(0, 0, false);
  m.set_allowed(1, 1, false);
  const auto a = hungarian_max_weight(m);
  ASSERT_TRUE(a);
  EXPECT_EQ(a->perm, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(a->objective, 0.0);
}

TEST(Hungarian, NoPerfectMatching) {
  WeightMatrix m(3);
  m.set_allowed(0, 0, false);
  m.set_allowed(1, 0, false);
  m.set_allowed(2, 0, false);
  EXPECT_FALSE(hungarian_max_weight(m));
  EXPECT_FALSE(brute_force_matching(m));
}

TEST(Hungarian, TiesPickLexicographicallySmallest) {
  WeightMatrix m(3); // all zero, all allowed
  const auto a = hungarian_max_weight(m);
  ASSERT_TRUE(a);
  EXPECT_EQ(a->perm, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Hungarian, EmptyMatrix) {
  const auto a = hungarian_max_weight(WeightMatrix(0));
  ASSERT_TRUE(a);
  EXPECT_TRUE(a->perm.empty());
  EXPECT_EQ(a->objective, 0.0);
}

TEST(Hungarian, RejectsNonFinite) {
  WeightMatrix m(2);
  m.w(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(hungarian_max_weight(m), std::invalid_argument);
}

TEST(Hungarian, SixBySixPermutationOracle) {
  std::mt19937_64 rng(2024);
  int feasible = 0;
  for (int t = 0; t < 200; ++t) {
    const auto m = random_matrix(6, rng, 0.6);
    const auto want = enumerate_best(m);
    const auto got = hungarian_max_weight(m);
    ASSERT_EQ(want.has_value(), got.has_value()) << "trial " << t;
    if (!want)
      continue;
    ++feasible;
    EXPECT_NEAR(got->objective, *want, 1e-9 * std::max(1.0, std::abs(*want))) << "trial " << t;
    EXPECT_TRUE(is_permutation_within_mask(m, got->perm));
    EXPECT_EQ(got->objective, detail::objective_of(m, got->perm));
  }
  EXPECT_GT(feasible, 50);
}

TEST(Hungarian, AgreesWithBruteForceOnRandomSizes) {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng() % 8;
    const auto m = random_matrix(n, rng, t % 2 ? 1.0 : 0.7);
    const auto h = hungarian_max_weight(m);
    const auto b = brute_force_matching(m);
    ASSERT_EQ(h.has_value(), b.has_value()) << "trial " << t;
    if (h) {
      EXPECT_EQ(h->objective, b->objective) << "trial " << t;
      EXPECT_EQ(h->perm, b->perm) << "trial " << t;
    }
  }
}

// Adding a constant to one row shifts the optimum by that constant and keeps the assignment.
TEST(Hungarian, RowShiftInvariance) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    auto m = random_matrix(5, rng, 1.0);
    const auto base = hungarian_max_weight(m);
    ASSERT_TRUE(base);
    const std::size_t r = rng() % 5;
    for (std::size_t c = 0; c < 5; ++c)
      m.w(r, c) += 3.25;
    const auto shifted = hungarian_max_weight(m);
    ASSERT_TRUE(shifted);
    EXPECT_NEAR(shifted->objective, base->objective + 3.25, 1e-9);
  }
}

// Relabelling columns permutes the solution and keeps the optimum.
TEST(Hungarian, ColumnPermutationInvariance) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 100; ++t) {
    const auto m = random_matrix(6, rng, 0.8);
    std::vector<std::size_t> sigma(6);
    std::iota(sigma.begin(), sigma.end(), std::size_t{0});
    std::shuffle(sigma.begin(), sigma.end(), rng);
    WeightMatrix p(6);
    for (std::size_t r = 0; r < 6; ++r)
      for (std::size_t c = 0; c < 6; ++c) {
        p.w(r, sigma[c]) = m.w(r, c);
        p.set_allowed(r, sigma[c], m.ok(r, c));
      }
    const auto a = hungarian_max_weight(m);
    const auto b = hungarian_max_weight(p);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) {
      EXPECT_NEAR(a->objective, b->objective, 1e-9 * std::max(1.0, std::abs(a->objective)));
    }
  }
}

TEST(BruteForce, FullyDisallowed) {
  WeightMatrix m(2);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c)
      m.set_allowed(r, c, false);
  EXPECT_FALSE(brute_force_matching(m));
}

TEST(BruteForce, IdentityMaskOnly) {
  WeightMatrix m(4);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) {
      m.set_allowed(r, c, r == c);
      m.w(r, c) = r == c ? -1.0 : 50.0;
    }
  const auto a = brute_force_matching(m);
  ASSERT_TRUE(a);
  EXPECT_EQ(a->perm, (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(BruteForce, RefusesLargeMatrices) {
  EXPECT_THROW(brute_force_matching(WeightMatrix(9)), std::invalid_argument);
  EXPECT_NO_THROW(brute_force_matching(WeightMatrix(8)));
}
