#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include <gtest/gtest.h>

#include "nikolskii/core.hpp"
#include "nikolskii/quadrature.hpp"
#include "nikolskii/rng.hpp"

namespace nk = nikolskii;

TEST(Exponent, ParsesNumbersAndInf) {
  EXPECT_EQ(nk::Exponent::parse("2").value(), 2.0);
  EXPECT_EQ(nk::Exponent::parse("1.5").value(), 1.5);
  EXPECT_TRUE(nk::Exponent::parse("inf").is_infinite());
  EXPECT_EQ(nk::Exponent::infinity().str(), "inf");
  EXPECT_EQ(nk::Exponent(4.0).str(), "4");
  EXPECT_EQ(nk::Exponent(2.5).str(), "2.5");
}

TEST(Exponent, RejectsBelowOneAndGarbage) {
  EXPECT_THROW(nk::Exponent(0.5), std::domain_error);
  EXPECT_THROW(nk::Exponent(std::nan("")), std::domain_error);
  EXPECT_THROW(nk::Exponent::parse("abc"), std::invalid_argument);
  EXPECT_THROW(nk::Exponent::parse("2x"), std::invalid_argument);
}

TEST(Exponent, EvenIntegerAndOrdering) {
  EXPECT_TRUE(nk::Exponent(4.0).is_even_integer());
  EXPECT_FALSE(nk::Exponent(3.0).is_even_integer());
  EXPECT_FALSE(nk::Exponent::infinity().is_even_integer());
  EXPECT_LT(nk::Exponent(2.0), nk::Exponent::infinity());
  EXPECT_EQ(nk::Exponent(2.0), nk::Exponent::parse("2"));
}

TEST(CounterRng, SameKeySameStream) {
  nk::CounterRng a(7, 3);
  nk::CounterRng b(7, 3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(CounterRng, DistinctStreamsDiffer) {
  nk::CounterRng a(7, 3);
  nk::CounterRng b(7, 4);
  nk::CounterRng c(8, 3);
  int same_ab = 0;
  int same_ac = 0;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    same_ab += x == b.next_u64();
    same_ac += x == c.next_u64();
  }
  EXPECT_EQ(same_ab, 0);
  EXPECT_EQ(same_ac, 0);
}

TEST(CounterRng, UniformInOpenUnitInterval) {
  nk::CounterRng r(1, 0);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 4 * std::sqrt(1.0 / 12 / 100000));
}

TEST(CounterRng, NormalMoments) {
  nk::CounterRng r(42, 9);
  const int n = 200000;
  double m1 = 0.0;
  double m2 = 0.0;
  double m4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    m1 += z;
    m2 += z * z;
    m4 += z * z * z * z;
  }
  m1 /= n;
  m2 /= n;
  m4 /= n;
  EXPECT_NEAR(m1, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(m2, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(m4, 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(GaussLegendre, WeightsSumToTwoAndNodesAscend) {
  for (std::size_t k : {1u, 2u, 5u, 16u, 101u}) {
    const auto [x, w] = nk::gauss_legendre(k);
    EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 2.0, 1e-13);
    for (std::size_t i = 1; i < k; ++i) EXPECT_LT(x[i - 1], x[i]);
  }
}

TEST(GaussLegendre, ExactForPolynomialsUpTo2kMinus1) {
  const std::size_t k = 9;
  const auto [x, w] = nk::gauss_legendre(k);
  for (int deg = 0; deg <= 17; ++deg) {
    double q = 0.0;
    for (std::size_t i = 0; i < k; ++i) q += w[i] * std::pow(x[i], deg);
    const double exact = deg % 2 == 1 ? 0.0 : 2.0 / (deg + 1);
    EXPECT_NEAR(q, exact, 1e-14) << "degree " << deg;
  }
}

TEST(GaussLegendre, ZeroCountThrows) { EXPECT_THROW(nk::gauss_legendre(0), std::invalid_argument); }

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(1000);
  nk::parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; }, 4);
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(ParallelFor, PropagatesWorkerExceptions) {
  EXPECT_THROW(nk::parallel_for(
                   100, [](std::size_t i) {
                     if (i == 77) throw std::runtime_error("boom");
                   },
                   4),
               std::runtime_error);
}
