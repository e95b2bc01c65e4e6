#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "nikolskii/pointsets.hpp"
#include "nikolskii/randpoly.hpp"

namespace nk = nikolskii;
using std::numbers::pi;

nk::SeparatedSet equispaced_circle(std::size_t count) {
  std::vector<nk::Point> pts;
  for (std::size_t i = 0; i < count; ++i) pts.push_back(nk::Point{2 * pi * static_cast<double>(i) / static_cast<double>(count)});
  return nk::make_separated_set(nk::Manifold::torus(1), std::move(pts), 8 * count);
}

double brute_min_distance(const nk::SeparatedSet& set) {
  double best = 1e300;
  for (std::size_t i = 0; i < set.size(); ++i)
    for (std::size_t j = i + 1; j < set.size(); ++j) best = std::min(best, set.manifold.distance(set.points[i], set.points[j]));
  return best;
}

TEST(Greedy, Examples) {
  EXPECT_EQ(nk::greedy_maximal_separated(nk::Manifold::torus(1), pi / 2, 1).size(), 4u);
  EXPECT_EQ(nk::greedy_maximal_separated(nk::Manifold::torus(1), pi, 1).size(), 2u);
  const auto s2 = nk::greedy_maximal_separated(nk::Manifold::sphere(), pi, 1);
  EXPECT_EQ(s2.size(), 2u);
  EXPECT_LE(s2.covering_radius, pi + 1e-12);
}

TEST(Greedy, RangeErrors) {
  EXPECT_THROW(nk::greedy_maximal_separated(nk::Manifold::torus(1), 0.0, 1), std::domain_error);
  EXPECT_THROW(nk::greedy_maximal_separated(nk::Manifold::sphere(), 3.5, 1), std::domain_error);
}

class GreedyModels : public ::testing::TestWithParam<std::pair<const char*, double>> {};

TEST_P(GreedyModels, SeparatedAndCovering) {
  const auto [name, eps] = GetParam();
  const auto m = nk::Manifold::from_name(name);
  const auto set = nk::greedy_maximal_separated(m, eps, 11);
  EXPECT_GE(brute_min_distance(set), eps - 1e-12);
  EXPECT_LE(set.covering_radius, eps + 1e-12);
  EXPECT_LE(set.covering_radius, set.covering_radius_bound + 1e-12);
}

TEST_P(GreedyModels, Deterministic) {
  const auto [name, eps] = GetParam();
  const auto m = nk::Manifold::from_name(name);
  const auto a = nk::greedy_maximal_separated(m, eps, 5);
  const auto b = nk::greedy_maximal_separated(m, eps, 5);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.points[i], b.points[i]);
}

INSTANTIATE_TEST_SUITE_P(Models, GreedyModels,
                         ::testing::Values(std::pair{"t1", 0.05}, std::pair{"t2", 0.3}, std::pair{"t3", 0.9},
                                           std::pair{"s2", 0.2}));

TEST(Greedy, CardinalitySlopeMatchesDimension) {
  for (const char* name : {"t1", "t2", "s2"}) {
    const auto m = nk::Manifold::from_name(name);
    std::vector<double> x;
    std::vector<double> y;
    for (double eps : {0.8, 0.4, 0.2, 0.1}) {
      x.push_back(std::log(1.0 / eps));
      y.push_back(std::log(static_cast<double>(nk::greedy_maximal_separated(m, eps, 3).size())));
    }
    const double mx = (x[0] + x[1] + x[2] + x[3]) / 4;
    const double my = (y[0] + y[1] + y[2] + y[3]) / 4;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
    }
    EXPECT_NEAR(sxy / sxx, m.dimension(), 0.1) << name;
  }
}

TEST(Thin, EveryFourthOfSixtyFour) {
  const auto base = equispaced_circle(64);
  const auto thin = nk::thin_subset(base, 4 * 2 * pi / 64);
  ASSERT_EQ(thin.size(), 16u);
  for (std::size_t i = 0; i < thin.size(); ++i) EXPECT_EQ(thin.points[i], base.points[4 * i]);
  EXPECT_LE(thin.covering_radius, 2 * thin.separation + 1e-12);
}

TEST(Thin, IdentityAtBaseSeparation) {
  const auto base = nk::greedy_maximal_separated(nk::Manifold::sphere(), 0.3, 2);
  const auto same = nk::thin_subset(base, base.separation);
  EXPECT_EQ(same.size(), base.size());
  EXPECT_THROW(nk::thin_subset(base, 0.1), std::invalid_argument);
}

TEST(Thin, CoveringWithinTwiceRadius) {
  for (const char* name : {"t2", "s2"}) {
    const auto m = nk::Manifold::from_name(name);
    const auto base = nk::greedy_maximal_separated(m, 0.1, 4);
    const auto thin = nk::thin_subset(base, 0.35);
    EXPECT_GE(brute_min_distance(thin), 0.35 - 1e-12);
    EXPECT_LE(thin.covering_radius, 2 * 0.35 + 1e-12);
  }
}

TEST(MZWeights, EquispacedCircleIsTrapezoid) {
  const int n = 10;
  const auto s = nk::build_space(nk::Manifold::torus(1), n);
  const auto set = equispaced_circle(2 * n + 1);
  const auto rule = nk::mz_weights(set, s, 2 * pi * n / (2 * n + 1) + 1e-9, 63 * (2 * n + 1));
  // Odd fine factor keeps grid nodes off the Voronoi boundaries.
  for (double w : rule.weights) EXPECT_NEAR(w, 1.0 / (2 * n + 1), 1e-12);
  for (int t = 0; t < 20; ++t) {
    const auto a = nk::sample_coefficients(s, 1.0, 2, static_cast<std::uint64_t>(t));
    EXPECT_NEAR(nk::lp_norm(s, a, 2.0, rule).value, nk::l2_norm_parseval(a).value, 1e-10);
  }
}

TEST(MZWeights, PreconditionNamesRequirement) {
  const auto s = nk::build_space(nk::Manifold::torus(1), 16);
  const auto coarse = nk::greedy_maximal_separated(nk::Manifold::torus(1), 0.2, 1);
  try {
    nk::mz_weights(coarse, s);
    FAIL() << "expected PreconditionError";
  } catch (const nk::PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("delta0/n"), std::string::npos);
  }
}

class MZModels : public ::testing::TestWithParam<const char*> {};

TEST_P(MZModels, WeightsSumAndBand) {
  const auto m = nk::Manifold::from_name(GetParam());
  for (double n : {4.0, 8.0}) {
    const auto s = nk::build_space(m, n);
    const auto set = nk::greedy_maximal_separated(m, 0.5 / n, 1);
    const auto rule = nk::mz_weights(set, s);
    double sum = 0.0;
    double lo = 1e300;
    double hi = 0.0;
    for (double w : rule.weights) {
      EXPECT_GT(w, 0.0);
      sum += w;
      lo = std::min(lo, w * std::pow(n, m.dimension()));
      hi = std::max(hi, w * std::pow(n, m.dimension()));
    }
    EXPECT_NEAR(sum, 1.0, 1e-10);
    EXPECT_LT(hi / lo, 8.0);
  }
}

TEST_P(MZModels, NormEquivalenceStableUnderDoubling) {
  const auto m = nk::Manifold::from_name(GetParam());
  std::vector<double> kappas;
  for (double n : {4.0, 8.0}) {
    const auto s = nk::build_space(m, n);
    const auto rule = nk::mz_weights(nk::greedy_maximal_separated(m, 0.5 / n, 1), s);
    // Continuous norms on a 32x oversampled grid; kappa needs ~1e-3 only.
    nk::EngineOptions eo;
    eo.oversampling = 32.0;
    const nk::NormEngine engine(s, {1.0, 2.0, 4.0}, eo);
    auto ws = engine.make_workspace();
    std::vector<double> cont(3);
    double kappa = 1.0;
    for (int t = 0; t < 200; ++t) {
      const auto a = nk::sample_coefficients(s, 1.0, 3, static_cast<std::uint64_t>(t));
      engine.norms(a.values, cont, ws);
      for (std::size_t i = 0; i < 3; ++i) {
        const double disc = nk::lp_norm(s, a, engine.exponents()[i], rule).value;
        kappa = std::max({kappa, disc / cont[i], cont[i] / disc});
      }
    }
    kappas.push_back(kappa);
  }
  EXPECT_LT(kappas[0], 2.0);
  EXPECT_LT(kappas[1], 2.0);
  EXPECT_LT(kappas[1], 1.5 * kappas[0]);
}

INSTANTIATE_TEST_SUITE_P(Models, MZModels, ::testing::Values("t1", "t2", "s2"));

TEST(PointsCsv, HeaderAndRows) {
  const auto set = equispaced_circle(4);
  std::ostringstream out;
  nk::write_points_csv(out, set);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "theta1,weight");
  std::size_t lines = 0;
  for (char c : out.str()) lines += c == '\n';
  EXPECT_EQ(lines, 5u);
}
