#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "nikolskii/manifold.hpp"
#include "nikolskii/rng.hpp"

namespace nk = nikolskii;
using nk::kPi;

TEST(Manifold, NamesAndDiameters) {
  EXPECT_EQ(nk::Manifold::from_name("t2").name(), "t2");
  EXPECT_EQ(nk::Manifold::from_name("s2").dimension(), 2);
  EXPECT_NEAR(nk::Manifold::torus(3).diameter(), kPi * std::sqrt(3.0), 1e-15);
  EXPECT_EQ(nk::Manifold::sphere().diameter(), kPi);
  EXPECT_THROW(nk::Manifold::from_name("t4"), std::invalid_argument);
  EXPECT_THROW(nk::Manifold::torus(0), std::invalid_argument);
}

TEST(GeodesicDistance, Examples) {
  const auto t1 = nk::Manifold::torus(1);
  EXPECT_NEAR(nk::geodesic_distance(t1, t1.point({0.0}), t1.point({kPi})), kPi, 1e-15);
  const auto s2 = nk::Manifold::sphere();
  EXPECT_NEAR(nk::geodesic_distance(s2, s2.point({1, 0, 0}), s2.point({0, 0, 1})), kPi / 2, 1e-15);
  const auto t2 = nk::Manifold::torus(2);
  EXPECT_NEAR(nk::geodesic_distance(t2, t2.point({0, 0}), t2.point({3 * kPi / 2, 0})), kPi / 2, 1e-14);
}

TEST(GeodesicDistance, DimensionMismatchThrows) {
  const auto t2 = nk::Manifold::torus(2);
  EXPECT_THROW(t2.distance(nk::Point{0.0}, nk::Point{0.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(t2.point({1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST(GeodesicDistance, AccurateNearZeroAndAntipodes) {
  const auto s2 = nk::Manifold::sphere();
  const auto x = s2.spherical(0.3, 0.2);
  EXPECT_NEAR(s2.distance(x, s2.spherical(0.3 + 1e-9, 0.2)), 1e-9, 1e-15);
  EXPECT_NEAR(s2.distance(s2.point({0, 0, 1}), s2.spherical(kPi - 1e-9, 0.0)), kPi - 1e-9, 1e-15);
}

class MetricAxioms : public ::testing::TestWithParam<const char*> {};

TEST_P(MetricAxioms, SymmetryAndTriangleOnRandomTriples) {
  const auto m = nk::Manifold::from_name(GetParam());
  nk::CounterRng rng(11, 0);
  for (int i = 0; i < 10000; ++i) {
    const auto x = m.random_point(rng);
    const auto y = m.random_point(rng);
    const auto z = m.random_point(rng);
    const double dxy = m.distance(x, y);
    ASSERT_EQ(dxy, m.distance(y, x));
    ASSERT_GE(dxy, 0.0);
    ASSERT_LE(dxy, m.diameter() + 1e-12);
    ASSERT_LE(dxy, m.distance(x, z) + m.distance(z, y) + 1e-12);
  }
  const auto x = m.random_point(rng);
  EXPECT_EQ(m.distance(x, x), 0.0);
}

TEST_P(MetricAxioms, RandomPointsAreCanonical) {
  const auto m = nk::Manifold::from_name(GetParam());
  nk::CounterRng rng(5, 1);
  for (int i = 0; i < 1000; ++i) {
    const auto p = m.random_point(rng);
    if (m.is_torus()) {
      for (double c : p.coords()) {
        EXPECT_GE(c, 0.0);
        EXPECT_LT(c, nk::kTwoPi);
      }
    } else {
      EXPECT_NEAR(p[0] * p[0] + p[1] * p[1] + p[2] * p[2], 1.0, 1e-12);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Models, MetricAxioms, ::testing::Values("t1", "t2", "t3", "s2"));

TEST(BallMeasure, ClosedFormExamples) {
  const auto t1 = nk::Manifold::torus(1);
  EXPECT_NEAR(nk::ball_measure_estimate(t1, t1.point({0}), kPi, 64), 1.0, 1e-15);
  const auto s2 = nk::Manifold::sphere();
  EXPECT_NEAR(nk::ball_measure_estimate(s2, s2.point({0, 0, 1}), kPi / 2, 64), 0.5, 1e-15);
  const auto t2 = nk::Manifold::torus(2);
  EXPECT_NEAR(nk::ball_measure_estimate(t2, t2.point({0, 0}), kPi / 4, 64), kPi * std::pow(kPi / 4, 2) / (4 * kPi * kPi),
              1e-15);
}

TEST(BallMeasure, DomainErrors) {
  const auto t1 = nk::Manifold::torus(1);
  EXPECT_THROW(nk::ball_measure_estimate(t1, t1.point({0}), 0.0, 16), std::domain_error);
  EXPECT_THROW(nk::ball_measure_estimate(t1, t1.point({0}), 4.0, 16), std::domain_error);
}

TEST(BallMeasure, QuadratureConvergesToClosedForm) {
  for (const char* name : {"t1", "t2", "t3", "s2"}) {
    const auto m = nk::Manifold::from_name(name);
    nk::CounterRng rng(2, 0);
    const auto x = m.random_point(rng);
    const double r = 0.9;
    const double truth = *m.ball_measure_closed_form(r);
    const std::size_t fine = m.dimension() == 3 ? 64 : 512;
    const double coarse_err = std::abs(nk::ball_measure_quadrature(m, x, r, 16) - truth);
    const double fine_err = std::abs(nk::ball_measure_quadrature(m, x, r, fine) - truth);
    EXPECT_LT(fine_err, 0.02 * truth) << name;
    EXPECT_LE(fine_err, coarse_err + 1e-12) << name;
  }
}

TEST(BallMeasure, HomogeneousInCenter) {
  for (const char* name : {"t2", "s2"}) {
    const auto m = nk::Manifold::from_name(name);
    nk::CounterRng rng(3, 0);
    const double r = 0.8;
    const double truth = *m.ball_measure_closed_form(r);
    const double tol = name == std::string("t2") ? 2e-3 : 2e-3;
    for (int i = 0; i < 100; ++i) {
      EXPECT_NEAR(nk::ball_measure_quadrature(m, m.random_point(rng), r, 256), truth, tol);
    }
  }
}

TEST(BallMeasure, AhlforsBand) {
  for (const char* name : {"t1", "t2", "t3", "s2"}) {
    const auto m = nk::Manifold::from_name(name);
    double lo = 1e300;
    double hi = 0.0;
    nk::CounterRng rng(8, 0);
    const auto x = m.random_point(rng);
    for (int j = 1; j <= 6; ++j) {
      const double r = m.diameter() * std::pow(2.0, -j);
      const double ratio = nk::ball_measure_estimate(m, x, r, 128) / std::pow(r, m.dimension());
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    EXPECT_GT(lo, 0.0);
    EXPECT_LT(hi / lo, 3.0) << name;
  }
}

TEST(UniformGrid, TorusNodesAndWeights) {
  const auto rule = nk::uniform_grid(nk::Manifold::torus(1), 4);
  ASSERT_EQ(rule.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(rule.nodes[i][0], i * kPi / 2, 1e-15);
    EXPECT_EQ(rule.weights[i], 0.25);
  }
}

TEST(UniformGrid, WeightsSumToOne) {
  for (const char* name : {"t1", "t2", "t3", "s2"}) {
    for (std::size_t res : {1u, 3u, 8u, 17u}) {
      const auto rule = nk::uniform_grid(nk::Manifold::from_name(name), res);
      EXPECT_NEAR(std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0), 1.0, 1e-12);
      for (double w : rule.weights) EXPECT_GT(w, 0.0);
    }
  }
}

TEST(UniformGrid, SphereIntegratesConstantsAndOddFunctions) {
  const auto m = nk::Manifold::sphere();
  const auto rule = nk::product_grid(m, {nk::GridShape::Kind::sphere, 0, 8, 16});
  double one = 0.0;
  double z = 0.0;
  double z2 = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    one += rule.weights[i];
    z += rule.weights[i] * rule.nodes[i][2];
    z2 += rule.weights[i] * rule.nodes[i][2] * rule.nodes[i][2];
  }
  EXPECT_NEAR(one, 1.0, 1e-12);
  EXPECT_NEAR(z, 0.0, 1e-12);
  EXPECT_NEAR(z2, 1.0 / 3.0, 1e-12);
}
