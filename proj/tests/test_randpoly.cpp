#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "nikolskii/kernel.hpp"
#include "nikolskii/randpoly.hpp"

namespace nk = nikolskii;
using std::numbers::pi;

nk::CoefficientVector unit(const nk::SpectralSpace& s, std::size_t k, double scale = 1.0) {
  std::vector<double> v(s.dimension(), 0.0);
  v[k] = scale;
  return nk::make_coefficients(s, std::move(v));
}

nk::QuadratureRule exact_grid(const nk::SpectralSpace& s, int degree) {
  const auto m = s.manifold();
  if (m.is_torus()) return nk::product_grid(m, {nk::GridShape::Kind::torus, static_cast<std::size_t>(degree + 1), 0, 0});
  return nk::product_grid(m, {nk::GridShape::Kind::sphere, 0, static_cast<std::size_t>(degree / 2 + 1),
                              static_cast<std::size_t>(degree + 1)});
}

TEST(Sampling, Deterministic) {
  const auto s = nk::build_space(nk::Manifold::sphere(), 12);
  const auto a = nk::sample_coefficients(s, 1.0, 42, 7);
  const auto b = nk::sample_coefficients(s, 1.0, 42, 7);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, nk::sample_coefficients(s, 1.0, 42, 8).values);
  EXPECT_THROW(nk::sample_coefficients(s, 0.0, 1, 0), std::domain_error);
  EXPECT_THROW(nk::sample_coefficients(s, -1.0, 1, 0), std::domain_error);
}

TEST(Sampling, MomentsOverManyTrials) {
  const auto s = nk::build_space(nk::Manifold::torus(1), 2);
  const double sigma = 1.7;
  const int trials = 100000;
  std::vector<double> sum(s.dimension(), 0.0);
  std::vector<double> sq(s.dimension(), 0.0);
  for (int t = 0; t < trials; ++t) {
    const auto a = nk::sample_coefficients(s, sigma, 9, static_cast<std::uint64_t>(t));
    for (std::size_t k = 0; k < a.values.size(); ++k) {
      sum[k] += a.values[k];
      sq[k] += a.values[k] * a.values[k];
    }
  }
  EXPECT_NEAR(sum[0] / trials, 0.0, 4 * sigma / std::sqrt(trials));
  for (std::size_t k = 0; k < sum.size(); ++k) {
    const double mean = sum[k] / trials;
    const double var = sq[k] / trials - mean * mean;
    EXPECT_NEAR(var, sigma * sigma, 0.05 * sigma * sigma) << k;
  }
}

TEST(Evaluate, BasisSelections) {
  const auto s = nk::build_space(nk::Manifold::torus(1), 3);
  std::vector<nk::Point> pts;
  for (int i = 0; i < 17; ++i) pts.push_back(nk::Point{0.37 * i});
  const auto ones = nk::evaluate(s, unit(s, 0), pts);
  for (double v : ones) EXPECT_NEAR(v, 1.0, 1e-15);
  const auto cosines = nk::evaluate(s, unit(s, 1), pts);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_NEAR(cosines[i], std::sqrt(2.0) * std::cos(pts[i][0]), 1e-14);
}

TEST(Evaluate, CovarianceIsKernel) {
  for (const char* name : {"t1", "s2"}) {
    const auto m = nk::Manifold::from_name(name);
    const auto s = nk::build_space(m, 6);
    nk::CounterRng rng(12, 0);
    const std::vector<nk::Point> pts{m.random_point(rng), m.random_point(rng)};
    const int trials = 100000;
    double sum = 0.0;
    double sq = 0.0;
    for (int t = 0; t < trials; ++t) {
      const auto v = nk::evaluate(s, nk::sample_coefficients(s, 1.0, 13, static_cast<std::uint64_t>(t)), pts);
      sum += v[0] * v[1];
      sq += v[0] * v[1] * v[0] * v[1];
    }
    const double mean = sum / trials;
    const double se = std::sqrt((sq / trials - mean * mean) / trials);
    EXPECT_NEAR(mean, nk::kernel_eval(s, pts[0], pts[1]), 3 * se) << name;
  }
}

TEST(Evaluate, MismatchThrows) {
  const auto s = nk::build_space(nk::Manifold::torus(1), 3);
  const auto other = nk::build_space(nk::Manifold::torus(1), 4);
  const auto a = nk::sample_coefficients(other, 1.0, 1, 0);
  const std::vector<nk::Point> pts{nk::Point{0.0}};
  EXPECT_THROW(nk::evaluate(s, a, pts), std::invalid_argument);
  EXPECT_THROW(nk::make_coefficients(s, {1.0, 2.0}), std::invalid_argument);
}

TEST(LpNorm, Examples) {
  const auto s = nk::build_space(nk::Manifold::torus(1), 4);
  const auto rule = exact_grid(s, 64);
  const auto c = unit(s, 0, -2.5);
  for (double p : {1.0, 2.0, 3.0, 4.0}) {
    EXPECT_NEAR(nk::lp_norm(s, c, p, rule, {.oversample = true}).value, 2.5, 1e-12);
  }
  const auto cosine = unit(s, 1);
  EXPECT_NEAR(nk::lp_norm(s, cosine, 2.0, rule).value, 1.0, 1e-12);
  const auto l1 = nk::lp_norm(s, cosine, 1.0, rule, {.oversample = true, .tolerance = 1e-9});
  EXPECT_NEAR(l1.value, 2 * std::sqrt(2.0) / pi, 1e-8);
  EXPECT_EQ(l1.method, nk::NormMethod::oversampled_quadrature);
}

TEST(LpNorm, ErrorsAreExplicit) {
  const auto s = nk::build_space(nk::Manifold::torus(1), 8);
  const auto a = nk::sample_coefficients(s, 1.0, 1, 0);
  const auto coarse = exact_grid(s, 20);
  EXPECT_THROW(nk::lp_norm(s, a, 4.0, coarse), nk::AccuracyError);
  EXPECT_THROW(nk::lp_norm(s, a, 3.0, exact_grid(s, 200)), nk::AccuracyError);
  EXPECT_THROW(nk::lp_norm(s, a, nk::Exponent::infinity(), coarse), std::invalid_argument);
  EXPECT_NO_THROW(nk::lp_norm(s, a, 4.0, coarse, {.oversample = true}));
}

TEST(LpNorm, ExactAgreesWithOversampled) {
  const auto s = nk::build_space(nk::Manifold::sphere(), 9);
  const auto a = nk::sample_coefficients(s, 1.0, 3, 3);
  const auto exact = nk::lp_norm(s, a, 4.0, exact_grid(s, 4 * s.max_index()));
  EXPECT_EQ(exact.method, nk::NormMethod::exact_quadrature);
  const auto over = nk::lp_norm(s, a, 4.0, exact_grid(s, 2 * s.max_index()), {.oversample = true, .tolerance = 1e-12});
  EXPECT_NEAR(exact.value, over.value, 1e-10 * exact.value);
}

class NormModels : public ::testing::TestWithParam<const char*> {};

TEST_P(NormModels, ParsevalOnExactRule) {
  const auto s = nk::build_space(nk::Manifold::from_name(GetParam()), 5.5);
  const auto rule = exact_grid(s, 2 * s.max_index());
  for (int t = 0; t < 20; ++t) {
    const auto a = nk::sample_coefficients(s, 2.0, 4, static_cast<std::uint64_t>(t));
    EXPECT_NEAR(nk::lp_norm(s, a, 2.0, rule).value, nk::l2_norm_parseval(a).value, 1e-10 * nk::l2_norm_parseval(a).value);
  }
}

TEST_P(NormModels, ScaleEquivariance) {
  const auto s = nk::build_space(nk::Manifold::from_name(GetParam()), 5.5);
  const nk::NormEngine engine(s, {1.0, 2.0, 3.0, 4.0, nk::Exponent::infinity()});
  auto ws = engine.make_workspace();
  for (int t = 0; t < 10; ++t) {
    const auto a = nk::sample_coefficients(s, 1.0, 5, static_cast<std::uint64_t>(t));
    for (double c : {-3.0, 0.01, 1e3}) {
      std::vector<double> scaled(a.values);
      for (double& v : scaled) v *= c;
      std::vector<double> base(5);
      std::vector<double> other(5);
      engine.norms(a.values, base, ws);
      engine.norms(scaled, other, ws);
      for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(other[i], std::abs(c) * base[i], 1e-12 * std::abs(c) * base[i]);
    }
  }
}

TEST_P(NormModels, NormOrdering) {
  const auto s = nk::build_space(nk::Manifold::from_name(GetParam()), 6);
  const nk::NormEngine engine(s, {1.0, 2.0, 4.0, nk::Exponent::infinity()});
  const auto acc = engine.declared_accuracy();
  auto ws = engine.make_workspace();
  std::vector<double> out(4);
  for (int t = 0; t < 1000; ++t) {
    engine.norms(nk::sample_coefficients(s, 1.0, 6, static_cast<std::uint64_t>(t)).values, out, ws);
    for (std::size_t i = 0; i + 1 < 4; ++i) {
      const double slack = (acc[i] * out[i] + acc[i + 1] * out[i + 1]) + 1e-12 * out[i + 1];
      ASSERT_LE(out[i], out[i + 1] + slack) << t << " " << i;
    }
  }
}

TEST_P(NormModels, EngineMatchesStandaloneNorms) {
  const auto s = nk::build_space(nk::Manifold::from_name(GetParam()), 6);
  const nk::NormEngine engine(s, {1.0, 4.0, nk::Exponent::infinity()});
  EXPECT_EQ(engine.methods()[1], nk::NormMethod::exact_quadrature);
  auto ws = engine.make_workspace();
  std::vector<double> out(3);
  const auto a = nk::sample_coefficients(s, 1.0, 14, 0);
  engine.norms(a.values, out, ws);
  const auto fine = exact_grid(s, 8 * s.max_index());
  EXPECT_NEAR(out[0], nk::lp_norm(s, a, 1.0, fine, {.oversample = true, .tolerance = 1e-4}).value, 5e-3 * out[0]);
  EXPECT_NEAR(out[1], nk::lp_norm(s, a, 4.0, fine).value, 1e-10 * out[1]);
  const auto sup = nk::sup_norm(s, a, 16.0);
  EXPECT_NEAR(out[2], sup.value, 1e-6 * sup.value);
}

INSTANTIATE_TEST_SUITE_P(Models, NormModels, ::testing::Values("t1", "t2", "t3", "s2"));

TEST(SupNorm, Examples) {
  const auto s = nk::build_space(nk::Manifold::torus(1), 5);
  EXPECT_NEAR(nk::sup_norm(s, unit(s, 1)).value, std::sqrt(2.0), 1e-8);
  EXPECT_EQ(nk::sup_norm(s, unit(s, 0)).value, 1.0);
  EXPECT_THROW(nk::sup_norm(s, unit(s, 0), 1.5), std::domain_error);
}

TEST(SupNorm, FindsOffGridMaximum) {
  // sqrt2 cos(5(theta - 0.1234)) in the (cos, sin) pair of frequency 5.
  const auto s = nk::build_space(nk::Manifold::torus(1), 5);
  std::vector<double> v(s.dimension(), 0.0);
  v[9] = std::cos(5 * 0.1234);
  v[10] = std::sin(5 * 0.1234);
  EXPECT_NEAR(nk::sup_norm(s, nk::make_coefficients(s, v)).value, std::sqrt(2.0), 1e-10);
  // Sphere: the sup of Y_1^0 is sqrt(3) at the poles.
  const auto sp = nk::build_space(nk::Manifold::sphere(), 3);
  EXPECT_NEAR(nk::sup_norm(sp, unit(sp, 2)).value, std::sqrt(3.0), 1e-10);
  // A tilted degree-1 harmonic peaks off the grid.
  std::vector<double> w(sp.dimension(), 0.0);
  w[1] = 0.3;
  w[2] = 0.5;
  w[3] = -0.8;
  const double norm = std::sqrt(0.09 + 0.25 + 0.64);
  EXPECT_NEAR(nk::sup_norm(sp, nk::make_coefficients(sp, w)).value, std::sqrt(3.0) * norm, 1e-9);
}

TEST(SupNorm, DominatesLpNorms) {
  const auto s = nk::build_space(nk::Manifold::sphere(), 10);
  const auto rule = exact_grid(s, 4 * s.max_index());
  for (int t = 0; t < 20; ++t) {
    const auto a = nk::sample_coefficients(s, 1.0, 15, static_cast<std::uint64_t>(t));
    const auto sup = nk::sup_norm(s, a);
    for (double p : {1.0, 2.0, 4.0}) {
      const auto lp = nk::lp_norm(s, a, p, rule, {.oversample = true, .tolerance = 1e-4});
      EXPECT_GE(sup.value + sup.declared_accuracy, lp.value - lp.declared_accuracy);
    }
  }
}

TEST(NormEngine, CalibrationRejectsTightTolerance) {
  const auto s = nk::build_space(nk::Manifold::torus(1), 32);
  nk::EngineOptions opts;
  opts.oversampling = 2.0;
  opts.tolerance = 1e-14;
  EXPECT_THROW(nk::NormEngine(s, {1.0}, opts), nk::AccuracyError);
}
