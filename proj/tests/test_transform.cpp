#include <cmath>

#include <gtest/gtest.h>

#include "nikolskii/randpoly.hpp"
#include "nikolskii/transform.hpp"

namespace nk = nikolskii;

class TransformModels : public ::testing::TestWithParam<std::pair<const char*, double>> {};

TEST_P(TransformModels, ForwardMatchesDirectEvaluation) {
  const auto [name, n] = GetParam();
  const auto s = nk::build_space(nk::Manifold::from_name(name), n);
  const nk::GridTransform grid(s, nk::oversampled_shape(s, 3.0));
  const auto a = nk::sample_coefficients(s, 1.0, 3, 0);
  const auto fast = grid.forward(a.values);
  const auto slow = nk::evaluate(s, a, grid.rule().nodes);
  double err = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < fast.size(); ++i) {
    err = std::max(err, std::abs(fast[i] - slow[i]));
    scale = std::max(scale, std::abs(slow[i]));
  }
  EXPECT_LT(err, 1e-12 * scale);
}

TEST_P(TransformModels, AdjointIdentity) {
  const auto [name, n] = GetParam();
  const auto s = nk::build_space(nk::Manifold::from_name(name), n);
  const nk::GridTransform grid(s, nk::oversampled_shape(s, 3.0));
  auto ws = grid.make_workspace();
  const auto a = nk::sample_coefficients(s, 1.0, 5, 1);
  std::vector<double> v(grid.size());
  nk::fill_gaussian(v, 1.0, 5, 2);
  std::vector<double> Fa(grid.size());
  std::vector<double> Ftv(s.dimension());
  grid.forward(a.values, Fa, ws);
  grid.adjoint(v, Ftv, ws);
  double lhs = 0.0;
  double rhs = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) lhs += Fa[i] * v[i];
  for (std::size_t k = 0; k < Ftv.size(); ++k) rhs += a.values[k] * Ftv[k];
  EXPECT_NEAR(lhs, rhs, 1e-10 * std::abs(lhs) + 1e-9);
}

TEST_P(TransformModels, WeightedAdjointRecoversCoefficients) {
  // Quadrature exact to 2n: sum_i w_i P(x_i) phi_k(x_i) = a_k.
  const auto [name, n] = GetParam();
  const auto s = nk::build_space(nk::Manifold::from_name(name), n);
  const nk::GridTransform grid(s, nk::oversampled_shape(s, 2.5));
  auto ws = grid.make_workspace();
  const auto a = nk::sample_coefficients(s, 1.0, 8, 0);
  std::vector<double> values(grid.size());
  grid.forward(a.values, values, ws);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] *= grid.rule().weights[i];
  std::vector<double> back(s.dimension());
  grid.adjoint(values, back, ws);
  for (std::size_t k = 0; k < back.size(); ++k) EXPECT_NEAR(back[k], a.values[k], 1e-11);
}

INSTANTIATE_TEST_SUITE_P(Models, TransformModels,
                         ::testing::Values(std::pair{"t1", 20.0}, std::pair{"t2", 7.5}, std::pair{"t3", 4.0},
                                           std::pair{"s2", 11.0}, std::pair{"t1", 0.0}, std::pair{"s2", 0.0}));

TEST(GridTransform, RejectsCoarseGrids) {
  const auto s = nk::build_space(nk::Manifold::torus(1), 10);
  EXPECT_THROW(nk::GridTransform(s, {nk::GridShape::Kind::torus, 20, 0, 0}), std::invalid_argument);
  const auto sp = nk::build_space(nk::Manifold::sphere(), 10);
  EXPECT_THROW(nk::GridTransform(sp, {nk::GridShape::Kind::sphere, 0, 5, 40}), std::invalid_argument);
}

TEST(GridTransform, OversampledShapeResolvesDegree) {
  for (const char* name : {"t1", "t2", "s2"}) {
    const auto s = nk::build_space(nk::Manifold::from_name(name), 13.0);
    const auto shape = nk::oversampled_shape(s, 16.0);
    const auto rule = nk::product_grid(s.manifold(), shape);
    EXPECT_GE(rule.exactness_degree(), 4 * s.max_index()) << name;
  }
}

TEST(GridTransform, SmoothSizes) {
  EXPECT_EQ(nk::detail::smooth_size(7), 8u);
  EXPECT_EQ(nk::detail::smooth_size(11), 12u);
  EXPECT_EQ(nk::detail::smooth_size(97), 100u);
  EXPECT_EQ(nk::detail::smooth_size(1), 1u);
}
