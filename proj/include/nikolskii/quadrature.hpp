#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

namespace nikolskii {

// Gauss-Legendre nodes and weights on [-1, 1], nodes ascending.
// Newton iteration on the three-term recurrence; weights sum to 2.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(std::size_t count) {
  if (count == 0) throw std::invalid_argument("gauss_legendre: count must be positive");
  std::vector<double> nodes(count);
  std::vector<double> weights(count);
  const std::size_t half = (count + 1) / 2;
  const double n = static_cast<double>(count);
  for (std::size_t i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (n + 0.5));
    double derivative = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= count; ++k) {
        const double kd = static_cast<double>(k);
        const double p2 = ((2.0 * kd - 1.0) * x * p1 - (kd - 1.0) * p0) / kd;
        p0 = p1;
        p1 = p2;
      }
      if (count == 1) {
        p1 = x;
        p0 = 1.0;
      }
      derivative = n * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / derivative;
      x -= step;
      if (std::abs(step) < 1e-16) break;
    }
    // One more derivative evaluation at the converged node.
    double p0 = 1.0;
    double p1 = x;
    for (std::size_t k = 2; k <= count; ++k) {
      const double kd = static_cast<double>(k);
      const double p2 = ((2.0 * kd - 1.0) * x * p1 - (kd - 1.0) * p0) / kd;
      p0 = p1;
      p1 = p2;
    }
    derivative = count == 1 ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * derivative * derivative);
    nodes[count - 1 - i] = x;
    nodes[i] = -x;
    weights[i] = w;
    weights[count - 1 - i] = w;
  }
  if (count % 2 == 1) nodes[count / 2] = 0.0;
  return {std::move(nodes), std::move(weights)};
}

}  // namespace nikolskii
