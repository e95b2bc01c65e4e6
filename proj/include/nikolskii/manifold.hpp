#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nikolskii/core.hpp"
#include "nikolskii/quadrature.hpp"
#include "nikolskii/rng.hpp"

namespace nikolskii {

// A point on a model manifold. Torus points hold d angles in [0, 2pi);
// sphere points hold a unit vector in R^3.
class Point {
 public:
  Point() = default;
  Point(std::initializer_list<double> coords) : size_(static_cast<std::uint8_t>(coords.size())) {
    if (coords.size() > 3) throw std::invalid_argument("Point: at most 3 coordinates");
    std::size_t i = 0;
    for (double c : coords) values_[i++] = c;
  }
  explicit Point(std::span<const double> coords) : size_(static_cast<std::uint8_t>(coords.size())) {
    if (coords.size() > 3) throw std::invalid_argument("Point: at most 3 coordinates");
    for (std::size_t i = 0; i < coords.size(); ++i) values_[i] = coords[i];
  }

  std::size_t size() const { return size_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  std::span<const double> coords() const { return {values_.data(), size_}; }

  friend bool operator==(const Point& a, const Point& b) {
    if (a.size_ != b.size_) return false;
    for (std::size_t i = 0; i < a.size_; ++i) {
      if (a.values_[i] != b.values_[i]) return false;
    }
    return true;
  }

 private:
  std::array<double, 3> values_{};
  std::uint8_t size_ = 0;
};

enum class ManifoldKind : std::uint8_t { torus, sphere };

// Shape of a structured product grid, when a rule has one.
struct GridShape {
  enum class Kind : std::uint8_t { scattered, torus, sphere } kind = Kind::scattered;
  std::size_t per_axis = 0;   // torus: nodes per angle
  std::size_t polar = 0;      // sphere: Gauss-Legendre rings in cos(theta)
  std::size_t azimuthal = 0;  // sphere: equispaced longitudes per ring
};

// Nodes with positive weights summing to one.
struct QuadratureRule {
  std::vector<Point> nodes;
  std::vector<double> weights;
  GridShape shape;

  std::size_t size() const { return nodes.size(); }

  // Largest frequency integrated exactly: per-coordinate trigonometric
  // degree on the torus, spherical-harmonic degree on the sphere, -1 for
  // scattered rules.
  long exactness_degree() const {
    switch (shape.kind) {
      case GridShape::Kind::torus:
        return static_cast<long>(shape.per_axis) - 1;
      case GridShape::Kind::sphere:
        return std::min(2 * static_cast<long>(shape.polar) - 1, static_cast<long>(shape.azimuthal) - 1);
      case GridShape::Kind::scattered:
        break;
    }
    return -1;
  }
};

class Manifold {
 public:
  static Manifold torus(int dimension) {
    if (dimension < 1 || dimension > 3) {
      throw std::invalid_argument("torus dimension must be 1, 2 or 3");
    }
    return Manifold(ManifoldKind::torus, dimension);
  }
  static Manifold sphere() { return Manifold(ManifoldKind::sphere, 2); }

  // Accepts "t1", "t2", "t3", "s2".
  static Manifold from_name(std::string_view name) {
    if (name == "t1") return torus(1);
    if (name == "t2") return torus(2);
    if (name == "t3") return torus(3);
    if (name == "s2") return sphere();
    throw std::invalid_argument("unknown manifold '" + std::string(name) + "' (expected t1, t2, t3, s2)");
  }

  ManifoldKind kind() const { return kind_; }
  int dimension() const { return dimension_; }
  bool is_torus() const { return kind_ == ManifoldKind::torus; }
  bool is_sphere() const { return kind_ == ManifoldKind::sphere; }
  std::size_t coordinate_count() const { return is_torus() ? static_cast<std::size_t>(dimension_) : 3; }

  std::string name() const { return is_torus() ? "t" + std::to_string(dimension_) : "s2"; }

  double diameter() const { return is_torus() ? kPi * std::sqrt(static_cast<double>(dimension_)) : kPi; }

  // Total Riemannian volume before normalization: (2pi)^d or 4pi.
  double riemannian_volume() const { return is_torus() ? std::pow(kTwoPi, dimension_) : 4.0 * kPi; }

  // Builds a canonical point: angles reduced mod 2pi, vectors normalized.
  Point point(std::initializer_list<double> coords) const { return canonicalize(Point(coords)); }

  Point canonicalize(Point p) const {
    require(p);
    if (is_torus()) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = wrap_angle(p[i]);
    } else {
      const double norm = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
      if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw std::invalid_argument("sphere point must be a nonzero finite vector");
      }
      for (std::size_t i = 0; i < 3; ++i) p[i] /= norm;
    }
    return p;
  }

  // Sphere point from colatitude theta and longitude phi.
  Point spherical(double theta, double phi) const {
    if (!is_sphere()) throw std::invalid_argument("spherical coordinates need the sphere");
    const double s = std::sin(theta);
    return canonicalize(Point{s * std::cos(phi), s * std::sin(phi), std::cos(theta)});
  }

  void require(const Point& p) const {
    if (p.size() != coordinate_count()) {
      throw std::invalid_argument("point has " + std::to_string(p.size()) + " coordinates but " + name() +
                                  " needs " + std::to_string(coordinate_count()));
    }
  }

  double distance(const Point& a, const Point& b) const {
    require(a);
    require(b);
    if (is_torus()) {
      double sum = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double delta = angular_gap(a[i], b[i]);
        sum += delta * delta;
      }
      return std::sqrt(sum);
    }
    // atan2(|a x b|, a.b) equals the clamped arccos but keeps full relative
    // accuracy near 0 and pi.
    const double cx = a[1] * b[2] - a[2] * b[1];
    const double cy = a[2] * b[0] - a[0] * b[2];
    const double cz = a[0] * b[1] - a[1] * b[0];
    const double dot = std::clamp(a[0] * b[0] + a[1] * b[1] + a[2] * b[2], -1.0, 1.0);
    return std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), dot);
  }

  // A point drawn from the normalized measure.
  Point random_point(CounterRng& rng) const {
    if (is_torus()) {
      std::array<double, 3> c{};
      for (int i = 0; i < dimension_; ++i) c[i] = kTwoPi * rng.uniform();
      return canonicalize(Point(std::span<const double>(c.data(), static_cast<std::size_t>(dimension_))));
    }
    const double z = 2.0 * rng.uniform() - 1.0;
    const double phi = kTwoPi * rng.uniform();
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return canonicalize(Point{s * std::cos(phi), s * std::sin(phi), z});
  }

  // Closed form of mu(B(x, r)) when one is known: every r on T^1 and S^2,
  // r <= pi on T^2 and T^3 (the ball does not meet its periodic images).
  std::optional<double> ball_measure_closed_form(double r) const {
    if (is_sphere()) return (1.0 - std::cos(std::min(r, kPi))) / 2.0;
    if (dimension_ == 1) return std::min(r, kPi) / kPi;
    if (r <= kPi) {
      const double unit_ball = dimension_ == 2 ? kPi : 4.0 * kPi / 3.0;
      return unit_ball * std::pow(r, dimension_) / riemannian_volume();
    }
    return std::nullopt;
  }

  friend bool operator==(const Manifold& a, const Manifold& b) {
    return a.kind_ == b.kind_ && a.dimension_ == b.dimension_;
  }

  static double wrap_angle(double theta) {
    double t = std::fmod(theta, kTwoPi);
    if (t < 0.0) t += kTwoPi;
    if (t >= kTwoPi) t = 0.0;
    return t;
  }

  // Shortest signed-free separation of two angles, in [0, pi].
  static double angular_gap(double a, double b) {
    double delta = std::abs(a - b);
    if (delta >= kTwoPi) delta = std::fmod(delta, kTwoPi);
    return std::min(delta, kTwoPi - delta);
  }

 private:
  Manifold(ManifoldKind kind, int dimension) : kind_(kind), dimension_(dimension) {}

  ManifoldKind kind_;
  int dimension_;
};

inline double geodesic_distance(const Manifold& m, const Point& x, const Point& y) { return m.distance(x, y); }

// Structured grids. Torus: per_axis^d equispaced nodes at 2pi*j/per_axis.
// Sphere: Gauss-Legendre rings in cos(theta) times equispaced longitudes,
// ring-major order.
inline QuadratureRule product_grid(const Manifold& m, const GridShape& shape) {
  QuadratureRule rule;
  rule.shape = shape;
  if (m.is_torus()) {
    if (shape.kind != GridShape::Kind::torus || shape.per_axis == 0) {
      throw std::invalid_argument("torus grid needs a positive per-axis count");
    }
    const std::size_t k = shape.per_axis;
    const int d = m.dimension();
    std::size_t total = 1;
    for (int i = 0; i < d; ++i) total *= k;
    rule.nodes.reserve(total);
    const double w = 1.0 / static_cast<double>(total);
    rule.weights.assign(total, w);
    std::array<std::size_t, 3> idx{};
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t rem = flat;
      for (int axis = d - 1; axis >= 0; --axis) {
        idx[static_cast<std::size_t>(axis)] = rem % k;
        rem /= k;
      }
      std::array<double, 3> c{};
      for (int axis = 0; axis < d; ++axis) {
        c[static_cast<std::size_t>(axis)] = kTwoPi * static_cast<double>(idx[static_cast<std::size_t>(axis)]) /
                                            static_cast<double>(k);
      }
      rule.nodes.emplace_back(std::span<const double>(c.data(), static_cast<std::size_t>(d)));
    }
    return rule;
  }
  if (shape.kind != GridShape::Kind::sphere || shape.polar == 0 || shape.azimuthal == 0) {
    throw std::invalid_argument("sphere grid needs positive polar and azimuthal counts");
  }
  auto [x, w] = gauss_legendre(shape.polar);
  rule.nodes.reserve(shape.polar * shape.azimuthal);
  rule.weights.reserve(shape.polar * shape.azimuthal);
  for (std::size_t i = 0; i < shape.polar; ++i) {
    const double z = x[i];
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    for (std::size_t j = 0; j < shape.azimuthal; ++j) {
      const double phi = kTwoPi * static_cast<double>(j) / static_cast<double>(shape.azimuthal);
      rule.nodes.push_back(Point{s * std::cos(phi), s * std::sin(phi), z});
      rule.weights.push_back(w[i] / (2.0 * static_cast<double>(shape.azimuthal)));
    }
  }
  return rule;
}

inline GridShape grid_shape_for(const Manifold& m, std::size_t resolution) {
  if (resolution == 0) throw std::invalid_argument("grid resolution must be positive");
  if (m.is_torus()) return {GridShape::Kind::torus, resolution, 0, 0};
  return {GridShape::Kind::sphere, 0, resolution, 2 * resolution};
}

// resolution nodes per angle on T^d; resolution rings x 2*resolution
// longitudes on S^2.
inline QuadratureRule uniform_grid(const Manifold& m, std::size_t resolution) {
  return product_grid(m, grid_shape_for(m, resolution));
}

// Upper bound on the distance from any point of the manifold to the
// nearest node of uniform_grid(m, resolution).
inline double grid_covering_radius(const Manifold& m, std::size_t resolution) {
  if (resolution == 0) throw std::invalid_argument("grid resolution must be positive");
  if (m.is_torus()) return std::sqrt(static_cast<double>(m.dimension())) * kPi / static_cast<double>(resolution);
  const auto shape = grid_shape_for(m, resolution);
  const auto [x, w] = gauss_legendre(shape.polar);
  // Colatitudes ascend as cos(theta) descends.
  double pole_gap = std::acos(std::clamp(x.back(), -1.0, 1.0));
  double ring_gap = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    ring_gap = std::max(ring_gap, std::acos(std::clamp(x[i], -1.0, 1.0)) - std::acos(std::clamp(x[i + 1], -1.0, 1.0)));
  }
  // Walk along the meridian to a ring, then along that parallel.
  const double along_parallel = kPi / static_cast<double>(shape.azimuthal);
  return std::max(pole_gap, 0.5 * ring_gap) + along_parallel;
}

// Quadrature estimate of mu(B(x, r)) from a midpoint grid centered at x.
// Converges at first order in 1/resolution (the indicator is discontinuous).
inline double ball_measure_quadrature(const Manifold& m, const Point& x, double r, std::size_t resolution) {
  m.require(x);
  if (resolution == 0) throw std::invalid_argument("resolution must be positive");
  if (m.is_torus()) {
    // Offsets only matter through their wrapped lengths, so the estimate is
    // the same for every center.
    const int d = m.dimension();
    std::vector<double> sq(resolution);
    for (std::size_t j = 0; j < resolution; ++j) {
      const double off = -kPi + kTwoPi * (static_cast<double>(j) + 0.5) / static_cast<double>(resolution);
      sq[j] = off * off;
    }
    const double r2 = r * r;
    std::size_t inside = 0;
    std::size_t total = 0;
    if (d == 1) {
      for (double a : sq) inside += a <= r2;
      total = resolution;
    } else if (d == 2) {
      for (double a : sq)
        for (double b : sq) inside += a + b <= r2;
      total = resolution * resolution;
    } else {
      for (double a : sq)
        for (double b : sq)
          for (double c : sq) inside += a + b + c <= r2;
      total = resolution * resolution * resolution;
    }
    return static_cast<double>(inside) / static_cast<double>(total);
  }
  // Sphere: by rotation invariance the cap is centered at the grid pole,
  // where the Gauss-Legendre rings resolve the colatitude cut directly.
  const auto rule = uniform_grid(m, resolution);
  const Point north{0.0, 0.0, 1.0};
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    if (m.distance(rule.nodes[i], north) <= r) sum += rule.weights[i];
  }
  return sum;
}

// mu(B(x, r)) for 0 < r <= diam: the closed form when one exists, the
// centered quadrature otherwise.
inline double ball_measure_estimate(const Manifold& m, const Point& x, double r, std::size_t resolution) {
  m.require(x);
  if (!(r > 0.0) || r > m.diameter() * (1.0 + 1e-15)) {
    throw std::domain_error("ball radius must lie in (0, diam]");
  }
  if (auto exact = m.ball_measure_closed_form(r)) return *exact;
  return ball_measure_quadrature(m, x, r, resolution);
}

}  // namespace nikolskii
