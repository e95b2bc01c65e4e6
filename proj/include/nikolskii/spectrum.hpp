#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "nikolskii/manifold.hpp"

namespace nikolskii {

// Which trigonometric factor a real basis function carries.
enum class BasisTag : std::uint8_t { plain, cosine, sine };

// One Laplace-Beltrami eigenfunction of the real orthonormal basis.
// label is the lattice vector m on the torus and (ell, order, 0) on the
// sphere, where order < 0 marks the sine harmonics.
struct Eigenpair {
  std::size_t index = 0;
  double frequency = 0.0;
  std::array<int, 3> label{};
  BasisTag tag = BasisTag::plain;
};

// Fully normalized associated Legendre functions, scaled so that
// (1/2) * int_{-1}^{1} Pbar_l^m(x)^2 dx = 1. Values are stored m-major:
// all l for m = 0, then all l for m = 1, and so on.
class NormalizedLegendre {
 public:
  NormalizedLegendre() = default;
  explicit NormalizedLegendre(int max_degree) : max_degree_(max_degree) {
    if (max_degree < 0) return;
    const auto count = size();
    alpha_.assign(count, 0.0);
    beta_.assign(count, 0.0);
    for (int m = 0; m <= max_degree; ++m) {
      for (int l = m + 2; l <= max_degree; ++l) {
        const double l2 = static_cast<double>(l) * l;
        const double m2 = static_cast<double>(m) * m;
        const double lm1 = static_cast<double>(l - 1);
        alpha_[index(l, m)] = std::sqrt((4.0 * l2 - 1.0) / (l2 - m2));
        beta_[index(l, m)] = std::sqrt((lm1 * lm1 - m2) / (4.0 * lm1 * lm1 - 1.0));
      }
    }
  }

  int max_degree() const { return max_degree_; }

  std::size_t size() const {
    const auto l = static_cast<std::size_t>(max_degree_ + 1);
    return max_degree_ < 0 ? 0 : l * (l + 1) / 2;
  }

  std::size_t offset(int m) const {
    const auto mm = static_cast<std::size_t>(m);
    const auto l = static_cast<std::size_t>(max_degree_ + 1);
    return mm * l - mm * (mm - (mm > 0 ? 1 : 0)) / 2;
  }
  std::size_t index(int l, int m) const { return offset(m) + static_cast<std::size_t>(l - m); }

  // Fills out[index(l, m)] for x = cos(theta), s = sin(theta) >= 0.
  void fill(double x, double s, std::span<double> out) const {
    if (max_degree_ < 0) return;
    double diagonal = 1.0;
    for (int m = 0; m <= max_degree_; ++m) {
      if (m > 0) diagonal *= std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s;
      const std::size_t base = offset(m);
      out[base] = diagonal;
      if (m + 1 <= max_degree_) out[base + 1] = std::sqrt(2.0 * m + 3.0) * x * diagonal;
      for (int l = m + 2; l <= max_degree_; ++l) {
        const std::size_t k = base + static_cast<std::size_t>(l - m);
        out[k] = alpha_[k] * (x * out[k - 1] - beta_[k] * out[k - 2]);
      }
    }
  }

 private:
  int max_degree_ = -1;
  std::vector<double> alpha_;
  std::vector<double> beta_;
};

// The diffusion polynomial space P_n = span{phi_k : lambda_k <= n}.
class SpectralSpace {
 public:
  const Manifold& manifold() const { return manifold_; }
  double degree() const { return degree_; }
  // N = dim P_n.
  std::size_t dimension() const { return eigenpairs_.size(); }
  std::span<const Eigenpair> eigenpairs() const { return eigenpairs_; }

  // Largest |m_i| on the torus, largest ell on the sphere.
  int max_index() const { return max_index_; }

  const NormalizedLegendre& legendre() const { return legendre_; }

  // Writes phi_k(x) for every k into out (length N).
  void basis_at(const Point& x, std::span<double> out) const {
    manifold_.require(x);
    if (out.size() != dimension()) throw std::invalid_argument("basis_at: output length must equal N");
    if (manifold_.is_torus()) {
      torus_basis(x, out);
    } else {
      sphere_basis(x, out);
    }
  }

  std::vector<double> basis_at(const Point& x) const {
    std::vector<double> out(dimension());
    basis_at(x, out);
    return out;
  }

  // Matrix with entry (i, k) = phi_k(points[i]).
  Eigen::MatrixXd evaluate(std::span<const Point> points) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(dimension()));
    std::vector<double> row(dimension());
    for (std::size_t i = 0; i < points.size(); ++i) {
      basis_at(points[i], row);
      for (std::size_t k = 0; k < row.size(); ++k) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
    }
    return out;
  }

  // P_a(x) = sum_k a_k phi_k(x).
  double value_at(std::span<const double> coeffs, const Point& x) const {
    if (coeffs.size() != dimension()) throw std::invalid_argument("coefficient length must equal N");
    const auto row = basis_at(x);
    double sum = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) sum += coeffs[k] * row[k];
    return sum;
  }

  friend SpectralSpace build_space(const Manifold& m, double n);

 private:
  void torus_basis(const Point& x, std::span<double> out) const {
    const int d = manifold_.dimension();
    const auto width = static_cast<std::size_t>(max_index_ + 1);
    std::array<std::vector<double>, 3> cosines;
    std::array<std::vector<double>, 3> sines;
    for (int axis = 0; axis < d; ++axis) {
      auto& c = cosines[static_cast<std::size_t>(axis)];
      auto& s = sines[static_cast<std::size_t>(axis)];
      c.resize(width);
      s.resize(width);
      for (std::size_t k = 0; k < width; ++k) {
        const double angle = static_cast<double>(k) * x[static_cast<std::size_t>(axis)];
        c[k] = std::cos(angle);
        s[k] = std::sin(angle);
      }
    }
    for (std::size_t k = 0; k < eigenpairs_.size(); ++k) {
      const auto& e = eigenpairs_[k];
      if (e.tag == BasisTag::plain) {
        out[k] = 1.0;
        continue;
      }
      double re = 1.0;
      double im = 0.0;
      for (int axis = 0; axis < d; ++axis) {
        const int mj = e.label[static_cast<std::size_t>(axis)];
        const auto a = static_cast<std::size_t>(mj < 0 ? -mj : mj);
        const double c = cosines[static_cast<std::size_t>(axis)][a];
        const double s = (mj < 0 ? -1.0 : 1.0) * sines[static_cast<std::size_t>(axis)][a];
        const double nre = re * c - im * s;
        im = re * s + im * c;
        re = nre;
      }
      out[k] = std::numbers::sqrt2 * (e.tag == BasisTag::cosine ? re : im);
    }
  }

  void sphere_basis(const Point& x, std::span<double> out) const {
    const double s = std::hypot(x[0], x[1]);
    const double phi = std::atan2(x[1], x[0]);
    std::vector<double> table(legendre_.size());
    legendre_.fill(std::clamp(x[2], -1.0, 1.0), s, table);
    const int L = max_index_;
    for (int l = 0; l <= L; ++l) {
      for (int m = -l; m <= l; ++m) {
        const auto k = static_cast<std::size_t>(l * l + l + m);
        const int am = m < 0 ? -m : m;
        const double p = table[legendre_.index(l, am)];
        if (m == 0) {
          out[k] = p;
        } else if (m > 0) {
          out[k] = std::numbers::sqrt2 * p * std::cos(m * phi);
        } else {
          out[k] = std::numbers::sqrt2 * p * std::sin(am * phi);
        }
      }
    }
  }

  Manifold manifold_ = Manifold::torus(1);
  double degree_ = 0.0;
  int max_index_ = 0;
  std::vector<Eigenpair> eigenpairs_;
  NormalizedLegendre legendre_;
};

// Largest ell with sqrt(ell(ell+1)) <= n. Compares the eigenvalue itself
// (correctly rounded sqrt) so n = lambda_k always includes phi_k.
inline int sphere_max_degree(double n) {
  if (n < 0.0) return -1;
  auto lambda = [](long l) { return std::sqrt(static_cast<double>(l * (l + 1))); };
  auto l = static_cast<long>(std::floor((-1.0 + std::sqrt(1.0 + 4.0 * n * n)) / 2.0));
  while (lambda(l + 1) <= n) ++l;
  while (l > 0 && lambda(l) > n) --l;
  return static_cast<int>(l);
}

// Enumerates {phi_k : lambda_k <= n} in canonical order: lambda ascending,
// then lexicographic label, cosine before sine.
inline SpectralSpace build_space(const Manifold& m, double n) {
  if (!(n >= 0.0) || !std::isfinite(n)) throw std::domain_error("degree n must be a finite number >= 0");
  SpectralSpace space;
  space.manifold_ = m;
  space.degree_ = n;
  if (m.is_torus()) {
    const int top = static_cast<int>(std::floor(n));
    space.max_index_ = top;
    const int d = m.dimension();
    struct Entry {
      long norm2;
      std::array<int, 3> label;
      BasisTag tag;
    };
    std::vector<Entry> entries;
    entries.push_back({0, {0, 0, 0}, BasisTag::plain});
    const int lo1 = d >= 2 ? -top : 0;
    const int lo2 = d >= 3 ? -top : 0;
    for (int a = -top; a <= top; ++a) {
      for (int b = lo1; b <= (d >= 2 ? top : 0); ++b) {
        for (int c = lo2; c <= (d >= 3 ? top : 0); ++c) {
          const std::array<int, 3> v{a, b, c};
          // Canonical half-lattice: first nonzero component positive.
          int first = 0;
          for (int x : v) {
            if (x != 0) {
              first = x;
              break;
            }
          }
          if (first <= 0) continue;
          const long norm2 = static_cast<long>(a) * a + static_cast<long>(b) * b + static_cast<long>(c) * c;
          if (std::sqrt(static_cast<double>(norm2)) > n) continue;
          entries.push_back({norm2, v, BasisTag::cosine});
          entries.push_back({norm2, v, BasisTag::sine});
        }
      }
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
      return std::tie(x.norm2, x.label, x.tag) < std::tie(y.norm2, y.label, y.tag);
    });
    space.eigenpairs_.reserve(entries.size());
    for (const auto& e : entries) {
      space.eigenpairs_.push_back(
          {space.eigenpairs_.size(), std::sqrt(static_cast<double>(e.norm2)), e.label, e.tag});
    }
    return space;
  }
  const int L = sphere_max_degree(n);
  space.max_index_ = L;
  space.legendre_ = NormalizedLegendre(L);
  for (int l = 0; l <= L; ++l) {
    const double lambda = std::sqrt(static_cast<double>(l) * (l + 1));
    for (int order = -l; order <= l; ++order) {
      const BasisTag tag = order == 0 ? BasisTag::plain : (order > 0 ? BasisTag::cosine : BasisTag::sine);
      space.eigenpairs_.push_back({space.eigenpairs_.size(), lambda, {l, order, 0}, tag});
    }
  }
  return space;
}

// N / n^d.
inline double weyl_ratio(const SpectralSpace& s) {
  if (s.degree() < 1.0) throw std::domain_error("weyl_ratio needs n >= 1");
  return static_cast<double>(s.dimension()) / std::pow(s.degree(), s.manifold().dimension());
}

inline Eigen::MatrixXd evaluate_basis(const SpectralSpace& s, std::span<const Point> points) {
  return s.evaluate(points);
}

}  // namespace nikolskii
