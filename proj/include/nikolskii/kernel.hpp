#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "nikolskii/manifold.hpp"
#include "nikolskii/spectrum.hpp"

namespace nikolskii {

namespace detail {

inline constexpr double kBesselSwitch = 12.0;

// sum_k (-1)^k (t/2)^{2k} / (k! Gamma(k+v+1)) * 2^{-v}; equals J_v(t) / t^v.
inline double bessel_series_scaled(double v, double t) {
  const double q = 0.25 * t * t;
  double term = std::exp(-v * std::numbers::ln2 - std::lgamma(v + 1.0));
  double sum = term;
  for (int k = 1; k < 500; ++k) {
    term *= -q / (static_cast<double>(k) * (k + v));
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum) && k > t) break;
  }
  return sum;
}

// Hankel asymptotic expansion, truncated at its smallest term.
inline double bessel_hankel(double v, double t) {
  const double mu = 4.0 * v * v;
  double p = 1.0;
  double q = 0.0;
  double term = 1.0;
  double previous = std::numeric_limits<double>::infinity();
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= (mu - odd * odd) / (static_cast<double>(k) * 8.0 * t);
    const double mag = std::abs(term);
    if (mag > previous || mag < 1e-17) break;
    previous = mag;
    // a_k / t^k alternates between Q (odd k) and P (even k) with signs
    // (-1)^{floor(k/2)}.
    const double sign = ((k / 2) % 2 == 0) ? 1.0 : -1.0;
    if (k % 2 == 1) {
      q += sign * term;
    } else {
      p += sign * term;
    }
  }
  const double chi = t - (0.5 * v + 0.25) * std::numbers::pi;
  return std::sqrt(2.0 / (std::numbers::pi * t)) * (p * std::cos(chi) - q * std::sin(chi));
}

inline bool use_series(double v, double t) { return t < std::max(kBesselSwitch, v * v); }

}  // namespace detail

// Bessel function of the first kind J_v(t), v > -1/2, t >= 0. Power series
// below t = 12, Hankel asymptotics above.
inline double bessel_j(double v, double t) {
  if (!(v > -0.5)) throw std::domain_error("bessel_j: order must exceed -1/2");
  if (!(t >= 0.0)) throw std::domain_error("bessel_j: argument must be >= 0");
  if (t == 0.0) return v == 0.0 ? 1.0 : 0.0;
  if (detail::use_series(v, t)) return std::pow(t, v) * detail::bessel_series_scaled(v, t);
  return detail::bessel_hankel(v, t);
}

// Volume of the unit ball in R^d.
inline double unit_ball_volume(int d) {
  return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

// Radial profile Phi_d(t) = J_{d/2}(t) / ((2pi)^{d/2} t^{d/2}) of the Fourier
// transform of the unit-ball indicator; Phi_d(0) = (2pi)^{-d} |B^d|.
inline double phi_d(int d, double t) {
  if (d < 1 || d > 3) throw std::domain_error("phi_d: dimension must be 1, 2 or 3");
  if (!(t >= 0.0)) throw std::domain_error("phi_d: argument must be >= 0");
  const double v = 0.5 * d;
  const double scale = std::pow(2.0 * std::numbers::pi, -v);
  if (detail::use_series(v, t)) return scale * detail::bessel_series_scaled(v, t);
  return scale * detail::bessel_hankel(v, t) / std::pow(t, v);
}

struct KernelProfile {
  int dimension = 1;

  double operator()(double t) const { return phi_d(dimension, t); }
  double at_zero() const { return std::pow(2.0 * std::numbers::pi, -dimension) * unit_ball_volume(dimension); }
};

// e(x, y, n) = sum_k phi_k(x) phi_k(y), by direct summation in index order
// (so e(x, y) and e(y, x) agree bit for bit).
inline double kernel_eval(const SpectralSpace& s, const Point& x, const Point& y) {
  const auto bx = s.basis_at(x);
  const auto by = s.basis_at(y);
  double sum = 0.0;
  for (std::size_t k = 0; k < bx.size(); ++k) sum += bx[k] * by[k];
  return sum;
}

// Lambda(x) = 1 / e(x, x, n).
inline double christoffel(const SpectralSpace& s, const Point& x) {
  const auto b = s.basis_at(x);
  double sum = 0.0;
  for (double v : b) sum += v * v;
  return 1.0 / sum;
}

// Closed form of the T^1 kernel: the Dirichlet kernel
// sin((M + 1/2) u) / sin(u / 2) with M = floor(n).
inline double dirichlet_kernel(double n, double u) {
  const double m = std::floor(n);
  const double half = 0.5 * u;
  const double s = std::sin(half);
  if (std::abs(s) < 1e-12) {
    // Removable singularity; the limit is 2M + 1 up to sign at u = 2pi k.
    const double c = std::cos(half);
    return (2.0 * m + 1.0) * std::cos((m + 0.5) * u) / c;
  }
  return std::sin((m + 0.5) * u) / s;
}

// Closed form of the S^2 kernel by the addition theorem:
// sum_{l <= L} (2l + 1) P_l(cos gamma).
inline double zonal_kernel(int max_degree, double cos_gamma) {
  if (max_degree < 0) return 0.0;
  double p0 = 1.0;
  double p1 = cos_gamma;
  double sum = 1.0;
  if (max_degree >= 1) sum += 3.0 * p1;
  for (int l = 2; l <= max_degree; ++l) {
    const double p2 = ((2.0 * l - 1.0) * cos_gamma * p1 - (l - 1.0) * p0) / l;
    sum += (2.0 * l + 1.0) * p2;
    p0 = p1;
    p1 = p2;
  }
  return sum;
}

// n^{-(d-1)} |e(x, y, n) - vol(M) Phi_d(n d(x, y)) n^d|.
// The kernel here reproduces in L2 of the normalized measure, which is
// vol(M) times the kernel for the Riemannian measure; the main term carries
// that factor.
inline double asymptotic_residual(const SpectralSpace& s, const Point& x, const Point& y) {
  const double n = s.degree();
  if (n < 1.0) throw std::domain_error("asymptotic_residual needs n >= 1");
  const auto& m = s.manifold();
  const int d = m.dimension();
  const double main = m.riemannian_volume() * phi_d(d, n * m.distance(x, y)) * std::pow(n, d);
  return std::abs(kernel_eval(s, x, y) - main) / std::pow(n, d - 1);
}

}  // namespace nikolskii
