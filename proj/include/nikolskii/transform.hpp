#pragma once

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "nikolskii/manifold.hpp"
#include "nikolskii/spectrum.hpp"

namespace nikolskii {

namespace detail {

// FFTW's planner is not thread-safe; execution on fresh arrays is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex mutex;
  return mutex;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
struct PlanDestroy {
  void operator()(fftw_plan p) const {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};
using PlanHandle = std::shared_ptr<std::remove_pointer_t<fftw_plan>>;

inline PlanHandle make_plan(fftw_plan p) {
  if (p == nullptr) throw std::runtime_error("FFTW failed to create a plan");
  return PlanHandle(p, PlanDestroy{});
}

// Smallest 2^a 3^b 5^c that is >= n.
inline std::size_t smooth_size(std::size_t n) {
  for (std::size_t k = std::max<std::size_t>(n, 1);; ++k) {
    std::size_t r = k;
    for (std::size_t f : {2u, 3u, 5u}) {
      while (r % f == 0) r /= f;
    }
    if (r == 1) return k;
  }
}

}  // namespace detail

// Grid on which a Monte Carlo run evaluates its polynomials: rho nodes per
// wavelength 2*pi/n along every axis, never fewer than needed to resolve
// P_n without aliasing.
inline GridShape oversampled_shape(const SpectralSpace& s, double rho) {
  if (!(rho >= 1.0)) throw std::domain_error("oversampling factor must be >= 1");
  const double n = std::max(s.degree(), 1.0);
  const auto top = static_cast<std::size_t>(std::max(s.max_index(), 0));
  if (s.manifold().is_torus()) {
    const auto k = std::max(static_cast<std::size_t>(std::ceil(rho * n)), 2 * top + 1);
    return {GridShape::Kind::torus, detail::smooth_size(k), 0, 0};
  }
  const auto az = std::max(static_cast<std::size_t>(std::ceil(rho * n)), 2 * top + 1);
  const auto polar = std::max(static_cast<std::size_t>(std::ceil(rho * n / 2.0)), top + 1);
  return {GridShape::Kind::sphere, 0, polar, detail::smooth_size(az)};
}

// Evaluation of P_a on a product grid and its transpose, both by FFT.
// forward: values_j = sum_k a_k phi_k(x_j).
// adjoint: coeffs_k = sum_j values_j phi_k(x_j).
class GridTransform {
 public:
  // Scratch buffers; one per concurrent caller.
  struct Workspace {
    std::unique_ptr<fftw_complex, detail::FftwFree> spectrum;
    std::unique_ptr<double, detail::FftwFree> real;
    std::vector<double> cos_coeffs;
    std::vector<double> sin_coeffs;
  };

  GridTransform(const SpectralSpace& space, const GridShape& shape)
      : space_(space), rule_(product_grid(space.manifold(), shape)) {
    const auto top = static_cast<std::size_t>(std::max(space.max_index(), 0));
    if (space.manifold().is_torus()) {
      if (shape.per_axis < 2 * top + 1) {
        throw std::invalid_argument("torus grid too coarse: need at least 2*floor(n)+1 nodes per axis");
      }
      setup_torus();
    } else {
      if (shape.azimuthal < 2 * top + 1 || shape.polar < top + 1) {
        throw std::invalid_argument("sphere grid too coarse for the requested degree");
      }
      setup_sphere();
    }
  }

  const SpectralSpace& space() const { return space_; }
  const QuadratureRule& rule() const { return rule_; }
  const GridShape& shape() const { return rule_.shape; }
  std::size_t size() const { return rule_.size(); }

  Workspace make_workspace() const {
    Workspace ws;
    ws.spectrum.reset(fftw_alloc_complex(complex_size_));
    ws.real.reset(fftw_alloc_real(real_size_));
    if (space_.manifold().is_sphere()) {
      ws.cos_coeffs.assign(space_.legendre().size(), 0.0);
      ws.sin_coeffs.assign(space_.legendre().size(), 0.0);
    }
    return ws;
  }

  void forward(std::span<const double> coeffs, std::span<double> values, Workspace& ws) const {
    check_sizes(coeffs.size(), values.size());
    auto* spec = reinterpret_cast<std::complex<double>*>(ws.spectrum.get());
    std::fill(spec, spec + complex_size_, std::complex<double>(0.0, 0.0));
    if (space_.manifold().is_torus()) {
      torus_scatter(coeffs, spec);
    } else {
      sphere_analysis_to_rings(coeffs, spec, ws);
    }
    fftw_execute_dft_c2r(backward_.get(), ws.spectrum.get(), ws.real.get());
    std::copy(ws.real.get(), ws.real.get() + real_size_, values.begin());
  }

  void adjoint(std::span<const double> values, std::span<double> coeffs, Workspace& ws) const {
    check_sizes(coeffs.size(), values.size());
    std::copy(values.begin(), values.end(), ws.real.get());
    fftw_execute_dft_r2c(forward_.get(), ws.real.get(), ws.spectrum.get());
    const auto* spec = reinterpret_cast<const std::complex<double>*>(ws.spectrum.get());
    if (space_.manifold().is_torus()) {
      torus_gather(spec, coeffs);
    } else {
      sphere_rings_to_coeffs(spec, coeffs, ws);
    }
  }

  std::vector<double> forward(std::span<const double> coeffs) const {
    auto ws = make_workspace();
    std::vector<double> values(size());
    forward(coeffs, values, ws);
    return values;
  }

 private:
  struct Slot {
    std::size_t read = 0;
    bool read_conj = false;
    std::array<std::size_t, 2> write{};
    std::array<bool, 2> write_conj{};
    std::size_t write_count = 0;
  };

  void check_sizes(std::size_t n_coeffs, std::size_t n_values) const {
    if (n_coeffs != space_.dimension()) throw std::invalid_argument("coefficient length must equal N");
    if (n_values != size()) throw std::invalid_argument("value length must equal the grid size");
  }

  void setup_torus() {
    const int d = space_.manifold().dimension();
    const std::size_t k = rule_.shape.per_axis;
    const std::size_t half = k / 2 + 1;
    real_size_ = 1;
    for (int i = 0; i < d; ++i) real_size_ *= k;
    complex_size_ = real_size_ / k * half;
    std::array<int, 3> dims{};
    for (int i = 0; i < d; ++i) dims[static_cast<std::size_t>(i)] = static_cast<int>(k);

    auto slot_of = [&](const std::array<int, 3>& m) {
      std::size_t flat = 0;
      for (int axis = 0; axis < d - 1; ++axis) {
        const int v = m[static_cast<std::size_t>(axis)];
        const auto wrapped = static_cast<std::size_t>(v < 0 ? v + static_cast<int>(k) : v);
        flat = flat * k + wrapped;
      }
      return flat * half + static_cast<std::size_t>(m[static_cast<std::size_t>(d - 1)]);
    };
    slots_.resize(space_.dimension());
    for (const auto& e : space_.eigenpairs()) {
      Slot s;
      if (e.tag != BasisTag::plain) {
        auto m = e.label;
        auto neg = m;
        for (auto& v : neg) v = -v;
        const int last = m[static_cast<std::size_t>(d - 1)];
        if (last > 0) {
          s.read = slot_of(m);
          s.write = {slot_of(m), 0};
          s.write_conj = {false, false};
          s.write_count = 1;
        } else if (last < 0) {
          s.read = slot_of(neg);
          s.read_conj = true;
          s.write = {slot_of(neg), 0};
          s.write_conj = {true, false};
          s.write_count = 1;
        } else {
          s.read = slot_of(m);
          s.write = {slot_of(m), slot_of(neg)};
          s.write_conj = {false, true};
          s.write_count = 2;
        }
      }
      slots_[e.index] = s;
    }

    std::unique_ptr<fftw_complex, detail::FftwFree> c(fftw_alloc_complex(complex_size_));
    std::unique_ptr<double, detail::FftwFree> r(fftw_alloc_real(real_size_));
    std::lock_guard lock(detail::fftw_planner_mutex());
    backward_ = detail::make_plan(fftw_plan_dft_c2r(d, dims.data(), c.get(), r.get(), FFTW_ESTIMATE));
    forward_ = detail::make_plan(fftw_plan_dft_r2c(d, dims.data(), r.get(), c.get(), FFTW_ESTIMATE));
  }

  void torus_scatter(std::span<const double> coeffs, std::complex<double>* spec) const {
    constexpr double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    for (const auto& e : space_.eigenpairs()) {
      const double a = coeffs[e.index];
      if (e.tag == BasisTag::plain) {
        spec[0] += a;
        continue;
      }
      // sqrt2*cos(m.t) and sqrt2*sin(m.t) as c_m e^{im.t} + conj.
      const std::complex<double> c =
          e.tag == BasisTag::cosine ? std::complex<double>(a * inv_sqrt2, 0.0) : std::complex<double>(0.0, -a * inv_sqrt2);
      const auto& s = slots_[e.index];
      for (std::size_t w = 0; w < s.write_count; ++w) spec[s.write[w]] += s.write_conj[w] ? std::conj(c) : c;
    }
  }

  void torus_gather(const std::complex<double>* spec, std::span<double> coeffs) const {
    for (const auto& e : space_.eigenpairs()) {
      if (e.tag == BasisTag::plain) {
        coeffs[e.index] = spec[0].real();
        continue;
      }
      const auto& s = slots_[e.index];
      const std::complex<double> v = s.read_conj ? std::conj(spec[s.read]) : spec[s.read];
      coeffs[e.index] = e.tag == BasisTag::cosine ? std::numbers::sqrt2 * v.real() : -std::numbers::sqrt2 * v.imag();
    }
  }

  void setup_sphere() {
    const std::size_t rings = rule_.shape.polar;
    const std::size_t az = rule_.shape.azimuthal;
    const std::size_t half = az / 2 + 1;
    real_size_ = rings * az;
    complex_size_ = rings * half;
    const auto& leg = space_.legendre();
    table_.assign(rings * leg.size(), 0.0);
    for (std::size_t i = 0; i < rings; ++i) {
      const double z = rule_.nodes[i * az][2];
      const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
      leg.fill(z, s, std::span<double>(table_.data() + i * leg.size(), leg.size()));
    }
    const int n = static_cast<int>(az);
    const int howmany = static_cast<int>(rings);
    std::unique_ptr<fftw_complex, detail::FftwFree> c(fftw_alloc_complex(complex_size_));
    std::unique_ptr<double, detail::FftwFree> r(fftw_alloc_real(real_size_));
    std::lock_guard lock(detail::fftw_planner_mutex());
    backward_ = detail::make_plan(fftw_plan_many_dft_c2r(1, &n, howmany, c.get(), nullptr, 1,
                                                         static_cast<int>(half), r.get(), nullptr, 1, n,
                                                         FFTW_ESTIMATE));
    forward_ = detail::make_plan(fftw_plan_many_dft_r2c(1, &n, howmany, r.get(), nullptr, 1, n, c.get(), nullptr, 1,
                                                        static_cast<int>(half), FFTW_ESTIMATE));
  }

  void sphere_analysis_to_rings(std::span<const double> coeffs, std::complex<double>* spec, Workspace& ws) const {
    const auto& leg = space_.legendre();
    const int L = space_.max_index();
    // Reorder coefficients m-major so each ring sum is a contiguous dot.
    for (int l = 0; l <= L; ++l) {
      for (int m = 0; m <= l; ++m) {
        const auto idx = leg.index(l, m);
        ws.cos_coeffs[idx] = coeffs[static_cast<std::size_t>(l * l + l + m)];
        ws.sin_coeffs[idx] = m == 0 ? 0.0 : coeffs[static_cast<std::size_t>(l * l + l - m)];
      }
    }
    constexpr double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    const std::size_t rings = rule_.shape.polar;
    const std::size_t half = rule_.shape.azimuthal / 2 + 1;
    for (std::size_t i = 0; i < rings; ++i) {
      const double* row = table_.data() + i * leg.size();
      for (int m = 0; m <= L; ++m) {
        const std::size_t lo = leg.offset(m);
        const std::size_t len = static_cast<std::size_t>(L - m + 1);
        double c = 0.0;
        double s = 0.0;
        for (std::size_t t = 0; t < len; ++t) {
          c += row[lo + t] * ws.cos_coeffs[lo + t];
          s += row[lo + t] * ws.sin_coeffs[lo + t];
        }
        spec[i * half + static_cast<std::size_t>(m)] =
            m == 0 ? std::complex<double>(c, 0.0) : std::complex<double>(c * inv_sqrt2, -s * inv_sqrt2);
      }
    }
  }

  void sphere_rings_to_coeffs(const std::complex<double>* spec, std::span<double> coeffs, Workspace& ws) const {
    const auto& leg = space_.legendre();
    const int L = space_.max_index();
    std::fill(ws.cos_coeffs.begin(), ws.cos_coeffs.end(), 0.0);
    std::fill(ws.sin_coeffs.begin(), ws.sin_coeffs.end(), 0.0);
    const std::size_t rings = rule_.shape.polar;
    const std::size_t half = rule_.shape.azimuthal / 2 + 1;
    for (std::size_t i = 0; i < rings; ++i) {
      const double* row = table_.data() + i * leg.size();
      for (int m = 0; m <= L; ++m) {
        const auto v = spec[i * half + static_cast<std::size_t>(m)];
        const double gc = m == 0 ? v.real() : std::numbers::sqrt2 * v.real();
        const double gs = -std::numbers::sqrt2 * v.imag();
        const std::size_t lo = leg.offset(m);
        const std::size_t len = static_cast<std::size_t>(L - m + 1);
        for (std::size_t t = 0; t < len; ++t) {
          ws.cos_coeffs[lo + t] += row[lo + t] * gc;
          if (m > 0) ws.sin_coeffs[lo + t] += row[lo + t] * gs;
        }
      }
    }
    for (int l = 0; l <= L; ++l) {
      for (int m = 0; m <= l; ++m) {
        const auto idx = leg.index(l, m);
        coeffs[static_cast<std::size_t>(l * l + l + m)] = ws.cos_coeffs[idx];
        if (m > 0) coeffs[static_cast<std::size_t>(l * l + l - m)] = ws.sin_coeffs[idx];
      }
    }
  }

  SpectralSpace space_;
  QuadratureRule rule_;
  std::size_t real_size_ = 0;
  std::size_t complex_size_ = 0;
  std::vector<Slot> slots_;
  std::vector<double> table_;
  detail::PlanHandle backward_;
  detail::PlanHandle forward_;
};

}  // namespace nikolskii
