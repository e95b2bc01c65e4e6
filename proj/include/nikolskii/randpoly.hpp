#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nikolskii/core.hpp"
#include "nikolskii/manifold.hpp"
#include "nikolskii/pointsets.hpp"
#include "nikolskii/rng.hpp"
#include "nikolskii/spectrum.hpp"
#include "nikolskii/transform.hpp"

namespace nikolskii {

// Identifies the space a coefficient vector belongs to.
struct SpaceDescriptor {
  std::string manifold;
  int dimension = 0;
  double degree = 0.0;
  std::size_t size = 0;

  static SpaceDescriptor of(const SpectralSpace& s) {
    return {s.manifold().name(), s.manifold().dimension(), s.degree(), s.dimension()};
  }
  bool matches(const SpectralSpace& s) const {
    return manifold == s.manifold().name() && degree == s.degree() && size == s.dimension();
  }
  friend bool operator==(const SpaceDescriptor&, const SpaceDescriptor&) = default;
};

// Coefficients a of P_a = sum_k a_k phi_k.
struct CoefficientVector {
  SpaceDescriptor space;
  std::vector<double> values;
  double sigma = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t trial = 0;

  std::size_t size() const { return values.size(); }
};

inline void require_match(const SpectralSpace& s, const CoefficientVector& a) {
  if (!a.space.matches(s)) {
    throw std::invalid_argument("coefficient vector belongs to " + a.space.manifold + " degree " +
                                std::to_string(a.space.degree) + ", not to the given space");
  }
}

inline CoefficientVector make_coefficients(const SpectralSpace& s, std::vector<double> values) {
  if (values.size() != s.dimension()) throw std::invalid_argument("coefficient length must equal N");
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("coefficients must be finite");
  }
  CoefficientVector a;
  a.space = SpaceDescriptor::of(s);
  a.values = std::move(values);
  return a;
}

// i.i.d. N(0, sigma^2) entries from the substream keyed by (seed, trial).
inline void fill_gaussian(std::span<double> out, double sigma, std::uint64_t seed, std::uint64_t trial) {
  if (!(sigma > 0.0)) throw std::domain_error("sigma must be positive");
  CounterRng rng(seed, trial);
  for (double& v : out) v = sigma * rng.normal();
}

inline CoefficientVector sample_coefficients(const SpectralSpace& s, double sigma, std::uint64_t master_seed,
                                             std::uint64_t trial) {
  std::vector<double> values(s.dimension());
  fill_gaussian(values, sigma, master_seed, trial);
  auto a = make_coefficients(s, std::move(values));
  a.sigma = sigma;
  a.seed = master_seed;
  a.trial = trial;
  return a;
}

// P_a at each point.
inline std::vector<double> evaluate(const SpectralSpace& s, const CoefficientVector& a, std::span<const Point> points) {
  require_match(s, a);
  std::vector<double> out(points.size());
  std::vector<double> row(s.dimension());
  for (std::size_t i = 0; i < points.size(); ++i) {
    s.basis_at(points[i], row);
    double sum = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) sum += a.values[k] * row[k];
    out[i] = sum;
  }
  return out;
}

enum class NormMethod : std::uint8_t { exact_quadrature, oversampled_quadrature, grid_max_refined, parseval, mz_discrete };

inline std::string to_string(NormMethod m) {
  switch (m) {
    case NormMethod::exact_quadrature: return "exact-quadrature";
    case NormMethod::oversampled_quadrature: return "oversampled-quadrature";
    case NormMethod::grid_max_refined: return "grid-max-refined";
    case NormMethod::parseval: return "parseval";
    case NormMethod::mz_discrete: return "mz-discrete";
  }
  return "unknown";
}

struct NormReport {
  Exponent p;
  double value = 0.0;
  NormMethod method = NormMethod::exact_quadrature;
  // Absolute accuracy bound; 0 for exact methods.
  double declared_accuracy = 0.0;
};

// (sum_i w_i |v_i|^p)^{1/p}, or max |v_i| for p = inf.
inline double weighted_norm(std::span<const double> values, std::span<const double> weights, Exponent p) {
  if (p.is_infinite()) {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
  const double pv = p.value();
  double sum = 0.0;
  if (pv == 1.0) {
    for (std::size_t i = 0; i < values.size(); ++i) sum += weights[i] * std::abs(values[i]);
    return sum;
  }
  if (pv == 2.0) {
    for (std::size_t i = 0; i < values.size(); ++i) sum += weights[i] * values[i] * values[i];
    return std::sqrt(sum);
  }
  if (pv == 4.0) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double sq = values[i] * values[i];
      sum += weights[i] * sq * sq;
    }
    return std::sqrt(std::sqrt(sum));
  }
  for (std::size_t i = 0; i < values.size(); ++i) sum += weights[i] * std::pow(std::abs(values[i]), pv);
  return std::pow(sum, 1.0 / pv);
}

// True when a structured rule integrates |P|^p exactly for every P in the
// space, i.e. p is an even integer and the rule is exact to degree p*n.
inline bool rule_exact_for(const SpectralSpace& s, const QuadratureRule& rule, Exponent p) {
  if (!p.is_even_integer()) return false;
  const long needed = static_cast<long>(p.value()) * std::max(s.max_index(), 0);
  return rule.shape.kind != GridShape::Kind::scattered && rule.exactness_degree() >= needed;
}

struct LpOptions {
  // Allow doubling studies for exponents no finite rule integrates exactly.
  bool oversample = false;
  // Accept once the relative change between resolutions R and 2R is below this.
  double tolerance = 1e-6;
  std::size_t max_nodes = std::size_t{1} << 23;
};

inline GridShape doubled(const GridShape& g) {
  GridShape out = g;
  out.per_axis *= 2;
  out.polar *= 2;
  out.azimuthal *= 2;
  return out;
}

inline std::size_t node_count(const Manifold& m, const GridShape& g) {
  if (g.kind == GridShape::Kind::sphere) return g.polar * g.azimuthal;
  std::size_t total = 1;
  for (int i = 0; i < m.dimension(); ++i) total *= g.per_axis;
  return total;
}

// L_p norm under the normalized measure by quadrature. Exact for even
// integer p on rules exact to degree p*n; other exponents need
// options.oversample and get a declared accuracy from an R vs 2R study.
inline NormReport lp_norm(const SpectralSpace& s, const CoefficientVector& a, Exponent p, const QuadratureRule& rule,
                          const LpOptions& options = {}) {
  require_match(s, a);
  if (p.is_infinite()) throw std::invalid_argument("lp_norm handles finite p; use sup_norm for p = inf");
  if (rule.size() == 0) throw std::invalid_argument("empty quadrature rule");
  auto norm_on = [&](const QuadratureRule& r) {
    std::vector<double> values;
    if (r.shape.kind != GridShape::Kind::scattered) {
      values = GridTransform(s, r.shape).forward(a.values);
    } else {
      values = evaluate(s, a, r.nodes);
    }
    return weighted_norm(values, r.weights, p);
  };
  if (rule_exact_for(s, rule, p)) return {p, norm_on(rule), NormMethod::exact_quadrature, 0.0};
  if (!options.oversample) {
    throw AccuracyError("rule is not exact for p = " + p.str() + " at this degree; enable oversampling");
  }
  if (rule.shape.kind == GridShape::Kind::scattered) {
    throw AccuracyError("oversampling needs a structured grid rule");
  }
  GridShape shape = rule.shape;
  double previous = norm_on(rule);
  // Two consecutive quiet doublings: a single one can be fooled when the new
  // nodes are a symmetry image of the old ones (|cos| on odd grids).
  int quiet = 0;
  double last_change = 0.0;
  for (;;) {
    const GridShape next = doubled(shape);
    if (node_count(s.manifold(), next) > options.max_nodes) {
      std::ostringstream msg;
      msg << "L_" << p.str() << " norm did not converge to relative tolerance " << options.tolerance
          << " within " << options.max_nodes << " nodes";
      throw AccuracyError(msg.str());
    }
    const double current = norm_on(product_grid(s.manifold(), next));
    const double change = std::abs(current - previous);
    if (change <= options.tolerance * std::max(current, 1e-300)) {
      if (++quiet == 2) return {p, current, NormMethod::oversampled_quadrature, std::max(change, last_change)};
    } else {
      quiet = 0;
    }
    last_change = change;
    previous = current;
    shape = next;
  }
}

// Discrete l_p norm (sum_xi lambda_xi |P(xi)|^p)^{1/p} of an MZ rule; it
// is comparable with, not an approximation of, the L_p norm.
inline NormReport lp_norm(const SpectralSpace& s, const CoefficientVector& a, Exponent p, const MZRule& rule) {
  require_match(s, a);
  if (!(rule.base.manifold == s.manifold())) throw std::invalid_argument("MZ rule lives on another manifold");
  const auto values = evaluate(s, a, rule.base.points);
  return {p, weighted_norm(values, rule.weights, p), NormMethod::mz_discrete, 0.0};
}

// ||P_a||_2 = |a| by orthonormality.
inline NormReport l2_norm_parseval(const CoefficientVector& a) {
  double sum = 0.0;
  for (double v : a.values) sum += v * v;
  return {Exponent(2.0), std::sqrt(sum), NormMethod::parseval, 0.0};
}

namespace detail {

// Moves x by t along tangent direction `axis` (torus: coordinate axis;
// sphere: frame vector of the tangent plane at `frame_origin`).
struct TangentFrame {
  std::array<double, 3> e1{};
  std::array<double, 3> e2{};

  static TangentFrame at(const Point& x) {
    TangentFrame f;
    // Any vector not parallel to x seeds the Gram-Schmidt step.
    std::array<double, 3> seed = std::abs(x[2]) < 0.9 ? std::array<double, 3>{0, 0, 1} : std::array<double, 3>{1, 0, 0};
    const double dot = seed[0] * x[0] + seed[1] * x[1] + seed[2] * x[2];
    for (std::size_t i = 0; i < 3; ++i) f.e1[i] = seed[i] - dot * x[i];
    const double n1 = std::sqrt(f.e1[0] * f.e1[0] + f.e1[1] * f.e1[1] + f.e1[2] * f.e1[2]);
    for (auto& v : f.e1) v /= n1;
    f.e2 = {x[1] * f.e1[2] - x[2] * f.e1[1], x[2] * f.e1[0] - x[0] * f.e1[2], x[0] * f.e1[1] - x[1] * f.e1[0]};
    return f;
  }
};

inline Point displace(const Manifold& m, const Point& x, const TangentFrame& frame, std::size_t axis, double t) {
  Point y = x;
  if (m.is_torus()) {
    y[axis] += t;
    return m.canonicalize(y);
  }
  const auto& e = axis == 0 ? frame.e1 : frame.e2;
  for (std::size_t i = 0; i < 3; ++i) y[i] += t * e[i];
  return m.canonicalize(y);
}

struct RefinedMax {
  double value = 0.0;
  Point point;
  double last_gain = 0.0;
};

// Coordinate-wise parabolic ascent of |P| from a grid candidate, shrinking
// the step by 4 each round.
inline RefinedMax refine_max(const SpectralSpace& s, std::span<const double> coeffs, const Point& start, double step,
                             int rounds, std::vector<double>& scratch) {
  const auto& m = s.manifold();
  scratch.resize(s.dimension());
  auto f = [&](const Point& x) {
    s.basis_at(x, scratch);
    double sum = 0.0;
    for (std::size_t k = 0; k < scratch.size(); ++k) sum += coeffs[k] * scratch[k];
    return std::abs(sum);
  };
  RefinedMax best{f(start), start, 0.0};
  const std::size_t axes = m.is_torus() ? static_cast<std::size_t>(m.dimension()) : 2;
  double h = step;
  for (int r = 0; r < rounds; ++r) {
    const double before = best.value;
    for (std::size_t axis = 0; axis < axes; ++axis) {
      const auto frame = m.is_sphere() ? TangentFrame::at(best.point) : TangentFrame{};
      const Point minus = displace(m, best.point, frame, axis, -h);
      const Point plus = displace(m, best.point, frame, axis, h);
      const double fm = f(minus);
      const double fp = f(plus);
      const double f0 = best.value;
      double cand_t = 0.0;
      const double curvature = fm - 2.0 * f0 + fp;
      if (curvature < 0.0) cand_t = std::clamp(0.5 * h * (fm - fp) / curvature, -h, h);
      if (fm > best.value) best = {fm, minus, 0.0};
      if (fp > best.value) best = {fp, plus, 0.0};
      if (cand_t != 0.0) {
        const Point p = displace(m, displace(m, minus, frame, axis, h), frame, axis, cand_t);
        const double fv = f(p);
        if (fv > best.value) best = {fv, p, 0.0};
      }
    }
    best.last_gain = best.value - before;
    h *= 0.25;
  }
  return best;
}

// Indices of the `count` largest |values| that are at least `spacing`
// apart, largest first.
inline std::vector<std::size_t> top_candidates(std::span<const double> values, const QuadratureRule& rule,
                                               const Manifold& m, std::size_t count, double spacing) {
  const std::size_t pool = std::min(values.size(), std::max<std::size_t>(64, 16 * count));
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  auto larger = [&](std::size_t a, std::size_t b) {
    const double fa = std::abs(values[a]);
    const double fb = std::abs(values[b]);
    return fa > fb || (fa == fb && a < b);
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(pool), order.end(), larger);
  std::vector<std::size_t> picked;
  for (std::size_t i = 0; i < pool && picked.size() < count; ++i) {
    bool far = true;
    for (std::size_t j : picked) {
      if (m.distance(rule.nodes[order[i]], rule.nodes[j]) < spacing) {
        far = false;
        break;
      }
    }
    if (far) picked.push_back(order[i]);
  }
  return picked;
}

inline double grid_step(const Manifold& m, const GridShape& g) {
  return m.is_torus() ? kTwoPi / static_cast<double>(g.per_axis) : kTwoPi / static_cast<double>(g.azimuthal);
}

}  // namespace detail

struct SupOptions {
  std::size_t candidates = 4;
  int refine_rounds = 6;
};

// Grid max with local refinement on an already-evaluated grid.
inline double refined_sup(const SpectralSpace& s, std::span<const double> coeffs, const GridTransform& grid,
                          std::span<const double> values, const SupOptions& options, std::vector<double>& scratch,
                          double* last_gain = nullptr) {
  const double h = detail::grid_step(s.manifold(), grid.shape());
  const auto picks = detail::top_candidates(values, grid.rule(), s.manifold(), options.candidates, 2.0 * h);
  double best = 0.0;
  double gain = 0.0;
  for (std::size_t idx : picks) {
    const auto r = detail::refine_max(s, coeffs, grid.rule().nodes[idx], h, options.refine_rounds, scratch);
    if (r.value > best) {
      best = r.value;
      gain = r.last_gain;
    }
  }
  if (last_gain != nullptr) *last_gain = gain;
  return best;
}

// ||P_a||_inf from a grid of rho nodes per wavelength refined around the
// top candidates; the declared accuracy is the rho vs 2*rho difference plus
// the last refinement gain.
inline NormReport sup_norm(const SpectralSpace& s, const CoefficientVector& a, double rho = 8.0,
                           const SupOptions& options = {}) {
  require_match(s, a);
  if (!(rho >= 2.0)) throw std::domain_error("sup_norm oversampling must be >= 2");
  std::vector<double> scratch;
  auto at = [&](double r, double& gain) {
    const GridTransform grid(s, oversampled_shape(s, r));
    const auto values = grid.forward(a.values);
    return refined_sup(s, a.values, grid, values, options, scratch, &gain);
  };
  double gain1 = 0.0;
  double gain2 = 0.0;
  const double coarse = at(rho, gain1);
  const double fine = at(2.0 * rho, gain2);
  return {Exponent::infinity(), std::max(coarse, fine), NormMethod::grid_max_refined,
          std::abs(coarse - fine) + std::max(gain1, gain2)};
}

struct EngineOptions {
  // Grid nodes per wavelength 2*pi/n on every axis.
  double oversampling = 16.0;
  SupOptions sup;
  // Polynomials used to measure the R vs 2R discrepancy of inexact norms.
  std::size_t calibration_trials = 4;
  // Largest relative discrepancy accepted before a run is aborted.
  double tolerance = 5e-3;
};

// Computes a fixed list of norms for many coefficient vectors on one
// shared grid. Even-integer exponents with an exact grid are exact, p = 2
// uses Parseval, other exponents carry a calibrated relative accuracy.
class NormEngine {
 public:
  struct Workspace {
    GridTransform::Workspace grid;
    std::vector<double> values;
    std::vector<double> scratch;
  };

  NormEngine(const SpectralSpace& s, std::vector<Exponent> exponents, const EngineOptions& options = {},
             std::uint64_t calibration_seed = 0)
      : space_(s), exponents_(std::move(exponents)), options_(options),
        grid_(std::make_shared<GridTransform>(s, oversampled_shape(s, options.oversampling))) {
    methods_.resize(exponents_.size());
    accuracy_.assign(exponents_.size(), 0.0);
    bool needs_calibration = false;
    for (std::size_t i = 0; i < exponents_.size(); ++i) {
      const auto p = exponents_[i];
      if (p == Exponent(2.0)) {
        methods_[i] = NormMethod::parseval;
      } else if (p.is_infinite()) {
        methods_[i] = NormMethod::grid_max_refined;
        needs_calibration = true;
      } else if (rule_exact_for(s, grid_->rule(), p)) {
        methods_[i] = NormMethod::exact_quadrature;
      } else {
        methods_[i] = NormMethod::oversampled_quadrature;
        needs_calibration = true;
      }
    }
    if (needs_calibration) calibrate(calibration_seed);
  }

  const SpectralSpace& space() const { return space_; }
  std::span<const Exponent> exponents() const { return exponents_; }
  std::span<const NormMethod> methods() const { return methods_; }
  // Relative accuracy per exponent.
  std::span<const double> declared_accuracy() const { return accuracy_; }
  const GridTransform& grid() const { return *grid_; }

  Workspace make_workspace() const { return {grid_->make_workspace(), std::vector<double>(grid_->size()), {}}; }

  void norms(std::span<const double> coeffs, std::span<double> out, Workspace& ws) const {
    compute(*grid_, coeffs, out, ws);
  }

 private:
  void compute(const GridTransform& grid, std::span<const double> coeffs, std::span<double> out, Workspace& ws) const {
    bool evaluated = false;
    auto ensure = [&] {
      if (!evaluated) {
        ws.values.resize(grid.size());
        grid.forward(coeffs, ws.values, ws.grid);
        evaluated = true;
      }
    };
    for (std::size_t i = 0; i < exponents_.size(); ++i) {
      const auto p = exponents_[i];
      if (methods_[i] == NormMethod::parseval) {
        double sum = 0.0;
        for (double v : coeffs) sum += v * v;
        out[i] = std::sqrt(sum);
      } else if (p.is_infinite()) {
        ensure();
        out[i] = refined_sup(space_, coeffs, grid, ws.values, options_.sup, ws.scratch);
      } else {
        ensure();
        out[i] = weighted_norm(ws.values, grid.rule().weights, p);
      }
    }
  }

  void calibrate(std::uint64_t seed) {
    const GridTransform fine(space_, doubled(grid_->shape()));
    auto ws_coarse = make_workspace();
    Workspace ws_fine{fine.make_workspace(), std::vector<double>(fine.size()), {}};
    std::vector<double> coeffs(space_.dimension());
    std::vector<double> coarse(exponents_.size());
    std::vector<double> refined(exponents_.size());
    // Calibration substreams sit far above any trial index.
    constexpr std::uint64_t kCalibrationStream = 0xC000000000000000ULL;
    for (std::size_t t = 0; t < options_.calibration_trials; ++t) {
      fill_gaussian(coeffs, 1.0, seed, kCalibrationStream + t);
      compute(*grid_, coeffs, coarse, ws_coarse);
      compute(fine, coeffs, refined, ws_fine);
      for (std::size_t i = 0; i < exponents_.size(); ++i) {
        if (methods_[i] == NormMethod::parseval || methods_[i] == NormMethod::exact_quadrature) continue;
        accuracy_[i] = std::max(accuracy_[i], std::abs(coarse[i] - refined[i]) / refined[i]);
      }
    }
    for (std::size_t i = 0; i < exponents_.size(); ++i) {
      if (accuracy_[i] > options_.tolerance) {
        std::ostringstream msg;
        msg << "norm p = " << exponents_[i].str() << " on " << space_.manifold().name() << " n = " << space_.degree()
            << " has relative discrepancy " << accuracy_[i] << " between grids, above tolerance "
            << options_.tolerance << "; raise the oversampling";
        throw AccuracyError(msg.str());
      }
    }
  }

  SpectralSpace space_;
  std::vector<Exponent> exponents_;
  EngineOptions options_;
  std::shared_ptr<const GridTransform> grid_;
  std::vector<NormMethod> methods_;
  std::vector<double> accuracy_;
};

}  // namespace nikolskii
