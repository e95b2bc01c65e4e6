#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "nikolskii/core.hpp"
#include "nikolskii/kernel.hpp"
#include "nikolskii/manifold.hpp"
#include "nikolskii/pointsets.hpp"
#include "nikolskii/randpoly.hpp"
#include "nikolskii/rng.hpp"
#include "nikolskii/spectrum.hpp"
#include "nikolskii/transform.hpp"

namespace nikolskii {

// Monte Carlo mean with its standard error.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::string manifold;
  int dimension = 0;
  double degree = 0.0;
  std::string quantity;  // "ratio", "moment", "inverse-sup-moment"
  std::optional<Exponent> p;
  std::optional<Exponent> q;
  std::optional<double> power;  // s for moments, r for inverse moments
  // Largest relative accuracy declared by the norm engine.
  double declared_accuracy = 0.0;
  std::string methods;
};

struct SampleStats {
  double mean = 0.0;
  double std_error = 0.0;
};

// Mean and sd/sqrt(T), summed in index order.
inline SampleStats sample_stats(std::span<const double> xs) {
  if (xs.size() < 2) throw std::invalid_argument("need at least two samples");
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return {mean, sd / std::sqrt(static_cast<double>(xs.size()))};
}

// Per-trial norms: values(t, i) = ||P_{a_t}||_{exponents[i]}.
struct NormSamples {
  std::vector<Exponent> exponents;
  Eigen::MatrixXd values;
  std::vector<double> declared_accuracy;
  std::vector<NormMethod> methods;

  std::size_t column(Exponent p) const {
    for (std::size_t i = 0; i < exponents.size(); ++i) {
      if (exponents[i] == p) return i;
    }
    throw std::invalid_argument("exponent " + p.str() + " was not sampled");
  }
  std::string method_flags() const {
    std::string out;
    for (std::size_t i = 0; i < exponents.size(); ++i) {
      if (!out.empty()) out += ";";
      out += exponents[i].str() + ":" + to_string(methods[i]);
    }
    return out;
  }
  double worst_accuracy() const {
    double m = 0.0;
    for (double a : declared_accuracy) m = std::max(m, a);
    return m;
  }
};

struct SamplingOptions {
  EngineOptions engine;
  unsigned workers = 0;  // 0: hardware concurrency
};

// Draws `trials` standard Gaussian coefficient vectors, trial t from
// substream (seed, t), and records the requested norms of each.
inline NormSamples sample_norms(const SpectralSpace& s, std::vector<Exponent> exponents, std::size_t trials,
                                std::uint64_t seed, const SamplingOptions& options = {}) {
  if (trials < 2) throw std::invalid_argument("trials must be at least 2");
  std::sort(exponents.begin(), exponents.end());
  exponents.erase(std::unique(exponents.begin(), exponents.end()), exponents.end());
  const NormEngine engine(s, exponents, options.engine, seed);
  NormSamples out;
  out.exponents = exponents;
  out.values.resize(static_cast<Eigen::Index>(trials), static_cast<Eigen::Index>(exponents.size()));
  out.declared_accuracy.assign(engine.declared_accuracy().begin(), engine.declared_accuracy().end());
  out.methods.assign(engine.methods().begin(), engine.methods().end());
  const unsigned hw = options.workers != 0 ? options.workers : std::max(1u, std::thread::hardware_concurrency());
  const std::size_t blocks = std::min<std::size_t>(hw, trials);
  // Row-major scratch so each worker writes disjoint rows.
  std::vector<double> flat(trials * exponents.size());
  parallel_for(
      blocks,
      [&](std::size_t b) {
        const std::size_t lo = b * trials / blocks;
        const std::size_t hi = (b + 1) * trials / blocks;
        auto ws = engine.make_workspace();
        std::vector<double> coeffs(s.dimension());
        for (std::size_t t = lo; t < hi; ++t) {
          fill_gaussian(coeffs, 1.0, seed, t);
          engine.norms(coeffs, std::span<double>(flat).subspan(t * exponents.size(), exponents.size()), ws);
        }
      },
      static_cast<unsigned>(blocks));
  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t i = 0; i < exponents.size(); ++i) {
      const double v = flat[t * exponents.size() + i];
      if (!(v > 1e-300) || !std::isfinite(v)) {
        std::ostringstream msg;
        msg << "trial " << t << " produced a degenerate norm " << v << " for p = " << exponents[i].str();
        throw AccuracyError(msg.str());
      }
      out.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return out;
}

namespace detail {

inline Estimate make_estimate(const SpectralSpace& s, std::span<const double> xs, std::uint64_t seed,
                              const NormSamples& samples, std::string quantity) {
  const auto st = sample_stats(xs);
  Estimate e;
  e.value = st.mean;
  e.std_error = st.std_error;
  e.trials = xs.size();
  e.seed = seed;
  e.manifold = s.manifold().name();
  e.dimension = s.manifold().dimension();
  e.degree = s.degree();
  e.quantity = std::move(quantity);
  e.declared_accuracy = samples.worst_accuracy();
  e.methods = samples.method_flags();
  return e;
}

}  // namespace detail

// Per-trial ratios ||P||_q / ||P||_p.
inline std::vector<double> ratios(const NormSamples& samples, Exponent p, Exponent q) {
  const auto ip = static_cast<Eigen::Index>(samples.column(p));
  const auto iq = static_cast<Eigen::Index>(samples.column(q));
  std::vector<double> r(static_cast<std::size_t>(samples.values.rows()));
  for (Eigen::Index t = 0; t < samples.values.rows(); ++t) {
    r[static_cast<std::size_t>(t)] = samples.values(t, iq) / samples.values(t, ip);
  }
  return r;
}

inline Estimate average_factor_from(const SpectralSpace& s, const NormSamples& samples, Exponent p, Exponent q,
                                    std::uint64_t seed) {
  const auto r = ratios(samples, p, q);
  auto e = detail::make_estimate(s, r, seed, samples, "ratio");
  e.p = p;
  e.q = q;
  return e;
}

// Monte Carlo estimate of E ||P_a||_q / ||P_a||_p with a ~ N(0, I_N).
inline Estimate estimate_average_factor(Exponent p, Exponent q, const SpectralSpace& s, std::size_t trials,
                                        std::uint64_t seed, const SamplingOptions& options = {}) {
  const auto samples = sample_norms(s, {p, q}, trials, seed, options);
  return average_factor_from(s, samples, p, q, seed);
}

// E ||P_a||_q^s.
inline Estimate estimate_moment(Exponent q, double s_power, const SpectralSpace& s, std::size_t trials,
                                std::uint64_t seed, const SamplingOptions& options = {}) {
  if (!(s_power >= 1.0)) throw PreconditionError("moment power s must be >= 1");
  const auto samples = sample_norms(s, {q}, trials, seed, options);
  std::vector<double> xs(trials);
  for (std::size_t t = 0; t < trials; ++t) xs[t] = std::pow(samples.values(static_cast<Eigen::Index>(t), 0), s_power);
  auto e = detail::make_estimate(s, xs, seed, samples, "moment");
  e.q = q;
  e.power = s_power;
  return e;
}

// E ||P_a||_inf^{-r}; finite only while r < N.
inline Estimate estimate_inverse_sup_moment(double r, const SpectralSpace& s, std::size_t trials, std::uint64_t seed,
                                            const SamplingOptions& options = {}) {
  if (!(r > 0.0)) throw PreconditionError("inverse moment order r must be positive");
  if (!(r < static_cast<double>(s.dimension()))) {
    throw PreconditionError("inverse moment order r = " + std::to_string(r) + " needs r < N = " +
                            std::to_string(s.dimension()));
  }
  const auto samples = sample_norms(s, {Exponent::infinity()}, trials, seed, options);
  std::vector<double> xs(trials);
  for (std::size_t t = 0; t < trials; ++t) xs[t] = std::pow(samples.values(static_cast<Eigen::Index>(t), 0), -r);
  auto e = detail::make_estimate(s, xs, seed, samples, "inverse-sup-moment");
  e.p = Exponent::infinity();
  e.power = r;
  return e;
}

// ---------------------------------------------------------------------------
// Worst-case factor

enum class WorstStatus : std::uint8_t { exact, lower_bound };

inline std::string to_string(WorstStatus s) { return s == WorstStatus::exact ? "exact" : "lower-bound"; }

struct WorstFactor {
  Exponent p;
  Exponent q;
  double degree = 0.0;
  double value = 1.0;
  WorstStatus status = WorstStatus::exact;
  CoefficientVector maximizer;
  std::size_t iterations = 0;
  std::string warning;
};

struct AscentOptions {
  std::size_t starts = 32;
  std::size_t max_iterations = 400;
  // Stop a start once the log-ratio gains less than this over an iteration.
  double tolerance = 1e-10;
  double oversampling = 8.0;
  std::uint64_t seed = 0x5eed;
};

namespace detail {

// log ||P_a||_q - log ||P_a||_p and its gradient on a fixed grid.
class LogRatio {
 public:
  LogRatio(const SpectralSpace& s, Exponent p, Exponent q, double rho)
      : space_(s), p_(p), q_(q), grid_(s, oversampled_shape(s, rho)), ws_(grid_.make_workspace()),
        values_(grid_.size()), weights_(grid_.size()), partial_(s.dimension()) {}

  double value(std::span<const double> a) {
    grid_.forward(a, values_, ws_);
    return std::log(norm(q_)) - std::log(norm(p_));
  }

  // Gradient at the a of the last value() call.
  void gradient(std::span<double> g) {
    std::fill(g.begin(), g.end(), 0.0);
    accumulate(q_, 1.0, g);
    accumulate(p_, -1.0, g);
  }

  const GridTransform& grid() const { return grid_; }

 private:
  double norm(Exponent e) const { return weighted_norm(values_, grid_.rule().weights, e); }

  // d log||P||_e / da = sum_i w_i |v_i|^{e-2} v_i phi(x_i) / ||P||_e^e; for
  // e = inf the subgradient at the grid argmax.
  void accumulate(Exponent e, double sign, std::span<double> g) {
    const auto& w = grid_.rule().weights;
    if (e.is_infinite()) {
      std::size_t arg = 0;
      for (std::size_t i = 1; i < values_.size(); ++i) {
        if (std::abs(values_[i]) > std::abs(values_[arg])) arg = i;
      }
      space_.basis_at(grid_.rule().nodes[arg], partial_);
      const double scale = sign / values_[arg];
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += scale * partial_[k];
      return;
    }
    const double pv = e.value();
    const double total = std::pow(norm(e), pv);
    for (std::size_t i = 0; i < values_.size(); ++i) {
      const double v = values_[i];
      const double mag = std::abs(v);
      weights_[i] = mag == 0.0 ? 0.0 : w[i] * std::pow(mag, pv - 2.0) * v;
    }
    grid_.adjoint(weights_, partial_, ws_);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += sign * partial_[k] / total;
  }

  const SpectralSpace& space_;
  Exponent p_;
  Exponent q_;
  GridTransform grid_;
  GridTransform::Workspace ws_;
  std::vector<double> values_;
  std::vector<double> weights_;
  std::vector<double> partial_;
};

inline void normalize(std::span<double> a) {
  double n2 = 0.0;
  for (double v : a) n2 += v * v;
  const double inv = 1.0 / std::sqrt(n2);
  for (double& v : a) v *= inv;
}

inline Point reference_point(const Manifold& m) {
  if (m.is_sphere()) return m.spherical(0.0, 0.0);
  std::vector<double> zeros(m.coordinate_count(), 0.0);
  return Point(std::span<const double>(zeros));
}

// Starting vectors: kernel localized at a point, its Fejer-tapered
// version, the constant, then Gaussian directions.
inline std::vector<std::vector<double>> ascent_starts(const SpectralSpace& s, const AscentOptions& opts) {
  std::vector<std::vector<double>> starts;
  const Point x0 = reference_point(s.manifold());
  const auto phi = s.basis_at(x0);
  starts.push_back(phi);
  auto taper = phi;
  const double top = std::max(s.degree(), 0.0) + 1.0;
  for (const auto& e : s.eigenpairs()) taper[e.index] *= std::max(0.0, 1.0 - e.frequency / top);
  starts.push_back(taper);
  std::vector<double> e0(s.dimension(), 0.0);
  e0[0] = 1.0;
  starts.push_back(e0);
  for (std::size_t k = starts.size(); k < opts.starts; ++k) {
    std::vector<double> a(s.dimension());
    fill_gaussian(a, 1.0, opts.seed, k);
    starts.push_back(std::move(a));
  }
  starts.resize(std::min(starts.size(), std::max<std::size_t>(opts.starts, 1)));
  for (auto& a : starts) normalize(a);
  return starts;
}

}  // namespace detail

// ||P_a||_q / ||P_a||_p evaluated accurately (exact or oversampled rules
// and refined sup norms).
inline double accurate_ratio(const SpectralSpace& s, const CoefficientVector& a, Exponent p, Exponent q) {
  auto norm = [&](Exponent e) {
    if (e.is_infinite()) return sup_norm(s, a, 16.0).value;
    if (e == Exponent(2.0)) return l2_norm_parseval(a).value;
    const auto rule = product_grid(s.manifold(), oversampled_shape(s, 8.0));
    return lp_norm(s, a, e, rule, {.oversample = true, .tolerance = 1e-8}).value;
  };
  return norm(q) / norm(p);
}

// sup_{P != 0} ||P||_q / ||P||_p. Exact for q <= p (value 1, witness the
// constant) and for (2, inf) (kernel diagonal); otherwise the best ratio
// found by multi-start projected gradient ascent, flagged lower-bound.
inline WorstFactor worst_factor(Exponent p, Exponent q, const SpectralSpace& s, const AscentOptions& opts = {}) {
  WorstFactor out;
  out.p = p;
  out.q = q;
  out.degree = s.degree();
  if (q <= p) {
    std::vector<double> e0(s.dimension(), 0.0);
    e0[0] = 1.0;
    out.maximizer = make_coefficients(s, std::move(e0));
    out.value = 1.0;
    return out;
  }
  if (p == Exponent(2.0) && q.is_infinite()) {
    // The diagonal e(x,x,n) is constant on both models.
    auto phi = s.basis_at(detail::reference_point(s.manifold()));
    double diag = 0.0;
    for (double v : phi) diag += v * v;
    detail::normalize(phi);
    out.maximizer = make_coefficients(s, std::move(phi));
    out.value = std::sqrt(diag);
    return out;
  }
  out.status = WorstStatus::lower_bound;
  detail::LogRatio objective(s, p, q, opts.oversampling);
  std::vector<double> best;
  double best_f = -std::numeric_limits<double>::infinity();
  std::vector<double> g(s.dimension());
  std::vector<double> trial(s.dimension());
  bool all_converged = true;
  for (auto& a : detail::ascent_starts(s, opts)) {
    double f = objective.value(a);
    double step = 1.0;
    bool converged = false;
    for (std::size_t it = 0; it < opts.max_iterations; ++it) {
      ++out.iterations;
      objective.gradient(g);
      // Scale invariance makes g orthogonal to a up to rounding; project anyway.
      double ga = 0.0;
      for (std::size_t k = 0; k < g.size(); ++k) ga += g[k] * a[k];
      double g2 = 0.0;
      for (std::size_t k = 0; k < g.size(); ++k) {
        g[k] -= ga * a[k];
        g2 += g[k] * g[k];
      }
      if (g2 < 1e-28) {
        converged = true;
        break;
      }
      step = std::min(step * 2.0, 1e3);
      double f_new = f;
      for (int bt = 0; bt < 60; ++bt) {
        for (std::size_t k = 0; k < a.size(); ++k) trial[k] = a[k] + step * g[k];
        detail::normalize(trial);
        f_new = objective.value(trial);
        if (f_new >= f + 1e-4 * step * g2) break;
        step *= 0.5;
      }
      if (!(f_new > f)) {
        converged = true;
        break;
      }
      a.swap(trial);
      const double gain = f_new - f;
      f = f_new;
      if (gain < opts.tolerance) {
        converged = true;
        break;
      }
    }
    all_converged = all_converged && converged;
    // Re-evaluate the end point so best_f matches the stored vector.
    f = objective.value(a);
    if (f > best_f) {
      best_f = f;
      best = a;
    }
  }
  if (!all_converged) out.warning = "ascent hit the iteration limit on some starts; best point returned";
  out.maximizer = make_coefficients(s, std::move(best));
  out.value = accurate_ratio(s, out.maximizer, p, q);
  return out;
}

// ---------------------------------------------------------------------------
// Normalized point evaluations and small-ball probabilities

struct SmallBallOptions {
  std::vector<double> t_grid{0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45};
  // Slack on the small-ball bound.
  double bound_slack = 1.05;
  // Neighbour pairs checked against the covariance formula.
  std::size_t pair_checks = 32;
  // Family-wise z threshold level for the per-point variance checks.
  double family_alpha = 0.0027;
  unsigned workers = 0;
};

struct PairCheck {
  std::size_t i = 0;
  std::size_t j = 0;
  double expected = 0.0;
  double empirical = 0.0;
  double std_error = 0.0;
  bool pass = true;
};

struct SmallBallReport {
  std::size_t points = 0;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  double degree = 0.0;
  std::string manifold;
  // (i) unit variances
  std::vector<double> variance;
  std::vector<double> variance_stderr;
  double variance_z_threshold = 3.0;
  bool variances_pass = true;
  // covariance formula on neighbour pairs
  std::vector<PairCheck> pairs;
  bool pairs_pass = true;
  // (ii) expected maximum
  double mean_max = 0.0;
  double mean_max_stderr = 0.0;
  double max_over_sqrt_log_m = 0.0;
  // (iii) median and the implied constant m_X / sqrt(ln n)
  double median = 0.0;
  double c0 = 0.0;
  // (iv) small-ball probabilities
  std::vector<double> t;
  std::vector<double> probability;
  std::vector<double> bound;
  std::vector<double> specialized_bound;
  std::vector<bool> pass;

  bool all_pass() const {
    return variances_pass && pairs_pass && std::all_of(pass.begin(), pass.end(), [](bool b) { return b; });
  }
};

namespace detail {

// Two-sided normal quantile via bisection on erfc.
inline double normal_upper_quantile(double tail) {
  double lo = 0.0;
  double hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (std::erfc(mid / std::sqrt(2.0)) > tail) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Simulates X_j = P_a(xi_j) / sqrt(e(xi_j, xi_j, n)) over the points of
// `set` and compares small-ball probabilities of max_j |X_j| with
// (1/2) exp(-m_X^2 ln(1/(2t)) / 4) using the empirical median m_X.
inline SmallBallReport normalized_point_process(const SpectralSpace& s, const SeparatedSet& set, std::size_t trials,
                                                std::uint64_t seed, const SmallBallOptions& opts = {}) {
  if (!(set.manifold == s.manifold())) throw std::invalid_argument("point set lives on another manifold");
  if (set.size() < 2) throw std::invalid_argument("point process needs at least two points");
  if (trials < 2) throw std::invalid_argument("trials must be at least 2");
  const std::size_t M = set.size();
  Eigen::MatrixXd B = evaluate_basis(s, set.points);  // M x N
  Eigen::VectorXd diag = B.rowwise().squaredNorm();
  for (Eigen::Index j = 0; j < B.rows(); ++j) B.row(j) /= std::sqrt(diag(j));

  // Neighbour pairs: each of the first points with its nearest other point.
  std::vector<std::pair<std::size_t, std::size_t>> pair_idx;
  {
    const NeighborIndex index(s.manifold(), set.points, std::max(set.separation, 1e-6));
    const std::size_t stride = std::max<std::size_t>(1, M / std::max<std::size_t>(opts.pair_checks, 1));
    for (std::size_t i = 0; i < M && pair_idx.size() < opts.pair_checks; i += stride) {
      std::size_t best = i == 0 ? 1 : 0;
      double bd = s.manifold().distance(set.points[i], set.points[best]);
      index.for_each_candidate(set.points[i], 3.0 * std::max(set.covering_radius_bound, set.separation),
                               [&](std::size_t j) {
                                 const double d = s.manifold().distance(set.points[i], set.points[j]);
                                 if (j != i && d < bd) {
                                   bd = d;
                                   best = j;
                                 }
                               });
      pair_idx.emplace_back(i, best);
    }
  }

  const unsigned hw = opts.workers != 0 ? opts.workers : std::max(1u, std::thread::hardware_concurrency());
  const std::size_t blocks = std::min<std::size_t>(hw, trials);
  struct Partial {
    Eigen::VectorXd sum_sq;
    Eigen::VectorXd sum_4;
    std::vector<double> pair_sum;
    std::vector<double> pair_sum_sq;
  };
  std::vector<Partial> partials(blocks);
  std::vector<double> maxima(trials);
  parallel_for(
      blocks,
      [&](std::size_t b) {
        const std::size_t lo = b * trials / blocks;
        const std::size_t hi = (b + 1) * trials / blocks;
        auto& part = partials[b];
        part.sum_sq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(M));
        part.sum_4 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(M));
        part.pair_sum.assign(pair_idx.size(), 0.0);
        part.pair_sum_sq.assign(pair_idx.size(), 0.0);
        Eigen::VectorXd a(static_cast<Eigen::Index>(s.dimension()));
        Eigen::VectorXd x(static_cast<Eigen::Index>(M));
        for (std::size_t t = lo; t < hi; ++t) {
          fill_gaussian(std::span<double>(a.data(), static_cast<std::size_t>(a.size())), 1.0, seed, t);
          x.noalias() = B * a;
          const Eigen::ArrayXd sq = x.array().square();
          part.sum_sq += sq.matrix();
          part.sum_4 += sq.square().matrix();
          maxima[t] = x.cwiseAbs().maxCoeff();
          for (std::size_t k = 0; k < pair_idx.size(); ++k) {
            const double diff = x(static_cast<Eigen::Index>(pair_idx[k].first)) -
                                x(static_cast<Eigen::Index>(pair_idx[k].second));
            part.pair_sum[k] += diff * diff;
            part.pair_sum_sq[k] += diff * diff * diff * diff;
          }
        }
      },
      static_cast<unsigned>(blocks));

  SmallBallReport rep;
  rep.points = M;
  rep.trials = trials;
  rep.seed = seed;
  rep.degree = s.degree();
  rep.manifold = s.manifold().name();
  const double T = static_cast<double>(trials);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(M));
  Eigen::VectorXd sum_4 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(M));
  std::vector<double> pair_sum(pair_idx.size(), 0.0);
  std::vector<double> pair_sum_sq(pair_idx.size(), 0.0);
  for (const auto& part : partials) {
    sum_sq += part.sum_sq;
    sum_4 += part.sum_4;
    for (std::size_t k = 0; k < pair_idx.size(); ++k) {
      pair_sum[k] += part.pair_sum[k];
      pair_sum_sq[k] += part.pair_sum_sq[k];
    }
  }
  // Bonferroni-adjusted threshold so the family of M checks keeps its level.
  rep.variance_z_threshold = std::max(3.0, detail::normal_upper_quantile(opts.family_alpha / static_cast<double>(M)));
  rep.variance.resize(M);
  rep.variance_stderr.resize(M);
  for (std::size_t j = 0; j < M; ++j) {
    const double m2 = sum_sq(static_cast<Eigen::Index>(j)) / T;
    const double m4 = sum_4(static_cast<Eigen::Index>(j)) / T;
    rep.variance[j] = m2;
    rep.variance_stderr[j] = std::sqrt(std::max(m4 - m2 * m2, 0.0) / T);
    if (std::abs(m2 - 1.0) > rep.variance_z_threshold * rep.variance_stderr[j]) rep.variances_pass = false;
  }
  const double pair_threshold =
      std::max(3.0, detail::normal_upper_quantile(opts.family_alpha / std::max<double>(1.0, pair_idx.size())));
  for (std::size_t k = 0; k < pair_idx.size(); ++k) {
    PairCheck pc;
    pc.i = pair_idx[k].first;
    pc.j = pair_idx[k].second;
    const double cov = B.row(static_cast<Eigen::Index>(pc.i)).dot(B.row(static_cast<Eigen::Index>(pc.j)));
    pc.expected = 2.0 - 2.0 * cov;
    pc.empirical = pair_sum[k] / T;
    pc.std_error = std::sqrt(std::max(pair_sum_sq[k] / T - pc.empirical * pc.empirical, 0.0) / T);
    pc.pass = std::abs(pc.empirical - pc.expected) <= pair_threshold * pc.std_error + 1e-12;
    rep.pairs_pass = rep.pairs_pass && pc.pass;
    rep.pairs.push_back(pc);
  }
  const auto st = sample_stats(maxima);
  rep.mean_max = st.mean;
  rep.mean_max_stderr = st.std_error;
  rep.max_over_sqrt_log_m = st.mean / std::sqrt(std::log(static_cast<double>(M)));
  std::vector<double> sorted = maxima;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = trials / 2;
  rep.median = trials % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  const double log_n = s.degree() > 1.0 ? std::log(s.degree()) : 0.0;
  rep.c0 = log_n > 0.0 ? rep.median / std::sqrt(log_n) : 0.0;
  for (double t : opts.t_grid) {
    if (!(t > 0.0 && t < 0.5)) throw std::invalid_argument("small-ball levels must lie in (0, 1/2)");
    const double level = t * rep.median;
    const auto count = static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), level) - sorted.begin());
    const double prob = count / T;
    const double bound = 0.5 * std::exp(-0.25 * rep.median * rep.median * std::log(1.0 / (2.0 * t)));
    rep.t.push_back(t);
    rep.probability.push_back(prob);
    rep.bound.push_back(bound);
    rep.specialized_bound.push_back(log_n > 0.0 ? 0.5 * std::pow(2.0 * t, 0.25 * rep.c0 * rep.c0 * log_n) : bound);
    rep.pass.push_back(prob <= opts.bound_slack * bound);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Empirical inequality checks

struct DualityReport {
  double mean_ratio = 0.0;
  double mean_inverse = 0.0;
  double product = 0.0;
  bool pass = true;
};

// mean(r) * mean(1/r) >= 1 on a common sample (Cauchy-Schwarz).
inline DualityReport duality_from(std::span<const double> r) {
  if (r.size() < 2) throw std::invalid_argument("trials must be at least 2");
  double s = 0.0;
  double si = 0.0;
  for (double v : r) {
    s += v;
    si += 1.0 / v;
  }
  DualityReport rep;
  rep.mean_ratio = s / static_cast<double>(r.size());
  rep.mean_inverse = si / static_cast<double>(r.size());
  rep.product = rep.mean_ratio * rep.mean_inverse;
  rep.pass = rep.product >= 1.0 - 1e-12;
  return rep;
}

inline DualityReport duality_check(Exponent p, Exponent q, const SpectralSpace& s, std::size_t trials,
                                   std::uint64_t seed, const SamplingOptions& options = {}) {
  const auto samples = sample_norms(s, {p, q}, trials, seed, options);
  return duality_from(ratios(samples, p, q));
}

enum class DecouplingForm : std::uint8_t {
  // E ||P||_q^k / ||P||_2^l  vs  n^{-dl/2} E ||P||_q^k, needs l < k + N
  numerator,
  // E ||P||_2^k / ||P||_q^l  vs  n^{dk/2} E ||P||_q^{-l}, needs l < N
  denominator,
};

struct DecouplingReport {
  DecouplingForm form = DecouplingForm::numerator;
  double k = 0.0;
  double l = 0.0;
  Exponent q;
  double lhs = 0.0;
  double lhs_stderr = 0.0;
  double rhs = 0.0;
  double rhs_stderr = 0.0;
  double ratio = 0.0;
};

// Both sides of the ratio-decoupling estimate from one sample set.
inline DecouplingReport ratio_decoupling_check(DecouplingForm form, double k, double l, Exponent q,
                                               const SpectralSpace& s, std::size_t trials, std::uint64_t seed,
                                               const SamplingOptions& options = {}) {
  if (!(k > 0.0) || !(l > 0.0)) throw PreconditionError("decoupling powers k and l must be positive");
  if (!(s.degree() >= 1.0)) throw PreconditionError("decoupling check needs n >= 1");
  const double N = static_cast<double>(s.dimension());
  if (form == DecouplingForm::numerator && !(l < k + N)) {
    throw PreconditionError("decoupling with ||P||_2^l in the denominator needs l < k + N");
  }
  if (form == DecouplingForm::denominator && !(l < N)) {
    throw PreconditionError("decoupling with ||P||_q^l in the denominator needs l < N");
  }
  const auto samples = sample_norms(s, {Exponent(2.0), q}, trials, seed, options);
  const auto i2 = static_cast<Eigen::Index>(samples.column(Exponent(2.0)));
  const auto iq = static_cast<Eigen::Index>(samples.column(q));
  const double d = s.manifold().dimension();
  std::vector<double> left(trials);
  std::vector<double> right(trials);
  double scale = 1.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const double n2 = samples.values(static_cast<Eigen::Index>(t), i2);
    const double nq = samples.values(static_cast<Eigen::Index>(t), iq);
    if (form == DecouplingForm::numerator) {
      left[t] = std::pow(nq, k) / std::pow(n2, l);
      right[t] = std::pow(nq, k);
    } else {
      left[t] = std::pow(n2, k) / std::pow(nq, l);
      right[t] = std::pow(nq, -l);
    }
  }
  scale = form == DecouplingForm::numerator ? std::pow(s.degree(), -d * l / 2.0) : std::pow(s.degree(), d * k / 2.0);
  const auto ls = sample_stats(left);
  const auto rs = sample_stats(right);
  DecouplingReport rep;
  rep.form = form;
  rep.k = k;
  rep.l = l;
  rep.q = q;
  rep.lhs = ls.mean;
  rep.lhs_stderr = ls.std_error;
  rep.rhs = scale * rs.mean;
  rep.rhs_stderr = scale * rs.std_error;
  rep.ratio = rep.lhs / rep.rhs;
  return rep;
}

}  // namespace nikolskii
