#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nikolskii/manifold.hpp"
#include "nikolskii/rng.hpp"
#include "nikolskii/spectrum.hpp"

namespace nikolskii {

// Absolute slack used when comparing distances against separation and
// covering thresholds.
inline constexpr double kDistanceTolerance = 1e-12;

// Bucket grid over a fixed point cloud for radius queries. Torus buckets
// are angle cells with wrap-around; sphere buckets are cubes in R^3.
class NeighborIndex {
 public:
  NeighborIndex(const Manifold& m, std::span<const Point> points, double cell_size) : manifold_(m), points_(points) {
    if (!(cell_size > 0.0)) throw std::invalid_argument("cell size must be positive");
    if (m.is_torus()) {
      axes_ = static_cast<std::size_t>(m.dimension());
      per_axis_ = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(kTwoPi / cell_size)), 1, 4096);
      width_ = kTwoPi / static_cast<double>(per_axis_);
    } else {
      axes_ = 3;
      // Chord length never exceeds geodesic length.
      width_ = std::max(cell_size, 1e-6);
      per_axis_ = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(2.0 / width_)) + 1, 1, 1024);
      width_ = 2.0 / static_cast<double>(per_axis_ - 1 == 0 ? 1 : per_axis_ - 1);
    }
    std::size_t cells = 1;
    for (std::size_t a = 0; a < axes_; ++a) cells *= per_axis_;
    start_.assign(cells + 1, 0);
    std::vector<std::size_t> cell_of(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      cell_of[i] = flat(cell_coords(points[i]));
      ++start_[cell_of[i] + 1];
    }
    for (std::size_t c = 0; c < cells; ++c) start_[c + 1] += start_[c];
    members_.resize(points.size());
    auto fill = start_;
    for (std::size_t i = 0; i < points.size(); ++i) members_[fill[cell_of[i]]++] = i;
  }

  // Calls visit(i) for every point that may lie within radius of x (a
  // superset; callers test the distance). Each index is visited once.
  template <class Visit>
  void for_each_candidate(const Point& x, double radius, Visit&& visit) const {
    const auto center = cell_coords(x);
    double reach = radius;
    if (manifold_.is_sphere()) reach = 2.0 * std::sin(std::min(radius, kPi) / 2.0);
    const auto span = static_cast<long>(std::ceil(reach / width_)) + 1;
    std::array<long, 3> lo{};
    std::array<long, 3> hi{};
    for (std::size_t a = 0; a < axes_; ++a) {
      const long c = static_cast<long>(center[a]);
      if (manifold_.is_torus() && 2 * span + 1 >= static_cast<long>(per_axis_)) {
        lo[a] = 0;
        hi[a] = static_cast<long>(per_axis_) - 1;
      } else if (manifold_.is_torus()) {
        lo[a] = c - span;
        hi[a] = c + span;
      } else {
        lo[a] = std::max<long>(0, c - span);
        hi[a] = std::min<long>(static_cast<long>(per_axis_) - 1, c + span);
      }
    }
    const auto wrap = [this](long v) {
      const long k = static_cast<long>(per_axis_);
      return static_cast<std::size_t>(((v % k) + k) % k);
    };
    std::array<std::size_t, 3> cell{};
    auto visit_cell = [&] {
      const std::size_t f = flat(cell);
      for (std::size_t j = start_[f]; j < start_[f + 1]; ++j) visit(members_[j]);
    };
    for (long a = lo[0]; a <= hi[0]; ++a) {
      cell[0] = manifold_.is_torus() ? wrap(a) : static_cast<std::size_t>(a);
      if (axes_ == 1) {
        visit_cell();
        continue;
      }
      for (long b = lo[1]; b <= hi[1]; ++b) {
        cell[1] = manifold_.is_torus() ? wrap(b) : static_cast<std::size_t>(b);
        if (axes_ == 2) {
          visit_cell();
          continue;
        }
        for (long c = lo[2]; c <= hi[2]; ++c) {
          cell[2] = manifold_.is_torus() ? wrap(c) : static_cast<std::size_t>(c);
          visit_cell();
        }
      }
    }
  }

  // Nearest indexed point within radius; ties go to the lowest index.
  std::optional<std::pair<std::size_t, double>> nearest(const Point& x, double radius) const {
    std::optional<std::pair<std::size_t, double>> best;
    for_each_candidate(x, radius, [&](std::size_t i) {
      const double d = manifold_.distance(x, points_[i]);
      if (d > radius) return;
      if (!best || d < best->second || (d == best->second && i < best->first)) best = {i, d};
    });
    return best;
  }

  // Nearest indexed point, widening the search until one is found.
  std::pair<std::size_t, double> nearest(const Point& x) const {
    double radius = std::max(width_, 1e-3);
    for (;;) {
      if (auto hit = nearest(x, radius)) return *hit;
      if (radius > manifold_.diameter()) throw std::logic_error("nearest: empty index");
      radius *= 2.0;
    }
  }

 private:
  std::array<std::size_t, 3> cell_coords(const Point& p) const {
    std::array<std::size_t, 3> c{};
    if (manifold_.is_torus()) {
      for (std::size_t a = 0; a < axes_; ++a) {
        c[a] = std::min(per_axis_ - 1, static_cast<std::size_t>(Manifold::wrap_angle(p[a]) / width_));
      }
    } else {
      for (std::size_t a = 0; a < 3; ++a) {
        const double u = (std::clamp(p[a], -1.0, 1.0) + 1.0) / width_;
        c[a] = std::min(per_axis_ - 1, static_cast<std::size_t>(std::floor(u + 0.5)));
      }
    }
    return c;
  }

  std::size_t flat(const std::array<std::size_t, 3>& c) const {
    std::size_t f = 0;
    for (std::size_t a = 0; a < axes_; ++a) f = f * per_axis_ + c[a];
    return f;
  }

  Manifold manifold_;
  std::span<const Point> points_;
  std::size_t axes_ = 1;
  std::size_t per_axis_ = 1;
  double width_ = 1.0;
  std::vector<std::size_t> start_;
  std::vector<std::size_t> members_;
};

// An epsilon-separated point set with its audited covering radius.
struct SeparatedSet {
  Manifold manifold = Manifold::torus(1);
  std::vector<Point> points;
  double separation = 0.0;
  // Largest distance from an audit-grid node to the set.
  double covering_radius = 0.0;
  // Guaranteed covering radius: epsilon plus the candidate grid's own
  // covering radius for greedy sets; delta/n plus the base bound (at most
  // 2*delta/n once delta/n exceeds it) for thinned sets.
  double covering_radius_bound = 0.0;
  std::size_t audit_resolution = 0;

  std::size_t size() const { return points.size(); }
};

struct SeparatedSetOptions {
  // Candidate grid nodes per separation length, per axis. Equal to the
  // audit density so every audit node is a candidate and the audited
  // covering radius is below epsilon.
  double candidate_density = 8.0;
  // Audit grid nodes per separation length, per axis.
  double audit_density = 8.0;
};

namespace detail {

inline std::size_t even_count(double x) {
  auto k = static_cast<std::size_t>(std::ceil(x));
  if (k < 2) k = 2;
  return k % 2 == 0 ? k : k + 1;
}

// Grid resolution giving `density` nodes per length `spacing` along each
// axis (torus) or along meridians (sphere).
inline std::size_t resolution_for(const Manifold& m, double spacing, double density) {
  const double span = m.is_torus() ? kTwoPi : kPi;
  return even_count(density * span / spacing);
}

}  // namespace detail

// Largest distance from any node of a uniform grid to the set.
inline double audit_covering_radius(const Manifold& m, std::span<const Point> points, std::size_t resolution,
                                    double cell_size) {
  if (points.empty()) throw std::invalid_argument("covering audit needs a nonempty set");
  const auto grid = uniform_grid(m, resolution);
  const NeighborIndex index(m, points, cell_size);
  double worst = 0.0;
  for (const auto& node : grid.nodes) worst = std::max(worst, index.nearest(node).second);
  return worst;
}

// Smallest pairwise distance (infinity for fewer than two points).
inline double min_pairwise_distance(const Manifold& m, std::span<const Point> points, double probe_radius) {
  if (points.size() < 2) return std::numeric_limits<double>::infinity();
  const NeighborIndex index(m, points, probe_radius);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    index.for_each_candidate(points[i], probe_radius, [&](std::size_t j) {
      if (j != i) best = std::min(best, m.distance(points[i], points[j]));
    });
  }
  if (std::isinf(best)) {
    for (std::size_t i = 0; i < points.size(); ++i)
      for (std::size_t j = i + 1; j < points.size(); ++j) best = std::min(best, m.distance(points[i], points[j]));
  }
  return best;
}

// Maximal epsilon-separated set by farthest-point insertion over a
// seed-shuffled candidate grid: the next point is always the candidate
// farthest from the current set, and insertion stops once no candidate is
// at distance >= epsilon.
inline SeparatedSet greedy_maximal_separated(const Manifold& m, double epsilon, std::uint64_t seed,
                                             const SeparatedSetOptions& options = {}) {
  if (!(epsilon > 0.0) || epsilon > m.diameter() * (1.0 + 1e-15)) {
    throw std::domain_error("separation must lie in (0, diam]");
  }
  const auto candidate_resolution = detail::resolution_for(m, epsilon, options.candidate_density);
  auto candidates = uniform_grid(m, candidate_resolution).nodes;
  CounterRng rng(seed, 0);
  for (std::size_t i = candidates.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(candidates[i - 1], candidates[j]);
  }
  const NeighborIndex index(m, candidates, epsilon);
  constexpr double kUnset = std::numeric_limits<double>::infinity();
  std::vector<double> gap(candidates.size(), kUnset);
  std::vector<bool> taken(candidates.size(), false);
  using Entry = std::pair<double, std::size_t>;
  // Max-heap on distance; among equal distances the earlier shuffled
  // candidate wins.
  auto worse = [](const Entry& a, const Entry& b) {
    return a.first < b.first || (a.first == b.first && a.second > b.second);
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> heap(worse);
  heap.push({kUnset, 0});

  SeparatedSet out;
  out.manifold = m;
  out.separation = epsilon;
  while (!heap.empty()) {
    const auto [value, pick] = heap.top();
    heap.pop();
    if (taken[pick] || value != gap[pick]) continue;
    if (!out.points.empty() && value < epsilon - kDistanceTolerance) break;
    taken[pick] = true;
    out.points.push_back(candidates[pick]);
    // Only candidates closer to the new point than the current maximum gap
    // can change.
    const double reach = std::isinf(value) ? m.diameter() * 2.0 : value;
    index.for_each_candidate(candidates[pick], reach, [&](std::size_t c) {
      if (taken[c]) return;
      const double d = m.distance(candidates[pick], candidates[c]);
      if (d < gap[c]) {
        gap[c] = d;
        heap.push({d, c});
      }
    });
  }
  out.audit_resolution = detail::resolution_for(m, epsilon, options.audit_density);
  out.covering_radius = audit_covering_radius(m, out.points, out.audit_resolution, epsilon);
  out.covering_radius_bound = epsilon + grid_covering_radius(m, candidate_resolution);
  return out;
}

// Greedy thinning in the set's own order: keep a point, drop everything
// closer than delta_over_n, move to the next survivor.
inline SeparatedSet thin_subset(const SeparatedSet& base, double delta_over_n) {
  if (delta_over_n < base.separation - kDistanceTolerance) {
    throw std::invalid_argument("thinning radius must be at least the base separation");
  }
  const auto& m = base.manifold;
  const NeighborIndex index(m, base.points, delta_over_n);
  std::vector<bool> removed(base.size(), false);
  SeparatedSet out;
  out.manifold = m;
  out.separation = delta_over_n;
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (removed[i]) continue;
    out.points.push_back(base.points[i]);
    index.for_each_candidate(base.points[i], delta_over_n, [&](std::size_t j) {
      if (j != i && m.distance(base.points[i], base.points[j]) < delta_over_n - kDistanceTolerance) removed[j] = true;
    });
  }
  out.audit_resolution = base.audit_resolution != 0 ? base.audit_resolution
                                                    : detail::resolution_for(m, delta_over_n, 8.0);
  out.covering_radius = audit_covering_radius(m, out.points, out.audit_resolution, delta_over_n);
  // Every base point lies within delta_over_n of a survivor.
  out.covering_radius_bound = delta_over_n + base.covering_radius_bound;
  return out;
}

// Builds a separated set from explicit points (e.g. an equispaced circle
// grid); separation is the audited minimum distance.
inline SeparatedSet make_separated_set(const Manifold& m, std::vector<Point> points, std::size_t audit_resolution) {
  if (points.empty()) throw std::invalid_argument("point set must be nonempty");
  for (auto& p : points) p = m.canonicalize(p);
  SeparatedSet out;
  out.manifold = m;
  out.separation = min_pairwise_distance(m, points, m.diameter() / 8.0);
  if (std::isinf(out.separation)) out.separation = m.diameter();
  out.points = std::move(points);
  out.audit_resolution = audit_resolution;
  out.covering_radius = audit_covering_radius(m, out.points, audit_resolution, out.separation);
  out.covering_radius_bound = out.covering_radius + grid_covering_radius(m, audit_resolution);
  return out;
}

// Positive weights on a separated set making discrete l_p sums comparable
// with L_p norms on P_n.
struct MZRule {
  SeparatedSet base;
  std::vector<double> weights;
  double degree = 0.0;
  double delta0 = 0.5;
  std::size_t fine_resolution = 0;
};

inline constexpr double kDefaultDelta0 = 0.5;

// Each node of a fine uniform grid gives its weight to the nearest point
// of the set (lowest index on ties).
inline MZRule mz_weights(const SeparatedSet& set, const SpectralSpace& s, double delta0 = kDefaultDelta0,
                         std::size_t fine_resolution = 0) {
  if (!(set.manifold == s.manifold())) throw std::invalid_argument("point set and space live on different manifolds");
  if (set.size() == 0) throw std::invalid_argument("point set must be nonempty");
  const double n = std::max(s.degree(), 1.0);
  const double required = delta0 / n;
  if (set.separation > required + kDistanceTolerance) {
    std::ostringstream msg;
    msg << "point set separation " << set.separation << " is too coarse for degree " << s.degree()
        << ": need separation <= delta0/n = " << required << " (delta0 = " << delta0 << ")";
    throw PreconditionError(msg.str());
  }
  MZRule rule;
  rule.base = set;
  rule.degree = s.degree();
  rule.delta0 = delta0;
  rule.fine_resolution = fine_resolution != 0 ? fine_resolution : std::max<std::size_t>(set.audit_resolution, 2);
  const auto grid = uniform_grid(set.manifold, rule.fine_resolution);
  rule.weights.assign(set.size(), 0.0);
  const NeighborIndex index(set.manifold, set.points, std::max(set.separation, 1e-6));
  const double search = std::max(set.covering_radius, set.separation) * (1.0 + 1e-9) + kDistanceTolerance;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto hit = index.nearest(grid.nodes[i], search);
    const std::size_t owner = hit ? hit->first : index.nearest(grid.nodes[i]).first;
    rule.weights[owner] += grid.weights[i];
  }
  return rule;
}

// CSV: one row per point, coordinates then weight.
inline void write_points_csv(std::ostream& out, const SeparatedSet& set, std::span<const double> weights = {}) {
  if (!weights.empty() && weights.size() != set.size()) throw std::invalid_argument("one weight per point");
  if (set.manifold.is_torus()) {
    for (int i = 0; i < set.manifold.dimension(); ++i) out << "theta" << (i + 1) << ',';
  } else {
    out << "x,y,z,";
  }
  out << "weight\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (double c : set.points[i].coords()) out << c << ',';
    out << (weights.empty() ? 1.0 / static_cast<double>(set.size()) : weights[i]) << '\n';
  }
}

}  // namespace nikolskii
