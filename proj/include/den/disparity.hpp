#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "den/common.hpp"
#include "den/dataset.hpp"
#include "den/distance.hpp"

namespace den {

enum class SizeKind { Radius, Knn };
enum class DisparityMetric { Rawlsian, StdDev };

constexpr double kDefaultEpsilon = 1e-9;
constexpr std::size_t kDefaultGridCount = 32;

struct NeighborhoodSpec {
  SizeKind kind = SizeKind::Knn;
  double radius = 0.0;
  std::size_t k = 0;

  static NeighborhoodSpec knn(std::size_t k) {
    return {SizeKind::Knn, 0.0, k};
  }
  static NeighborhoodSpec with_radius(double r) {
    return {SizeKind::Radius, r, 0};
  }
  double size() const {
    return kind == SizeKind::Knn ? static_cast<double>(k) : radius;
  }
};

/// Ascending neighborhood sizes to sweep. Knn sizes are whole numbers.
struct SizeGrid {
  SizeKind kind = SizeKind::Knn;
  std::vector<double> values;
};

/// Mean error of the size-s neighborhood centered at each anchor.
struct NeighborhoodErrors {
  NeighborhoodSpec spec;
  std::vector<double> values;
};

struct CurvePoint {
  double size = 0.0;
  double disparity = 0.0;
};

/// Disparity across embedding neighborhoods as a function of neighborhood
/// size, with trapezoidal area over the size axis rescaled to [0, 1].
struct DenCurve {
  SizeKind size_kind = SizeKind::Knn;
  DisparityMetric metric = DisparityMetric::Rawlsian;
  std::vector<CurvePoint> points;
  double auc = 0.0;
};

struct EstimationErrorPoint {
  double size = 0.0;
  double error = 0.0;
};

/// |estimated - reference| disparity per swept size, and where it bottoms out.
struct EstimationErrorCurve {
  double reference = 0.0;
  std::vector<EstimationErrorPoint> points;
  std::size_t argmin_index = 0;
  double argmin_size = 0.0;
  double min_error = 0.0;
};

struct SweepOptions {
  unsigned threads = 1;
  // Anchor subset (ascending indices); empty means every datapoint anchors
  // a neighborhood.
  std::vector<std::uint32_t> anchors;
};

/// Max-min disparity: 1 - min(E)/(max(E) + epsilon). A uniform error
/// profile has no disparity, so min == max returns exactly 0 regardless of
/// epsilon; so does an everywhere-negligible profile (max <= epsilon).
inline double rawlsian(std::span<const double> errors, double epsilon) {
  if (errors.empty())
    throw std::invalid_argument("rawlsian disparity of an empty set");
  double lo = errors[0], hi = errors[0];
  for (double e : errors) {
    if (!std::isfinite(e) || e < 0.0)
      throw std::invalid_argument("rawlsian disparity needs finite errors >= 0");
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  if (hi <= epsilon) return 0.0;
  if (lo == hi) return 0.0;
  return 1.0 - lo / (hi + epsilon);
}

/// Population standard deviation. The mean uses a running update so a
/// constant input yields exactly 0.
inline double std_dev(std::span<const double> errors) {
  if (errors.empty())
    throw std::invalid_argument("standard deviation of an empty set");
  detail::RunningMean mean;
  for (double e : errors) mean.add(e);
  detail::ExactSum sq;
  for (double e : errors) {
    const double d = e - mean.mean();
    sq.add(d * d);
  }
  return std::sqrt(sq.value() / static_cast<double>(errors.size()));
}

inline double disparity_of(std::span<const double> errors, DisparityMetric metric,
                           double epsilon) {
  return metric == DisparityMetric::Rawlsian ? rawlsian(errors, epsilon)
                                             : std_dev(errors);
}

/// Ground-truth disparity over a labeled partition: mean error per
/// category, then the chosen disparity metric across those means.
inline double partition_disparity(std::span<const double> errors,
                                  const LabelColumn& labels,
                                  DisparityMetric metric,
                                  double epsilon = kDefaultEpsilon) {
  if (labels.size() != errors.size())
    throw std::invalid_argument("partition disparity: labels do not cover errors");
  if (labels.n_categories() == 0)
    throw std::invalid_argument("partition disparity: no categories");
  std::vector<detail::RunningMean> acc(labels.n_categories());
  for (std::size_t i = 0; i < errors.size(); ++i)
    acc[labels.codes[i]].add(errors[i]);
  std::vector<double> means;
  means.reserve(acc.size());
  for (const auto& a : acc)
    if (a.count() > 0) means.push_back(a.mean());
  if (means.empty())
    throw std::invalid_argument("partition disparity: all categories empty");
  return disparity_of(means, metric, epsilon);
}

namespace detail {

inline void validate_grid(const SizeGrid& grid, std::size_t n) {
  if (grid.values.empty())
    throw std::invalid_argument("size grid is empty");
  double prev = 0.0;
  for (std::size_t t = 0; t < grid.values.size(); ++t) {
    const double v = grid.values[t];
    if (!std::isfinite(v) || v <= 0.0)
      throw std::invalid_argument("size grid values must be finite and > 0");
    if (t > 0 && v <= prev)
      throw std::invalid_argument("size grid values must be strictly ascending");
    prev = v;
    if (grid.kind == SizeKind::Knn) {
      if (v != std::floor(v))
        throw std::invalid_argument("knn grid values must be whole numbers");
      if (v > static_cast<double>(n))
        throw std::invalid_argument("knn grid value " + std::to_string(v) +
                                    " exceeds n = " + std::to_string(n));
    }
  }
}

inline std::vector<std::uint32_t> all_anchors(std::size_t n) {
  std::vector<std::uint32_t> a(n);
  std::iota(a.begin(), a.end(), 0u);
  return a;
}

inline void check_anchors(const std::vector<std::uint32_t>& anchors,
                          std::size_t n) {
  for (std::size_t t = 0; t < anchors.size(); ++t) {
    if (anchors[t] >= n)
      throw std::invalid_argument("anchor index out of range");
    if (t > 0 && anchors[t] <= anchors[t - 1])
      throw std::invalid_argument("anchors must be strictly ascending");
  }
}

// Shared per-row kernel: exact prefix sums of errors in sorted-distance
// order give every kNN mean directly and every radius mean after one
// binary search. The exact accumulator makes equal neighborhoods produce
// bit-identical means no matter how each row orders its members.
struct RowSweeper {
  const SizeGrid& grid;
  std::span<const double> errors;
  std::vector<std::vector<double>>& out;  // out[s][anchor_slot]

  void operator()(std::size_t slot, std::span<const std::uint32_t> order_row,
                  std::span<const double> dist_row) const {
    thread_local std::vector<double> prefix;
    const std::size_t n = order_row.size();
    prefix.resize(n + 1);
    ExactSum sum;
    prefix[0] = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      sum.add(errors[order_row[t]]);
      prefix[t + 1] = sum.value();
    }
    for (std::size_t s = 0; s < grid.values.size(); ++s) {
      std::size_t count;
      if (grid.kind == SizeKind::Knn) {
        count = static_cast<std::size_t>(grid.values[s]);
      } else {
        const auto end = std::lower_bound(dist_row.begin(), dist_row.end(),
                                          grid.values[s]);
        count = static_cast<std::size_t>(end - dist_row.begin());
      }
      out[s][slot] = prefix[count] / static_cast<double>(count);
    }
  }
};

}  // namespace detail

/// One sweep pass over the grid: per anchor row, prefix sums in
/// sorted-distance order yield the mean neighborhood error for every size.
/// Equivalent to evaluating each size independently, in O(n^2 + n g log n).
inline std::vector<NeighborhoodErrors> sweep_neighborhood_errors(
    const DistanceProfile& profile, std::span<const double> errors,
    const SizeGrid& grid, const SweepOptions& opt = {}) {
  if (errors.size() != profile.n)
    throw std::invalid_argument("sweep: errors do not cover the profile");
  detail::validate_grid(grid, profile.n);
  auto anchors = opt.anchors.empty() ? detail::all_anchors(profile.n) : opt.anchors;
  detail::check_anchors(anchors, profile.n);

  std::vector<std::vector<double>> values(grid.values.size());
  for (auto& v : values) v.resize(anchors.size());
  detail::RowSweeper sweeper{grid, errors, values};
  detail::parallel_for(anchors.size(), opt.threads, [&](std::size_t slot) {
    const std::size_t i = anchors[slot];
    sweeper(slot, profile.order_row(i), profile.dist_row(i));
  });

  std::vector<NeighborhoodErrors> out;
  out.reserve(grid.values.size());
  for (std::size_t s = 0; s < grid.values.size(); ++s) {
    NeighborhoodSpec spec = grid.kind == SizeKind::Knn
        ? NeighborhoodSpec::knn(static_cast<std::size_t>(grid.values[s]))
        : NeighborhoodSpec::with_radius(grid.values[s]);
    out.push_back({spec, std::move(values[s])});
  }
  return out;
}

/// Streaming variant for datasets whose profile exceeds the memory budget:
/// identical results, rows computed in blocks and discarded.
inline std::vector<NeighborhoodErrors> sweep_neighborhood_errors(
    const Dataset& ds, DistanceMetric metric, std::span<const double> errors,
    const SizeGrid& grid, const ProfileOptions& profile_opt,
    const SweepOptions& opt = {}) {
  if (errors.size() != ds.n)
    throw std::invalid_argument("sweep: errors do not cover the dataset");
  detail::validate_grid(grid, ds.n);
  auto anchors = opt.anchors.empty() ? detail::all_anchors(ds.n) : opt.anchors;
  detail::check_anchors(anchors, ds.n);

  // slot_of[i] maps a dataset row to its anchor slot, or npos.
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<std::size_t> slot_of(ds.n, npos);
  for (std::size_t t = 0; t < anchors.size(); ++t) slot_of[anchors[t]] = t;

  std::vector<std::vector<double>> values(grid.values.size());
  for (auto& v : values) v.resize(anchors.size());
  detail::RowSweeper sweeper{grid, errors, values};
  ProfileOptions popt = profile_opt;
  popt.threads = opt.threads;
  scan_profile_rows(ds, metric, popt,
                    [&](std::size_t i, std::span<const std::uint32_t> order_row,
                        std::span<const double> dist_row) {
                      const std::size_t slot = slot_of[i];
                      if (slot != npos) sweeper(slot, order_row, dist_row);
                    });

  std::vector<NeighborhoodErrors> out;
  out.reserve(grid.values.size());
  for (std::size_t s = 0; s < grid.values.size(); ++s) {
    NeighborhoodSpec spec = grid.kind == SizeKind::Knn
        ? NeighborhoodSpec::knn(static_cast<std::size_t>(grid.values[s]))
        : NeighborhoodSpec::with_radius(grid.values[s]);
    out.push_back({spec, std::move(values[s])});
  }
  return out;
}

/// Mean error per datapoint-centered neighborhood of one fixed size.
/// Radius 0 is rejected: strict-inequality membership makes every such
/// neighborhood empty.
inline NeighborhoodErrors neighborhood_errors(const DistanceProfile& profile,
                                              std::span<const double> errors,
                                              NeighborhoodSpec spec,
                                              const SweepOptions& opt = {}) {
  if (spec.kind == SizeKind::Radius && !(spec.radius > 0.0))
    throw std::invalid_argument(
        "neighborhood errors: radius must be > 0 (r = 0 gives empty neighborhoods)");
  SizeGrid grid{spec.kind, {spec.size()}};
  auto swept = sweep_neighborhood_errors(profile, errors, grid, opt);
  return std::move(swept.front());
}

/// Trapezoid area with sizes linearly rescaled to [0, 1]; a single point
/// has no width and scores 0.
inline double curve_auc(std::span<const CurvePoint> points) {
  if (points.size() < 2) return 0.0;
  const double s0 = points.front().size;
  const double span = points.back().size - s0;
  double area = 0.0;
  for (std::size_t t = 0; t + 1 < points.size(); ++t) {
    const double u0 = (points[t].size - s0) / span;
    const double u1 = (points[t + 1].size - s0) / span;
    area += 0.5 * (u1 - u0) * (points[t].disparity + points[t + 1].disparity);
  }
  return area;
}

inline DenCurve den_curve(const DistanceProfile& profile,
                          std::span<const double> errors, const SizeGrid& grid,
                          DisparityMetric metric,
                          double epsilon = kDefaultEpsilon,
                          const SweepOptions& opt = {}) {
  const auto swept = sweep_neighborhood_errors(profile, errors, grid, opt);
  DenCurve curve;
  curve.size_kind = grid.kind;
  curve.metric = metric;
  curve.points.reserve(swept.size());
  for (std::size_t s = 0; s < swept.size(); ++s)
    curve.points.push_back(
        {grid.values[s], disparity_of(swept[s].values, metric, epsilon)});
  curve.auc = curve_auc(curve.points);
  return curve;
}

/// Streaming variant of den_curve; see sweep_neighborhood_errors.
inline DenCurve den_curve(const Dataset& ds, DistanceMetric distance,
                          std::span<const double> errors, const SizeGrid& grid,
                          DisparityMetric metric, double epsilon,
                          const ProfileOptions& profile_opt,
                          const SweepOptions& opt = {}) {
  const auto swept =
      sweep_neighborhood_errors(ds, distance, errors, grid, profile_opt, opt);
  DenCurve curve;
  curve.size_kind = grid.kind;
  curve.metric = metric;
  curve.points.reserve(swept.size());
  for (std::size_t s = 0; s < swept.size(); ++s)
    curve.points.push_back(
        {grid.values[s], disparity_of(swept[s].values, metric, epsilon)});
  curve.auc = curve_auc(curve.points);
  return curve;
}

/// Absolute gap between the swept disparity estimate and a reference
/// disparity computed from ground-truth labels. Ties on the minimum go to
/// the smallest size.
inline EstimationErrorCurve estimation_error_curve(const DenCurve& curve,
                                                   double reference) {
  if (curve.points.empty())
    throw std::invalid_argument("estimation error curve: empty input curve");
  EstimationErrorCurve out;
  out.reference = reference;
  out.points.reserve(curve.points.size());
  for (const auto& p : curve.points)
    out.points.push_back({p.size, std::abs(p.disparity - reference)});
  out.argmin_index = 0;
  for (std::size_t t = 1; t < out.points.size(); ++t)
    if (out.points[t].error < out.points[out.argmin_index].error)
      out.argmin_index = t;
  out.argmin_size = out.points[out.argmin_index].size;
  out.min_error = out.points[out.argmin_index].error;
  return out;
}

/// Default kNN grid: `count` geometrically spaced whole sizes from 1 to n.
/// Rounding collisions at the low end are resolved by stepping to the next
/// unused integer, so the grid always holds min(count, n) distinct sizes.
inline SizeGrid default_knn_grid(std::size_t n, std::size_t count = kDefaultGridCount) {
  if (n == 0) throw std::invalid_argument("knn grid needs n >= 1");
  if (count == 0) throw std::invalid_argument("knn grid needs count >= 1");
  SizeGrid grid{SizeKind::Knn, {}};
  const double log_n = std::log(static_cast<double>(n));
  double prev = 0.0;
  for (std::size_t t = 0; t < count; ++t) {
    const double frac = count == 1 ? 1.0
                                   : static_cast<double>(t) /
                                         static_cast<double>(count - 1);
    double v = std::min(std::round(std::exp(frac * log_n)),
                        static_cast<double>(n));
    v = std::max(v, prev + 1.0);
    if (v > static_cast<double>(n)) break;
    grid.values.push_back(v);
    prev = v;
  }
  return grid;
}

/// Default radius grid: `count` linearly spaced radii from the smallest
/// nonzero nearest-neighbor distance up to the exact maximum pairwise
/// distance.
inline SizeGrid default_radius_grid(double min_nonzero_nn, double max_dist,
                                    std::size_t count = kDefaultGridCount) {
  if (!std::isfinite(min_nonzero_nn) || !(max_dist > 0.0))
    throw DataError(
        "radius grid is undefined: every pairwise distance is zero");
  if (count == 0) throw std::invalid_argument("radius grid needs count >= 1");
  SizeGrid grid{SizeKind::Radius, {}};
  if (count == 1 || min_nonzero_nn >= max_dist) {
    grid.values.push_back(max_dist);
    return grid;
  }
  for (std::size_t t = 0; t < count; ++t) {
    const double frac =
        static_cast<double>(t) / static_cast<double>(count - 1);
    grid.values.push_back(min_nonzero_nn + frac * (max_dist - min_nonzero_nn));
  }
  grid.values.back() = max_dist;
  return grid;
}

inline SizeGrid default_radius_grid(const DistanceProfile& profile,
                                    std::size_t count = kDefaultGridCount) {
  double min_nonzero_nn = std::numeric_limits<double>::infinity();
  double max_dist = 0.0;
  for (std::size_t i = 0; i < profile.n; ++i) {
    const auto row = profile.dist_row(i);
    for (double d : row)
      if (d > 0.0) {
        min_nonzero_nn = std::min(min_nonzero_nn, d);
        break;
      }
    max_dist = std::max(max_dist, row.back());
  }
  return default_radius_grid(min_nonzero_nn, max_dist, count);
}

}  // namespace den
