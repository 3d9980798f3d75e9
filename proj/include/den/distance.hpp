#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "den/common.hpp"
#include "den/dataset.hpp"

namespace den {

enum class DistanceMetric { Euclidean, Cosine };

struct ProfileOptions {
  unsigned threads = 1;
  // Full n*n profiles are materialized only below this entry count;
  // larger datasets go through scan_profile_rows, which computes rows
  // in blocks and never holds the whole matrix.
  std::size_t max_profile_entries = std::size_t{1} << 25;
  std::size_t block_rows = 256;
};

/// Exact pairwise distance structure: row i holds every datapoint index
/// sorted by ascending distance to z_i, self first.
struct DistanceProfile {
  std::size_t n = 0;
  DistanceMetric metric = DistanceMetric::Euclidean;
  std::vector<std::uint32_t> order;  // n x n row-major
  std::vector<double> dist;          // n x n row-major, rows non-decreasing

  std::span<const std::uint32_t> order_row(std::size_t i) const {
    return {order.data() + i * n, n};
  }
  std::span<const double> dist_row(std::size_t i) const {
    return {dist.data() + i * n, n};
  }
};

namespace detail {

inline std::vector<double> cosine_norms(const Dataset& ds) {
  std::vector<double> norms(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) {
    const auto row = ds.embedding_row(i);
    double sq = 0.0;
    for (float v : row) sq += static_cast<double>(v) * static_cast<double>(v);
    norms[i] = std::sqrt(sq);
    if (norms[i] == 0.0)
      throw DataError("cosine metric rejects zero-norm embedding at index " +
                      std::to_string(i));
  }
  return norms;
}

inline double euclidean_distance(std::span<const float> a,
                                 std::span<const float> b) {
  double sq = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const double d = static_cast<double>(a[t]) - static_cast<double>(b[t]);
    sq += d * d;
  }
  return std::sqrt(sq);
}

inline double cosine_distance(std::span<const float> a, std::span<const float> b,
                              double norm_a, double norm_b) {
  double dot = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t)
    dot += static_cast<double>(a[t]) * static_cast<double>(b[t]);
  const double d = 1.0 - dot / (norm_a * norm_b);
  return d < 0.0 ? 0.0 : d;
}

// Fills one profile row: distances to every point, sorted ascending.
// Ties break by ascending index, except the anchor itself always leads
// the zero-distance block.
inline void compute_profile_row(const Dataset& ds, DistanceMetric metric,
                                std::span<const double> cosine_norms,
                                std::size_t i, std::uint32_t* order_out,
                                double* dist_out, std::vector<double>& scratch) {
  const std::size_t n = ds.n;
  scratch.resize(n);
  const auto zi = ds.embedding_row(i);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) {
      scratch[j] = 0.0;
    } else if (metric == DistanceMetric::Euclidean) {
      scratch[j] = euclidean_distance(zi, ds.embedding_row(j));
    } else {
      scratch[j] = cosine_distance(zi, ds.embedding_row(j), cosine_norms[i],
                                   cosine_norms[j]);
    }
  }
  std::iota(order_out, order_out + n, 0u);
  std::sort(order_out, order_out + n, [&](std::uint32_t a, std::uint32_t b) {
    if (scratch[a] != scratch[b]) return scratch[a] < scratch[b];
    const bool a_self = (a == i), b_self = (b == i);
    if (a_self != b_self) return a_self;
    return a < b;
  });
  for (std::size_t t = 0; t < n; ++t) dist_out[t] = scratch[order_out[t]];
}

inline void check_profile_input(const Dataset& ds) {
  if (ds.n == 0) throw std::invalid_argument("distance profile needs n >= 1");
  if (ds.dim == 0) throw std::invalid_argument("distance profile needs d >= 1");
  if (ds.embeddings.size() != ds.n * ds.dim)
    throw std::invalid_argument("embeddings size does not match n*d");
  for (std::size_t i = 0; i < ds.embeddings.size(); ++i)
    if (!std::isfinite(ds.embeddings[i]))
      throw DataError("non-finite embedding value in row " +
                      std::to_string(i / ds.dim));
}

}  // namespace detail

/// Streams profile rows without materializing the n x n matrix. fn is
/// invoked as fn(i, order_row, dist_row) and may run concurrently for
/// distinct rows; rows within a block are computed in parallel.
template <typename Fn>
void scan_profile_rows(const Dataset& ds, DistanceMetric metric,
                       const ProfileOptions& opt, Fn&& fn) {
  detail::check_profile_input(ds);
  std::vector<double> norms;
  if (metric == DistanceMetric::Cosine) norms = detail::cosine_norms(ds);
  const std::size_t n = ds.n;
  const std::size_t block = std::max<std::size_t>(1, opt.block_rows);
  std::vector<std::uint32_t> order(block * n);
  std::vector<double> dist(block * n);
  for (std::size_t row0 = 0; row0 < n; row0 += block) {
    const std::size_t rows = std::min(block, n - row0);
    detail::parallel_for(rows, opt.threads, [&](std::size_t r) {
      thread_local std::vector<double> scratch;
      detail::compute_profile_row(ds, metric, norms, row0 + r,
                                  order.data() + r * n, dist.data() + r * n,
                                  scratch);
    });
    detail::parallel_for(rows, opt.threads, [&](std::size_t r) {
      fn(row0 + r,
         std::span<const std::uint32_t>(order.data() + r * n, n),
         std::span<const double>(dist.data() + r * n, n));
    });
  }
}

inline DistanceProfile build_distance_profile(const Dataset& ds,
                                              DistanceMetric metric,
                                              const ProfileOptions& opt = {}) {
  detail::check_profile_input(ds);
  if (ds.n * ds.n > opt.max_profile_entries)
    throw std::invalid_argument(
        "distance profile of " + std::to_string(ds.n) + "^2 entries exceeds " +
        "the memory budget of " + std::to_string(opt.max_profile_entries) +
        "; use the streaming row scan instead");
  std::vector<double> norms;
  if (metric == DistanceMetric::Cosine) norms = detail::cosine_norms(ds);
  DistanceProfile profile;
  profile.n = ds.n;
  profile.metric = metric;
  profile.order.resize(ds.n * ds.n);
  profile.dist.resize(ds.n * ds.n);
  detail::parallel_for(ds.n, opt.threads, [&](std::size_t i) {
    thread_local std::vector<double> scratch;
    detail::compute_profile_row(ds, metric, norms, i,
                                profile.order.data() + i * ds.n,
                                profile.dist.data() + i * ds.n, scratch);
  });
  return profile;
}

/// Smallest nonzero nearest-neighbor distance and largest pairwise
/// distance, computed in one streaming pass. Used to place default radius
/// grids without materializing a profile.
inline std::pair<double, double> distance_extremes(const Dataset& ds,
                                                   DistanceMetric metric,
                                                   const ProfileOptions& opt = {}) {
  double min_nonzero_nn = std::numeric_limits<double>::infinity();
  double max_dist = 0.0;
  std::mutex m;
  scan_profile_rows(ds, metric, opt,
                    [&](std::size_t, std::span<const std::uint32_t>,
                        std::span<const double> dist_row) {
                      double local_nn = std::numeric_limits<double>::infinity();
                      for (double d : dist_row)
                        if (d > 0.0) {
                          local_nn = d;
                          break;
                        }
                      const double local_max = dist_row.back();
                      std::lock_guard<std::mutex> lock(m);
                      min_nonzero_nn = std::min(min_nonzero_nn, local_nn);
                      max_dist = std::max(max_dist, local_max);
                    });
  return {min_nonzero_nn, max_dist};
}

/// The k nearest datapoints to anchor i (the anchor itself included),
/// in ascending distance order.
inline std::vector<std::uint32_t> knn_neighborhood(const DistanceProfile& profile,
                                                   std::size_t i, std::size_t k) {
  if (k < 1 || k > profile.n)
    throw std::invalid_argument("knn neighborhood needs 1 <= k <= n, got k=" +
                                std::to_string(k));
  const auto row = profile.order_row(i);
  return {row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k)};
}

/// All datapoints strictly within distance r of anchor i. Empty for r = 0;
/// always contains the anchor for r > 0.
inline std::vector<std::uint32_t> radius_neighborhood(const DistanceProfile& profile,
                                                      std::size_t i, double r) {
  if (!(r >= 0.0))
    throw std::invalid_argument("radius neighborhood needs r >= 0");
  const auto dist = profile.dist_row(i);
  const auto order = profile.order_row(i);
  const auto end = std::lower_bound(dist.begin(), dist.end(), r);
  const auto count = static_cast<std::size_t>(end - dist.begin());
  return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count)};
}

/// Probability that a same-identity point ranks strictly nearer to the
/// anchor than a different-identity point, counting ties as half. Empty
/// when the anchor has no same-identity or no different-identity peers.
inline std::optional<double> retrieval_auroc_from_row(
    std::span<const std::uint32_t> order_row, std::span<const double> dist_row,
    std::span<const std::uint32_t> identity_codes, std::size_t i) {
  const std::size_t n = order_row.size();
  const std::uint32_t self_code = identity_codes[i];
  std::uint64_t positives = 0, negatives = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    (identity_codes[j] == self_code ? positives : negatives) += 1;
  }
  if (positives == 0 || negatives == 0) return std::nullopt;

  std::uint64_t wins = 0, ties = 0, negs_before = 0;
  std::size_t t = 0;
  while (t < n) {
    const double d = dist_row[t];
    std::uint64_t pos_here = 0, neg_here = 0;
    while (t < n && dist_row[t] == d) {
      const std::uint32_t j = order_row[t];
      if (j != i) (identity_codes[j] == self_code ? pos_here : neg_here) += 1;
      ++t;
    }
    wins += pos_here * (negatives - negs_before - neg_here);
    ties += pos_here * neg_here;
    negs_before += neg_here;
  }
  return (2.0 * static_cast<double>(wins) + static_cast<double>(ties)) /
         (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

inline std::optional<double> per_point_retrieval_auroc(
    const DistanceProfile& profile, const LabelColumn& identity, std::size_t i) {
  if (identity.size() != profile.n)
    throw std::invalid_argument(
        "retrieval auroc: identity labels do not cover the dataset");
  return retrieval_auroc_from_row(profile.order_row(i), profile.dist_row(i),
                                  identity.codes, i);
}

}  // namespace den
