#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "den/common.hpp"

namespace den {

struct CorrelationResult {
  double coefficient = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

namespace detail {

// Regularized incomplete beta I_x(a, b) via the standard continued
// fraction (modified Lentz), switching tails for convergence.
inline double incomplete_beta_cf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-15;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 400; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0))
    return front * incomplete_beta_cf(a, b, x) / a;
  return 1.0 - front * incomplete_beta_cf(b, a, 1.0 - x) / b;
}

// Two-sided p-value for Student's t with df degrees of freedom.
inline double student_t_two_sided_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

inline double normal_two_sided_p(double z) {
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

struct PairCounts {
  std::int64_t concordant = 0;
  std::int64_t discordant = 0;
  std::int64_t n0 = 0;      // all pairs
  std::int64_t ties_x = 0;  // pairs tied in x (including tied in both)
  std::int64_t ties_y = 0;
  // tie-group statistics for the tau-b variance
  double vt_x = 0.0, vt_y = 0.0;    // sum t(t-1)(2t+5)
  double v1_x = 0.0, v1_y = 0.0;    // sum t(t-1)
  double v2_x = 0.0, v2_y = 0.0;    // sum t(t-1)(t-2)
};

inline std::int64_t merge_count_inversions(std::vector<double>& v,
                                           std::vector<double>& buf,
                                           std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t inv = merge_count_inversions(v, buf, lo, mid) +
                     merge_count_inversions(v, buf, mid, hi);
  std::size_t a = lo, b = mid, out = lo;
  while (a < mid && b < hi) {
    if (v[b] < v[a]) {
      inv += static_cast<std::int64_t>(mid - a);
      buf[out++] = v[b++];
    } else {
      buf[out++] = v[a++];
    }
  }
  while (a < mid) buf[out++] = v[a++];
  while (b < hi) buf[out++] = v[b++];
  std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
  return inv;
}

// Sort-based pair counting: sort by (x, y), count x-tie groups, count
// strict inversions of the y sequence (= discordant pairs), and recover
// concordant pairs from the totals.
inline PairCounts kendall_pair_counts(std::span<const double> x,
                                      std::span<const double> y) {
  const std::size_t n = x.size();
  PairCounts pc;
  pc.n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;

  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (x[a] != x[b]) return x[a] < x[b];
    return y[a] < y[b];
  });

  auto tie_stats = [](std::int64_t t, std::int64_t& pairs, double& vt,
                      double& v1, double& v2) {
    pairs += t * (t - 1) / 2;
    const double td = static_cast<double>(t);
    vt += td * (td - 1.0) * (2.0 * td + 5.0);
    v1 += td * (td - 1.0);
    v2 += td * (td - 1.0) * (td - 2.0);
  };

  std::int64_t joint_ties = 0;
  std::size_t t0 = 0;
  for (std::size_t t = 1; t <= n; ++t) {
    if (t == n || x[idx[t]] != x[idx[t0]]) {
      tie_stats(static_cast<std::int64_t>(t - t0), pc.ties_x, pc.vt_x, pc.v1_x,
                pc.v2_x);
      // joint (x, y) tie groups nest inside x groups
      std::size_t u0 = t0;
      for (std::size_t u = t0 + 1; u <= t; ++u) {
        if (u == t || y[idx[u]] != y[idx[u0]]) {
          const std::int64_t g = static_cast<std::int64_t>(u - u0);
          joint_ties += g * (g - 1) / 2;
          u0 = u;
        }
      }
      t0 = t;
    }
  }

  std::vector<double> y_sorted(n);
  for (std::size_t t = 0; t < n; ++t) y_sorted[t] = y[idx[t]];
  {
    std::vector<double> v = y_sorted, buf(n);
    pc.discordant = merge_count_inversions(v, buf, 0, n);
  }
  std::sort(y_sorted.begin(), y_sorted.end());
  t0 = 0;
  for (std::size_t t = 1; t <= n; ++t) {
    if (t == n || y_sorted[t] != y_sorted[t0]) {
      tie_stats(static_cast<std::int64_t>(t - t0), pc.ties_y, pc.vt_y, pc.v1_y,
                pc.v2_y);
      t0 = t;
    }
  }
  pc.concordant =
      pc.n0 - pc.discordant - pc.ties_x - pc.ties_y + joint_ties;
  return pc;
}

inline double tau_b_from_counts(const PairCounts& pc) {
  const double denom =
      std::sqrt(static_cast<double>(pc.n0 - pc.ties_x) *
                static_cast<double>(pc.n0 - pc.ties_y));
  return static_cast<double>(pc.concordant - pc.discordant) / denom;
}

// O(n^2) pair counting, kept for the exact-permutation p-value where n is
// tiny. Same count definitions as kendall_pair_counts.
inline PairCounts kendall_pair_counts_quadratic(std::span<const double> x,
                                                std::span<const double> y) {
  const std::size_t n = x.size();
  PairCounts pc;
  pc.n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0.0) ++pc.ties_x;
      if (dy == 0.0) ++pc.ties_y;
      if (dx == 0.0 || dy == 0.0) continue;
      if ((dx > 0.0) == (dy > 0.0))
        ++pc.concordant;
      else
        ++pc.discordant;
    }
  return pc;
}

}  // namespace detail

/// Pearson correlation with a two-sided p-value from the t statistic
/// r*sqrt((n-2)/(1-r^2)) on n-2 degrees of freedom.
inline CorrelationResult pearson_with_p(std::span<const double> x,
                                        std::span<const double> y) {
  if (x.size() != y.size())
    throw std::invalid_argument("pearson: inputs differ in length");
  const std::size_t n = x.size();
  if (n < 3) throw std::invalid_argument("pearson: needs n >= 3");
  detail::RunningMean mx, my;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
      throw std::invalid_argument("pearson: non-finite input at index " +
                                  std::to_string(i));
    mx.add(x[i]);
    my.add(y[i]);
  }
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx.mean();
    const double dy = y[i] - my.mean();
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw std::invalid_argument(
        "pearson: correlation undefined for a constant vector");
  double r = sxy / (std::sqrt(sxx) * std::sqrt(syy));
  r = std::clamp(r, -1.0, 1.0);
  const double df = static_cast<double>(n - 2);
  double p;
  if (1.0 - r * r <= 0.0) {
    p = 0.0;
  } else {
    const double t = r * std::sqrt(df / (1.0 - r * r));
    p = detail::student_t_two_sided_p(t, df);
  }
  return {r, std::clamp(p, 0.0, 1.0), n};
}

/// Kendall tau-b (tie-corrected). p-value: exact enumeration over all
/// arrangements of y for n <= 10, tie-corrected normal approximation
/// above. Two-sided in both regimes.
inline CorrelationResult kendall_tau_with_p(std::span<const double> x,
                                            std::span<const double> y) {
  if (x.size() != y.size())
    throw std::invalid_argument("kendall: inputs differ in length");
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("kendall: needs n >= 2");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
      throw std::invalid_argument("kendall: non-finite input at index " +
                                  std::to_string(i));
  const auto pc = detail::kendall_pair_counts(x, y);
  if (pc.n0 == pc.ties_x || pc.n0 == pc.ties_y)
    throw std::invalid_argument(
        "kendall: tau undefined when a vector is entirely tied");
  const double tau = detail::tau_b_from_counts(pc);

  double p;
  if (n <= 10) {
    // Enumerate distinct arrangements of the y multiset; each arises from
    // the same number of raw permutations, so equal weighting is exact.
    std::vector<double> perm(y.begin(), y.end());
    std::sort(perm.begin(), perm.end());
    const double threshold = std::abs(tau) - 1e-12;
    std::uint64_t total = 0, at_least = 0;
    do {
      ++total;
      const auto c = detail::kendall_pair_counts_quadratic(x, perm);
      if (std::abs(detail::tau_b_from_counts(c)) >= threshold) ++at_least;
    } while (std::next_permutation(perm.begin(), perm.end()));
    p = static_cast<double>(at_least) / static_cast<double>(total);
  } else {
    const double nd = static_cast<double>(n);
    const double v0 = nd * (nd - 1.0) * (2.0 * nd + 5.0);
    const double var = (v0 - pc.vt_x - pc.vt_y) / 18.0 +
                       pc.v1_x * pc.v1_y / (2.0 * nd * (nd - 1.0)) +
                       pc.v2_x * pc.v2_y /
                           (9.0 * nd * (nd - 1.0) * (nd - 2.0));
    const double z =
        static_cast<double>(pc.concordant - pc.discordant) / std::sqrt(var);
    p = detail::normal_two_sided_p(z);
  }
  return {tau, std::clamp(p, 0.0, 1.0), n};
}

/// Ranking agreement between the estimated per-model scores and each
/// ground-truth disparity reference.
struct RankReferenceEntry {
  std::string reference;  // "individual" or a group partition name
  std::vector<double> true_disparity;
  CorrelationResult correlation;
};

struct RankReport {
  std::vector<std::string> model_names;
  std::vector<double> auc_den;
  std::vector<RankReferenceEntry> references;
};

inline RankReport rank_models(
    std::vector<std::string> model_names, std::vector<double> auc_den,
    std::vector<std::pair<std::string, std::vector<double>>> true_disparities) {
  if (auc_den.size() < 3)
    throw std::invalid_argument("rank_models: needs at least 3 models");
  if (!model_names.empty() && model_names.size() != auc_den.size())
    throw std::invalid_argument("rank_models: model names do not match scores");
  RankReport report;
  report.model_names = std::move(model_names);
  report.auc_den = std::move(auc_den);
  for (auto& [name, truth] : true_disparities) {
    if (truth.size() != report.auc_den.size())
      throw std::invalid_argument("rank_models: reference '" + name +
                                  "' covers " + std::to_string(truth.size()) +
                                  " models, expected " +
                                  std::to_string(report.auc_den.size()));
    RankReferenceEntry entry;
    entry.reference = name;
    entry.correlation = kendall_tau_with_p(report.auc_den, truth);
    entry.true_disparity = std::move(truth);
    report.references.push_back(std::move(entry));
  }
  return report;
}

inline double rmse(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size())
    throw std::invalid_argument("rmse: inputs differ in length");
  if (y.empty()) throw std::invalid_argument("rmse: empty input");
  detail::ExactSum sq;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - y_hat[i];
    sq.add(d * d);
  }
  return std::sqrt(sq.value() / static_cast<double>(y.size()));
}

/// Sign agreement rate; sign(0) counts as positive.
inline double sagr(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size())
    throw std::invalid_argument("sagr: inputs differ in length");
  if (y.empty()) throw std::invalid_argument("sagr: empty input");
  auto sign = [](double v) { return v < 0.0 ? -1 : 1; };
  std::size_t agree = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (sign(y[i]) == sign(y_hat[i])) ++agree;
  return static_cast<double>(agree) / static_cast<double>(y.size());
}

/// Concordance correlation: 2*cov / (var_y + var_yhat + (mean gap)^2),
/// population moments throughout.
inline double ccc(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size())
    throw std::invalid_argument("ccc: inputs differ in length");
  const std::size_t n = y.size();
  if (n < 2) throw std::invalid_argument("ccc: needs n >= 2");
  detail::RunningMean my, mh;
  for (std::size_t i = 0; i < n; ++i) {
    my.add(y[i]);
    mh.add(y_hat[i]);
  }
  double vy = 0.0, vh = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dy = y[i] - my.mean();
    const double dh = y_hat[i] - mh.mean();
    vy += dy * dy;
    vh += dh * dh;
    cov += dy * dh;
  }
  if (vy == 0.0 || vh == 0.0)
    throw std::invalid_argument("ccc: undefined for a constant vector");
  const double nd = static_cast<double>(n);
  const double mean_gap = my.mean() - mh.mean();
  return (2.0 * cov / nd) /
         (vy / nd + vh / nd + mean_gap * mean_gap);
}

}  // namespace den
