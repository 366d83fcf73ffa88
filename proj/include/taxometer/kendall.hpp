#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taxometer/error.hpp"

namespace taxometer {

/// Significance marker for a p-value at the 0.05 / 0.01 / 0.001 levels.
inline std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

struct CorrelationResult {
  double tau = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  std::string stars;
};

inline nlohmann::json to_json(const CorrelationResult& r) {
  return {{"tau", r.tau}, {"p", r.p_value}, {"stars", r.stars}, {"n", r.n}};
}

/// Pair counts behind tau-b. Tie counts include pairs tied on both sides.
struct KendallCounts {
  std::size_t n = 0;
  std::int64_t concordant_minus_discordant = 0;
  std::int64_t tied_x = 0;
  std::int64_t tied_y = 0;
  std::int64_t tied_xy = 0;

  std::int64_t total_pairs() const {
    return static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  }
  friend bool operator==(const KendallCounts&, const KendallCounts&) = default;
};

namespace detail {

struct TieSums {
  std::int64_t pairs = 0;     // Σ t(t-1)/2
  long double cubic = 0;      // Σ t(t-1)(t-2)
  long double variance = 0;   // Σ t(t-1)(2t+5)
};

// Tie group sizes of an already sorted sequence.
template <typename Seq>
TieSums tie_sums(const Seq& sorted) {
  TieSums s;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i + 1;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const auto t = static_cast<long double>(j - i);
    s.pairs += static_cast<std::int64_t>((j - i) * (j - i - 1) / 2);
    s.cubic += t * (t - 1) * (t - 2);
    s.variance += t * (t - 1) * (2 * t + 5);
    i = j;
  }
  return s;
}

// Sorts v[lo, hi) ascending and returns the number of inversions.
inline std::int64_t merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo,
                                std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

inline void check_inputs(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DegenerateInputError("sequences differ in length");
  if (xs.size() < 2) throw DegenerateInputError("need at least two observations");
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (std::isnan(xs[i]) || std::isnan(ys[i])) throw DegenerateInputError("NaN observation");
}

}  // namespace detail

/// Concordance counts in O(n log n) (Knight's merge-sort scheme).
inline KendallCounts kendall_counts(std::span<const double> xs, std::span<const double> ys) {
  detail::check_inputs(xs, ys);
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return xs[a] < xs[b] || (xs[a] == xs[b] && ys[a] < ys[b]);
  });

  KendallCounts c;
  c.n = n;
  std::vector<double> sx(n), sy(n);
  for (std::size_t i = 0; i < n; ++i) {
    sx[i] = xs[order[i]];
    sy[i] = ys[order[i]];
  }
  c.tied_x = detail::tie_sums(sx).pairs;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && sx[j] == sx[i] && sy[j] == sy[i]) ++j;
    c.tied_xy += static_cast<std::int64_t>((j - i) * (j - i - 1) / 2);
    i = j;
  }
  std::vector<double> buf(n);
  const std::int64_t discordant = detail::merge_count(sy, buf, 0, n);
  c.tied_y = detail::tie_sums(sy).pairs;
  c.concordant_minus_discordant = c.total_pairs() - c.tied_x - c.tied_y + c.tied_xy - 2 * discordant;
  return c;
}

/// Kendall tau-b with a two-sided p-value from the tie-corrected normal
/// approximation. Throws DegenerateInputError when tau is undefined.
inline CorrelationResult kendall_tau_b(std::span<const double> xs, std::span<const double> ys) {
  const KendallCounts c = kendall_counts(xs, ys);
  const std::int64_t n0 = c.total_pairs();
  if (c.tied_x == n0 || c.tied_y == n0)
    throw DegenerateInputError("a sequence is constant; tau is undefined");

  CorrelationResult r;
  r.n = c.n;
  const auto s = static_cast<long double>(c.concordant_minus_discordant);
  const long double denom = std::sqrt(static_cast<long double>(n0 - c.tied_x)) *
                            std::sqrt(static_cast<long double>(n0 - c.tied_y));
  r.tau = std::clamp(static_cast<double>(s / denom), -1.0, 1.0);

  std::vector<double> sx(xs.begin(), xs.end()), sy(ys.begin(), ys.end());
  std::sort(sx.begin(), sx.end());
  std::sort(sy.begin(), sy.end());
  const auto tx = detail::tie_sums(sx);
  const auto ty = detail::tie_sums(sy);
  const auto size = static_cast<long double>(c.n);
  const long double m = size * (size - 1);
  long double var = (m * (2 * size + 5) - tx.variance - ty.variance) / 18 +
                    2.0L * static_cast<long double>(tx.pairs) * static_cast<long double>(ty.pairs) / m;
  if (c.n > 2) var += tx.cubic * ty.cubic / (9 * m * (size - 2));
  if (var > 0) {
    const long double z = s / std::sqrt(var);
    r.p_value = static_cast<double>(std::erfc(std::fabs(z) / std::sqrt(2.0L)));
  } else {
    r.p_value = 1.0;
  }
  r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  r.stars = significance_stars(r.p_value);
  return r;
}

}  // namespace taxometer
