#ifndef QHEDGE_MATHX_HPP
#define QHEDGE_MATHX_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "qhedge/common.hpp"

namespace qhedge {

inline constexpr Real kPi = 3.14159265358979323846;

/// Standard normal density.
inline Real norm_pdf(Real x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
}

/// Standard normal CDF via erfc for accuracy in both tails.
inline Real norm_cdf(Real x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

/// Population mean.
inline Real mean(const std::vector<Real>& xs) {
    Real s = 0.0;
    for (Real x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<Real>(xs.size());
}

/// Population variance (divides by n, not n-1) so that
/// mean^2 + variance equals the raw second moment exactly.
inline Real variance_pop(const std::vector<Real>& xs) {
    if (xs.empty()) return 0.0;
    const Real m = mean(xs);
    Real s = 0.0;
    for (Real x : xs) s += (x - m) * (x - m);
    return s / static_cast<Real>(xs.size());
}

inline Real stddev_pop(const std::vector<Real>& xs) {
    return std::sqrt(variance_pop(xs));
}

/// Raw second moment, E[x^2].
inline Real second_moment(const std::vector<Real>& xs) {
    if (xs.empty()) return 0.0;
    Real s = 0.0;
    for (Real x : xs) s += x * x;
    return s / static_cast<Real>(xs.size());
}

/// Linear-interpolation percentile on sorted data (the convention used by
/// most statistics packages by default). p in [0,100].
inline Real percentile_sorted(const std::vector<Real>& sorted, Real p) {
    if (sorted.empty()) return 0.0;
    if (sorted.size() == 1) return sorted[0];
    const Real rank = (p / 100.0) * static_cast<Real>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const Real frac = rank - static_cast<Real>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

/// Interquartile range of already-sorted data.
inline Real iqr_sorted(const std::vector<Real>& sorted) {
    return percentile_sorted(sorted, 75.0) - percentile_sorted(sorted, 25.0);
}

/// Freedman-Diaconis bin count with a fallback of 50 uniform bins when the
/// IQR degenerates. Capped to keep pathological data manageable.
inline int fd_bin_count(const std::vector<Real>& sorted) {
    if (sorted.size() < 2) return 1;
    const Real iqr = iqr_sorted(sorted);
    const Real range = sorted.back() - sorted.front();
    if (iqr <= 0.0 || range <= 0.0) return iqr <= 0.0 && range > 0.0 ? 50 : 1;
    const Real width = 2.0 * iqr / std::cbrt(static_cast<Real>(sorted.size()));
    if (width <= 0.0) return 50;
    const Real n = std::ceil(range / width);
    return static_cast<int>(std::clamp(n, 1.0, 512.0));
}

struct Histogram {
    std::vector<Real> edges;   // size bins+1
    std::vector<long> counts;  // size bins
};

/// Uniform-width histogram over [min, max] of the data. bins <= 0 selects
/// the Freedman-Diaconis rule. Every sample lands in exactly one bin.
inline Histogram make_histogram(std::vector<Real> xs, int bins = 0) {
    Histogram h;
    if (xs.empty()) {
        h.edges = {0.0, 1.0};
        h.counts = {0};
        return h;
    }
    std::sort(xs.begin(), xs.end());
    if (bins <= 0) bins = fd_bin_count(xs);
    Real lo = xs.front(), hi = xs.back();
    if (hi <= lo) {  // degenerate single-value data: one unit-wide bin
        lo -= 0.5;
        hi += 0.5;
        bins = 1;
    }
    const Real width = (hi - lo) / static_cast<Real>(bins);
    h.edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i)
        h.edges[static_cast<std::size_t>(i)] = lo + width * static_cast<Real>(i);
    h.edges.back() = hi;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    for (Real x : xs) {
        auto idx = static_cast<long>((x - lo) / width);
        idx = std::clamp<long>(idx, 0, bins - 1);
        ++h.counts[static_cast<std::size_t>(idx)];
    }
    return h;
}

}  // namespace qhedge

#endif
