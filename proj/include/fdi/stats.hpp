#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "fdi/types.hpp"

namespace fdi {

/// Nearest-rank percentile: the ceil(p*n/100)-th order statistic.
inline double percentile_nearest_rank(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("percentile: empty sample");
    if (p <= 0.0 || p > 100.0) throw std::invalid_argument("percentile: p out of (0,100]");
    const auto n = values.size();
    auto rank = static_cast<size_t>(std::ceil(p * static_cast<double>(n) / 100.0));
    rank = std::min(std::max<size_t>(rank, 1), n);
    std::nth_element(values.begin(), values.begin() + (rank - 1), values.end());
    return values[rank - 1];
}

namespace detail {

/// Fractional ranks with ties averaged.
inline std::vector<double> ranks(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

} // namespace detail

/// Spearman rank correlation (Pearson on tie-averaged ranks).
/// Returns 0 when either sample is constant.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("spearman: need two equal-length samples of size >= 2");
    const auto ra = detail::ranks(a);
    const auto rb = detail::ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double num = 0.0, da = 0.0, db = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    if (da == 0.0 || db == 0.0) return 0.0;
    return num / std::sqrt(da * db);
}

inline double sample_mean(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("mean: empty sample");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Half-width of the normal-approximation 95% confidence interval.
inline double ci95_half_width(const std::vector<double>& v) {
    const size_t n = v.size();
    if (n < 2) return 0.0;
    const double m = sample_mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    const double stderr_ = std::sqrt(ss / static_cast<double>(n - 1)) /
                           std::sqrt(static_cast<double>(n));
    return 1.96 * stderr_;
}

} // namespace fdi
