#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace cntnn {

struct Histogram {
    std::vector<double> edges; // bins + 1, strictly increasing
    std::vector<std::int64_t> counts;
};

/// Equal-width bins over [min, max]; the last bin is closed. A degenerate
/// range (all values equal) is widened to [v - 0.5, v + 0.5].
inline Histogram make_histogram(std::span<const double> values, int bins) {
    if (bins <= 0) throw std::invalid_argument("histogram needs at least one bin");
    if (values.empty()) throw std::invalid_argument("histogram of an empty value set");
    auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    Histogram h;
    h.edges.resize(std::size_t(bins) + 1);
    const double width = (hi - lo) / bins;
    for (int i = 0; i <= bins; ++i) h.edges[i] = lo + width * i;
    h.edges.back() = hi;
    h.counts.assign(std::size_t(bins), 0);
    for (double v : values) {
        auto b = static_cast<std::int64_t>(std::floor((v - lo) / width));
        b = std::clamp<std::int64_t>(b, 0, bins - 1);
        ++h.counts[std::size_t(b)];
    }
    return h;
}

struct MomentSummary {
    double mean = 0.0;
    double std = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0; // excess
    std::int64_t n = 0;
};

/// Population-normalized moments. Skewness and kurtosis are 0 for a constant set.
inline MomentSummary moments(std::span<const double> values) {
    MomentSummary s;
    s.n = std::int64_t(values.size());
    if (values.empty()) return s;
    const double n = double(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : values) {
        const double d = v - s.mean, d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    s.std = std::sqrt(m2);
    if (m2 > 0.0) {
        s.skewness = m3 / std::pow(m2, 1.5);
        s.kurtosis = m4 / (m2 * m2) - 3.0;
    }
    return s;
}

/// Pearson correlation; empty when fewer than two points or either
/// coordinate has zero variance.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson: coordinate lists differ in length");
    if (x.size() < 2) return std::nullopt;
    const double n = double(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline double ks_statistic(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
    std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double na = double(sa.size()), nb = double(sb.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < sa.size() && j < sb.size()) {
        const double v = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] == v) ++i;
        while (j < sb.size() && sb[j] == v) ++j;
        d = std::max(d, std::abs(double(i) / na - double(j) / nb));
    }
    return d;
}

/// Fraction of values inside [lo, hi].
inline double fraction_within(std::span<const double> values, double lo, double hi) {
    if (values.empty()) return 0.0;
    std::size_t n = 0;
    for (double v : values) n += (v >= lo && v <= hi);
    return double(n) / double(values.size());
}

} // namespace cntnn
