#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "stein/kernel.hpp"
#include "stein/math.hpp"

namespace stein {

// Raw Monte Carlo material for estimating theta(t) = E[Theta | T = t].
struct SampleBatch {
    std::vector<double> t_values;
    std::vector<double> theta_values;
    std::uint64_t seed = 0;
    double statistic_mean = 0.0;

    std::size_t size() const { return t_values.size(); }
};

// N iid draws of (T - E[T], Theta); deterministic per seed and independent
// of the worker count.
inline SampleBatch collect(const Expr& statistic, const Decomposition& decomp,
                           const std::vector<Distribution>& dists, std::size_t count,
                           std::uint64_t seed, int workers = 0,
                           ThetaOptions opt = ThetaOptions()) {
    if (count < 10'000) throw domain_error("collect: need at least 10^4 samples");
    ThetaSamples s = sample_t_theta(statistic, decomp, dists, count, seed, workers, opt);
    SampleBatch batch;
    batch.t_values = std::move(s.t);
    batch.theta_values = std::move(s.theta);
    batch.seed = seed;
    batch.statistic_mean = s.statistic_mean;
    return batch;
}

struct ThetaAt {
    double value = 0.0;
    double se = 0.0;
};

// Equal-count binned regression of Theta on T. A value of T whose tie run
// fills a whole bin is carved out as an atom bin [v, v]; that is what a
// point mass in T looks like at sample level, and it must not get averaged
// into neighbouring continuous bins.
struct ConditionalEstimate {
    std::vector<double> bin_edges;     // B+1, nondecreasing; lo == hi marks an atom bin
    std::vector<double> bin_means;     // negative means clipped to 0
    std::vector<double> raw_means;     // before clipping
    std::vector<double> bin_se;
    std::vector<double> bin_t_mean;    // within-bin mean of t, the interpolation abscissa
    std::vector<std::size_t> counts;
    std::size_t total = 0;
    double global_mean = 0.0;
    bool any_clipped = false;

    std::size_t bins() const { return counts.size(); }

    // Piecewise-linear through (bin_t_mean, bin_means), clamped beyond the
    // outermost midpoints.
    ThetaAt evaluate(double t) const {
        if (bin_t_mean.empty()) throw domain_error("ConditionalEstimate: empty estimate");
        if (t <= bin_t_mean.front()) return {bin_means.front(), bin_se.front()};
        if (t >= bin_t_mean.back()) return {bin_means.back(), bin_se.back()};
        std::size_t lo = 0, hi = bin_t_mean.size() - 1;
        while (hi - lo > 1) {
            std::size_t mid = (lo + hi) / 2;
            (bin_t_mean[mid] <= t ? lo : hi) = mid;
        }
        double width = bin_t_mean[hi] - bin_t_mean[lo];
        double w = width > 0.0 ? (t - bin_t_mean[lo]) / width : 0.0;
        return {(1.0 - w) * bin_means[lo] + w * bin_means[hi],
                (1.0 - w) * bin_se[lo] + w * bin_se[hi]};
    }
};

inline std::size_t default_bin_count(std::size_t n) {
    auto b = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)) / 5.0);
    return std::clamp<std::size_t>(b, 10, 200);
}

inline ConditionalEstimate estimate_theta(const SampleBatch& batch, std::size_t bins = 0) {
    const std::size_t n = batch.size();
    if (n == 0 || batch.theta_values.size() != n)
        throw domain_error("estimate_theta: empty or mismatched batch");
    if (bins == 0) bins = default_bin_count(n);
    if (bins < 5) throw domain_error("estimate_theta: need at least 5 bins");
    if (n / bins < 50) throw domain_error("estimate_theta: need at least 50 samples per bin");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (batch.t_values[a] != batch.t_values[b]) return batch.t_values[a] < batch.t_values[b];
        return a < b;
    });
    std::vector<double> ts(n), th(n);
    for (std::size_t i = 0; i < n; ++i) {
        ts[i] = batch.t_values[order[i]];
        th[i] = batch.theta_values[order[i]];
    }
    if (ts.front() == ts.back())
        throw numerical_error("estimate_theta: degenerate statistic (all T samples equal)");

    // Split the sorted range into atom runs and continuous stretches.
    const std::size_t atom_threshold = std::max<std::size_t>(2, n / bins);
    struct Segment {
        std::size_t begin, end;
        bool atom;
    };
    std::vector<Segment> segments;
    std::size_t i = 0;
    std::size_t stretch_begin = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && ts[j] == ts[i]) ++j;
        if (j - i >= atom_threshold) {
            if (i > stretch_begin) segments.push_back({stretch_begin, i, false});
            segments.push_back({i, j, true});
            stretch_begin = j;
        }
        i = j;
    }
    if (n > stretch_begin) segments.push_back({stretch_begin, n, false});

    // Equal-count split of every continuous stretch, proportional to its size.
    struct Bin {
        std::size_t begin, end;
        bool atom;
    };
    std::vector<Bin> plan;
    std::size_t atom_count = 0, continuous_total = 0;
    for (const auto& seg : segments) {
        atom_count += seg.atom ? 1 : 0;
        if (!seg.atom) continuous_total += seg.end - seg.begin;
    }
    const std::size_t continuous_bins = bins > atom_count ? bins - atom_count : 1;
    for (const auto& seg : segments) {
        if (seg.atom) {
            plan.push_back({seg.begin, seg.end, true});
            continue;
        }
        const std::size_t len = seg.end - seg.begin;
        std::size_t local = std::max<std::size_t>(
            1, (continuous_bins * len + continuous_total / 2) / std::max<std::size_t>(1, continuous_total));
        local = std::min(local, len);
        std::size_t start = seg.begin;
        for (std::size_t b = 0; b < local && start < seg.end; ++b) {
            std::size_t stop = seg.begin + ((b + 1) * len) / local;
            // never split a tie run across bins
            while (stop < seg.end && stop > start && ts[stop] == ts[stop - 1]) ++stop;
            if (b + 1 == local) stop = seg.end;
            if (stop <= start) continue;
            plan.push_back({start, stop, false});
            start = stop;
        }
    }

    ConditionalEstimate est;
    est.total = n;
    for (const auto& bin : plan) {
        const std::size_t count = bin.end - bin.begin;
        KahanSum sum, sumsq, tsum;
        for (std::size_t s = bin.begin; s < bin.end; ++s) {
            sum.add(th[s]);
            sumsq.add(th[s] * th[s]);
            tsum.add(ts[s]);
        }
        double m = sum.value() / static_cast<double>(count);
        double var = count > 1
                         ? std::max(0.0, (sumsq.value() - static_cast<double>(count) * m * m) /
                                             static_cast<double>(count - 1))
                         : 0.0;
        est.raw_means.push_back(m);
        est.bin_means.push_back(m < 0.0 ? 0.0 : m);
        if (m < 0.0) est.any_clipped = true;
        est.bin_se.push_back(std::sqrt(var / static_cast<double>(count)));
        est.bin_t_mean.push_back(bin.atom ? ts[bin.begin]
                                          : tsum.value() / static_cast<double>(count));
        est.counts.push_back(count);
    }

    // Shared edges: an atom bin is the degenerate interval [v, v]; its
    // neighbours close up against the same value.
    const std::size_t produced = plan.size();
    est.bin_edges.resize(produced + 1);
    est.bin_edges.front() = ts.front();
    est.bin_edges.back() = ts.back();
    for (std::size_t b = 1; b < produced; ++b) {
        if (plan[b].atom)
            est.bin_edges[b] = ts[plan[b].begin];
        else if (plan[b - 1].atom)
            est.bin_edges[b] = ts[plan[b - 1].begin];
        else
            est.bin_edges[b] = ts[plan[b].begin];
    }

    est.global_mean = pairwise_sum(batch.theta_values) / static_cast<double>(n);
    return est;
}

// CSV serializers for the two estimate surfaces (17 significant digits).
inline std::string batch_to_csv(const SampleBatch& batch) {
    std::string out = "t,theta\n";
    char line[96];
    for (std::size_t i = 0; i < batch.size(); ++i) {
        std::snprintf(line, sizeof line, "%.17g,%.17g\n", batch.t_values[i],
                      batch.theta_values[i]);
        out += line;
    }
    return out;
}

inline std::string estimate_to_csv(const ConditionalEstimate& est) {
    std::string out = "bin_lo,bin_hi,mean,se,count\n";
    char line[160];
    for (std::size_t b = 0; b < est.bins(); ++b) {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%zu\n", est.bin_edges[b],
                      est.bin_edges[b + 1], est.bin_means[b], est.bin_se[b], est.counts[b]);
        out += line;
    }
    return out;
}

}  // namespace stein
