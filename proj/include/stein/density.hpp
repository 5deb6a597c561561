#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "stein/conditional.hpp"
#include "stein/distribution.hpp"
#include "stein/math.hpp"
#include "stein/quadrature.hpp"

namespace stein {

// Grid-based density with its normalization constant and centering shift.
struct DensityEstimate {
    std::vector<double> grid;        // ascending
    std::vector<double> pdf_values;  // nonnegative, trapezoid mass 1
    SupportInterval support;
    double c = 1.0;             // constant from the representation formula
    double center_shift = 0.0;  // E[T]; the density lives in centered coordinates
    bool theta_floored = false;

    double value_at(double x) const {
        if (grid.empty()) throw domain_error("DensityEstimate: empty grid");
        if (x < grid.front() || x > grid.back()) return 0.0;
        std::size_t lo = 0, hi = grid.size() - 1;
        while (hi - lo > 1) {
            std::size_t mid = (lo + hi) / 2;
            (grid[mid] <= x ? lo : hi) = mid;
        }
        double w = (x - grid[lo]) / (grid[hi] - grid[lo]);
        return (1.0 - w) * pdf_values[lo] + w * pdf_values[hi];
    }

    // Density of the un-centered statistic: p_T(x) = p_{T-E[T]}(x - E[T]).
    double shifted_value_at(double x) const { return value_at(x - center_shift); }

    double integral() const { return trapezoid(grid, pdf_values); }
};

// Normalize pdf_values in place so the trapezoid integral is exactly 1.
inline void normalize_density(DensityEstimate& d) {
    double total = d.integral();
    if (!(total > 0.0) || !std::isfinite(total))
        throw numerical_error("density normalization failed: total mass " + std::to_string(total));
    for (double& v : d.pdf_values) v /= total;
}

// Build a normalized estimate from a callable on a uniform grid.
template <class F>
DensityEstimate density_from_function(const F& pdf, double lo, double hi, std::size_t points,
                                      double center_shift = 0.0) {
    if (!(hi > lo) || points < 8) throw domain_error("density_from_function: bad grid");
    DensityEstimate d;
    d.grid.resize(points);
    d.pdf_values.resize(points);
    for (std::size_t i = 0; i < points; ++i) {
        d.grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
        d.pdf_values[i] = std::max(0.0, pdf(d.grid[i]));
    }
    d.support = {lo, hi};
    d.center_shift = center_shift;
    normalize_density(d);
    return d;
}

// Equal-width histogram density from samples (piecewise constant values on
// bin centers).
inline DensityEstimate histogram_density(std::span<const double> samples, std::size_t bins) {
    if (samples.size() < 100 || bins < 2) throw domain_error("histogram_density: too little data");
    auto [mn_it, mx_it] = std::minmax_element(samples.begin(), samples.end());
    double lo = *mn_it, hi = *mx_it;
    if (!(hi > lo)) throw numerical_error("histogram_density: degenerate sample");
    std::vector<double> count(bins, 0.0);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (double x : samples) {
        auto b = static_cast<std::size_t>((x - lo) / width);
        if (b >= bins) b = bins - 1;
        count[b] += 1.0;
    }
    DensityEstimate d;
    d.grid.resize(bins);
    d.pdf_values.resize(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        d.grid[b] = lo + width * (static_cast<double>(b) + 0.5);
        d.pdf_values[b] = count[b] / (static_cast<double>(samples.size()) * width);
    }
    d.support = {lo, hi};
    normalize_density(d);
    return d;
}

// Existence of a density for T: numerical evidence for "theta(T) > 0 a.s.".
struct ExistenceVerdict {
    enum class Kind { supported, rejected, inconclusive };
    Kind verdict = Kind::inconclusive;
    std::vector<std::pair<double, double>> zero_regions;  // t-intervals with theta <= 3 SE
    double mass_at_risk = 0.0;

    std::string to_string() const {
        switch (verdict) {
            case Kind::supported:
                return "supported";
            case Kind::rejected:
                return "rejected";
            case Kind::inconclusive:
                return "inconclusive";
        }
        return "?";
    }
};

// supported: every bin mean clears 3 SE and a relative floor.
// rejected:  a well-populated bin is consistent with theta = 0 at 1 SE.
// Bin means are the pre-clip values; clipping happens only for evaluation.
inline ExistenceVerdict check_existence(const ConditionalEstimate& est) {
    ExistenceVerdict out;
    const double floor = 1e-10 * std::fabs(est.global_mean);
    bool all_clear = true;
    bool any_rejected = false;
    std::size_t flagged_mass = 0;
    for (std::size_t b = 0; b < est.bins(); ++b) {
        const double m = est.raw_means[b];
        const double se = est.bin_se[b];
        const bool flagged = m <= 3.0 * se || m <= floor;
        if (flagged) {
            flagged_mass += est.counts[b];
            all_clear = false;
            if (!out.zero_regions.empty() &&
                out.zero_regions.back().second >= est.bin_edges[b])
                out.zero_regions.back().second = est.bin_edges[b + 1];
            else
                out.zero_regions.emplace_back(est.bin_edges[b], est.bin_edges[b + 1]);
            if (std::fabs(m) <= se && est.counts[b] >= 500) any_rejected = true;
        }
    }
    out.mass_at_risk = static_cast<double>(flagged_mass) / static_cast<double>(est.total);
    if (any_rejected)
        out.verdict = ExistenceVerdict::Kind::rejected;
    else if (all_clear)
        out.verdict = ExistenceVerdict::Kind::supported;
    else
        out.verdict = ExistenceVerdict::Kind::inconclusive;
    return out;
}

struct ReconstructOptions {
    // Floor for theta inside the integrand: max(1e-10, floor_fraction * median theta).
    double floor_fraction = 0.01;
    // Extend the grid outward (same spacing) until the unnormalized density
    // falls below tail_cut * peak, so the tails carry their mass.
    bool extend_tails = true;
    double tail_cut = 1e-10;
    double max_extension_factor = 6.0;  // per side, in units of the hint width
    double center_shift = 0.0;
};

// Representation formula p(x) = (c / theta(x)) exp(-int_0^x u/theta(u) du)
// on a grid over [range_lo, range_hi] (plus decay extensions), normalized to
// unit mass. theta_fn must be positive on the range; values below the floor
// are clamped and flagged.
template <class ThetaFn>
DensityEstimate reconstruct(const ThetaFn& theta_fn, double range_lo, double range_hi,
                            std::size_t grid_size, ReconstructOptions opt = {}) {
    if (!(range_hi > range_lo) || grid_size < 16)
        throw domain_error("reconstruct: bad range or grid size");
    const double step = (range_hi - range_lo) / static_cast<double>(grid_size - 1);

    std::vector<double> theta_samples(grid_size);
    for (std::size_t i = 0; i < grid_size; ++i)
        theta_samples[i] = theta_fn(range_lo + step * static_cast<double>(i));
    std::vector<double> sorted_theta = theta_samples;
    std::sort(sorted_theta.begin(), sorted_theta.end());
    const double median_theta = sorted_theta[grid_size / 2];
    if (!(median_theta > 0.0))
        throw existence_error("reconstruct: theta is not positive on the requested range");
    const double floor = std::max(1e-10, opt.floor_fraction * median_theta);

    DensityEstimate d;
    d.center_shift = opt.center_shift;
    auto theta_at = [&](double x) {
        double v = theta_fn(x);
        if (v <= 0.0)
            throw existence_error("reconstruct: theta <= 0 at t = " + std::to_string(x));
        if (v < floor) {
            d.theta_floored = true;
            return floor;
        }
        return v;
    };

    d.grid.resize(grid_size);
    for (std::size_t i = 0; i < grid_size; ++i)
        d.grid[i] = range_lo + step * static_cast<double>(i);

    // Per-segment trapezoid cumulative of u / theta(u), each segment refined
    // by interval doubling (u/theta can be stiff near a support edge where
    // theta approaches 0); the anchor at 0 is absorbed by c.
    auto rate_fn = [&](double u) { return u / theta_at(u); };
    std::vector<double> cum(grid_size, 0.0);
    for (std::size_t i = 1; i < grid_size; ++i)
        cum[i] = cum[i - 1] + refined_trapezoid(rate_fn, d.grid[i - 1], d.grid[i]);

    std::vector<double> log_unnorm(grid_size);
    for (std::size_t i = 0; i < grid_size; ++i)
        log_unnorm[i] = -cum[i] - std::log(theta_at(d.grid[i]));
    double peak = *std::max_element(log_unnorm.begin(), log_unnorm.end());

    if (opt.extend_tails) {
        const double cutoff = peak + std::log(opt.tail_cut);
        const double max_ext = opt.max_extension_factor * (range_hi - range_lo);
        // the extension stops where theta stops being positive (support edge)
        auto theta_probe = [&](double x, double& out) {
            double v = theta_fn(x);
            if (!(v > 0.0)) return false;
            if (v < floor) {
                d.theta_floored = true;
                v = floor;
            }
            out = v;
            return true;
        };
        // right tail; the step bisects against a support edge where theta
        // stops being positive, so the edge mass is still collected
        {
            double x = range_hi, acc = cum.back(), th = 0.0, cur = step;
            double lg = log_unnorm.back();
            while (lg > cutoff && x - range_hi < max_ext && cur > step * 1e-7) {
                if (!theta_probe(x + cur, th)) {
                    cur *= 0.5;
                    continue;
                }
                acc += refined_trapezoid(rate_fn, x, x + cur);
                x += cur;
                lg = -acc - std::log(th);
                d.grid.push_back(x);
                log_unnorm.push_back(lg);
            }
        }
        // left tail
        {
            std::vector<double> gl, ll;
            double x = range_lo, acc = cum.front(), th = 0.0, cur = step;
            double lg = log_unnorm.front();
            while (lg > cutoff && range_lo - x < max_ext && cur > step * 1e-7) {
                if (!theta_probe(x - cur, th)) {
                    cur *= 0.5;
                    continue;
                }
                acc -= refined_trapezoid(rate_fn, x - cur, x);
                x -= cur;
                lg = -acc - std::log(th);
                gl.push_back(x);
                ll.push_back(lg);
            }
            d.grid.insert(d.grid.begin(), gl.rbegin(), gl.rend());
            log_unnorm.insert(log_unnorm.begin(), ll.rbegin(), ll.rend());
        }
        peak = *std::max_element(log_unnorm.begin(), log_unnorm.end());
    }

    d.pdf_values.resize(d.grid.size());
    for (std::size_t i = 0; i < d.grid.size(); ++i)
        d.pdf_values[i] = std::exp(log_unnorm[i] - peak);
    normalize_density(d);
    d.support = {d.grid.front(), d.grid.back()};

    // c = p(t) * theta(t) * exp(int_0^t u/theta) at the grid point nearest 0.
    std::size_t anchor = 0;
    for (std::size_t i = 1; i < d.grid.size(); ++i)
        if (std::fabs(d.grid[i]) < std::fabs(d.grid[anchor])) anchor = i;
    double anchor_corr = 0.0;
    if (d.grid[anchor] != 0.0 && d.grid.front() <= 0.0 && d.grid.back() >= 0.0)
        anchor_corr = refined_trapezoid(rate_fn, 0.0, d.grid[anchor]);
    d.c = d.pdf_values[anchor] * theta_at(d.grid[anchor]) * std::exp(anchor_corr);
    return d;
}

// Two-sided envelopes from theta_1 <= theta <= theta_2, sharing the
// reconstruction normalizer of `base` (the constant is not separately
// normalizable; see the representation formula).
struct DensityBounds {
    std::vector<double> grid;
    std::vector<double> lower;
    std::vector<double> upper;
};

template <class ThetaLo, class ThetaHi>
DensityBounds bounds(const ThetaLo& theta_lo, const ThetaHi& theta_hi,
                     const DensityEstimate& base) {
    if (base.grid.size() < 2) throw domain_error("bounds: base grid too small");
    const std::size_t n = base.grid.size();
    std::vector<double> lo_v(n), hi_v(n);
    for (std::size_t i = 0; i < n; ++i) {
        lo_v[i] = theta_lo(base.grid[i]);
        hi_v[i] = theta_hi(base.grid[i]);
        if (!(lo_v[i] > 0.0) || !(hi_v[i] > 0.0))
            throw domain_error("bounds: envelopes must be positive on the grid");
        if (lo_v[i] > hi_v[i] * (1.0 + 1e-12))
            throw domain_error("bounds: envelope crossing (theta_lo > theta_hi) at t = " +
                               std::to_string(base.grid[i]));
    }
    auto rate_lo_fn = [&](double u) { return u / theta_lo(u); };
    auto rate_hi_fn = [&](double u) { return u / theta_hi(u); };
    std::vector<double> cum_lo(n, 0.0), cum_hi(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        cum_lo[i] = cum_lo[i - 1] + refined_trapezoid(rate_lo_fn, base.grid[i - 1], base.grid[i]);
        cum_hi[i] = cum_hi[i - 1] + refined_trapezoid(rate_hi_fn, base.grid[i - 1], base.grid[i]);
    }

    // anchor the exponent integral at 0 exactly, matching the normalizer c
    std::size_t anchor = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (std::fabs(base.grid[i]) < std::fabs(base.grid[anchor])) anchor = i;
    double corr_lo = 0.0, corr_hi = 0.0;
    if (base.grid[anchor] != 0.0 && base.grid.front() <= 0.0 && base.grid.back() >= 0.0) {
        corr_lo = refined_trapezoid(rate_lo_fn, 0.0, base.grid[anchor]);
        corr_hi = refined_trapezoid(rate_hi_fn, 0.0, base.grid[anchor]);
    }

    DensityBounds out;
    out.grid = base.grid;
    out.lower.resize(n);
    out.upper.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.lower[i] = base.c / hi_v[i] * std::exp(-(cum_lo[i] - cum_lo[anchor] + corr_lo));
        out.upper[i] = base.c / lo_v[i] * std::exp(-(cum_hi[i] - cum_hi[anchor] + corr_hi));
    }
    return out;
}

// phi(x) = int_x^b y p(y) dy and theta = phi / p, masked where p <= 1e-12.
struct PhiTheta {
    std::vector<double> grid;
    std::vector<double> phi;
    std::vector<double> theta;   // NaN where masked
    std::vector<char> valid;
};

inline PhiTheta phi_and_theta_from_density(const DensityEstimate& p) {
    if (p.grid.size() < 3) throw domain_error("phi_and_theta_from_density: grid too small");
    double total = p.integral();
    if (std::fabs(total - 1.0) > 1e-4)
        throw domain_error("phi_and_theta_from_density: density is not normalized");
    std::vector<double> ypy(p.grid.size());
    for (std::size_t i = 0; i < p.grid.size(); ++i) ypy[i] = p.grid[i] * p.pdf_values[i];
    double mean_t = trapezoid(p.grid, ypy);
    if (std::fabs(mean_t) > 1e-3)
        throw domain_error("phi_and_theta_from_density: density is not centered (mean " +
                           std::to_string(mean_t) + "); shift by center_shift first");

    PhiTheta out;
    out.grid = p.grid;
    const std::size_t n = p.grid.size();
    // phi(b) = 0 and phi(a) = E[T] = 0 are boundary values of the integral;
    // integrating each half from its own support end avoids the catastrophic
    // cancellation a single full-range cumulative would have in the far left
    // tail. The two runs are blended linearly; they disagree only by the
    // residual mean of p, which the precondition bounds.
    std::vector<double> from_right(n, 0.0), from_left(n, 0.0);
    {
        KahanSum acc;
        for (std::size_t i = n - 1; i-- > 0;) {
            acc.add(0.5 * (ypy[i] + ypy[i + 1]) * (p.grid[i + 1] - p.grid[i]));
            from_right[i] = acc.value();
        }
    }
    {
        KahanSum acc;
        for (std::size_t i = 1; i < n; ++i) {
            acc.add(-0.5 * (ypy[i] + ypy[i - 1]) * (p.grid[i] - p.grid[i - 1]));
            from_left[i] = acc.value();
        }
    }
    out.phi.resize(n);
    const double span = p.grid.back() - p.grid.front();
    for (std::size_t i = 0; i < n; ++i) {
        double w = (p.grid.back() - p.grid[i]) / span;  // 1 at a, 0 at b
        out.phi[i] = w * from_left[i] + (1.0 - w) * from_right[i];
    }
    out.theta.assign(n, std::numeric_limits<double>::quiet_NaN());
    out.valid.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (p.pdf_values[i] > 1e-12) {
            out.theta[i] = out.phi[i] / p.pdf_values[i];
            out.valid[i] = 1;
        }
    }
    return out;
}

// Conditional second-moment identity for a sum of uniforms:
//   E[X_1^2+...+X_n^2 | X_1+...+X_n = x] = x - 2 int_x^n (y - n/2) p_Z(y) dy / p_Z(x),
// evaluated from a density estimate of the centered sum. x is un-centered.
inline double conditional_identity_rhs(const DensityEstimate& p, double x) {
    const double t = x - p.center_shift;
    if (t < p.grid.front() || t > p.grid.back())
        throw domain_error("conditional_identity_rhs: x outside the density support");
    const double px = p.value_at(t);
    if (!(px > 1e-12))
        throw domain_error("conditional_identity_rhs: density vanishes at x = " +
                           std::to_string(x) + " (boundary)");
    // phi(t) on the grid, interpolated at t
    std::vector<double> ypy(p.grid.size());
    for (std::size_t i = 0; i < p.grid.size(); ++i) ypy[i] = p.grid[i] * p.pdf_values[i];
    double phi_t = 0.0;
    // integrate y p(y) from t to the right end by trapezoid on the grid tail
    std::size_t lo = 0, hi = p.grid.size() - 1;
    while (hi - lo > 1) {
        std::size_t mid = (lo + hi) / 2;
        (p.grid[mid] <= t ? lo : hi) = mid;
    }
    {
        double y_at_t = t * px;
        phi_t += 0.5 * (y_at_t + ypy[hi]) * (p.grid[hi] - t);
        for (std::size_t i = hi; i + 1 < p.grid.size(); ++i)
            phi_t += 0.5 * (ypy[i] + ypy[i + 1]) * (p.grid[i + 1] - p.grid[i]);
    }
    return x - 2.0 * phi_t / px;
}

// Discrete mixture of component densities on a shared grid (Remark-style
// conditioning on a discrete input).
inline DensityEstimate discrete_mixture(
    const std::vector<std::pair<double, DensityEstimate>>& cases) {
    if (cases.empty()) throw domain_error("discrete_mixture: no cases");
    double prob_sum = 0.0;
    for (const auto& [prob, dens] : cases) {
        if (!(prob > 0.0)) throw domain_error("discrete_mixture: probabilities must be positive");
        prob_sum += prob;
    }
    if (std::fabs(prob_sum - 1.0) > 1e-10)
        throw domain_error("discrete_mixture: probabilities sum to " + std::to_string(prob_sum));
    const auto& g0 = cases.front().second.grid;
    for (const auto& [prob, dens] : cases) {
        if (dens.grid.size() != g0.size())
            throw domain_error("discrete_mixture: component grids are not compatible");
        for (std::size_t i = 0; i < g0.size(); ++i)
            if (std::fabs(dens.grid[i] - g0[i]) > 1e-9 * (1.0 + std::fabs(g0[i])))
                throw domain_error("discrete_mixture: component grids are not compatible");
    }
    DensityEstimate out;
    out.grid = g0;
    out.pdf_values.assign(g0.size(), 0.0);
    double shift = 0.0;
    for (const auto& [prob, dens] : cases) {
        for (std::size_t i = 0; i < g0.size(); ++i) out.pdf_values[i] += prob * dens.pdf_values[i];
        shift += prob * dens.center_shift;
    }
    out.center_shift = shift;
    out.support = {g0.front(), g0.back()};
    normalize_density(out);
    return out;
}

// L1 and Linf distances between a density estimate and a reference callable,
// over the estimate's grid.
template <class RefFn>
std::pair<double, double> density_distance(const DensityEstimate& d, const RefFn& reference,
                                           bool shifted = false) {
    std::vector<double> diff(d.grid.size());
    double linf = 0.0;
    for (std::size_t i = 0; i < d.grid.size(); ++i) {
        double x = shifted ? d.grid[i] + d.center_shift : d.grid[i];
        diff[i] = std::fabs(d.pdf_values[i] - reference(x));
        linf = std::max(linf, diff[i]);
    }
    return {trapezoid(d.grid, diff), linf};
}

}  // namespace stein
