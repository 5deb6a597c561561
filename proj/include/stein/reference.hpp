#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "stein/distribution.hpp"
#include "stein/errors.hpp"
#include "stein/math.hpp"
#include "stein/rng.hpp"

namespace stein {

// Sentinel returned where a reference density diverges (chi-square with
// k < 2 at the origin).
inline constexpr double kDivergentDensity = 1e300;

// Irwin-Hall density: the alternating binomial sum with compensated
// summation. Cancellation grows with n; n > 25 is refused.
inline double irwin_hall_pdf(int n, double x) {
    if (n < 1) throw domain_error("irwin_hall_pdf: n must be >= 1");
    if (n > 25) throw numerical_error("irwin_hall_pdf: n > 25 loses too much precision");
    if (x < 0.0 || x > static_cast<double>(n)) return 0.0;
    double log_fact = lgamma_safe(static_cast<double>(n));  // (n-1)!
    KahanSum sum;
    double binom = 1.0;  // C(n, 0)
    const int kmax = static_cast<int>(std::floor(x));
    for (int k = 0; k <= kmax && k <= n; ++k) {
        double term = (k % 2 == 0 ? 1.0 : -1.0) * binom * powi(x - k, n - 1);
        sum.add(term);
        binom = binom * static_cast<double>(n - k) / static_cast<double>(k + 1);
    }
    double value = sum.value() / std::exp(log_fact);
    return value < 0.0 ? 0.0 : value;
}

// Chi-square density with (possibly fractional) k degrees of freedom.
inline double chi_square_pdf(double k, double x) {
    if (!(k > 0.0)) throw domain_error("chi_square_pdf: k must be positive");
    if (x < 0.0) return 0.0;
    const double half = 0.5 * k;
    if (x == 0.0) {
        if (k > 2.0) return 0.0;
        if (k == 2.0) return 0.5;
        return kDivergentDensity;  // boundary singularity marker
    }
    return std::exp((half - 1.0) * std::log(x) - 0.5 * x - lgamma_safe(half) -
                    half * std::log(2.0));
}

// Unnormalized two-sided envelopes for the Curie-Weiss statistic
// W = sum alpha_k X_k^(2s): both sides of the density sandwich with c = 1.
struct EnvelopePair {
    double lower = 0.0;
    double upper = 0.0;
};

inline EnvelopePair curie_weiss_bounds(int s, double sigma, std::span<const double> alphas,
                                       double x) {
    if (s < 1 || !(sigma > 0.0) || alphas.empty())
        throw domain_error("curie_weiss_bounds: invalid parameters");
    double alpha_min = alphas[0], alpha_max = alphas[0], alpha_sum = 0.0;
    for (double a : alphas) {
        if (!(a > 0.0)) throw domain_error("curie_weiss_bounds: alphas must be positive");
        alpha_min = std::min(alpha_min, a);
        alpha_max = std::max(alpha_max, a);
        alpha_sum += a;
    }
    const double beta = sigma * sigma * alpha_sum;  // E[W]
    const double lo_rate = 2.0 * s * sigma * sigma * alpha_min;
    const double hi_rate = 2.0 * s * sigma * sigma * alpha_max;
    if (x < 0.0) return {0.0, 0.0};
    auto shape = [beta, x](double rate_exp, double rate_front) {
        // c / (rate_front * beta^(beta/rate_exp)) * exp(-(x-beta)/rate_exp) * x^(beta/rate_exp - 1)
        double expo = beta / rate_exp;
        double lg = -std::log(rate_front) - expo * std::log(beta) - (x - beta) / rate_exp;
        if (x == 0.0) return expo - 1.0 > 0.0 ? 0.0 : (expo - 1.0 == 0.0 ? std::exp(lg) : kDivergentDensity);
        lg += (expo - 1.0) * std::log(x);
        return std::exp(lg);
    };
    EnvelopePair out;
    out.lower = shape(lo_rate, hi_rate);
    out.upper = shape(hi_rate, lo_rate);
    return out;
}

// Windowed-conditioning Monte Carlo estimate of
// E[X_1^2+...+X_n^2 | X_1+...+X_n = x] for uniform inputs; the independent
// oracle for the conditional-moment identity. Window bias is O(w^2).
struct OracleEstimate {
    double value = 0.0;
    double se = 0.0;
    std::size_t accepted = 0;
};

inline OracleEstimate uif_lhs_oracle(int n, double x, std::size_t draws, std::uint64_t seed,
                                     double window = 0.01) {
    if (n < 1) throw domain_error("uif_lhs_oracle: n must be >= 1");
    if (!(x > 0.0 && x < static_cast<double>(n)))
        throw domain_error("uif_lhs_oracle: x must lie in (0, n)");
    std::vector<RandomStream> streams;
    for (int j = 0; j < n; ++j)
        streams.emplace_back(seed, substream_id(StreamPurpose::oracle, static_cast<std::uint64_t>(j)));
    KahanSum acc, acc_sq;
    std::size_t accepted = 0;
    for (std::size_t i = 0; i < draws; ++i) {
        double sum = 0.0, sum_sq = 0.0;
        for (int j = 0; j < n; ++j) {
            streams[static_cast<std::size_t>(j)].jump_to(i);
            double u = streams[static_cast<std::size_t>(j)].next_uniform();
            sum += u;
            sum_sq += u * u;
        }
        if (std::fabs(sum - x) < window) {
            acc.add(sum_sq);
            acc_sq.add(sum_sq * sum_sq);
            ++accepted;
        }
    }
    if (accepted == 0)
        throw numerical_error("uif_lhs_oracle: no samples landed in the conditioning window");
    OracleEstimate out;
    out.accepted = accepted;
    out.value = acc.value() / static_cast<double>(accepted);
    double var = std::max(0.0, acc_sq.value() / static_cast<double>(accepted) - out.value * out.value);
    out.se = std::sqrt(var / static_cast<double>(accepted));
    return out;
}

}  // namespace stein
