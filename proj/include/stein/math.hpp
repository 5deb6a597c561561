#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "stein/errors.hpp"

namespace stein {

inline constexpr double kPi = 3.14159265358979323846;

// Compensated (Kahan) accumulator for long sums of similar-magnitude terms.
class KahanSum {
  public:
    void add(double x) {
        double y = x - comp_;
        double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// Pairwise-tree reduction. The association order depends only on the length,
// so results are bitwise identical no matter how the values were produced.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 32) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    std::size_t mid = v.size() / 2;
    return pairwise_sum(v.subspan(0, mid)) + pairwise_sum(v.subspan(mid));
}

inline double mean(std::span<const double> v) {
    if (v.empty()) throw domain_error("mean of empty vector");
    return pairwise_sum(v) / static_cast<double>(v.size());
}

// Sample standard error of the mean.
inline double standard_error(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    double m = mean(v);
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double d = v[i] - m;
        sq[i] = d * d;
    }
    double var = pairwise_sum(sq) / static_cast<double>(v.size() - 1);
    return std::sqrt(var / static_cast<double>(v.size()));
}

// Integer power by squaring; exact derivative chains rely on this.
inline double powi(double base, long long n) {
    if (n == 0) return 1.0;
    if (n < 0) return 1.0 / powi(base, -n);
    double r = 1.0, b = base;
    while (n > 0) {
        if (n & 1) r *= b;
        b *= b;
        n >>= 1;
    }
    return r;
}

inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
}

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Inverse standard normal CDF (Wichura's AS 241, double precision branch).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw domain_error("normal_quantile: p must be in (0,1)");
    const double q = p - 0.5;
    double r;
    if (std::fabs(q) <= 0.425) {
        r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                  3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                  6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                  2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                  1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return (q < 0.0) ? -val : val;
}

inline double lgamma_safe(double x) { return std::lgamma(x); }

// Monotone piecewise-cubic interpolant (Fritsch-Carlson slope limiting).
// Used for quantile tables: monotone data stays monotone between knots.
class MonotoneCubic {
  public:
    MonotoneCubic() = default;
    MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n) throw domain_error("MonotoneCubic: need >= 2 matching knots");
        std::vector<double> d(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            double h = x_[i + 1] - x_[i];
            if (!(h > 0.0)) throw domain_error("MonotoneCubic: knots must be strictly increasing");
            d[i] = (y_[i + 1] - y_[i]) / h;
        }
        m_.resize(n);
        m_[0] = d[0];
        m_[n - 1] = d[n - 2];
        for (std::size_t i = 1; i + 1 < n; ++i) {
            m_[i] = (d[i - 1] * d[i] <= 0.0) ? 0.0 : 0.5 * (d[i - 1] + d[i]);
        }
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (d[i] == 0.0) {
                m_[i] = m_[i + 1] = 0.0;
                continue;
            }
            double a = m_[i] / d[i], b = m_[i + 1] / d[i];
            double s = a * a + b * b;
            if (s > 9.0) {
                double t = 3.0 / std::sqrt(s);
                m_[i] = t * a * d[i];
                m_[i + 1] = t * b * d[i];
            }
        }
    }

    double operator()(double x) const {
        const std::size_t n = x_.size();
        if (x <= x_.front()) return y_.front();
        if (x >= x_.back()) return y_.back();
        std::size_t lo = 0, hi = n - 1;
        while (hi - lo > 1) {
            std::size_t mid = (lo + hi) / 2;
            (x_[mid] <= x ? lo : hi) = mid;
        }
        double h = x_[lo + 1] - x_[lo];
        double t = (x - x_[lo]) / h;
        double t2 = t * t, t3 = t2 * t;
        double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
        double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
        return h00 * y_[lo] + h10 * h * m_[lo] + h01 * y_[lo + 1] + h11 * h * m_[lo + 1];
    }

    bool empty() const { return x_.empty(); }

  private:
    std::vector<double> x_, y_, m_;
};

}  // namespace stein
