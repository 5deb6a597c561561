#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "stein/errors.hpp"
#include "stein/math.hpp"
#include "stein/quadrature.hpp"
#include "stein/rng.hpp"

namespace stein {

// Connected support [lower, upper], endpoints may be infinite.
struct SupportInterval {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();

    bool contains(double x) const { return x >= lower && x <= upper; }
    bool bounded() const { return std::isfinite(lower) && std::isfinite(upper); }
};

// Mass left outside the quadrature window for unbounded supports.
inline constexpr double kTailMass = 1e-12;

// A univariate input law X_k: density, CDF, quantile, sampling, moments.
// Immutable after construction; safe to share across threads.
class Distribution {
  public:
    enum class Kind { uniform, std_normal, curie_weiss, tabulated };

    static Distribution uniform(double a, double b) {
        if (!(a < b) || !std::isfinite(a) || !std::isfinite(b))
            throw domain_error("uniform: require finite a < b");
        Distribution d(Kind::uniform);
        d.a_ = a;
        d.b_ = b;
        d.support_ = {a, b};
        d.trunc_lo_ = a;
        d.trunc_hi_ = b;
        d.check_mass();
        return d;
    }

    static Distribution std_normal() {
        Distribution d(Kind::std_normal);
        d.support_ = {};
        d.trunc_lo_ = normal_quantile(kTailMass);
        d.trunc_hi_ = -d.trunc_lo_;
        d.check_mass();
        return d;
    }

    // Curie-Weiss limit law: p(x) = c_s exp(-x^(2s) / (2 s sigma^2)).
    static Distribution curie_weiss(int s, double sigma) {
        if (s < 1) throw domain_error("curie_weiss: s must be a positive integer");
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw domain_error("curie_weiss: sigma must be positive");
        Distribution d(Kind::curie_weiss);
        d.s_ = s;
        d.sigma_ = sigma;
        d.support_ = {};
        d.build_curie_weiss_tables();
        d.check_mass();
        return d;
    }

    // Piecewise-linear pdf on an explicit grid; cdf is piecewise quadratic,
    // so quantiles are closed-form per segment.
    static Distribution tabulated(std::vector<double> grid, std::vector<double> pdf_values) {
        if (grid.size() < 2 || grid.size() != pdf_values.size())
            throw domain_error("tabulated: need matching grid/pdf with >= 2 points");
        for (std::size_t i = 1; i < grid.size(); ++i)
            if (!(grid[i] > grid[i - 1])) throw domain_error("tabulated: grid must be strictly ascending");
        for (std::size_t i = 0; i < pdf_values.size(); ++i) {
            if (!(pdf_values[i] >= 0.0) || !std::isfinite(pdf_values[i]))
                throw domain_error("tabulated: pdf values must be finite and nonnegative");
            // A density vanishing at an interior point breaks the positivity
            // assumption behind the kernel operator; only endpoints may be 0.
            if (i > 0 && i + 1 < pdf_values.size() && pdf_values[i] <= 0.0)
                throw domain_error("tabulated: pdf must be strictly positive on the open support");
        }
        Distribution d(Kind::tabulated);
        d.grid_ = std::move(grid);
        d.pdf_values_ = std::move(pdf_values);
        d.support_ = {d.grid_.front(), d.grid_.back()};
        d.trunc_lo_ = d.support_.lower;
        d.trunc_hi_ = d.support_.upper;
        d.build_tabulated_cdf();
        d.check_mass();
        return d;
    }

    Kind kind() const { return kind_; }
    const SupportInterval& support() const { return support_; }

    // Quadrature window: equals the support when bounded, otherwise the
    // [kTailMass, 1 - kTailMass] quantile range.
    double lower_trunc() const { return trunc_lo_; }
    double upper_trunc() const { return trunc_hi_; }

    double pdf(double x) const {
        switch (kind_) {
            case Kind::uniform:
                return (x >= a_ && x <= b_) ? 1.0 / (b_ - a_) : 0.0;
            case Kind::std_normal:
                return normal_pdf(x);
            case Kind::curie_weiss:
                return cw_norm_ * std::exp(-powi(x, 2 * s_) / (2.0 * s_ * sigma_ * sigma_));
            case Kind::tabulated: {
                if (x < grid_.front() || x > grid_.back()) return 0.0;
                std::size_t i = segment(x);
                double t = (x - grid_[i]) / (grid_[i + 1] - grid_[i]);
                return pdf_values_[i] + t * (pdf_values_[i + 1] - pdf_values_[i]);
            }
        }
        return 0.0;
    }

    double log_pdf(double x) const {
        switch (kind_) {
            case Kind::std_normal:
                return -0.5 * x * x - 0.5 * std::log(2.0 * kPi);
            case Kind::curie_weiss:
                return std::log(cw_norm_) - powi(x, 2 * s_) / (2.0 * s_ * sigma_ * sigma_);
            default: {
                double p = pdf(x);
                return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
            }
        }
    }

    double cdf(double x) const {
        switch (kind_) {
            case Kind::uniform:
                return std::clamp((x - a_) / (b_ - a_), 0.0, 1.0);
            case Kind::std_normal:
                return normal_cdf(x);
            case Kind::curie_weiss: {
                if (x <= cw_grid_.front()) return 0.0;
                if (x >= cw_grid_.back()) return 1.0;
                std::size_t i = cw_segment(x);
                double base = cw_cdf_[i];
                double local = detail::gl15_panel([this](double y) { return pdf(y); }, cw_grid_[i], x);
                return std::clamp((base + local * cw_scale_), 0.0, 1.0);
            }
            case Kind::tabulated: {
                if (x <= grid_.front()) return 0.0;
                if (x >= grid_.back()) return 1.0;
                std::size_t i = segment(x);
                double d = x - grid_[i];
                double slope = (pdf_values_[i + 1] - pdf_values_[i]) / (grid_[i + 1] - grid_[i]);
                return std::clamp((cum_[i] + pdf_values_[i] * d + 0.5 * slope * d * d) / cum_.back(),
                                  0.0, 1.0);
            }
        }
        return 0.0;
    }

    // Inverse CDF; |cdf(quantile(u)) - u| <= 1e-10 on (0,1).
    double quantile(double u) const {
        if (!(u > 0.0 && u < 1.0)) throw domain_error("quantile: u must lie in (0,1)");
        switch (kind_) {
            case Kind::uniform:
                return a_ + (b_ - a_) * u;
            case Kind::std_normal:
                return normal_quantile(u);
            case Kind::curie_weiss:
                return cw_quantile_root(u);
            case Kind::tabulated:
                return tabulated_quantile(u);
        }
        return 0.0;
    }

    // One counter tick per draw; inverse-CDF transform throughout, so the
    // draw is a pure function of the stream position.
    double sample(RandomStream& stream) const {
        double u = stream.next_uniform();
        switch (kind_) {
            case Kind::uniform:
                return a_ + (b_ - a_) * u;
            case Kind::std_normal:
                return normal_quantile(u);
            case Kind::curie_weiss:
                return cw_sampler_(u);
            case Kind::tabulated:
                return tabulated_quantile(u);
        }
        return 0.0;
    }

    // E[X^k] over the (truncated) support.
    double moment(int k) const {
        if (k < 0) throw domain_error("moment: order must be nonnegative");
        if (k == 0) return 1.0;
        if (kind_ == Kind::uniform) {
            // closed form: (b^{k+1} - a^{k+1}) / ((k+1)(b-a))
            return (powi(b_, k + 1) - powi(a_, k + 1)) / ((k + 1) * (b_ - a_));
        }
        if (kind_ == Kind::tabulated) {
            KahanSum s;
            for (std::size_t i = 0; i + 1 < grid_.size(); ++i) {
                double x0 = grid_[i], x1 = grid_[i + 1];
                double slope = (pdf_values_[i + 1] - pdf_values_[i]) / (x1 - x0);
                double c0 = pdf_values_[i] - slope * x0;
                s.add(c0 * (powi(x1, k + 1) - powi(x0, k + 1)) / (k + 1) +
                      slope * (powi(x1, k + 2) - powi(x0, k + 2)) / (k + 2));
            }
            return s.value();
        }
        auto integrand = [this, k](double x) { return powi(x, k) * pdf(x); };
        return integrate(integrand, trunc_lo_, trunc_hi_).value;
    }

    double mean() const { return moment(1); }

    // Curie-Weiss normalizing constant c_s = 1 / integral of exp(-x^(2s)/(2 s sigma^2)).
    static double curie_weiss_normalizer(int s, double sigma) {
        if (s < 1 || !(sigma > 0.0)) throw domain_error("curie_weiss_normalizer: invalid parameters");
        double radius = cw_decay_radius(s, sigma);
        auto f = [s, sigma](double x) { return std::exp(-powi(x, 2 * s) / (2.0 * s * sigma * sigma)); };
        QuadratureOptions opt;
        opt.abs_tol = 1e-14;
        opt.rel_tol = 1e-13;
        double total = integrate(f, -radius, radius, opt).value;
        if (!(total > 0.0)) throw numerical_error("curie_weiss_normalizer: quadrature failed");
        return 1.0 / total;
    }

    std::string name() const {
        switch (kind_) {
            case Kind::uniform:
                return "uniform(" + std::to_string(a_) + "," + std::to_string(b_) + ")";
            case Kind::std_normal:
                return "std_normal";
            case Kind::curie_weiss:
                return "curie_weiss(s=" + std::to_string(s_) + ",sigma=" + std::to_string(sigma_) + ")";
            case Kind::tabulated:
                return "tabulated[" + std::to_string(grid_.size()) + "]";
        }
        return "?";
    }

  private:
    explicit Distribution(Kind k) : kind_(k) {}

    // Radius beyond which the unnormalized Curie-Weiss density is < 1e-18.
    static double cw_decay_radius(int s, double sigma) {
        return std::pow(2.0 * s * sigma * sigma * 41.5, 1.0 / (2.0 * s));
    }

    void build_curie_weiss_tables() {
        const double radius = cw_decay_radius(s_, sigma_);
        cw_norm_ = curie_weiss_normalizer(s_, sigma_);

        // Piecewise cumulative CDF on a fine uniform grid.
        const std::size_t segments = 4096;
        cw_grid_.resize(segments + 1);
        cw_cdf_.assign(segments + 1, 0.0);
        const double h = 2.0 * radius / segments;
        for (std::size_t i = 0; i <= segments; ++i) cw_grid_[i] = -radius + h * i;
        auto p = [this](double y) { return pdf(y); };
        KahanSum cum;
        for (std::size_t i = 1; i <= segments; ++i) {
            cum.add(detail::gl15_panel(p, cw_grid_[i - 1], cw_grid_[i]));
            cw_cdf_[i] = cum.value();
        }
        cw_scale_ = 1.0 / cw_cdf_.back();
        for (auto& v : cw_cdf_) v *= cw_scale_;

        trunc_lo_ = cw_quantile_root(kTailMass);
        trunc_hi_ = cw_quantile_root(1.0 - kTailMass);

        // Inverse-CDF sampling table: 2049 knots, monotone cubic in between.
        // Chebyshev-clustered u-levels resolve the steep tails of the
        // quantile function; uniform levels would bias tail moments.
        const std::size_t knots = 2049;
        std::vector<double> us(knots), xs(knots);
        const double u0 = kTailMass, u1 = 1.0 - kTailMass;
        for (std::size_t i = 0; i < knots; ++i) {
            double w = 0.5 * (1.0 - std::cos(kPi * static_cast<double>(i) /
                                             static_cast<double>(knots - 1)));
            us[i] = u0 + (u1 - u0) * w;
            xs[i] = cw_quantile_root(us[i]);
        }
        cw_sampler_ = MonotoneCubic(std::move(us), std::move(xs));
    }

    // Bracketed bisection/secant root search for cdf(x) = u.
    double cw_quantile_root(double u) const {
        auto it = std::upper_bound(cw_cdf_.begin(), cw_cdf_.end(), u);
        std::size_t hi_idx = std::min<std::size_t>(cw_cdf_.size() - 1,
                                                   static_cast<std::size_t>(it - cw_cdf_.begin()));
        std::size_t lo_idx = hi_idx > 0 ? hi_idx - 1 : 0;
        double lo = cw_grid_[lo_idx], hi = cw_grid_[hi_idx];
        double flo = cw_cdf_[lo_idx] - u, fhi = cw_cdf_[hi_idx] - u;
        if (flo > 0.0 || fhi < 0.0) {
            lo = cw_grid_.front();
            hi = cw_grid_.back();
            flo = -u;
            fhi = 1.0 - u;
        }
        for (int iter = 0; iter < 200; ++iter) {
            double mid = (fhi != flo) ? lo - flo * (hi - lo) / (fhi - flo) : 0.5 * (lo + hi);
            // keep the step inside the bracket; fall back to bisection
            if (!(mid > lo && mid < hi)) mid = 0.5 * (lo + hi);
            double fm = cdf(mid) - u;
            if (std::fabs(fm) < 1e-12 || hi - lo < 1e-14 * (1.0 + std::fabs(mid))) return mid;
            if (fm < 0.0) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
                fhi = fm;
            }
        }
        return 0.5 * (lo + hi);
    }

    void build_tabulated_cdf() {
        cum_.assign(grid_.size(), 0.0);
        for (std::size_t i = 1; i < grid_.size(); ++i)
            cum_[i] = cum_[i - 1] +
                      0.5 * (pdf_values_[i] + pdf_values_[i - 1]) * (grid_[i] - grid_[i - 1]);
        if (!(cum_.back() > 0.0)) throw domain_error("tabulated: pdf has zero total mass");
    }

    double tabulated_quantile(double u) const {
        double target = u * cum_.back();
        auto it = std::upper_bound(cum_.begin(), cum_.end(), target);
        std::size_t i = (it == cum_.begin()) ? 0 : static_cast<std::size_t>(it - cum_.begin()) - 1;
        i = std::min(i, grid_.size() - 2);
        double rhs = target - cum_[i];
        double p0 = pdf_values_[i];
        double slope = (pdf_values_[i + 1] - pdf_values_[i]) / (grid_[i + 1] - grid_[i]);
        // 0.5*slope*d^2 + p0*d = rhs, solved in the cancellation-free form
        double disc = p0 * p0 + 2.0 * slope * rhs;
        disc = std::max(disc, 0.0);
        double denom = p0 + std::sqrt(disc);
        double d =
            (denom > 0.0) ? 2.0 * rhs / denom : (slope > 0.0 ? std::sqrt(2.0 * rhs / slope) : 0.0);
        return std::min(grid_[i] + d, grid_[i + 1]);
    }

    std::size_t segment(double x) const {
        auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
        std::size_t i = (it == grid_.begin()) ? 0 : static_cast<std::size_t>(it - grid_.begin()) - 1;
        return std::min(i, grid_.size() - 2);
    }

    std::size_t cw_segment(double x) const {
        auto it = std::upper_bound(cw_grid_.begin(), cw_grid_.end(), x);
        std::size_t i = (it == cw_grid_.begin()) ? 0 : static_cast<std::size_t>(it - cw_grid_.begin()) - 1;
        return std::min(i, cw_grid_.size() - 2);
    }

    void check_mass() const {
        double total = integrate([this](double x) { return pdf(x); }, trunc_lo_, trunc_hi_).value;
        if (std::fabs(total - 1.0) > 1e-8 + 2.0 * kTailMass)
            throw domain_error(name() + ": pdf mass " + std::to_string(total) + " is not 1 within 1e-8");
    }

    Kind kind_;
    SupportInterval support_;
    double trunc_lo_ = 0.0, trunc_hi_ = 0.0;

    // uniform
    double a_ = 0.0, b_ = 1.0;

    // curie_weiss
    int s_ = 1;
    double sigma_ = 1.0;
    double cw_norm_ = 0.0;
    double cw_scale_ = 1.0;
    std::vector<double> cw_grid_, cw_cdf_;
    MonotoneCubic cw_sampler_;

    // tabulated
    std::vector<double> grid_, pdf_values_, cum_;
};

}  // namespace stein
