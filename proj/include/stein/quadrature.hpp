#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "stein/errors.hpp"
#include "stein/math.hpp"

namespace stein {

struct QuadratureResult {
    double value = 0.0;
    double est_error = 0.0;
    std::size_t panels = 0;
};

struct QuadratureOptions {
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    int max_depth = 48;
    std::size_t max_panels = 1u << 20;
};

namespace detail {

// 15-point Gauss-Legendre panel on [-1,1]; positive half, symmetric.
inline constexpr double kGL15Nodes[8] = {
    0.0000000000000000000, 0.2011940939974345223, 0.3941513470775633699,
    0.5709721726085388475, 0.7244177313601700474, 0.8482065834104272162,
    0.9372733924007059043, 0.9879925180204854284};
inline constexpr double kGL15Weights[8] = {
    0.2025782419255612729, 0.1984314853271115765, 0.1861610000155622110,
    0.1662692058169939336, 0.1395706779261543144, 0.1071592204671719351,
    0.0703660474881081247, 0.0307532419961172684};

template <class F>
double gl15_panel(const F& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double s = kGL15Weights[0] * f(c);
    for (int i = 1; i < 8; ++i) {
        const double dx = h * kGL15Nodes[i];
        s += kGL15Weights[i] * (f(c + dx) + f(c - dx));
    }
    return s * h;
}

template <class F>
void adaptive_recurse(const F& f, double a, double b, double whole, double abs_tol,
                      double rel_tol, int depth, const QuadratureOptions& opt,
                      QuadratureResult& out) {
    const double m = 0.5 * (a + b);
    const double left = gl15_panel(f, a, m);
    const double right = gl15_panel(f, m, b);
    const double refined = left + right;
    const double err = std::fabs(refined - whole);
    out.panels += 2;
    if (out.panels > opt.max_panels)
        throw numerical_error("adaptive quadrature did not converge (panel budget exhausted)");
    if (err <= std::max(abs_tol, rel_tol * std::fabs(refined))) {
        out.value += refined;
        out.est_error += err;
        return;
    }
    if (depth >= opt.max_depth)
        throw numerical_error("adaptive quadrature did not converge near [" + std::to_string(a) +
                              ", " + std::to_string(b) + "]");
    adaptive_recurse(f, a, m, left, 0.5 * abs_tol, rel_tol, depth + 1, opt, out);
    adaptive_recurse(f, m, b, right, 0.5 * abs_tol, rel_tol, depth + 1, opt, out);
}

}  // namespace detail

// Adaptive Gauss-Legendre: 15-point panels, recursive bisection.
template <class F>
QuadratureResult integrate(const F& f, double a, double b, QuadratureOptions opt = {}) {
    if (!std::isfinite(a) || !std::isfinite(b))
        throw domain_error("integrate: bounds must be finite (truncate unbounded supports first)");
    if (a == b) return {};
    double sign = 1.0;
    if (a > b) {
        std::swap(a, b);
        sign = -1.0;
    }
    QuadratureResult out;
    out.panels = 1;
    const double whole = detail::gl15_panel(f, a, b);
    if (!std::isfinite(whole)) throw numerical_error("integrate: non-finite integrand");
    detail::adaptive_recurse(f, a, b, whole, opt.abs_tol, opt.rel_tol, 0, opt, out);
    if (!std::isfinite(out.value)) throw numerical_error("integrate: non-finite result");
    out.value *= sign;
    return out;
}

struct GaussRule {
    std::vector<double> nodes;    // on [-1,1]
    std::vector<double> weights;
};

// Nodes/weights for arbitrary order via Newton iteration on P_n.
inline const GaussRule& gauss_legendre(int order) {
    static std::map<int, GaussRule> cache;
    auto it = cache.find(order);
    if (it != cache.end()) return it->second;
    if (order < 1) throw domain_error("gauss_legendre: order must be >= 1");
    GaussRule rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    const int m = (order + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (order + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= order; ++k) {
                double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = order * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-15) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[order - 1 - i] = x;
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.weights[i] = w;
        rule.weights[order - 1 - i] = w;
    }
    auto [pos, inserted] = cache.emplace(order, std::move(rule));
    (void)inserted;
    return pos->second;
}

// Fixed-order panel on [a,b].
template <class F>
double fixed_gauss(const F& f, double a, double b, int order) {
    const GaussRule& r = gauss_legendre(order);
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < order; ++i) s += r.weights[i] * f(c + h * r.nodes[i]);
    return s * h;
}

// Trapezoid with interval doubling until two successive refinements agree.
// Used for per-segment cumulatives whose integrand can be stiff near a
// support edge.
template <class F>
double refined_trapezoid(const F& f, double a, double b, double rel_tol = 1e-10,
                         int max_doublings = 16) {
    if (a == b) return 0.0;
    double t = 0.5 * (f(a) + f(b)) * (b - a);
    std::size_t n = 1;
    for (int d = 0; d < max_doublings; ++d) {
        const double h = (b - a) / static_cast<double>(n);
        KahanSum mid;
        for (std::size_t i = 0; i < n; ++i) mid.add(f(a + h * (static_cast<double>(i) + 0.5)));
        double refined = 0.5 * t + 0.5 * h * mid.value();
        bool done = std::fabs(refined - t) <= 1e-14 + rel_tol * std::fabs(refined);
        t = refined;
        n *= 2;
        if (done && d >= 1) break;
    }
    return t;
}

// Cumulative trapezoid from grid.front(); result[0] == 0.
inline std::vector<double> cumulative_trapezoid(std::span<const double> grid,
                                                std::span<const double> values) {
    if (grid.size() != values.size() || grid.size() < 2)
        throw domain_error("cumulative_trapezoid: grid/value size mismatch");
    std::vector<double> out(grid.size());
    out[0] = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i)
        out[i] = out[i - 1] + 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
    return out;
}

inline double trapezoid(std::span<const double> grid, std::span<const double> values) {
    if (grid.size() != values.size() || grid.size() < 2)
        throw domain_error("trapezoid: grid/value size mismatch");
    KahanSum s;
    for (std::size_t i = 1; i < grid.size(); ++i)
        s.add(0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]));
    return s.value();
}

// Tabulated antiderivative G(x) = integral of f from x to the right endpoint.
// Knot values come from per-segment Gauss panels accumulated right-to-left
// (no cancellation in the tail), interpolation is Hermite cubic with the
// exact slope G'(x) = -f(x).
class RightTailIntegral {
  public:
    RightTailIntegral() = default;

    template <class F>
    RightTailIntegral(const F& f, double a, double b, std::size_t segments = 4096) {
        if (!(b > a)) throw domain_error("RightTailIntegral: empty interval");
        nodes_.resize(segments + 1);
        values_.assign(segments + 1, 0.0);
        slopes_.resize(segments + 1);
        const double h = (b - a) / static_cast<double>(segments);
        for (std::size_t i = 0; i <= segments; ++i) nodes_[i] = a + h * static_cast<double>(i);
        nodes_.back() = b;
        for (std::size_t i = segments; i-- > 0;) {
            values_[i] = values_[i + 1] + detail::gl15_panel(f, nodes_[i], nodes_[i + 1]);
        }
        for (std::size_t i = 0; i <= segments; ++i) slopes_[i] = -f(nodes_[i]);
    }

    double operator()(double x) const {
        if (x <= nodes_.front()) return values_.front();
        if (x >= nodes_.back()) return 0.0;
        std::size_t lo = 0, hi = nodes_.size() - 1;
        while (hi - lo > 1) {
            std::size_t mid = (lo + hi) / 2;
            (nodes_[mid] <= x ? lo : hi) = mid;
        }
        const double h = nodes_[lo + 1] - nodes_[lo];
        const double t = (x - nodes_[lo]) / h;
        const double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * values_[lo] + (t3 - 2 * t2 + t) * h * slopes_[lo] +
               (-2 * t3 + 3 * t2) * values_[lo + 1] + (t3 - t2) * h * slopes_[lo + 1];
    }

    double total() const { return values_.front(); }
    bool empty() const { return nodes_.empty(); }

  private:
    std::vector<double> nodes_, values_, slopes_;
};

}  // namespace stein
