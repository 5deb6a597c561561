#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "stein/decomposition.hpp"
#include "stein/distribution.hpp"
#include "stein/expr.hpp"
#include "stein/parallel.hpp"
#include "stein/quadrature.hpp"
#include "stein/rng.hpp"

namespace stein {

enum class KernelMethod { double_integral, ibp };

struct KernelEvaluation {
    double x = 0.0;
    double value = 0.0;
    KernelMethod method = KernelMethod::ibp;
    double est_error = 0.0;
};

inline constexpr double kPdfUnderflow = 1e-300;

namespace detail {

// L h(x) = int_x^b h(y) p(y) dy / p(x), computed in ratio form
// exp(log p(y) - log p(x)) so the division never underflows.
template <class H>
KernelEvaluation l_op_ibp(const Distribution& d, const H& h, double x,
                          const QuadratureOptions& opt) {
    const double lo = d.lower_trunc(), hi = d.upper_trunc();
    const double lpx = d.log_pdf(x);
    if (!(lpx > std::log(kPdfUnderflow)))
        throw domain_error("l_op: pdf underflow at x = " + std::to_string(x) +
                           " (support boundary)");
    KernelEvaluation out;
    out.x = x;
    out.method = KernelMethod::ibp;
    if (x >= hi) return out;
    auto integrand = [&](double y) { return h(y) * std::exp(d.log_pdf(y) - lpx); };
    QuadratureResult q = integrate(integrand, std::max(x, lo), hi, opt);
    out.value = q.value;
    out.est_error = q.est_error;
    return out;
}

// Kernel form: int (F(x^y) - F(x)F(y)) h'(y) dy / p(x), split at the diagonal
// into its two smooth pieces.
template <class DH>
KernelEvaluation l_op_kernel(const Distribution& d, const DH& dh, double x,
                             const QuadratureOptions& opt) {
    const double lo = d.lower_trunc(), hi = d.upper_trunc();
    const double px = d.pdf(x);
    if (!(px > kPdfUnderflow))
        throw domain_error("l_op: pdf underflow at x = " + std::to_string(x) +
                           " (support boundary)");
    const double Fx = d.cdf(x);
    KernelEvaluation out;
    out.x = x;
    out.method = KernelMethod::double_integral;
    double value = 0.0, err = 0.0;
    if (x > lo) {
        auto left = integrate([&](double y) { return d.cdf(y) * dh(y); }, lo, std::min(x, hi), opt);
        value += (1.0 - Fx) * left.value;
        err += (1.0 - Fx) * left.est_error;
    }
    if (x < hi) {
        auto right =
            integrate([&](double y) { return (1.0 - d.cdf(y)) * dh(y); }, std::max(x, lo), hi, opt);
        value += Fx * right.value;
        err += Fx * right.est_error;
    }
    out.value = value / px;
    out.est_error = err / px;
    return out;
}

}  // namespace detail

// Kernel operator applied to a one-variable function h. The ibp route
// requires centered h (E[h(X)] = 0); the kernel route does not.
inline KernelEvaluation l_op(const Distribution& d, const Expr& h, double x,
                             KernelMethod method = KernelMethod::ibp,
                             QuadratureOptions opt = {}) {
    if (h.dimension() != 1) throw domain_error("l_op: h must be a function of one variable");
    if (method == KernelMethod::ibp) {
        double mean_h =
            integrate([&](double y) { return h.eval1(y) * d.pdf(y); }, d.lower_trunc(),
                      d.upper_trunc(), opt)
                .value;
        if (std::fabs(mean_h) >= 1e-8)
            throw domain_error("l_op: ibp requires centered h, but E[h(X)] = " +
                               std::to_string(mean_h));
        return detail::l_op_ibp(d, [&h](double y) { return h.eval1(y); }, x, opt);
    }
    return detail::l_op_kernel(d, [&h](double y) { return h.partial1(y); }, x, opt);
}

// Cuadras covariance formula:
//   Cov(alpha(X), beta(X)) = int int (F(x^y) - F(x)F(y)) alpha'(x) beta'(y) dx dy,
// evaluated by nested adaptive quadrature with the inner integral split at
// the diagonal kink.
inline double cuadras_cov(const Distribution& d, const Expr& alpha, const Expr& beta,
                          QuadratureOptions opt = {}) {
    if (alpha.dimension() != 1 || beta.dimension() != 1)
        throw domain_error("cuadras_cov: alpha and beta must be one-variable functions");
    const double lo = d.lower_trunc(), hi = d.upper_trunc();
    QuadratureOptions inner = opt;
    inner.abs_tol = 0.1 * opt.abs_tol;
    auto outer = [&](double x) {
        double Fx = d.cdf(x);
        double left =
            integrate([&](double y) { return d.cdf(y) * beta.partial1(y); }, lo, x, inner).value;
        double right =
            integrate([&](double y) { return (1.0 - d.cdf(y)) * beta.partial1(y); }, x, hi, inner)
                .value;
        return alpha.partial1(x) * ((1.0 - Fx) * left + Fx * right);
    };
    return integrate(outer, lo, hi, opt).value;
}

// Stein kernel Theta_{T,h}(x) = sum_k d_k T(x) * L_k h_k(x).
//
// One-coordinate components get a tabulated antiderivative of h_k * p_k over
// the truncated support (per-segment Gauss panels accumulated from the right,
// Hermite interpolation); everything else runs the adaptive slice integral
// with conditional-mean caching through EvalContext.
struct ThetaOptions {
    KernelMethod method = KernelMethod::ibp;
    bool tabulate = true;
    std::size_t table_segments = 4096;
    QuadratureOptions quad;
};

class ThetaEvaluator {
  public:
    using Options = ThetaOptions;

    ThetaEvaluator(const Expr& statistic, const Decomposition& decomp,
                   const std::vector<Distribution>& dists, ThetaOptions opt = ThetaOptions())
        : statistic_(&statistic), decomp_(&decomp), dists_(&dists), opt_(opt) {
        const int n = statistic.dimension();
        if (n != static_cast<int>(dists.size()))
            throw domain_error("ThetaEvaluator: statistic dimension does not match input count");
        for (std::size_t c = 0; c < decomp.size(); ++c) {
            const Component& comp = decomp.component(c);
            if (comp.active_coord() > n)
                throw domain_error("ThetaEvaluator: component coordinate exceeds dimension");
        }
        tables_.resize(decomp.size());
        if (opt_.tabulate && opt_.method == KernelMethod::ibp) {
            std::vector<double> scratch(static_cast<std::size_t>(n), 0.0);
            for (std::size_t c = 0; c < decomp.size(); ++c) {
                const Component& comp = decomp.component(c);
                if (!comp.univariate()) continue;
                const int k = comp.active_coord();
                const Distribution& dk = dists[static_cast<std::size_t>(k - 1)];
                EvalContext ctx;
                auto integrand = [&](double y) {
                    scratch[static_cast<std::size_t>(k - 1)] = y;
                    return comp.eval(scratch, &ctx) * dk.pdf(y);
                };
                tables_[c] = std::make_shared<RightTailIntegral>(
                    integrand, dk.lower_trunc(), dk.upper_trunc(), opt_.table_segments);
            }
        }
    }

    double operator()(std::span<const double> x, EvalContext* ctx = nullptr) const {
        double total = 0.0;
        for (std::size_t c = 0; c < decomp_->size(); ++c) {
            const Component& comp = decomp_->component(c);
            const int k = comp.active_coord();
            const double dT = statistic_->partial(k, x);
            if (dT == 0.0) continue;  // flat direction contributes exactly nothing
            total += dT * l_component(c, comp, x, ctx);
        }
        return total;
    }

    // L_k h_k at the sample point (public for cross-checking the two routes).
    double l_component(std::size_t c, const Component& comp, std::span<const double> x,
                       EvalContext* ctx) const {
        const int k = comp.active_coord();
        const Distribution& dk = (*dists_)[static_cast<std::size_t>(k - 1)];
        const double xk = x[static_cast<std::size_t>(k - 1)];
        if (tables_[c]) {
            const double px = dk.pdf(xk);
            if (!(px > kPdfUnderflow))
                throw domain_error("theta: pdf underflow at coordinate " + std::to_string(k));
            return (*tables_[c])(xk) / px;
        }
        std::vector<double> point(x.begin(), x.end());
        if (opt_.method == KernelMethod::ibp) {
            auto slice = [&](double y) {
                point[static_cast<std::size_t>(k - 1)] = y;
                return comp.eval(point, ctx);
            };
            return detail::l_op_ibp(dk, slice, xk, opt_.quad).value;
        }
        auto dslice = [&](double y) {
            point[static_cast<std::size_t>(k - 1)] = y;
            return comp.partial_active(point, ctx);
        };
        return detail::l_op_kernel(dk, dslice, xk, opt_.quad).value;
    }

  private:
    const Expr* statistic_;
    const Decomposition* decomp_;
    const std::vector<Distribution>* dists_;
    Options opt_;
    std::vector<std::shared_ptr<RightTailIntegral>> tables_;
};

// One-off Theta evaluation through the direct adaptive route.
inline double theta_sample(const Expr& statistic, const Decomposition& decomp,
                           const std::vector<Distribution>& dists, std::span<const double> x,
                           KernelMethod method = KernelMethod::ibp) {
    ThetaOptions opt;
    opt.method = method;
    opt.tabulate = false;
    ThetaEvaluator eval(statistic, decomp, dists, opt);
    EvalContext ctx;
    return eval(x, &ctx);
}

// Paired draws of (T - E[T], Theta), split across workers by sample index;
// draw i of coordinate j depends only on (seed, j, i), so results do not
// depend on the worker count.
struct ThetaSamples {
    std::vector<double> t;
    std::vector<double> theta;
    double statistic_mean = 0.0;
};

inline ThetaSamples sample_t_theta(const Expr& statistic, const Decomposition& decomp,
                                   const std::vector<Distribution>& dists, std::size_t count,
                                   std::uint64_t seed, int workers = 0,
                                   ThetaOptions opt = ThetaOptions()) {
    const int n = statistic.dimension();
    if (n != static_cast<int>(dists.size()))
        throw domain_error("sample_t_theta: statistic dimension does not match input count");
    if (workers <= 0) workers = default_worker_count();
    ThetaEvaluator eval(statistic, decomp, dists, opt);

    ThetaSamples out;
    out.statistic_mean = expected_value(statistic, dists, seed);
    out.t.resize(count);
    out.theta.resize(count);
    parallel_for(count, workers, [&](std::size_t begin, std::size_t end) {
        std::vector<RandomStream> streams;
        streams.reserve(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j)
            streams.emplace_back(seed,
                                 substream_id(StreamPurpose::sample_coordinate,
                                              static_cast<std::uint64_t>(j)));
        std::vector<double> x(static_cast<std::size_t>(n));
        EvalContext ctx;
        for (std::size_t i = begin; i < end; ++i) {
            for (int j = 0; j < n; ++j) {
                streams[static_cast<std::size_t>(j)].jump_to(i);
                x[static_cast<std::size_t>(j)] =
                    dists[static_cast<std::size_t>(j)].sample(streams[static_cast<std::size_t>(j)]);
            }
            ctx.conditional_means.clear();
            try {
                out.t[i] = statistic.eval(x) - out.statistic_mean;
                out.theta[i] = eval(x, &ctx);
            } catch (const error& e) {
                throw numerical_error("theta sampling failed at sample " + std::to_string(i) +
                                      ": " + e.what());
            }
            if (!std::isfinite(out.t[i]) || !std::isfinite(out.theta[i]))
                throw numerical_error("non-finite (T, Theta) at sample " + std::to_string(i));
        }
    });
    return out;
}

// Monte Carlo check of E[g(T) T] = E[g'(T) Theta] at 3 combined standard errors.
struct IdentityReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double se_lhs = 0.0;
    double se_rhs = 0.0;
    std::size_t samples = 0;
    bool passed = false;
};

inline IdentityReport identity_from_samples(const ThetaSamples& samples, const Expr& g) {
    if (g.dimension() != 1) throw domain_error("identity check: g must be a one-variable function");
    const std::size_t n = samples.t.size();
    std::vector<double> lhs(n), rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
        Dual gi = g.eval_dual(1, std::span<const double>(&samples.t[i], 1));
        lhs[i] = gi.v * samples.t[i];
        rhs[i] = gi.d * samples.theta[i];
    }
    IdentityReport rep;
    rep.samples = n;
    rep.lhs = mean(lhs);
    rep.rhs = mean(rhs);
    rep.se_lhs = standard_error(lhs);
    rep.se_rhs = standard_error(rhs);
    rep.passed = std::fabs(rep.lhs - rep.rhs) < 3.0 * (rep.se_lhs + rep.se_rhs);
    return rep;
}

inline IdentityReport stein_identity_check(const Expr& statistic, const Decomposition& decomp,
                                           const std::vector<Distribution>& dists, const Expr& g,
                                           std::size_t count, std::uint64_t seed,
                                           int workers = 0) {
    return identity_from_samples(sample_t_theta(statistic, decomp, dists, count, seed, workers), g);
}

}  // namespace stein
