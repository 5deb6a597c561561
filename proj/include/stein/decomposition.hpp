#pragma once

#include <cstring>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stein/distribution.hpp"
#include "stein/expr.hpp"
#include "stein/math.hpp"
#include "stein/quadrature.hpp"
#include "stein/rng.hpp"

namespace stein {

// Scratch state threaded through one Theta evaluation. Conditional means are
// keyed by (prefix length, prefix values); values are deterministic, so a
// stale or missing entry only costs a recompute.
struct EvalContext {
    std::map<std::pair<int, std::vector<double>>, double> conditional_means;
    double max_inner_se = 0.0;
};

// One component h_k of a decomposition, with its active coordinate.
class Component {
  public:
    virtual ~Component() = default;
    virtual int active_coord() const = 0;
    virtual double eval(std::span<const double> x, EvalContext* ctx = nullptr) const = 0;
    // d h_k / d x_k at x.
    virtual double partial_active(std::span<const double> x, EvalContext* ctx = nullptr) const = 0;
    // True when h_k depends on x_k alone; such slices can be tabulated.
    virtual bool univariate() const = 0;
    virtual std::string describe() const = 0;
};

namespace detail {

struct WeightedNodes {
    std::vector<double> y;   // node positions
    std::vector<double> wp;  // weight * pdf * half-width
    double mass = 0.0;       // sum of wp, used to renormalize
};

inline WeightedNodes weighted_nodes(const Distribution& d, int order) {
    const GaussRule& rule = gauss_legendre(order);
    const double lo = d.lower_trunc(), hi = d.upper_trunc();
    const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
    WeightedNodes out;
    out.y.resize(static_cast<std::size_t>(order));
    out.wp.resize(static_cast<std::size_t>(order));
    for (int i = 0; i < order; ++i) {
        double y = c + h * rule.nodes[static_cast<std::size_t>(i)];
        out.y[static_cast<std::size_t>(i)] = y;
        out.wp[static_cast<std::size_t>(i)] = h * rule.weights[static_cast<std::size_t>(i)] * d.pdf(y);
        out.mass += out.wp[static_cast<std::size_t>(i)];
    }
    return out;
}

inline std::uint64_t hash_doubles(std::span<const double> xs, std::uint64_t salt) {
    std::uint64_t h = splitmix64(salt ^ 0x1f83d9abfb41bd6bULL);
    for (double x : xs) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof bits);
        h = splitmix64(h ^ bits);
    }
    return h;
}

}  // namespace detail

// Maximum inner dimension for tensor quadrature; beyond this the inner
// conditional expectation falls back to Monte Carlo.
inline constexpr int kMaxTensorDims = 6;

// E[f(X)] over independent inputs: tensor Gauss-Legendre for n <= 6
// (order capped so the node count stays bounded), Monte Carlo otherwise.
template <class F>
double expected_value(const F& f, const std::vector<Distribution>& dists, std::uint64_t seed = 0,
                      std::size_t mc_samples = 1'000'000) {
    const int n = static_cast<int>(dists.size());
    if (n == 0) throw domain_error("expected_value: no input distributions");
    std::vector<double> x(static_cast<std::size_t>(n));
    if (n <= kMaxTensorDims) {
        int order = n <= 4 ? 32 : (n == 5 ? 20 : 14);
        std::vector<detail::WeightedNodes> nodes;
        nodes.reserve(static_cast<std::size_t>(n));
        for (const auto& d : dists) nodes.push_back(detail::weighted_nodes(d, order));
        std::size_t total = 1;
        for (int j = 0; j < n; ++j) total *= static_cast<std::size_t>(order);
        KahanSum acc;
        std::vector<std::size_t> digit(static_cast<std::size_t>(n), 0);
        for (std::size_t idx = 0; idx < total; ++idx) {
            double w = 1.0;
            for (int j = 0; j < n; ++j) {
                const auto& nd = nodes[static_cast<std::size_t>(j)];
                x[static_cast<std::size_t>(j)] = nd.y[digit[static_cast<std::size_t>(j)]];
                w *= nd.wp[digit[static_cast<std::size_t>(j)]];
            }
            acc.add(w * f(std::span<const double>(x)));
            for (int j = n - 1; j >= 0; --j) {
                if (++digit[static_cast<std::size_t>(j)] < static_cast<std::size_t>(order)) break;
                digit[static_cast<std::size_t>(j)] = 0;
            }
        }
        double mass = 1.0;
        for (const auto& nd : nodes) mass *= nd.mass;
        return acc.value() / mass;
    }
    RandomStream stream(seed, substream_id(StreamPurpose::mean_estimate));
    KahanSum acc;
    for (std::size_t i = 0; i < mc_samples; ++i) {
        for (int j = 0; j < n; ++j) x[static_cast<std::size_t>(j)] = dists[static_cast<std::size_t>(j)].sample(stream);
        acc.add(f(std::span<const double>(x)));
    }
    return acc.value() / static_cast<double>(mc_samples);
}

inline double expected_value(const Expr& T, const std::vector<Distribution>& dists,
                             std::uint64_t seed = 0) {
    return expected_value([&T](std::span<const double> x) { return T.eval(x); }, dists, seed);
}

// Explicit component: a parsed expression plus its active coordinate.
class ExplicitComponent final : public Component {
  public:
    ExplicitComponent(Expr body, int coord) : body_(std::move(body)), coord_(coord) {
        if (coord < 1 || coord > body_.dimension())
            throw domain_error("explicit component: active coordinate out of range");
    }

    int active_coord() const override { return coord_; }
    double eval(std::span<const double> x, EvalContext*) const override { return body_.eval(x); }
    double partial_active(std::span<const double> x, EvalContext*) const override {
        return body_.partial(coord_, x);
    }
    bool univariate() const override { return body_.depends_only_on(coord_); }
    std::string describe() const override {
        return body_.source() + " (coord " + std::to_string(coord_) + ")";
    }
    const Expr& body() const { return body_; }

  private:
    Expr body_;
    int coord_;
};

struct MartingaleShared {
    Expr statistic;
    std::vector<Distribution> dists;
    int quad_order = 32;
    std::size_t mc_inner_samples = 100'000;
    std::uint64_t inner_seed = 0;
    double mean = 0.0;
    std::vector<detail::WeightedNodes> nodes;  // per coordinate, quad_order points
};

// Martingale component h_k = E[T | X_1..X_k] - E[T | X_1..X_{k-1}].
// Inner conditional expectations use tensor Gauss-Legendre over the free
// coordinates; above kMaxTensorDims free coordinates they switch to Monte
// Carlo with a stream derived from the conditioning prefix, so repeated
// evaluations are reproducible.
class MartingaleComponent final : public Component {
  public:
    MartingaleComponent(std::shared_ptr<const MartingaleShared> shared, int k)
        : shared_(std::move(shared)), k_(k) {}

    int active_coord() const override { return k_; }

    double eval(std::span<const double> x, EvalContext* ctx) const override {
        return conditional_mean(k_, x, ctx) - conditional_mean(k_ - 1, x, ctx);
    }

    double partial_active(std::span<const double> x, EvalContext* ctx) const override {
        // d/dx_k E[T | X_1..X_k] = E[d_k T | X_1..X_k]; the subtrahend does
        // not depend on x_k.
        const int n = static_cast<int>(shared_->dists.size());
        auto dT = [this, n](std::span<const double> p) {
            return shared_->statistic.partial(k_, p);
        };
        return inner_expectation(dT, k_, x, ctx);
    }

    bool univariate() const override { return k_ == 1; }

    std::string describe() const override {
        return "martingale component " + std::to_string(k_);
    }

    // E[T | X_1..X_j = x_1..x_j]; j = 0 gives E[T], j = n gives T(x).
    double conditional_mean(int j, std::span<const double> x, EvalContext* ctx) const {
        const int n = static_cast<int>(shared_->dists.size());
        if (j <= 0) return shared_->mean;
        if (j >= n) return shared_->statistic.eval(x);
        if (ctx) {
            std::pair<int, std::vector<double>> key(j, std::vector<double>(x.begin(), x.begin() + j));
            auto it = ctx->conditional_means.find(key);
            if (it != ctx->conditional_means.end()) return it->second;
            double v = inner_expectation(
                [this](std::span<const double> p) { return shared_->statistic.eval(p); }, j, x, ctx);
            ctx->conditional_means.emplace(std::move(key), v);
            return v;
        }
        return inner_expectation(
            [this](std::span<const double> p) { return shared_->statistic.eval(p); }, j, x, nullptr);
    }

  private:
    template <class F>
    double inner_expectation(const F& f, int j, std::span<const double> x, EvalContext* ctx) const {
        const int n = static_cast<int>(shared_->dists.size());
        const int free_dims = n - j;
        std::vector<double> point(x.begin(), x.end());
        if (free_dims == 0) return f(std::span<const double>(point));
        if (free_dims > kMaxTensorDims) return inner_monte_carlo(f, j, point, ctx);

        const int order = shared_->quad_order;
        std::size_t total = 1;
        for (int d = 0; d < free_dims; ++d) total *= static_cast<std::size_t>(order);
        std::vector<std::size_t> digit(static_cast<std::size_t>(free_dims), 0);
        KahanSum acc;
        for (std::size_t idx = 0; idx < total; ++idx) {
            double w = 1.0;
            for (int d = 0; d < free_dims; ++d) {
                const auto& nd = shared_->nodes[static_cast<std::size_t>(j + d)];
                point[static_cast<std::size_t>(j + d)] = nd.y[digit[static_cast<std::size_t>(d)]];
                w *= nd.wp[digit[static_cast<std::size_t>(d)]];
            }
            acc.add(w * f(std::span<const double>(point)));
            for (int d = free_dims - 1; d >= 0; --d) {
                if (++digit[static_cast<std::size_t>(d)] < static_cast<std::size_t>(order)) break;
                digit[static_cast<std::size_t>(d)] = 0;
            }
        }
        double mass = 1.0;
        for (int d = 0; d < free_dims; ++d) mass *= shared_->nodes[static_cast<std::size_t>(j + d)].mass;
        return acc.value() / mass;
    }

    template <class F>
    double inner_monte_carlo(const F& f, int j, std::vector<double>& point, EvalContext* ctx) const {
        const int n = static_cast<int>(shared_->dists.size());
        std::uint64_t prefix_hash =
            detail::hash_doubles(std::span<const double>(point.data(), static_cast<std::size_t>(j)),
                                 static_cast<std::uint64_t>(j));
        const std::size_t m = shared_->mc_inner_samples;
        KahanSum acc, acc_sq;
        std::vector<RandomStream> streams;
        streams.reserve(static_cast<std::size_t>(n - j));
        for (int d = j; d < n; ++d)
            streams.emplace_back(shared_->inner_seed,
                                 substream_id(StreamPurpose::inner_conditional, prefix_hash,
                                              static_cast<std::uint64_t>(d)));
        for (std::size_t i = 0; i < m; ++i) {
            for (int d = j; d < n; ++d)
                point[static_cast<std::size_t>(d)] =
                    shared_->dists[static_cast<std::size_t>(d)].sample(streams[static_cast<std::size_t>(d - j)]);
            double v = f(std::span<const double>(point));
            acc.add(v);
            acc_sq.add(v * v);
        }
        double mean = acc.value() / static_cast<double>(m);
        double var = std::max(0.0, acc_sq.value() / static_cast<double>(m) - mean * mean);
        if (ctx) ctx->max_inner_se = std::max(ctx->max_inner_se, std::sqrt(var / static_cast<double>(m)));
        return mean;
    }

    std::shared_ptr<const MartingaleShared> shared_;
    int k_;
};

// A decomposition h_1..h_m of T: sum of components recovers T - E[T] and
// every component is conditionally centered in its active coordinate.
class Decomposition {
  public:
    enum class Source { explicit_, martingale };

    static Decomposition explicit_components(std::vector<std::pair<Expr, int>> comps) {
        if (comps.empty()) throw domain_error("decomposition: need at least one component");
        Decomposition d;
        d.source_ = Source::explicit_;
        for (auto& [expr, coord] : comps)
            d.components_.push_back(std::make_unique<ExplicitComponent>(std::move(expr), coord));
        return d;
    }

    static Decomposition martingale(const Expr& statistic, const std::vector<Distribution>& dists,
                                    int quad_order = 32, std::uint64_t seed = 0) {
        if (dists.empty()) throw domain_error("decomposition: need at least one distribution");
        if (statistic.dimension() != static_cast<int>(dists.size()))
            throw domain_error("decomposition: statistic dimension does not match input count");
        auto shared = std::make_shared<MartingaleShared>();
        shared->statistic = statistic;
        shared->dists = dists;
        shared->quad_order = quad_order;
        shared->inner_seed = seed;
        for (const auto& dist : dists) shared->nodes.push_back(detail::weighted_nodes(dist, quad_order));
        shared->mean = expected_value(statistic, dists, seed);
        Decomposition d;
        d.source_ = Source::martingale;
        for (int k = 1; k <= static_cast<int>(dists.size()); ++k)
            d.components_.push_back(std::make_unique<MartingaleComponent>(shared, k));
        return d;
    }

    Source source() const { return source_; }
    std::size_t size() const { return components_.size(); }
    const Component& component(std::size_t i) const { return *components_[i]; }

  private:
    Decomposition() = default;
    Source source_ = Source::explicit_;
    std::vector<std::unique_ptr<Component>> components_;
};

// Single martingale component value; the conditional expectations run at
// quad_order nodes per free coordinate.
inline double martingale_component_value(const Expr& statistic,
                                         const std::vector<Distribution>& dists, int k,
                                         std::span<const double> x, int quad_order = 32) {
    if (k < 1 || k > static_cast<int>(dists.size()))
        throw domain_error("martingale_component_value: k out of range");
    Decomposition d = Decomposition::martingale(statistic, dists, quad_order);
    EvalContext ctx;
    return d.component(static_cast<std::size_t>(k - 1)).eval(x, &ctx);
}

struct ValidationReport {
    double max_sum_residual = 0.0;       // max |sum h_k - (T - E[T])| over samples
    double max_conditional_mean = 0.0;   // max_k max over conditioning points |E_k[h_k]|
    std::vector<double> second_moments;  // sample E|h_k|^2
    double statistic_mean = 0.0;
    double tol = 0.0;
    bool passed = false;

    std::string summary() const {
        std::string s = "sum residual " + std::to_string(max_sum_residual) +
                        ", conditional mean " + std::to_string(max_conditional_mean) +
                        ", second moments";
        for (double m : second_moments) s += " " + std::to_string(m);
        s += passed ? " -> pass" : " -> FAIL";
        return s;
    }
};

// Checks the decomposition conditions on random samples: the telescoping
// identity, conditional centering at random conditioning points, and finite
// second moments.
inline ValidationReport validate(const Decomposition& decomp, const Expr& statistic,
                                 const std::vector<Distribution>& dists, std::size_t samples,
                                 double tol, std::uint64_t seed = 0) {
    if (samples < 1000) throw domain_error("validate: need at least 10^3 samples");
    const int n = static_cast<int>(dists.size());
    if (statistic.dimension() != n)
        throw domain_error("validate: statistic dimension does not match input count");

    ValidationReport report;
    report.tol = tol;
    report.statistic_mean = expected_value(statistic, dists, seed);
    const std::size_t m = decomp.size();

    std::vector<RandomStream> streams;
    for (int j = 0; j < n; ++j)
        streams.emplace_back(seed, substream_id(StreamPurpose::validation, static_cast<std::uint64_t>(j)));

    std::vector<double> x(static_cast<std::size_t>(n));
    std::vector<KahanSum> sq(m);
    for (std::size_t i = 0; i < samples; ++i) {
        for (int j = 0; j < n; ++j) {
            streams[static_cast<std::size_t>(j)].jump_to(i);
            x[static_cast<std::size_t>(j)] = dists[static_cast<std::size_t>(j)].sample(streams[static_cast<std::size_t>(j)]);
        }
        EvalContext ctx;
        double sum = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            double h = decomp.component(c).eval(x, &ctx);
            if (!std::isfinite(h))
                throw numerical_error("validate: component " + std::to_string(c + 1) +
                                      " is non-finite at a sample point");
            sum += h;
            sq[c].add(h * h);
        }
        double residual = std::fabs(sum - (statistic.eval(x) - report.statistic_mean));
        report.max_sum_residual = std::max(report.max_sum_residual, residual);
    }
    for (std::size_t c = 0; c < m; ++c)
        report.second_moments.push_back(sq[c].value() / static_cast<double>(samples));

    // E_k[h_k] at random conditioning points: freeze the other coordinates,
    // integrate over the active one.
    const int conditioning_points = 100;
    for (std::size_t c = 0; c < m; ++c) {
        const Component& comp = decomp.component(c);
        const int k = comp.active_coord();
        const Distribution& dk = dists[static_cast<std::size_t>(k - 1)];
        for (int pt = 0; pt < conditioning_points; ++pt) {
            for (int j = 0; j < n; ++j) {
                streams[static_cast<std::size_t>(j)].jump_to(samples + static_cast<std::size_t>(pt));
                x[static_cast<std::size_t>(j)] = dists[static_cast<std::size_t>(j)].sample(streams[static_cast<std::size_t>(j)]);
            }
            EvalContext ctx;
            std::vector<double> point(x);
            auto integrand = [&](double y) {
                point[static_cast<std::size_t>(k - 1)] = y;
                return comp.eval(point, &ctx) * dk.pdf(y);
            };
            double ek = integrate(integrand, dk.lower_trunc(), dk.upper_trunc()).value;
            report.max_conditional_mean = std::max(report.max_conditional_mean, std::fabs(ek));
        }
    }

    bool finite = true;
    for (double s2 : report.second_moments) finite = finite && std::isfinite(s2);
    report.passed = finite && report.max_sum_residual <= tol && report.max_conditional_mean <= tol;
    return report;
}

}  // namespace stein
