#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stein/decomposition.hpp"
#include "stein/distribution.hpp"
#include "stein/errors.hpp"
#include "stein/expr.hpp"

namespace stein {

// Run configuration (JSON file, schema documented in the README).
struct RunConfig {
    int dimension = 0;
    std::string statistic;

    struct VariableDecl {
        std::string kind;  // uniform | std_normal | curie_weiss | tabulated
        double a = 0.0, b = 1.0;
        int s = 1;
        double sigma = 1.0;
        std::vector<double> grid, pdf;
    };
    std::vector<VariableDecl> variables;

    struct DecompositionDecl {
        bool martingale = true;
        int quad_order = 32;
        double validation_tol = 1e-6;
        std::size_t validation_samples = 2000;
        std::vector<std::pair<std::string, int>> components;  // expr, active coord
    };
    DecompositionDecl decomposition;

    struct MonteCarlo {
        std::size_t samples = 100'000;
        std::uint64_t seed = 1;
        std::size_t bins = 0;  // 0 = automatic
    };
    MonteCarlo mc;

    struct Grid {
        std::size_t points = 512;
        double quantile_trim = 0.005;
    };
    Grid grid;

    struct Outputs {
        std::string theta = "theta.csv";
        std::string density = "density.csv";
        std::string compare = "compare.csv";
        std::string report = "report.txt";
    };
    Outputs outputs;
};

namespace detail {

template <class T>
T json_get(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw domain_error(std::string("config field '") + key + "': " + e.what());
    }
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
    RunConfig cfg;
    try {
        if (!j.contains("dimension") || !j.contains("statistic") || !j.contains("variables"))
            throw domain_error("config requires 'dimension', 'statistic' and 'variables'");
        cfg.dimension = j.at("dimension").get<int>();
        if (cfg.dimension < 1) throw domain_error("config: dimension must be >= 1");
        cfg.statistic = j.at("statistic").get<std::string>();

        for (const auto& v : j.at("variables")) {
            RunConfig::VariableDecl decl;
            decl.kind = v.at("kind").get<std::string>();
            decl.a = detail::json_get(v, "a", 0.0);
            decl.b = detail::json_get(v, "b", 1.0);
            decl.s = detail::json_get(v, "s", 1);
            decl.sigma = detail::json_get(v, "sigma", 1.0);
            decl.grid = detail::json_get(v, "grid", std::vector<double>{});
            decl.pdf = detail::json_get(v, "pdf", std::vector<double>{});
            cfg.variables.push_back(std::move(decl));
        }
        if (static_cast<int>(cfg.variables.size()) != cfg.dimension)
            throw domain_error("config: 'variables' must declare exactly 'dimension' laws");

        if (j.contains("decomposition")) {
            const auto& d = j.at("decomposition");
            std::string mode = detail::json_get<std::string>(d, "mode", "martingale");
            if (mode == "martingale") {
                cfg.decomposition.martingale = true;
            } else if (mode == "explicit") {
                cfg.decomposition.martingale = false;
                if (!d.contains("components"))
                    throw domain_error("config: explicit decomposition needs 'components'");
                for (const auto& c : d.at("components"))
                    cfg.decomposition.components.emplace_back(c.at("expr").get<std::string>(),
                                                              c.at("coord").get<int>());
                if (cfg.decomposition.components.empty())
                    throw domain_error("config: explicit decomposition needs at least one component");
            } else {
                throw domain_error("config: decomposition mode must be martingale or explicit");
            }
            cfg.decomposition.quad_order = detail::json_get(d, "quad_order", 32);
            cfg.decomposition.validation_tol = detail::json_get(d, "validation_tol", 1e-6);
            cfg.decomposition.validation_samples =
                detail::json_get<std::size_t>(d, "validation_samples", 2000);
        }

        if (j.contains("mc")) {
            const auto& m = j.at("mc");
            cfg.mc.samples = detail::json_get<std::size_t>(m, "samples", cfg.mc.samples);
            cfg.mc.seed = detail::json_get<std::uint64_t>(m, "seed", cfg.mc.seed);
            cfg.mc.bins = detail::json_get<std::size_t>(m, "bins", cfg.mc.bins);
        }
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            cfg.grid.points = detail::json_get<std::size_t>(g, "points", cfg.grid.points);
            cfg.grid.quantile_trim = detail::json_get(g, "quantile_trim", cfg.grid.quantile_trim);
            if (!(cfg.grid.quantile_trim > 0.0 && cfg.grid.quantile_trim < 0.5))
                throw domain_error("config: quantile_trim must lie in (0, 0.5)");
        }
        if (j.contains("outputs")) {
            const auto& o = j.at("outputs");
            cfg.outputs.theta = detail::json_get<std::string>(o, "theta", cfg.outputs.theta);
            cfg.outputs.density = detail::json_get<std::string>(o, "density", cfg.outputs.density);
            cfg.outputs.compare = detail::json_get<std::string>(o, "compare", cfg.outputs.compare);
            cfg.outputs.report = detail::json_get<std::string>(o, "report", cfg.outputs.report);
        }
    } catch (const nlohmann::json::exception& e) {
        throw domain_error(std::string("config: ") + e.what());
    }
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw domain_error("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw domain_error("config is not valid JSON: " + std::string(e.what()));
    }
    return parse_config(j);
}

inline std::vector<Distribution> build_distributions(const RunConfig& cfg) {
    std::vector<Distribution> out;
    for (const auto& v : cfg.variables) {
        if (v.kind == "uniform")
            out.push_back(Distribution::uniform(v.a, v.b));
        else if (v.kind == "std_normal")
            out.push_back(Distribution::std_normal());
        else if (v.kind == "curie_weiss")
            out.push_back(Distribution::curie_weiss(v.s, v.sigma));
        else if (v.kind == "tabulated")
            out.push_back(Distribution::tabulated(v.grid, v.pdf));
        else
            throw domain_error("config: unknown distribution kind '" + v.kind + "'");
    }
    return out;
}

inline Expr build_statistic(const RunConfig& cfg) {
    Expr T = Expr::parse(cfg.statistic, cfg.dimension);
    auto used = T.variables_used();
    int max_used = used.empty() ? 0 : used.back();
    if (max_used != cfg.dimension)
        throw domain_error("config: dimension is " + std::to_string(cfg.dimension) +
                           " but the statistic uses variables up to x" + std::to_string(max_used));
    return T;
}

inline Decomposition build_decomposition(const RunConfig& cfg, const Expr& statistic,
                                         const std::vector<Distribution>& dists) {
    if (cfg.decomposition.martingale)
        return Decomposition::martingale(statistic, dists, cfg.decomposition.quad_order,
                                         cfg.mc.seed);
    std::vector<std::pair<Expr, int>> comps;
    for (const auto& [text, coord] : cfg.decomposition.components) {
        if (coord < 1 || coord > cfg.dimension)
            throw domain_error("config: component coordinate " + std::to_string(coord) +
                               " out of range");
        comps.emplace_back(Expr::parse(text, cfg.dimension), coord);
    }
    return Decomposition::explicit_components(std::move(comps));
}

}  // namespace stein
