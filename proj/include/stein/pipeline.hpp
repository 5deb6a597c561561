#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "stein/conditional.hpp"
#include "stein/config.hpp"
#include "stein/csv.hpp"
#include "stein/density.hpp"
#include "stein/kernel.hpp"

namespace stein {

// Sample quantile by linear interpolation on the sorted copy.
inline double sample_quantile(std::vector<double> sorted, double q) {
    if (sorted.empty()) throw domain_error("sample_quantile: empty sample");
    double pos = q * static_cast<double>(sorted.size() - 1);
    auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    double w = pos - static_cast<double>(lo);
    return (1.0 - w) * sorted[lo] + w * sorted[lo + 1];
}

// Everything a run produces; the CLI commands are thin wrappers over this.
struct PipelineRun {
    SampleBatch batch;
    ConditionalEstimate estimate;
    ExistenceVerdict verdict;
    std::optional<DensityEstimate> density;
    ValidationReport validation;  // meaningful for explicit decompositions
    bool validated = false;
};

// Collect (T, Theta) pairs and the binned estimate. Explicit decompositions
// are validated first; a failing validation aborts the run.
inline PipelineRun run_estimation(const RunConfig& cfg, int workers = 0,
                                  bool want_density = false, bool force_density = false) {
    Expr statistic = build_statistic(cfg);
    std::vector<Distribution> dists = build_distributions(cfg);
    Decomposition decomp = build_decomposition(cfg, statistic, dists);

    PipelineRun run;
    if (!cfg.decomposition.martingale) {
        run.validation = validate(decomp, statistic, dists, cfg.decomposition.validation_samples,
                                  cfg.decomposition.validation_tol, cfg.mc.seed);
        run.validated = true;
        if (!run.validation.passed)
            throw domain_error("decomposition failed validation: " + run.validation.summary());
    }

    run.batch = collect(statistic, decomp, dists, cfg.mc.samples, cfg.mc.seed, workers);
    run.estimate = estimate_theta(run.batch, cfg.mc.bins);
    run.verdict = check_existence(run.estimate);

    if (want_density) {
        if (run.verdict.verdict == ExistenceVerdict::Kind::rejected && !force_density) return run;
        std::vector<double> sorted = run.batch.t_values;
        std::sort(sorted.begin(), sorted.end());
        double lo = sample_quantile(sorted, cfg.grid.quantile_trim);
        double hi = sample_quantile(sorted, 1.0 - cfg.grid.quantile_trim);
        const ConditionalEstimate& est = run.estimate;
        if (force_density) {
            // a forced reconstruction covers only the region where theta-hat
            // clears the noise floor (the flagged bins cannot carry a density)
            for (std::size_t b = 0; b < est.bins(); ++b) {
                if (est.raw_means[b] > 3.0 * est.bin_se[b] && est.raw_means[b] > 0.0) {
                    lo = std::max(lo, est.bin_t_mean[b]);
                    break;
                }
            }
            if (!(lo < hi)) throw existence_error("force: no region with positive theta");
        }
        ReconstructOptions opt;
        opt.center_shift = run.batch.statistic_mean;
        run.density = reconstruct([&est](double t) { return est.evaluate(t).value; }, lo, hi,
                                  cfg.grid.points, opt);
    }
    return run;
}

// CSV schema of the `theta` command.
inline std::string theta_csv(const ConditionalEstimate& est) {
    std::string out = "bin_lo,bin_hi,t_mid,theta_mean,theta_se,count\n";
    for (std::size_t b = 0; b < est.bins(); ++b) {
        out += csv::fmt(est.bin_edges[b]) + "," + csv::fmt(est.bin_edges[b + 1]) + "," +
               csv::fmt(est.bin_t_mean[b]) + "," + csv::fmt(est.bin_means[b]) + "," +
               csv::fmt(est.bin_se[b]) + "," + std::to_string(est.counts[b]) + "\n";
    }
    return out;
}

// CSV schema of the `density` command: centered pdf plus the un-centered
// density evaluated at the same abscissa.
inline std::string density_csv(const DensityEstimate& d) {
    std::string out = "x,pdf,pdf_shifted\n";
    for (std::size_t i = 0; i < d.grid.size(); ++i) {
        out += csv::fmt(d.grid[i]) + "," + csv::fmt(d.pdf_values[i]) + "," +
               csv::fmt(d.shifted_value_at(d.grid[i])) + "\n";
    }
    return out;
}

inline std::string existence_report(const PipelineRun& run) {
    std::string out;
    out += "verdict: " + run.verdict.to_string() + "\n";
    out += "mass_at_risk: " + csv::fmt(run.verdict.mass_at_risk) + "\n";
    if (run.density) out += "c: " + csv::fmt(run.density->c) + "\n";
    out += "statistic_mean: " + csv::fmt(run.batch.statistic_mean) + "\n";
    out += "theta_global_mean: " + csv::fmt(run.estimate.global_mean) + "\n";
    if (run.estimate.any_clipped) out += "note: negative bin means were clipped to 0\n";
    if (run.density && run.density->theta_floored)
        out += "note: theta was floored inside the reconstruction integrand\n";
    for (const auto& [lo, hi] : run.verdict.zero_regions)
        out += "zero_region: [" + csv::fmt(lo) + ", " + csv::fmt(hi) + "]\n";
    return out;
}

}  // namespace stein
