// stein_density: batch front end for the Stein-kernel density toolkit.
//
// Subcommands:
//   theta    --config cfg.json                 binned estimate of theta(t)
//   density  --config cfg.json [--force]       existence verdict + density CSV
//   identity --config cfg.json --g "<expr>"    Monte Carlo check of E[g(T)T] = E[g'(T)Theta]
//   compare  --config cfg.json --reference R   reconstructed density vs a closed form
//   cov      --config cfg.json --alpha A --beta B   Cuadras covariance vs Monte Carlo
//
// Exit codes: 0 success, 2 config/validation, 3 numerical, 4 existence rejected.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stein/stein.hpp"

namespace fs = std::filesystem;
using namespace stein;

namespace {

std::string join_path(const std::string& dir, const std::string& file) {
    return (fs::path(dir) / file).string();
}

struct ReferenceSpec {
    std::string name;
    std::vector<double> params;
};

ReferenceSpec parse_reference(const std::string& text) {
    ReferenceSpec spec;
    auto colon = text.find(':');
    spec.name = text.substr(0, colon);
    if (colon != std::string::npos) {
        std::stringstream ss(text.substr(colon + 1));
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                spec.params.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw domain_error("reference parameter '" + tok + "' is not a number");
            }
        }
    }
    return spec;
}

int cmd_theta(const RunConfig& cfg, const std::string& out_dir) {
    PipelineRun run = run_estimation(cfg);
    csv::write_file(join_path(out_dir, cfg.outputs.theta), theta_csv(run.estimate));
    std::cout << "bins: " << run.estimate.bins() << "  theta mean: " << run.estimate.global_mean
              << "\nwrote " << join_path(out_dir, cfg.outputs.theta) << "\n";
    return 0;
}

int cmd_density(const RunConfig& cfg, const std::string& out_dir, bool force) {
    PipelineRun run = run_estimation(cfg, 0, /*want_density=*/true, force);
    std::string report = existence_report(run);
    csv::write_file(join_path(out_dir, cfg.outputs.report), report);
    std::cout << report;
    if (run.verdict.verdict == ExistenceVerdict::Kind::rejected && !force) {
        std::cout << "density rejected; no density file emitted (use --force to override)\n";
        return 4;
    }
    if (run.density) {
        csv::write_file(join_path(out_dir, cfg.outputs.density), density_csv(*run.density));
        std::cout << "wrote " << join_path(out_dir, cfg.outputs.density) << "\n";
    }
    return 0;
}

int cmd_identity(const RunConfig& cfg, const std::string& g_text) {
    Expr g = Expr::parse(g_text, 1);
    Expr statistic = build_statistic(cfg);
    std::vector<Distribution> dists = build_distributions(cfg);
    Decomposition decomp = build_decomposition(cfg, statistic, dists);
    if (!cfg.decomposition.martingale) {
        ValidationReport v = validate(decomp, statistic, dists, cfg.decomposition.validation_samples,
                                      cfg.decomposition.validation_tol, cfg.mc.seed);
        if (!v.passed) throw domain_error("decomposition failed validation: " + v.summary());
    }
    IdentityReport rep = stein_identity_check(statistic, decomp, dists, g, cfg.mc.samples, cfg.mc.seed);
    std::printf("lhs  E[g(T)T]        = %.10g  (se %.3g)\n", rep.lhs, rep.se_lhs);
    std::printf("rhs  E[g'(T)Theta]   = %.10g  (se %.3g)\n", rep.rhs, rep.se_rhs);
    std::printf("|lhs-rhs| = %.3g  vs  3(se_l+se_r) = %.3g  -> %s\n", std::fabs(rep.lhs - rep.rhs),
                3.0 * (rep.se_lhs + rep.se_rhs), rep.passed ? "pass" : "FAIL");
    return 0;
}

int cmd_cov(const RunConfig& cfg, const std::string& alpha_text, const std::string& beta_text) {
    if (cfg.variables.empty()) throw domain_error("cov: config declares no variables");
    std::vector<Distribution> dists = build_distributions(cfg);
    const Distribution& d = dists.front();
    Expr alpha = Expr::parse(alpha_text, 1);
    Expr beta = Expr::parse(beta_text, 1);
    double kernel_value = cuadras_cov(d, alpha, beta);

    RandomStream stream(cfg.mc.seed, substream_id(StreamPurpose::covariance));
    const std::size_t n = cfg.mc.samples;
    std::vector<double> av(n), bv(n);
    for (std::size_t i = 0; i < n; ++i) {
        double x = d.sample(stream);
        av[i] = alpha.eval1(x);
        bv[i] = beta.eval1(x);
    }
    double ma = mean(av), mb = mean(bv);
    std::vector<double> prod(n);
    for (std::size_t i = 0; i < n; ++i) prod[i] = (av[i] - ma) * (bv[i] - mb);
    double mc_cov = pairwise_sum(prod) / static_cast<double>(n - 1);
    double se = standard_error(prod);

    std::printf("kernel quadrature Cov = %.10g\n", kernel_value);
    std::printf("monte carlo Cov       = %.10g  (se %.3g, n %zu)\n", mc_cov, se, n);
    std::printf("difference            = %.3g\n", std::fabs(kernel_value - mc_cov));
    return 0;
}

int cmd_compare(const RunConfig& cfg, const std::string& out_dir, const std::string& ref_text) {
    ReferenceSpec ref = parse_reference(ref_text);

    if (ref.name == "uif") {
        if (ref.params.size() != 1) throw domain_error("reference uif needs one parameter: uif:<n>");
        int n = static_cast<int>(ref.params[0]);
        // identity table from the closed-form Irwin-Hall density
        DensityEstimate pz = density_from_function(
            [n](double t) { return irwin_hall_pdf(n, t + 0.5 * n); }, -0.5 * n, 0.5 * n, 4001,
            0.5 * n);
        std::string out = "x,rhs,oracle,oracle_se\n";
        std::cout << "identity E[sum X_k^2 | sum X_k = x]  (n = " << n << ")\n";
        for (double x : {0.5, 1.0, 1.5}) {
            if (!(x < n)) continue;
            double rhs = conditional_identity_rhs(pz, x);
            OracleEstimate oracle = uif_lhs_oracle(n, x, cfg.mc.samples, cfg.mc.seed);
            out += csv::fmt(x) + "," + csv::fmt(rhs) + "," + csv::fmt(oracle.value) + "," +
                   csv::fmt(oracle.se) + "\n";
            std::printf("  x = %.2f: rhs %.6f  oracle %.6f (se %.2g)  diff %.2g\n", x, rhs,
                        oracle.value, oracle.se, std::fabs(rhs - oracle.value));
        }
        csv::write_file(join_path(out_dir, cfg.outputs.compare), out);
        return 0;
    }

    PipelineRun run = run_estimation(cfg, 0, /*want_density=*/true);
    if (!run.density) throw existence_error("compare: no density (verdict " + run.verdict.to_string() + ")");
    const DensityEstimate& dens = *run.density;

    auto report_distance = [&](auto&& reference, bool shifted) {
        auto [l1, linf] = density_distance(dens, reference, shifted);
        std::printf("L1 distance = %.6f   Linf distance = %.6f\n", l1, linf);
        std::string out = "x,reconstructed,reference\n";
        for (std::size_t i = 0; i < dens.grid.size(); ++i) {
            double x = shifted ? dens.grid[i] + dens.center_shift : dens.grid[i];
            out += csv::fmt(x) + "," + csv::fmt(dens.pdf_values[i]) + "," +
                   csv::fmt(reference(x)) + "\n";
        }
        csv::write_file(join_path(out_dir, cfg.outputs.compare), out);
    };

    if (ref.name == "chi_square") {
        if (ref.params.size() != 1)
            throw domain_error("reference chi_square needs one parameter: chi_square:<k>");
        double k = ref.params[0];
        report_distance([k](double x) { return chi_square_pdf(k, x); }, /*shifted=*/true);
        return 0;
    }
    if (ref.name == "irwin_hall") {
        if (ref.params.size() != 1)
            throw domain_error("reference irwin_hall needs one parameter: irwin_hall:<n>");
        int n = static_cast<int>(ref.params[0]);
        report_distance([n](double x) { return irwin_hall_pdf(n, x); }, /*shifted=*/true);
        return 0;
    }
    if (ref.name == "normal") {
        double sigma = ref.params.empty() ? 1.0 : ref.params[0];
        if (!(sigma > 0.0)) throw domain_error("reference normal needs sigma > 0");
        report_distance([sigma](double x) { return normal_pdf(x / sigma) / sigma; },
                        /*shifted=*/false);
        return 0;
    }
    if (ref.name == "curie_weiss") {
        if (ref.params.size() < 3)
            throw domain_error("reference curie_weiss needs curie_weiss:<s>,<sigma>,<alpha...>");
        int s = static_cast<int>(ref.params[0]);
        double sigma = ref.params[1];
        std::vector<double> alphas(ref.params.begin() + 2, ref.params.end());
        double alpha_min = *std::min_element(alphas.begin(), alphas.end());
        double alpha_max = *std::max_element(alphas.begin(), alphas.end());
        double beta = sigma * sigma * std::accumulate(alphas.begin(), alphas.end(), 0.0);
        auto lo_fn = [&](double t) { return 2.0 * s * sigma * sigma * alpha_min * (t + beta); };
        auto hi_fn = [&](double t) { return 2.0 * s * sigma * sigma * alpha_max * (t + beta); };
        // restrict to the part of the grid where the envelopes are defined
        DensityEstimate clipped = dens;
        std::size_t first = 0;
        while (first < clipped.grid.size() && !(clipped.grid[first] + beta > 1e-9)) ++first;
        clipped.grid.erase(clipped.grid.begin(), clipped.grid.begin() + static_cast<long>(first));
        clipped.pdf_values.erase(clipped.pdf_values.begin(),
                                 clipped.pdf_values.begin() + static_cast<long>(first));
        DensityBounds env = bounds(lo_fn, hi_fn, clipped);
        // the sandwich is asserted where theta-hat is data-backed; outside the
        // trimmed sample range the estimate is clamped extrapolation
        std::vector<double> sorted_t = run.batch.t_values;
        std::sort(sorted_t.begin(), sorted_t.end());
        double data_lo = sample_quantile(sorted_t, cfg.grid.quantile_trim);
        double data_hi = sample_quantile(sorted_t, 1.0 - cfg.grid.quantile_trim);
        std::size_t violations = 0;
        std::string out = "x,reconstructed,lower,upper\n";
        for (std::size_t i = 0; i < env.grid.size(); ++i) {
            double p = clipped.pdf_values[i];
            double tolerance = 1e-9 + 0.03 * std::max(p, env.upper[i]);
            bool backed = env.grid[i] >= data_lo && env.grid[i] <= data_hi;
            if (backed && (p < env.lower[i] - tolerance || p > env.upper[i] + tolerance))
                ++violations;
            out += csv::fmt(env.grid[i] + dens.center_shift) + "," + csv::fmt(p) + "," +
                   csv::fmt(env.lower[i]) + "," + csv::fmt(env.upper[i]) + "\n";
        }
        csv::write_file(join_path(out_dir, cfg.outputs.compare), out);
        std::printf("envelope sandwich: %zu / %zu grid points outside the band\n", violations,
                    env.grid.size());
        std::printf("%s\n", violations == 0 ? "pass" : "FAIL");
        return 0;
    }
    throw domain_error("unknown reference '" + ref.name +
                       "' (expected chi_square, irwin_hall, normal, curie_weiss, uif)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stein-kernel density toolkit for nonlinear statistics"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", g_text = "x1", reference, alpha_text = "x1",
                beta_text = "x1";
    bool force = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--out-dir", out_dir, "output directory (default .)");
    };
    CLI::App* theta = app.add_subcommand("theta", "binned estimate of theta(t) = E[Theta|T=t]");
    add_common(theta);
    CLI::App* density = app.add_subcommand("density", "existence verdict and density reconstruction");
    add_common(density);
    density->add_flag("--force", force, "reconstruct even when the verdict is rejected");
    CLI::App* identity = app.add_subcommand("identity", "Monte Carlo check of the Stein identity");
    add_common(identity);
    identity->add_option("--g", g_text, "test function g(x1)")->required();
    CLI::App* compare = app.add_subcommand("compare", "compare against a closed-form reference");
    add_common(compare);
    compare->add_option("--reference", reference, "chi_square:<k> | irwin_hall:<n> | normal:<sigma> | curie_weiss:<s>,<sigma>,<alphas...> | uif:<n>")
        ->required();
    CLI::App* cov = app.add_subcommand("cov", "Cuadras covariance formula vs Monte Carlo");
    add_common(cov);
    cov->add_option("--alpha", alpha_text, "one-variable expression alpha(x1)")->required();
    cov->add_option("--beta", beta_text, "one-variable expression beta(x1)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = load_config(config_path);
        if (theta->parsed()) return cmd_theta(cfg, out_dir);
        if (density->parsed()) return cmd_density(cfg, out_dir, force);
        if (identity->parsed()) return cmd_identity(cfg, g_text);
        if (compare->parsed()) return cmd_compare(cfg, out_dir, reference);
        if (cov->parsed()) return cmd_cov(cfg, alpha_text, beta_text);
    } catch (const existence_error& e) {
        std::cerr << "existence error: " << e.what() << "\n";
        return 4;
    } catch (const domain_error& e) {
        std::cerr << "config/validation error: " << e.what() << "\n";
        return 2;
    } catch (const error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
