// End-to-end checks of the CLI: exit codes, output files, CSV schemas.
// Usage: cli_integration <path-to-cli>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int failures = 0;

void expect(bool ok, const std::string& what) {
    std::printf("[%s] %s\n", ok ? "ok" : "FAIL", what.c_str());
    if (!ok) ++failures;
}

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run(const std::string& cmd) {
    RunResult r;
    std::string full = cmd + " 2>&1";
    FILE* pipe = popen(full.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    while (fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
    int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

std::string first_line(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

// L1 distance between two columns of a compare.csv (x, a, b)
double csv_l1(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> xs, diff;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string tok;
        std::vector<double> row;
        while (std::getline(ss, tok, ',')) row.push_back(std::stod(tok));
        if (row.size() < 3) continue;
        xs.push_back(row[0]);
        diff.push_back(std::fabs(row[1] - row[2]));
    }
    double l1 = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i)
        l1 += 0.5 * (diff[i] + diff[i - 1]) * (xs[i] - xs[i - 1]);
    return l1;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: cli_integration <cli-path>\n");
        return 2;
    }
    std::string cli = std::string("\"") + argv[1] + "\"";
    fs::path work = fs::absolute("cli_integration_work");
    fs::remove_all(work);
    fs::create_directories(work);

    const std::string uniform_sum_cfg = R"json({
        "dimension": 3,
        "statistic": "x1 + x2 + x3",
        "variables": [{"kind": "uniform"}, {"kind": "uniform"}, {"kind": "uniform"}],
        "decomposition": {"mode": "explicit", "components": [
            {"expr": "x1 - 0.5", "coord": 1},
            {"expr": "x2 - 0.5", "coord": 2},
            {"expr": "x3 - 0.5", "coord": 3}]},
        "mc": {"samples": 100000, "seed": 5}
    })json";
    write_file(work / "usum.json", uniform_sum_cfg);

    const std::string cw_cfg = R"json({
        "dimension": 2,
        "statistic": "x1^2 + x2^2",
        "variables": [{"kind": "curie_weiss", "s": 1, "sigma": 1.0},
                      {"kind": "curie_weiss", "s": 1, "sigma": 1.0}],
        "decomposition": {"mode": "explicit", "components": [
            {"expr": "x1^2 - 1", "coord": 1},
            {"expr": "x2^2 - 1", "coord": 2}]},
        "mc": {"samples": 100000, "seed": 9}
    })json";
    write_file(work / "cw.json", cw_cfg);

    const std::string atom_cfg = R"json({
        "dimension": 1,
        "statistic": "max(x1, 0.5)",
        "variables": [{"kind": "uniform"}],
        "mc": {"samples": 50000, "seed": 3}
    })json";
    write_file(work / "atom.json", atom_cfg);

    const std::string bad_cfg = R"json({
        "dimension": 1,
        "statistic": "x1 +* 2",
        "variables": [{"kind": "uniform"}],
        "mc": {"samples": 20000, "seed": 3}
    })json";
    write_file(work / "bad.json", bad_cfg);

    std::string out = " --out-dir \"" + work.string() + "\"";

    // theta: exit 0 and the documented header
    RunResult theta = run(cli + " theta --config \"" + (work / "usum.json").string() + "\"" + out);
    expect(theta.exit_code == 0, "theta exits 0");
    expect(first_line(work / "theta.csv") == "bin_lo,bin_hi,t_mid,theta_mean,theta_se,count",
           "theta.csv header matches the schema");

    // malformed expression: exit 2 with a parse position
    RunResult bad = run(cli + " theta --config \"" + (work / "bad.json").string() + "\"" + out);
    expect(bad.exit_code == 2, "malformed statistic exits 2");
    expect(bad.output.find("position") != std::string::npos, "parse error reports a position");

    // missing config: exit 2
    RunResult missing = run(cli + " theta --config \"" + (work / "nope.json").string() + "\"" + out);
    expect(missing.exit_code == 2, "missing config exits 2");

    // density on an atomic statistic: exit 4, no density file
    fs::remove(work / "density.csv");
    RunResult atom = run(cli + " density --config \"" + (work / "atom.json").string() + "\"" + out);
    expect(atom.exit_code == 4, "atomic statistic exits 4");
    expect(atom.output.find("rejected") != std::string::npos, "report says rejected");
    expect(!fs::exists(work / "density.csv"), "no density.csv without --force");
    RunResult forced =
        run(cli + " density --config \"" + (work / "atom.json").string() + "\" --force" + out);
    expect(forced.exit_code == 0, "--force overrides the rejection");
    expect(fs::exists(work / "density.csv"), "density.csv written under --force");

    // density + compare against the Irwin-Hall reference
    RunResult usum_density =
        run(cli + " density --config \"" + (work / "usum.json").string() + "\"" + out);
    expect(usum_density.exit_code == 0, "uniform-sum density exits 0");
    expect(first_line(work / "density.csv") == "x,pdf,pdf_shifted",
           "density.csv header matches the schema");
    RunResult cmp_ih = run(cli + " compare --config \"" + (work / "usum.json").string() +
                           "\" --reference irwin_hall:3" + out);
    expect(cmp_ih.exit_code == 0, "compare irwin_hall:3 exits 0");
    double l1_ih = csv_l1(work / "compare.csv");
    expect(l1_ih < 0.05, "uniform sum vs irwin_hall:3 L1 = " + std::to_string(l1_ih) + " < 0.05");

    // compare against the chi-square reference
    RunResult cmp_chi = run(cli + " compare --config \"" + (work / "cw.json").string() +
                            "\" --reference chi_square:2" + out);
    expect(cmp_chi.exit_code == 0, "compare chi_square:2 exits 0");
    double l1_chi = csv_l1(work / "compare.csv");
    expect(l1_chi < 0.05, "curie-weiss vs chi_square:2 L1 = " + std::to_string(l1_chi) + " < 0.05");

    // envelope reference
    RunResult cmp_env = run(cli + " compare --config \"" + (work / "cw.json").string() +
                            "\" --reference curie_weiss:1,1.0,1.0,1.0" + out);
    expect(cmp_env.exit_code == 0, "compare curie_weiss envelopes exit 0");
    expect(cmp_env.output.find("pass") != std::string::npos, "envelope sandwich passes");

    // unknown reference: exit 2
    RunResult cmp_bad = run(cli + " compare --config \"" + (work / "cw.json").string() +
                            "\" --reference weibull:2" + out);
    expect(cmp_bad.exit_code == 2, "unknown reference exits 2");

    // identity table reference
    RunResult cmp_uif = run(cli + " compare --config \"" + (work / "usum.json").string() +
                            "\" --reference uif:2" + out);
    expect(cmp_uif.exit_code == 0, "compare uif:2 exits 0");
    expect(first_line(work / "compare.csv") == "x,rhs,oracle,oracle_se",
           "uif table header matches the schema");

    // identity command
    RunResult ident = run(cli + " identity --config \"" + (work / "cw.json").string() +
                          "\" --g \"sin(x1)\"");
    expect(ident.exit_code == 0, "identity exits 0");
    expect(ident.output.find("pass") != std::string::npos, "identity check passes");

    // covariance command
    RunResult cov = run(cli + " cov --config \"" + (work / "usum.json").string() +
                        "\" --alpha x1 --beta x1");
    expect(cov.exit_code == 0, "cov exits 0");
    expect(cov.output.find("0.0833333333") != std::string::npos,
           "kernel covariance prints Var U(0,1) = 1/12");

    fs::remove_all(work);
    if (failures == 0) {
        std::printf("all CLI integration checks passed\n");
        return 0;
    }
    std::printf("%d CLI integration check(s) FAILED\n", failures);
    return 1;
}
