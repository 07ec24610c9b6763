// Command-line front end: run a sweep, certify a stored trajectory, rebuild a report.

#include "nlac/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

void print_checks(const nlac::SweepReport& rep)
{
    for (const auto& c : rep.checks) std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    std::cout << (rep.pass ? "all checks passed" : "some checks failed") << '\n';
}

// Consecutive snapshots (t - d, t, t + d) with equal spacing, non-overlapping.
std::vector<nlac::SnapshotTriple> equally_spaced_triples(const std::vector<nlac::CurveState>& s)
{
    std::vector<nlac::SnapshotTriple> out;
    for (std::size_t i = 0; i + 2 < s.size();) {
        const double d0 = s[i + 1].t - s[i].t, d1 = s[i + 2].t - s[i + 1].t;
        if (d0 > 0 && std::abs(d1 - d0) <= 1e-6 * d0) {
            out.push_back({s[i], s[i + 1], s[i + 2]});
            i += 3;
        } else {
            ++i;
        }
    }
    return out;
}

int verify_calibration(const std::string& dir, double cells_per_delta, int shells, const std::string& out)
{
    const auto snaps = nlac::read_trajectory(dir);
    const auto triples = equally_spaced_triples(snaps);
    if (triples.empty()) throw nlac::ConfigError("no equally spaced snapshot triples in " + dir);
    nlac::CertificationOptions opt;
    opt.cells_per_delta = cells_per_delta;
    opt.shells.shells = shells;
    const double delta = nlac::trajectory_delta(snaps);
    const auto cert = nlac::certify_calibration(triples, delta, opt);
    std::cout << "delta " << delta << ", " << triples.size() << " time levels\n";
    for (const auto& v : cert.verdicts)
        std::cout << (v.pass ? "PASS" : "FAIL") << " " << v.condition << ": " << v.mode
                  << ", fitted order " << v.fitted_order << ", refinement order " << v.refinement_order
                  << ", max residual " << v.max_residual << '\n';
    std::cout << (cert.shortness_ok ? "PASS" : "FAIL") << " shortness\n"
              << (cert.coercivity_ok ? "PASS" : "FAIL") << " theta ratio bounds\n";
    if (!out.empty()) {
        std::filesystem::create_directories(out);
        nlac::write_residuals_csv(std::filesystem::path(out) / "residuals.csv", cert.coarse);
        nlac::write_verdicts_csv(std::filesystem::path(out) / "verdicts.csv", cert);
    }
    return cert.pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"nonlocal Allen-Cahn sharp-interface experiments"};
    app.require_subcommand(1);

    std::string config, output;
    auto* run = app.add_subcommand("run", "run an eps sweep described by a JSON config");
    run->add_option("config", config, "config file")->required()->check(CLI::ExistingFile);
    run->add_option("-o,--output", output, "override output_dir");

    std::string traj, cert_out;
    double cells_per_delta = 32.0;
    int shells = 8;
    auto* verify = app.add_subcommand("verify-calibration", "certify the calibration along a stored trajectory");
    verify->add_option("trajectory", traj, "directory with index.csv and snapshots")->required()->check(CLI::ExistingDirectory);
    verify->add_option("--cells-per-delta", cells_per_delta, "resolution of the certification grid");
    verify->add_option("--shells", shells, "number of distance shells");
    verify->add_option("-o,--output", cert_out, "directory for residuals.csv and verdicts.csv");

    std::string sweep;
    auto* report = app.add_subcommand("report", "rebuild the report of a finished sweep");
    report->add_option("sweep", sweep, "sweep output directory")->required()->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto c = nlac::load_config(config);
            if (!output.empty()) c.output_dir = output;
            const auto res = nlac::run(c);
            print_checks(res.report);
            return res.report.pass ? 0 : 1;
        }
        if (*verify) return verify_calibration(traj, cells_per_delta, shells, cert_out);
        if (*report) {
            const auto rep = nlac::report_from_dir(sweep);
            print_checks(rep);
            return rep.pass ? 0 : 1;
        }
    } catch (const nlac::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
