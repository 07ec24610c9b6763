#include "nlac/experiment.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace nlac;
using nlohmann::json;

namespace {

json minimal()
{
    return json{{"schema_version", 1},
                {"scenario", "ellipse-relaxation"},
                {"eps_list", {0.08, 0.04, 0.02}},
                {"grid", {{"lx", 1.8}, {"ly", 1.6}}}};
}

RunResult synthetic_run(double eps, double scale)
{
    RunResult r;
    r.eps = eps;
    r.nx = r.ny = 64;
    r.dt = 1e-4;
    r.steps = 10;
    for (int k = 0; k <= 4; ++k) {
        DiagnosticsRecord x;
        x.t = 0.01 * k;
        x.mass = 0.785;
        x.energy = 3.0 - 0.01 * k;
        x.dissipation = 1.0;
        x.E_rel = scale * eps * eps;
        x.F_bulk = 0.1 * eps * eps;
        x.L1_error = eps * (1.0 + 0.1 * k);
        x.Q1 = x.Q2 = x.Q3 = 0.5 * x.E_rel;
        x.Q4 = 0.2 * x.E_rel;
        x.lambda_ref = 2.0;
        x.lambda_eps = 2.0 + eps;
        x.hausdorff = 0.5 * eps;
        r.records.push_back(x);
    }
    return r;
}

} // namespace

TEST(Config, MinimalConfigUsesDefaults)
{
    const auto c = parse_config(minimal());
    EXPECT_EQ(c.scenario, Scenario::ellipse_relaxation);
    EXPECT_EQ(c.solver.dt_rule.kind, DtRule::Kind::explicit_cfl);
    EXPECT_EQ(c.records, 40);
    EXPECT_FALSE(c.acceptance.l1_slope_min);
}

TEST(Config, RoundTripThroughJson)
{
    auto j = minimal();
    j["solver"] = {{"dt_rule", "imex-fixed:0.001"}, {"backend", "fd2"}};
    j["acceptance"] = {{"l1_slope_min", 0.9}, {"calibration", true}};
    const auto c = parse_config(j);
    const auto d = parse_config(to_json(c));
    EXPECT_EQ(d.solver.dt_rule.kind, DtRule::Kind::imex_fixed);
    EXPECT_DOUBLE_EQ(d.solver.dt_rule.value, 1e-3);
    EXPECT_EQ(d.solver.backend, Backend::fd2);
    EXPECT_DOUBLE_EQ(*d.acceptance.l1_slope_min, 0.9);
    EXPECT_TRUE(d.acceptance.calibration);
    EXPECT_EQ(d.eps_list, c.eps_list);
}

TEST(Config, ValidationErrors)
{
    auto bad = [](auto edit) {
        auto j = minimal();
        edit(j);
        return j;
    };
    EXPECT_THROW(parse_config(bad([](json& j) { j["eps_list"] = json::array(); })), ConfigError);
    EXPECT_THROW(parse_config(bad([](json& j) { j["eps_list"] = {0.04, 0.08}; })), ConfigError);
    EXPECT_THROW(parse_config(bad([](json& j) { j["eps_list"] = {0.08, -0.04}; })), ConfigError);
    EXPECT_THROW(parse_config(bad([](json& j) { j["schema_version"] = 2; })), ConfigError);
    EXPECT_THROW(parse_config(bad([](json& j) { j.erase("schema_version"); })), ConfigError);
    EXPECT_THROW(parse_config(bad([](json& j) { j["scenario"] = "torus"; })), ConfigError);
    EXPECT_THROW(parse_config(bad([](json& j) { j["solver"] = {{"dt_rule", "rk4"}}; })), ConfigError);
    EXPECT_THROW(parse_config(bad([](json& j) { j["solver"] = {{"dt_rule", "imex-fixed"}}; })), ConfigError);
    EXPECT_THROW(parse_config(bad([](json& j) { j["T"] = "long"; })), ConfigError);
    EXPECT_THROW(parse_config(bad([](json& j) { j["grid"]["nx"] = 64; })), ConfigError);
    EXPECT_THROW(parse_config(bad([](json& j) {
                     j["eps_list"] = {0.08, 0.04};
                     j["acceptance"] = {{"l1_slope_min", 0.9}};
                 })),
                 ConfigError);
}

TEST(Grid, FftFriendlySizes)
{
    EXPECT_EQ(fft_friendly(450), 450);
    EXPECT_EQ(fft_friendly(451), 480);
    EXPECT_EQ(fft_friendly(3), 8);
    EXPECT_EQ(fft_friendly(127), 128);
}

TEST(Grid, PerEpsRuleAndLimits)
{
    auto c = parse_config(minimal());
    c.grid.cells_per_eps = 5;
    const auto g = grid_for(c, 0.02);
    EXPECT_EQ(g.nx(), 450);
    EXPECT_EQ(g.ny(), 400);
    c.grid.max_cells = 256;
    EXPECT_THROW(grid_for(c, 0.02), ConfigError);
    c.grid.nx = c.grid.ny = 32;
    EXPECT_THROW(grid_for(c, 0.02), ConfigError); // eps/h below 1.5
}

TEST(TimeStepping, StepDividesRecordInterval)
{
    auto c = parse_config(minimal());
    c.T = 0.05;
    c.records = 20;
    const PeriodicGrid g(128, 128, 1.0, 1.0);
    const auto ts = time_stepping(c, g, 0.04);
    EXPECT_EQ(ts.scheme, Scheme::explicit_euler);
    EXPECT_LE(ts.dt, explicit_dt_limit(g, 0.04));
    EXPECT_NEAR(ts.dt * ts.steps_per_record, c.T / c.records, 1e-15);
    c.solver.dt_rule = parse_dt_rule("imex-fixed:1e-3");
    const auto ti = time_stepping(c, g, 0.04);
    EXPECT_EQ(ti.scheme, Scheme::stabilized_imex);
    EXPECT_NEAR(ti.dt, 0.0025 / 3, 1e-16);
}

TEST(RunFiles, HeadersAndRoundTrip)
{
    const auto dir = std::filesystem::temp_directory_path() / "nlac_run_test";
    std::filesystem::remove_all(dir);
    const auto r = synthetic_run(0.04, 1.0);
    write_run(dir, r);
    std::ifstream d(dir / "diagnostics.csv"), m(dir / "monitor.csv");
    std::string hd, hm;
    std::getline(d, hd);
    std::getline(m, hm);
    EXPECT_EQ(hd, "t,mass,energy,lambda_eps,dissipation,E_rel,F_bulk,L1_error,Q1,Q2,Q3,Q4");
    EXPECT_EQ(hm, "t,lambda_ref,hausdorff,F_signed,tube_L1,min_u,max_u,sign_incoherent");
    const auto back = read_run(dir);
    ASSERT_EQ(back.records.size(), r.records.size());
    EXPECT_EQ(back.records[3].L1_error, r.records[3].L1_error);
    EXPECT_EQ(back.records[2].lambda_eps, r.records[2].lambda_eps);
    EXPECT_EQ(back.status, "ok");
    std::filesystem::remove_all(dir);
}

TEST(Evaluate, SyntheticSweepPassesAndFails)
{
    auto j = minimal();
    j["acceptance"] = {{"l1_slope_min", 0.9}, {"l1_residual_max", 0.1}, {"e0_slope_min", 1.8},
                       {"coercivity", true},  {"lambda_slope_min", 0.9}, {"hausdorff_eps_max", 3},
                       {"energy_slack", 10},  {"mass_drift_per_dt", 10}, {"gronwall_ratio_max", 2},
                       {"q4_uniform_factor", 2}};
    const auto c = parse_config(j);
    std::vector<RunResult> runs{synthetic_run(0.08, 1.0), synthetic_run(0.04, 1.0), synthetic_run(0.02, 1.0)};
    auto rep = evaluate(c, runs, std::nullopt);
    for (const auto& ch : rep.checks) EXPECT_TRUE(ch.pass) << ch.name << ": " << ch.detail;
    EXPECT_TRUE(rep.pass);
    ASSERT_EQ(rep.fits.size(), 3u);
    EXPECT_NEAR(rep.fits[0].fit->slope, 1.0, 1e-12);
    EXPECT_NEAR(rep.fits[1].fit->slope, 2.0, 1e-12);

    runs[1].records[2].Q3 = 13.0 * runs[1].records[2].E_rel;
    runs[2].status = "error: blow-up";
    rep = evaluate(c, runs, std::nullopt);
    EXPECT_FALSE(rep.pass);
    const auto it = std::find_if(rep.checks.begin(), rep.checks.end(),
                                 [](const Check& ch) { return ch.name == "coercivity Q1-Q3"; });
    ASSERT_NE(it, rep.checks.end());
    EXPECT_FALSE(it->pass);
}

TEST(Evaluate, Q4ConstantMustNotGrowAtFinestEps)
{
    auto j = minimal();
    j["acceptance"] = {{"q4_uniform_factor", 2}};
    const auto c = parse_config(j);
    std::vector<RunResult> runs{synthetic_run(0.08, 1.0), synthetic_run(0.04, 1.0), synthetic_run(0.02, 1.0)};
    const auto set_q4 = [&](int i, double ratio) {
        for (auto& x : runs[i].records) x.Q4 = ratio * x.E_rel;
    };
    set_q4(0, 0.1);
    set_q4(1, 0.9);
    set_q4(2, 1.0);
    EXPECT_TRUE(evaluate(c, runs, std::nullopt).pass);
    set_q4(2, 2.5);
    EXPECT_FALSE(evaluate(c, runs, std::nullopt).pass);
}

TEST(Evaluate, EnergyIncreaseBeyondSlackFails)
{
    auto j = minimal();
    j["acceptance"] = {{"energy_slack", 10}};
    const auto c = parse_config(j);
    auto r = synthetic_run(0.04, 1.0);
    r.records[3].energy = r.records[2].energy + 1.0;
    const auto rep = evaluate(c, {r}, std::nullopt);
    EXPECT_FALSE(rep.pass);
}

TEST(Report, WritesContractFiles)
{
    const auto dir = std::filesystem::temp_directory_path() / "nlac_report_test";
    std::filesystem::remove_all(dir);
    const auto c = parse_config(minimal());
    const auto rep = evaluate(c, {synthetic_run(0.08, 1), synthetic_run(0.04, 1), synthetic_run(0.02, 1)}, std::nullopt);
    write_report(dir, rep);
    std::ifstream s(dir / "sweep_report.csv"), f(dir / "fits.csv");
    std::string hs, hf;
    std::getline(s, hs);
    std::getline(f, hf);
    EXPECT_EQ(hs, sweep_header);
    EXPECT_EQ(hf, "quantity,target,slope,intercept,residual,ci_low,ci_high");
    EXPECT_TRUE(std::filesystem::exists(dir / "summary.txt"));
    std::filesystem::remove_all(dir);
}
