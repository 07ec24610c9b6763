#pragma once

// Experiment configuration, eps-sweep orchestration and reports.

#include "nlac/calibration.hpp"
#include "nlac/curve.hpp"
#include "nlac/errors.hpp"
#include "nlac/field.hpp"
#include "nlac/fit.hpp"
#include "nlac/phase_solver.hpp"
#include "nlac/relative_energy.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace nlac {

inline constexpr int config_schema_version = 1;

enum class Scenario { stationary_circle, ellipse_relaxation, perturbed_circle };

inline std::string to_string(Scenario s)
{
    switch (s) {
    case Scenario::stationary_circle: return "stationary-circle";
    case Scenario::ellipse_relaxation: return "ellipse-relaxation";
    case Scenario::perturbed_circle: return "perturbed-circle";
    }
    return "?";
}

struct GeometryConfig {
    Point center{1.0, 1.0};
    /// Radius of the circle of equal area.
    double radius = 0.5;
    /// Ellipse: ratio of the semi-axes a/b.
    double aspect = 1.44;
    /// Perturbed circle: total relative amplitude on modes 2..max_mode.
    double amplitude = 0.1;
    int max_mode = 5;
};

struct GridConfig {
    double lx = 2.0, ly = 2.0;
    /// Fixed resolution; 0 selects the per-eps rule below.
    int nx = 0, ny = 0;
    /// Per-eps rule: h <= eps / cells_per_eps, rounded up to an FFT-friendly size.
    double cells_per_eps = 5.0;
    /// Floor for the per-eps rule, so that coarse grids still resolve the calibration tube.
    int min_cells = 0;
    int max_cells = 1024;
};

struct DtRule {
    enum class Kind { explicit_cfl, imex_fixed } kind = Kind::explicit_cfl;
    /// explicit-cfl: fraction of the stability guard; imex-fixed: the step.
    double value = 1.0;
};

inline DtRule parse_dt_rule(const std::string& s)
{
    DtRule r;
    const auto colon = s.find(':');
    const std::string head = s.substr(0, colon);
    if (head == "explicit-cfl")
        r.kind = DtRule::Kind::explicit_cfl;
    else if (head == "imex-fixed")
        r.kind = DtRule::Kind::imex_fixed;
    else
        throw ConfigError("dt_rule must be \"explicit-cfl[:fraction]\" or \"imex-fixed:<dt>\", got \"" + s + "\"");
    if (colon != std::string::npos) {
        try {
            r.value = std::stod(s.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("dt_rule: cannot parse value in \"" + s + "\"");
        }
    } else if (r.kind == DtRule::Kind::imex_fixed) {
        throw ConfigError("dt_rule imex-fixed needs a value, e.g. \"imex-fixed:1e-3\"");
    }
    if (!(r.value > 0.0)) throw ConfigError("dt_rule value must be positive");
    if (r.kind == DtRule::Kind::explicit_cfl && r.value > 1.0)
        throw ConfigError("explicit-cfl fraction must not exceed 1");
    return r;
}

struct SolverSettings {
    DtRule dt_rule;
    double kappa = -1.0;
    Backend backend = Backend::spectral;
    bool mass_correction = false;
};

struct ReferenceSettings {
    /// Markers = 64 * marker_multiplier.
    int marker_multiplier = 4;
    /// Step = stable_dt * dt_multiplier.
    double dt_multiplier = 0.25;
};

struct CalibrationSettings {
    bool enabled = true;
    int check_times = 3;
    double time_offset = 2.5e-5;
    double cells_per_delta = 32.0;
    int shells = 8;
};

/// Thresholds; an absent entry is not checked.
struct AcceptanceThresholds {
    std::optional<double> l1_slope_min, l1_residual_max;
    std::optional<double> e0_slope_min;
    std::optional<double> mass_drift_per_dt;
    std::optional<double> energy_slack;
    bool coercivity = false;
    std::optional<double> q4_uniform_factor;
    std::optional<double> lambda_slope_min;
    std::optional<double> hausdorff_eps_max;
    std::optional<double> gronwall_ratio_max;
    bool calibration = false;
};

struct ExperimentConfig {
    int schema_version = config_schema_version;
    Scenario scenario = Scenario::ellipse_relaxation;
    GeometryConfig geometry;
    GridConfig grid;
    std::vector<double> eps_list;
    SolverSettings solver;
    double T = 0.05;
    int records = 40;
    /// Relative-energy functionals are evaluated on the trigonometric
    /// interpolant of u refined this many times.
    int oversample = 2;
    ReferenceSettings reference;
    CalibrationSettings calibration;
    std::filesystem::path output_dir = "out";
    unsigned seed = 1;
    AcceptanceThresholds acceptance;
};

// ---------------------------------------------------------------------------
// Parsing and validation

namespace detail {

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out)
{
    if (j.contains(key)) out = j.at(key).get<T>();
}

template <class T>
void read_opt(const nlohmann::json& j, const char* key, std::optional<T>& out)
{
    if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

} // namespace detail

/// Smallest n >= m whose prime factors are all in {2, 3, 5, 7}, and even.
inline int fft_friendly(int m)
{
    for (int n = std::max(m, 8);; ++n) {
        if (n % 2) continue;
        int r = n;
        for (int p : {2, 3, 5, 7})
            while (r % p == 0) r /= p;
        if (r == 1) return n;
    }
}

inline void validate(const ExperimentConfig& c)
{
    if (c.schema_version != config_schema_version)
        throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version));
    if (c.eps_list.empty()) throw ConfigError("eps_list is empty");
    for (std::size_t k = 0; k < c.eps_list.size(); ++k) {
        if (!(c.eps_list[k] > 0.0)) throw ConfigError("eps_list entries must be positive");
        if (k > 0 && !(c.eps_list[k] < c.eps_list[k - 1])) throw ConfigError("eps_list must be strictly decreasing");
    }
    const auto& a = c.acceptance;
    const bool fits = a.l1_slope_min || a.e0_slope_min || a.lambda_slope_min;
    if (fits && c.eps_list.size() < 3) throw ConfigError("slope checks need at least 3 entries in eps_list");
    if (!(c.T > 0.0)) throw ConfigError("T must be positive");
    if (c.records < 1) throw ConfigError("records must be at least 1");
    if (c.oversample < 1 || c.oversample > 4) throw ConfigError("oversample must lie in 1..4");
    if (!(c.grid.lx > 0.0 && c.grid.ly > 0.0)) throw ConfigError("grid side lengths must be positive");
    if ((c.grid.nx > 0) != (c.grid.ny > 0)) throw ConfigError("grid: give both nx and ny or neither");
    if (c.grid.nx == 0 && !(c.grid.cells_per_eps > 0.0)) throw ConfigError("grid: cells_per_eps must be positive");
    if (c.reference.marker_multiplier < 1) throw ConfigError("reference.marker_multiplier must be >= 1");
    if (!(c.reference.dt_multiplier > 0.0 && c.reference.dt_multiplier <= 1.0))
        throw ConfigError("reference.dt_multiplier must lie in (0, 1]");
    if (c.geometry.radius <= 0.0 || c.geometry.aspect <= 0.0) throw ConfigError("geometry: radius and aspect must be positive");
}

inline ExperimentConfig parse_config(const nlohmann::json& j)
{
    ExperimentConfig c;
    try {
        if (!j.contains("schema_version")) throw ConfigError("missing schema_version");
        c.schema_version = j.at("schema_version").get<int>();
        const auto sc = j.at("scenario").get<std::string>();
        if (sc == "stationary-circle")
            c.scenario = Scenario::stationary_circle;
        else if (sc == "ellipse-relaxation")
            c.scenario = Scenario::ellipse_relaxation;
        else if (sc == "perturbed-circle")
            c.scenario = Scenario::perturbed_circle;
        else
            throw ConfigError("unknown scenario \"" + sc + "\"");

        if (j.contains("geometry")) {
            const auto& g = j.at("geometry");
            if (g.contains("center")) c.geometry.center = {g.at("center").at(0).get<double>(), g.at("center").at(1).get<double>()};
            detail::read_opt(g, "radius", c.geometry.radius);
            detail::read_opt(g, "aspect", c.geometry.aspect);
            detail::read_opt(g, "amplitude", c.geometry.amplitude);
            detail::read_opt(g, "max_mode", c.geometry.max_mode);
        }
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            detail::read_opt(g, "lx", c.grid.lx);
            detail::read_opt(g, "ly", c.grid.ly);
            detail::read_opt(g, "nx", c.grid.nx);
            detail::read_opt(g, "ny", c.grid.ny);
            detail::read_opt(g, "cells_per_eps", c.grid.cells_per_eps);
            detail::read_opt(g, "min_cells", c.grid.min_cells);
            detail::read_opt(g, "max_cells", c.grid.max_cells);
        }
        c.eps_list = j.at("eps_list").get<std::vector<double>>();
        if (j.contains("solver")) {
            const auto& s = j.at("solver");
            if (s.contains("dt_rule")) c.solver.dt_rule = parse_dt_rule(s.at("dt_rule").get<std::string>());
            detail::read_opt(s, "kappa", c.solver.kappa);
            detail::read_opt(s, "mass_correction", c.solver.mass_correction);
            if (s.contains("backend")) {
                const auto b = s.at("backend").get<std::string>();
                if (b == "spectral")
                    c.solver.backend = Backend::spectral;
                else if (b == "fd2")
                    c.solver.backend = Backend::fd2;
                else
                    throw ConfigError("backend must be \"spectral\" or \"fd2\"");
            }
        }
        detail::read_opt(j, "T", c.T);
        detail::read_opt(j, "records", c.records);
        detail::read_opt(j, "oversample", c.oversample);
        if (j.contains("reference")) {
            detail::read_opt(j.at("reference"), "marker_multiplier", c.reference.marker_multiplier);
            detail::read_opt(j.at("reference"), "dt_multiplier", c.reference.dt_multiplier);
        }
        if (j.contains("calibration")) {
            const auto& k = j.at("calibration");
            detail::read_opt(k, "enabled", c.calibration.enabled);
            detail::read_opt(k, "check_times", c.calibration.check_times);
            detail::read_opt(k, "time_offset", c.calibration.time_offset);
            detail::read_opt(k, "cells_per_delta", c.calibration.cells_per_delta);
            detail::read_opt(k, "shells", c.calibration.shells);
        }
        if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
        detail::read_opt(j, "seed", c.seed);
        if (j.contains("acceptance")) {
            const auto& a = j.at("acceptance");
            auto& t = c.acceptance;
            detail::read_opt(a, "l1_slope_min", t.l1_slope_min);
            detail::read_opt(a, "l1_residual_max", t.l1_residual_max);
            detail::read_opt(a, "e0_slope_min", t.e0_slope_min);
            detail::read_opt(a, "mass_drift_per_dt", t.mass_drift_per_dt);
            detail::read_opt(a, "energy_slack", t.energy_slack);
            detail::read_opt(a, "coercivity", t.coercivity);
            detail::read_opt(a, "q4_uniform_factor", t.q4_uniform_factor);
            detail::read_opt(a, "lambda_slope_min", t.lambda_slope_min);
            detail::read_opt(a, "hausdorff_eps_max", t.hausdorff_eps_max);
            detail::read_opt(a, "gronwall_ratio_max", t.gronwall_ratio_max);
            detail::read_opt(a, "calibration", t.calibration);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    validate(c);
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& file)
{
    std::ifstream is(file);
    if (!is) throw IoError("cannot read config " + file.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
    return parse_config(j);
}

inline nlohmann::json to_json(const ExperimentConfig& c)
{
    nlohmann::json j;
    j["schema_version"] = c.schema_version;
    j["scenario"] = to_string(c.scenario);
    j["geometry"] = {{"center", {c.geometry.center[0], c.geometry.center[1]}},
                     {"radius", c.geometry.radius},
                     {"aspect", c.geometry.aspect},
                     {"amplitude", c.geometry.amplitude},
                     {"max_mode", c.geometry.max_mode}};
    j["grid"] = {{"lx", c.grid.lx}, {"ly", c.grid.ly}, {"nx", c.grid.nx}, {"ny", c.grid.ny},
                 {"cells_per_eps", c.grid.cells_per_eps}, {"min_cells", c.grid.min_cells}, {"max_cells", c.grid.max_cells}};
    j["eps_list"] = c.eps_list;
    std::ostringstream rule;
    rule.precision(17);
    if (c.solver.dt_rule.kind == DtRule::Kind::explicit_cfl)
        rule << "explicit-cfl:" << c.solver.dt_rule.value;
    else
        rule << "imex-fixed:" << c.solver.dt_rule.value;
    j["solver"] = {{"dt_rule", rule.str()},
                   {"kappa", c.solver.kappa},
                   {"backend", c.solver.backend == Backend::spectral ? "spectral" : "fd2"},
                   {"mass_correction", c.solver.mass_correction}};
    j["T"] = c.T;
    j["records"] = c.records;
    j["oversample"] = c.oversample;
    j["reference"] = {{"marker_multiplier", c.reference.marker_multiplier},
                      {"dt_multiplier", c.reference.dt_multiplier}};
    j["calibration"] = {{"enabled", c.calibration.enabled},
                        {"check_times", c.calibration.check_times},
                        {"time_offset", c.calibration.time_offset},
                        {"cells_per_delta", c.calibration.cells_per_delta},
                        {"shells", c.calibration.shells}};
    j["output_dir"] = c.output_dir.string();
    j["seed"] = c.seed;
    auto& a = j["acceptance"];
    a = nlohmann::json::object();
    const auto& t = c.acceptance;
    auto put = [&](const char* k, const std::optional<double>& v) {
        if (v) a[k] = *v;
    };
    put("l1_slope_min", t.l1_slope_min);
    put("l1_residual_max", t.l1_residual_max);
    put("e0_slope_min", t.e0_slope_min);
    put("mass_drift_per_dt", t.mass_drift_per_dt);
    put("energy_slack", t.energy_slack);
    put("q4_uniform_factor", t.q4_uniform_factor);
    put("lambda_slope_min", t.lambda_slope_min);
    put("hausdorff_eps_max", t.hausdorff_eps_max);
    put("gronwall_ratio_max", t.gronwall_ratio_max);
    a["coercivity"] = t.coercivity;
    a["calibration"] = t.calibration;
    return j;
}

/// Grid for one eps: the fixed resolution, or the per-eps rule.
inline PeriodicGrid grid_for(const ExperimentConfig& c, double eps)
{
    int nx = c.grid.nx, ny = c.grid.ny;
    if (nx == 0) {
        nx = fft_friendly(std::max(c.grid.min_cells, int(std::ceil(c.grid.lx * c.grid.cells_per_eps / eps))));
        ny = fft_friendly(std::max(c.grid.min_cells, int(std::ceil(c.grid.ly * c.grid.cells_per_eps / eps))));
    }
    if (nx > c.grid.max_cells || ny > c.grid.max_cells)
        throw ConfigError("grid for eps = " + std::to_string(eps) + " needs " + std::to_string(nx) + "x" +
                          std::to_string(ny) + " cells, above max_cells");
    PeriodicGrid g(nx, ny, c.grid.lx, c.grid.ly);
    // profile width ~4 eps resolved by >= 6 cells
    if (eps / std::max(g.hx(), g.hy()) < 1.5)
        throw ConfigError("eps = " + std::to_string(eps) + " is resolved by fewer than 1.5 cells");
    return g;
}

inline CurveState initial_curve(const ExperimentConfig& c)
{
    const int m = 64 * c.reference.marker_multiplier;
    const auto& g = c.geometry;
    switch (c.scenario) {
    case Scenario::stationary_circle: return make_circle(g.center, g.radius, m);
    case Scenario::ellipse_relaxation:
        return make_ellipse(g.center, g.radius * std::sqrt(g.aspect), g.radius / std::sqrt(g.aspect), m);
    case Scenario::perturbed_circle:
        return make_perturbed_circle(g.center, g.radius, m, g.amplitude, g.max_mode, c.seed);
    }
    throw ConfigError("unknown scenario");
}

/// Step size for one eps, shortened so that it divides the record interval.
struct TimeStepping {
    Scheme scheme;
    double dt;
    long steps_per_record;
};

inline TimeStepping time_stepping(const ExperimentConfig& c, const PeriodicGrid& g, double eps)
{
    const double interval = c.T / c.records;
    double dt;
    Scheme scheme;
    if (c.solver.dt_rule.kind == DtRule::Kind::explicit_cfl) {
        scheme = Scheme::explicit_euler;
        dt = c.solver.dt_rule.value * explicit_dt_limit(g, eps);
    } else {
        scheme = Scheme::stabilized_imex;
        dt = c.solver.dt_rule.value;
    }
    const long n = std::max(1L, long(std::ceil(interval / dt * (1.0 - 1e-12))));
    return {scheme, interval / n, n};
}

// ---------------------------------------------------------------------------
// Reference flow shared by all eps.

struct ReferenceData {
    std::vector<CurveState> records;   // at t_k = k T / records
    std::vector<double> lambda;        // mean curvature at the record times
    std::vector<SnapshotTriple> checks; // calibration triples
    double delta = 0.0;
    bool stiffness_warning = false;
};

inline ReferenceData reference_flow(const ExperimentConfig& c)
{
    const auto c0 = initial_curve(c);
    const auto g0 = geometry(c0, true);
    std::vector<std::pair<double, int>> times; // (t, tag): tag >= 0 record index, < 0 check slot
    for (int k = 0; k <= c.records; ++k) times.push_back({c.T * k / c.records, k});
    if (c.calibration.enabled)
        for (int q = 0; q < c.calibration.check_times; ++q) {
            const double tc = c.T * (q + 1) / (c.calibration.check_times + 1);
            for (int d = -1; d <= 1; ++d) times.push_back({tc + d * c.calibration.time_offset, -(3 * q + d + 2)});
        }
    std::stable_sort(times.begin(), times.end());
    EvolveOptions opt;
    opt.dt = stable_dt(g0) * c.reference.dt_multiplier;
    for (const auto& [t, tag] : times) opt.snapshot_times.push_back(t);
    auto traj = evolve(c0, opt);

    ReferenceData ref;
    ref.stiffness_warning = traj.stiffness_warning;
    ref.records.resize(c.records + 1);
    std::vector<CurveState> check_snaps(3 * std::max(0, c.calibration.check_times));
    for (std::size_t k = 0; k < times.size(); ++k) {
        const int tag = times[k].second;
        if (tag >= 0)
            ref.records[tag] = traj.snapshots[k];
        else
            check_snaps[-tag - 1] = traj.snapshots[k];
    }
    for (std::size_t q = 0; q + 2 < check_snaps.size(); q += 3)
        ref.checks.push_back({check_snaps[q], check_snaps[q + 1], check_snaps[q + 2]});
    for (const auto& s : ref.records) ref.lambda.push_back(vpmcf_velocity(geometry(s, false)).lambda);
    ref.delta = trajectory_delta(ref.records);
    return ref;
}

// ---------------------------------------------------------------------------
// Single run

struct DiagnosticsRecord {
    double t = 0.0;
    double mass = 0.0;
    double energy = 0.0;
    double lambda_eps = 0.0; // eps times the multiplier, the curvature-scaled value
    double dissipation = 0.0;
    double E_rel = 0.0, F_bulk = 0.0, L1_error = 0.0;
    double Q1 = 0.0, Q2 = 0.0, Q3 = 0.0, Q4 = 0.0;
    // monitor
    double lambda_ref = 0.0;
    double hausdorff = 0.0;
    double F_signed = 0.0;
    double tube_L1 = 0.0;
    double min_u = 0.0, max_u = 0.0;
    int sign_incoherent = 0;
};

struct RunResult {
    double eps = 0.0;
    int nx = 0, ny = 0;
    double dt = 0.0;
    long steps = 0;
    double runtime_s = 0.0;
    std::string status = "ok";
    std::vector<DiagnosticsRecord> records;
};

inline std::string eps_label(double eps)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", eps);
    return buf;
}

inline constexpr const char* diagnostics_header = "t,mass,energy,lambda_eps,dissipation,E_rel,F_bulk,L1_error,Q1,Q2,Q3,Q4";
inline constexpr const char* monitor_header = "t,lambda_ref,hausdorff,F_signed,tube_L1,min_u,max_u,sign_incoherent";

inline void write_run(const std::filesystem::path& dir, const RunResult& r)
{
    std::filesystem::create_directories(dir);
    std::ofstream d(dir / "diagnostics.csv"), m(dir / "monitor.csv"), info(dir / "run.json");
    if (!d || !m || !info) throw IoError("cannot write run files in " + dir.string());
    d.precision(17);
    m.precision(17);
    d << diagnostics_header << '\n';
    m << monitor_header << '\n';
    for (const auto& x : r.records) {
        d << x.t << ',' << x.mass << ',' << x.energy << ',' << x.lambda_eps << ',' << x.dissipation << ',' << x.E_rel
          << ',' << x.F_bulk << ',' << x.L1_error << ',' << x.Q1 << ',' << x.Q2 << ',' << x.Q3 << ',' << x.Q4 << '\n';
        m << x.t << ',' << x.lambda_ref << ',' << x.hausdorff << ',' << x.F_signed << ',' << x.tube_L1 << ','
          << x.min_u << ',' << x.max_u << ',' << x.sign_incoherent << '\n';
    }
    nlohmann::json j = {{"eps", r.eps}, {"nx", r.nx},       {"ny", r.ny},
                        {"dt", r.dt},   {"steps", r.steps}, {"status", r.status}};
    info << j.dump(2) << '\n';
}

namespace detail {

inline std::vector<std::vector<double>> read_csv_rows(const std::filesystem::path& file, const std::string& header)
{
    std::ifstream is(file);
    if (!is) throw IoError("cannot read " + file.string());
    std::string line;
    std::getline(is, line);
    if (line != header) throw IoError(file.string() + ": unexpected header \"" + line + "\"");
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace detail

inline RunResult read_run(const std::filesystem::path& dir)
{
    RunResult r;
    std::ifstream info(dir / "run.json");
    if (!info) throw IoError("cannot read " + (dir / "run.json").string());
    const auto j = nlohmann::json::parse(info);
    r.eps = j.at("eps").get<double>();
    r.nx = j.at("nx").get<int>();
    r.ny = j.at("ny").get<int>();
    r.dt = j.at("dt").get<double>();
    r.steps = j.at("steps").get<long>();
    r.status = j.at("status").get<std::string>();
    const auto d = detail::read_csv_rows(dir / "diagnostics.csv", diagnostics_header);
    const auto m = detail::read_csv_rows(dir / "monitor.csv", monitor_header);
    if (d.size() != m.size()) throw IoError(dir.string() + ": diagnostics and monitor row counts differ");
    for (std::size_t k = 0; k < d.size(); ++k) {
        if (d[k].size() != 12 || m[k].size() != 8) throw IoError(dir.string() + ": malformed row");
        DiagnosticsRecord x;
        x.t = d[k][0];
        x.mass = d[k][1];
        x.energy = d[k][2];
        x.lambda_eps = d[k][3];
        x.dissipation = d[k][4];
        x.E_rel = d[k][5];
        x.F_bulk = d[k][6];
        x.L1_error = d[k][7];
        x.Q1 = d[k][8];
        x.Q2 = d[k][9];
        x.Q3 = d[k][10];
        x.Q4 = d[k][11];
        x.lambda_ref = m[k][1];
        x.hausdorff = m[k][2];
        x.F_signed = m[k][3];
        x.tube_L1 = m[k][4];
        x.min_u = m[k][5];
        x.max_u = m[k][6];
        x.sign_incoherent = int(m[k][7]);
        r.records.push_back(x);
    }
    return r;
}

/// Diagnostics of one state against the reference snapshot at the same time.
/// Mass, energy and dissipation on the computational grid; the relative
/// energy, bulk error and Q terms on the grid refined `oversample` times.
inline DiagnosticsRecord record_state(const PhaseState& s, const CurveState& ref, double lambda_ref, double delta,
                                      Backend backend, int oversample = 1)
{
    const auto d = diagnose(s, backend);
    const PhaseState fine{spectral_refine(s.u, oversample), s.eps, s.t};
    const auto& g = fine.u.grid();
    const auto cal = build_calibration(ref, g, delta);
    const auto chi = indicator_fractions(ref, g);
    const auto r = relative_energy(fine, cal, chi, delta * delta, oversample > 1 ? Backend::spectral : backend);
    DiagnosticsRecord x;
    x.t = s.t;
    x.mass = d.mass;
    x.energy = d.energy;
    x.lambda_eps = s.eps * d.lambda_eps;
    x.dissipation = d.dissipation;
    x.E_rel = r.E_rel;
    x.F_bulk = r.F_bulk;
    x.L1_error = r.L1_error;
    x.Q1 = r.Q1;
    x.Q2 = r.Q2;
    x.Q3 = r.Q3;
    x.Q4 = r.Q4;
    x.lambda_ref = lambda_ref;
    x.hausdorff = hausdorff_distance(level_set(s.u, 0.5), detail::refined_polygon(ref, 4));
    x.F_signed = r.F_signed;
    x.tube_L1 = r.tube_L1;
    x.min_u = d.min_u;
    x.max_u = d.max_u;
    x.sign_incoherent = r.sign_incoherent;
    return x;
}

inline RunResult run_single(const ExperimentConfig& c, const ReferenceData& ref, double eps)
{
    const auto start = std::chrono::steady_clock::now();
    RunResult r;
    r.eps = eps;
    const auto g = grid_for(c, eps);
    r.nx = g.nx();
    r.ny = g.ny();
    const auto ts = time_stepping(c, g, eps);
    r.dt = ts.dt;
    SolverConfig sc;
    sc.dt = ts.dt;
    sc.scheme = ts.scheme;
    sc.kappa = c.solver.kappa;
    sc.T = c.T;
    sc.backend = c.solver.backend;
    sc.mass_correction = c.solver.mass_correction;

    auto state = well_prepared_init(ref.records.front(), eps, g);
    const double m0 = mass(state);
    for (int k = 0; k <= c.records; ++k) {
        if (k > 0) {
            for (long n = 0; n < ts.steps_per_record; ++n) {
                state = step(state, sc, m0);
                ++r.steps;
            }
            state.t = c.T * k / c.records; // remove accumulated rounding in t
        }
        r.records.push_back(record_state(state, ref.records[k], ref.lambda[k], ref.delta, c.solver.backend, c.oversample));
    }
    r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

// ---------------------------------------------------------------------------
// Sweep evaluation

struct SweepRow {
    double eps = 0.0;
    int nx = 0, ny = 0;
    double dt = 0.0;
    long steps = 0;
    std::string status;
    double sup_L1 = 0.0;
    double E0 = 0.0;     // E_rel(0) + F(0)
    double sup_EF = 0.0;
    double C_fit = 0.0;
    double mass_drift = 0.0; // relative, over [0, T]
    double energy_excess = 0.0; // max over record intervals of increase / allowed slack
    double q_ratio_max[3] = {0, 0, 0}; // max Q1/E, Q2/E, Q3/E
    double q4_ratio_max = 0.0;
    double lambda_gap = 0.0; // sup_t |lambda_eps - lambda|
    double hausdorff_max = 0.0;
    int sign_incoherent = 0;
    double runtime_s = 0.0;
};

struct NamedFit {
    std::string quantity;
    double target = 0.0;
    std::optional<SlopeFit> fit;
    std::string error;
};

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct SweepReport {
    Scenario scenario = Scenario::ellipse_relaxation;
    std::vector<SweepRow> rows;
    std::vector<NamedFit> fits;
    std::vector<Check> checks;
    std::optional<Certification> certification;
    bool pass = true;
};

inline constexpr double coercivity_roundoff = 1e-13;

inline SweepRow summarize(const RunResult& r, double energy_slack)
{
    SweepRow row;
    row.eps = r.eps;
    row.nx = r.nx;
    row.ny = r.ny;
    row.dt = r.dt;
    row.steps = r.steps;
    row.status = r.status;
    row.runtime_s = r.runtime_s;
    if (r.records.empty()) return row;
    const auto& rec = r.records;
    row.E0 = rec.front().E_rel + rec.front().F_bulk;
    std::vector<GronwallSample> gs;
    for (std::size_t k = 0; k < rec.size(); ++k) {
        const auto& x = rec[k];
        row.sup_L1 = std::max(row.sup_L1, x.L1_error);
        row.sup_EF = std::max(row.sup_EF, x.E_rel + x.F_bulk);
        gs.push_back({x.t, x.E_rel, x.F_bulk});
        const double e = std::max(x.E_rel, 1e-300);
        row.q_ratio_max[0] = std::max(row.q_ratio_max[0], x.Q1 / e);
        row.q_ratio_max[1] = std::max(row.q_ratio_max[1], x.Q2 / e);
        row.q_ratio_max[2] = std::max(row.q_ratio_max[2], x.Q3 / e);
        row.q4_ratio_max = std::max(row.q4_ratio_max, x.Q4 / e);
        row.lambda_gap = std::max(row.lambda_gap, std::abs(x.lambda_eps - x.lambda_ref));
        row.hausdorff_max = std::max(row.hausdorff_max, x.hausdorff);
        row.sign_incoherent += x.sign_incoherent;
        if (k > 0) {
            const auto& p = rec[k - 1];
            const double slack = energy_slack * r.dt * (x.t - p.t) * std::max(p.dissipation, x.dissipation) +
                                 1e-12 * std::abs(p.energy);
            row.energy_excess = std::max(row.energy_excess, (x.energy - p.energy) / slack);
        }
    }
    row.mass_drift = std::abs(rec.back().mass - rec.front().mass) / std::abs(rec.front().mass);
    if (gs.size() >= 2) row.C_fit = gronwall_constant(gs);
    return row;
}

/// Q_i <= k_i E_rel on a record, with a roundoff allowance.
inline bool coercivity_holds(const DiagnosticsRecord& x)
{
    const double tol = coercivity_roundoff * std::max(1.0, x.energy);
    return x.Q1 <= 2.0 * x.E_rel + tol && x.Q2 <= 2.0 * x.E_rel + tol && x.Q3 <= 12.0 * x.E_rel + tol;
}

inline SweepReport evaluate(const ExperimentConfig& c, const std::vector<RunResult>& runs,
                            const std::optional<Certification>& cert)
{
    SweepReport rep;
    rep.scenario = c.scenario;
    rep.certification = cert;
    const auto& a = c.acceptance;
    const double slack = a.energy_slack.value_or(10.0);
    std::vector<const RunResult*> ok;
    for (const auto& r : runs) {
        rep.rows.push_back(summarize(r, slack));
        if (r.status == "ok") ok.push_back(&r);
    }

    auto fit_of = [&](const std::string& name, double target, auto value) {
        NamedFit f;
        f.quantity = name;
        f.target = target;
        std::vector<double> x, v;
        for (const auto& row : rep.rows)
            if (row.status == "ok") {
                x.push_back(row.eps);
                v.push_back(value(row));
            }
        try {
            f.fit = fit_slope(x, v);
        } catch (const Error& e) {
            f.error = e.what();
        }
        rep.fits.push_back(f);
        return rep.fits.back();
    };
    auto add = [&](std::string name, bool pass, std::string detail) {
        rep.checks.push_back({std::move(name), pass, std::move(detail)});
        rep.pass = rep.pass && pass;
    };
    auto fmt = [](double v) {
        std::ostringstream os;
        os.precision(4);
        os << v;
        return os.str();
    };

    if (ok.size() != runs.size())
        for (const auto& r : runs)
            if (r.status != "ok") add("run eps=" + eps_label(r.eps), false, r.status);

    const bool fits = c.eps_list.size() >= 3;
    if (fits) {
        const auto l1 = fit_of("sup_L1", 1.0, [](const SweepRow& r) { return r.sup_L1; });
        const auto e0 = fit_of("E0", 2.0, [](const SweepRow& r) { return r.E0; });
        const auto lg = fit_of("lambda_gap", 1.0, [](const SweepRow& r) { return r.lambda_gap; });
        if (a.l1_slope_min) {
            const bool p = l1.fit && l1.fit->slope >= *a.l1_slope_min &&
                           (!a.l1_residual_max || l1.fit->residual < *a.l1_residual_max);
            add("L1 rate", p,
                l1.fit ? "slope " + fmt(l1.fit->slope) + " (min " + fmt(*a.l1_slope_min) + "), residual " +
                             fmt(l1.fit->residual)
                       : l1.error);
        }
        if (a.e0_slope_min) {
            const bool p = e0.fit && e0.fit->slope >= *a.e0_slope_min;
            add("well-prepared E0 rate", p,
                e0.fit ? "slope " + fmt(e0.fit->slope) + " (min " + fmt(*a.e0_slope_min) + ")" : e0.error);
        }
        if (a.lambda_slope_min) {
            const bool p = lg.fit && lg.fit->slope >= *a.lambda_slope_min;
            add("multiplier rate", p,
                lg.fit ? "slope " + fmt(lg.fit->slope) + " (min " + fmt(*a.lambda_slope_min) + ")" : lg.error);
        }
    }
    if (a.mass_drift_per_dt) {
        bool p = !ok.empty();
        std::string worst;
        double wr = 0.0;
        for (const auto& row : rep.rows) {
            if (row.status != "ok") continue;
            const double ratio = row.mass_drift / row.dt;
            if (ratio >= wr) {
                wr = ratio;
                worst = "eps " + eps_label(row.eps) + ": drift " + fmt(row.mass_drift) + " = " + fmt(ratio) + " dt";
            }
            p = p && ratio <= *a.mass_drift_per_dt;
        }
        add("mass drift", p, worst + " (max " + fmt(*a.mass_drift_per_dt) + " dt)");
    }
    if (a.energy_slack) {
        bool p = !ok.empty();
        double worst = -std::numeric_limits<double>::infinity();
        for (const auto& row : rep.rows)
            if (row.status == "ok") {
                p = p && row.energy_excess <= 1.0;
                worst = std::max(worst, row.energy_excess);
            }
        add("energy dissipation", p, "max increase / slack = " + fmt(worst));
    }
    if (a.coercivity) {
        std::size_t total = 0, good = 0;
        for (const auto* r : ok)
            for (const auto& x : r->records) {
                ++total;
                good += coercivity_holds(x);
            }
        double q[3] = {0, 0, 0};
        for (const auto& row : rep.rows)
            for (int i = 0; i < 3; ++i) q[i] = std::max(q[i], row.q_ratio_max[i]);
        add("coercivity Q1-Q3", total > 0 && good == total,
            std::to_string(good) + "/" + std::to_string(total) + " records; max Q1/E " + fmt(q[0]) + ", Q2/E " +
                fmt(q[1]) + ", Q3/E " + fmt(q[2]));
    }
    if (a.q4_uniform_factor) {
        // One constant C(Sigma) for the whole sweep: the constant fitted without
        // the finest eps must already bound the finest one up to the factor.
        double lo = std::numeric_limits<double>::infinity(), all = 0.0, coarse = 0.0, finest_eps = 0.0;
        for (const auto& row : rep.rows)
            if (row.status == "ok" && (finest_eps == 0.0 || row.eps < finest_eps)) finest_eps = row.eps;
        int n = 0;
        for (const auto& row : rep.rows)
            if (row.status == "ok") {
                ++n;
                lo = std::min(lo, row.q4_ratio_max);
                all = std::max(all, row.q4_ratio_max);
                if (row.eps != finest_eps) coarse = std::max(coarse, row.q4_ratio_max);
            }
        add("Q4/E uniform in eps", n >= 2 && std::isfinite(all) && all <= *a.q4_uniform_factor * coarse,
            "max_t Q4/E in [" + fmt(lo) + ", " + fmt(all) + "], C(Sigma) " + fmt(all) + " vs " + fmt(coarse) +
                " without the finest eps");
    }
    if (a.hausdorff_eps_max) {
        bool p = !ok.empty();
        double worst = 0.0;
        for (const auto& row : rep.rows)
            if (row.status == "ok") {
                worst = std::max(worst, row.hausdorff_max / row.eps);
                p = p && row.hausdorff_max <= *a.hausdorff_eps_max * row.eps;
            }
        add("interface stays near reference", p, "max Hausdorff/eps = " + fmt(worst));
    }
    if (a.gronwall_ratio_max) {
        std::vector<double> cs;
        for (const auto& row : rep.rows)
            if (row.status == "ok") cs.push_back(row.C_fit);
        double lo = cs.empty() ? 0.0 : *std::min_element(cs.begin(), cs.end());
        double hi = cs.empty() ? 0.0 : *std::max_element(cs.begin(), cs.end());
        add("Gronwall constant uniform", cs.size() >= 2 && gronwall_uniform(cs, *a.gronwall_ratio_max),
            "C_fit in [" + fmt(lo) + ", " + fmt(hi) + "]");
    }
    if (a.calibration) {
        if (!cert) {
            add("calibration certified", false, "calibration disabled in config");
        } else {
            std::string d;
            for (const auto& v : cert->verdicts)
                d += v.condition + " " + v.mode + ", ";
            d += cert->shortness_ok ? "shortness ok, " : "shortness FAILED, ";
            d += cert->coercivity_ok ? "coercivity ok" : "coercivity FAILED";
            add("calibration certified", cert->pass, d);
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Report files

inline constexpr const char* sweep_header =
    "eps,nx,ny,dt,steps,status,sup_L1,E0,sup_EF,C_fit,mass_drift,energy_excess,max_Q1_over_E,max_Q2_over_E,"
    "max_Q3_over_E,max_Q4_over_E,lambda_gap,max_hausdorff,sign_incoherent_records,runtime_s";

inline void write_report(const std::filesystem::path& dir, const SweepReport& rep)
{
    std::filesystem::create_directories(dir);
    {
        std::ofstream os(dir / "sweep_report.csv");
        if (!os) throw IoError("cannot write sweep_report.csv");
        os.precision(10);
        os << sweep_header << '\n';
        for (const auto& r : rep.rows) {
            std::string status = r.status;
            std::replace(status.begin(), status.end(), ',', ';');
            os << r.eps << ',' << r.nx << ',' << r.ny << ',' << r.dt << ',' << r.steps << ',' << status << ','
               << r.sup_L1 << ',' << r.E0 << ',' << r.sup_EF << ',' << r.C_fit << ',' << r.mass_drift << ','
               << r.energy_excess << ',' << r.q_ratio_max[0] << ',' << r.q_ratio_max[1] << ',' << r.q_ratio_max[2]
               << ',' << r.q4_ratio_max << ',' << r.lambda_gap << ',' << r.hausdorff_max << ','
               << r.sign_incoherent << ',' << r.runtime_s << '\n';
        }
    }
    {
        std::ofstream os(dir / "fits.csv");
        if (!os) throw IoError("cannot write fits.csv");
        os.precision(10);
        os << "quantity,target,slope,intercept,residual,ci_low,ci_high\n";
        for (const auto& f : rep.fits) {
            if (!f.fit) continue;
            os << f.quantity << ',' << f.target << ',' << f.fit->slope << ',' << f.fit->intercept << ','
               << f.fit->residual << ',' << f.fit->ci_low << ',' << f.fit->ci_high << '\n';
        }
    }
    std::ofstream os(dir / "summary.txt");
    if (!os) throw IoError("cannot write summary.txt");
    os.precision(4);
    os << "scenario: " << to_string(rep.scenario) << "\n\n";
    for (const auto& r : rep.rows)
        os << "eps " << eps_label(r.eps) << ": grid " << r.nx << "x" << r.ny << ", dt " << r.dt << ", " << r.status
           << ", sup L1 " << r.sup_L1 << ", E0 " << r.E0 << ", C_fit " << r.C_fit << ", " << r.runtime_s << " s\n";
    os << '\n';
    for (const auto& f : rep.fits)
        if (f.fit)
            os << f.quantity << " slope " << f.fit->slope << " (95% CI " << f.fit->ci_low << " .. " << f.fit->ci_high
               << ", target " << f.target << ")\n";
        else
            os << f.quantity << " fit unavailable: " << f.error << '\n';
    os << '\n';
    for (const auto& ch : rep.checks) os << (ch.pass ? "PASS " : "FAIL ") << ch.name << ": " << ch.detail << '\n';
    os << (rep.pass ? "\nall checks passed\n" : "\nsome checks failed\n");
}

// ---------------------------------------------------------------------------
// Orchestration

/// Worker count from NLAC_WORKERS, else the hardware concurrency.
inline int worker_count()
{
    if (const char* env = std::getenv("NLAC_WORKERS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

inline Certification certify_reference(const ExperimentConfig& c, const ReferenceData& ref)
{
    CertificationOptions opt;
    opt.cells_per_delta = c.calibration.cells_per_delta;
    opt.shells.shells = c.calibration.shells;
    return certify_calibration(ref.checks, ref.delta, opt);
}

struct RunOutput {
    std::vector<RunResult> runs;
    std::optional<Certification> certification;
    SweepReport report;
};

/// Full sweep: reference flow, calibration certification, one phase-field
/// run per eps (concurrently), report.  A failing eps is recorded, not fatal.
inline RunOutput run(const ExperimentConfig& c, std::ostream* log = &std::cerr)
{
    validate(c);
    std::mutex log_mutex;
    auto say = [&](const std::string& msg) {
        if (!log) return;
        std::lock_guard lock(log_mutex);
        *log << msg << std::endl;
    };
    const auto& out = c.output_dir;
    std::filesystem::create_directories(out);
    {
        std::ofstream os(out / "config.json");
        os << to_json(c).dump(2) << '\n';
    }

    say("reference flow (" + to_string(c.scenario) + ")");
    const auto ref = reference_flow(c);
    write_trajectory(out / "reference", ref.records);

    RunOutput res;
    if (c.calibration.enabled && !ref.checks.empty()) {
        std::vector<CurveState> snaps;
        for (const auto& t : ref.checks)
            for (const auto* s : {&t.before, &t.now, &t.after}) snaps.push_back(*s);
        write_trajectory(out / "calibration" / "trajectory", snaps);
        say("certifying calibration");
        res.certification = certify_reference(c, ref);
        write_residuals_csv(out / "calibration" / "residuals.csv", res.certification->coarse);
        write_verdicts_csv(out / "calibration" / "verdicts.csv", *res.certification);
    }

    res.runs.resize(c.eps_list.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k; (k = next++) < c.eps_list.size();) {
            const double eps = c.eps_list[k];
            say("eps " + eps_label(eps) + ": start");
            RunResult r;
            try {
                r = run_single(c, ref, eps);
            } catch (const Error& e) {
                r.eps = eps;
                r.status = std::string("error: ") + e.what();
            }
            write_run(out / "runs" / eps_label(eps), r);
            say("eps " + eps_label(eps) + ": " + r.status + " (" + std::to_string(r.runtime_s) + " s)");
            res.runs[k] = std::move(r);
        }
    };
    const int nw = std::min<int>(worker_count(), int(c.eps_list.size()));
    std::vector<std::jthread> pool;
    for (int w = 1; w < nw; ++w) pool.emplace_back(worker);
    worker();
    pool.clear();

    res.report = evaluate(c, res.runs, res.certification);
    write_report(out, res.report);
    return res;
}

/// Rebuilds the report of a finished sweep directory from its files.
inline SweepReport report_from_dir(const std::filesystem::path& dir)
{
    std::ifstream is(dir / "config.json");
    if (!is) throw IoError("cannot read " + (dir / "config.json").string());
    auto c = parse_config(nlohmann::json::parse(is));
    std::vector<RunResult> runs;
    for (double eps : c.eps_list) runs.push_back(read_run(dir / "runs" / eps_label(eps)));
    std::optional<Certification> cert;
    if (c.acceptance.calibration && std::filesystem::exists(dir / "calibration" / "trajectory" / "index.csv")) {
        const auto snaps = read_trajectory(dir / "calibration" / "trajectory");
        const auto ref = read_trajectory(dir / "reference");
        std::vector<SnapshotTriple> triples;
        for (std::size_t q = 0; q + 2 < snaps.size(); q += 3) triples.push_back({snaps[q], snaps[q + 1], snaps[q + 2]});
        CertificationOptions opt;
        opt.cells_per_delta = c.calibration.cells_per_delta;
        opt.shells.shells = c.calibration.shells;
        cert = certify_calibration(triples, trajectory_delta(ref), opt);
    }
    auto rep = evaluate(c, runs, cert);
    write_report(dir, rep);
    return rep;
}

} // namespace nlac
