#pragma once

// Closed planar curves represented by markers at uniformly spaced parameter
// values alpha_j = 2*pi*j/M, with spectral (Fourier-in-alpha) derivatives, and
// their evolution by volume-preserving curvature flow V = -H + lambda.

#include "nlac/errors.hpp"
#include "nlac/fft.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace nlac {

using Point = std::array<double, 2>;

inline Point operator+(Point a, Point b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Point operator-(Point a, Point b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Point operator*(double s, Point a) { return {s * a[0], s * a[1]}; }
inline double dot(Point a, Point b) { return a[0] * b[0] + a[1] * b[1]; }
inline double cross(Point a, Point b) { return a[0] * b[1] - a[1] * b[0]; }
inline double norm(Point a) { return std::hypot(a[0], a[1]); }

/// Markers of a closed, counterclockwise curve at time t.
struct CurveState {
    std::vector<Point> markers;
    double t = 0.0;

    int size() const { return int(markers.size()); }
};

inline constexpr int min_markers = 32;

/// Per-marker geometry.  Derivatives are with respect to the parameter
/// alpha in [0, 2pi).  H = div(nu) with nu the exterior normal, so H = 1/R on
/// a circle of radius R.
struct CurveGeometry {
    std::vector<Point> d1, d2;            // x_alpha, x_alpha_alpha
    std::vector<double> speed;            // |x_alpha|, the arclength element
    std::vector<Point> tangent, normal;
    std::vector<double> curvature;
    double area = 0.0;
    double perimeter = 0.0;

    int size() const { return int(speed.size()); }
    double dalpha() const { return 2.0 * std::numbers::pi / size(); }

    /// Trapezoidal (spectrally accurate) arclength integral of per-marker values.
    double arclength_integral(const std::vector<double>& f) const
    {
        double s = 0.0;
        for (int j = 0; j < size(); ++j) s += f[j] * speed[j];
        return s * dalpha();
    }
};

namespace detail {

inline std::vector<double> component(const std::vector<Point>& p, int c)
{
    std::vector<double> out(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) out[j] = p[j][c];
    return out;
}

inline bool segments_cross(Point a, Point b, Point c, Point d)
{
    const double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
    const double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0;
}

} // namespace detail

/// Segment-pair sweep over the marker polygon.
inline bool is_simple(const std::vector<Point>& p)
{
    const int m = int(p.size());
    for (int a = 0; a < m; ++a) {
        const Point p0 = p[a], p1 = p[(a + 1) % m];
        const double xmin = std::min(p0[0], p1[0]), xmax = std::max(p0[0], p1[0]);
        const double ymin = std::min(p0[1], p1[1]), ymax = std::max(p0[1], p1[1]);
        for (int b = a + 2; b < m; ++b) {
            if (a == 0 && b == m - 1) continue;
            const Point q0 = p[b], q1 = p[(b + 1) % m];
            if (std::max(q0[0], q1[0]) < xmin || std::min(q0[0], q1[0]) > xmax) continue;
            if (std::max(q0[1], q1[1]) < ymin || std::min(q0[1], q1[1]) > ymax) continue;
            if (detail::segments_cross(p0, p1, q0, q1)) return false;
        }
    }
    return true;
}

inline CurveGeometry geometry(const CurveState& c, bool check_simple = true)
{
    const int m = c.size();
    if (m < min_markers) throw ConfigError("curve needs at least 32 markers");
    if (check_simple && !is_simple(c.markers))
        throw SelfIntersection("curve is not simple at t = " + std::to_string(c.t));

    const double period = 2.0 * std::numbers::pi;
    const auto x = detail::component(c.markers, 0), y = detail::component(c.markers, 1);
    const auto xa = fft::periodic_derivative(x, period), ya = fft::periodic_derivative(y, period);
    const auto xaa = fft::periodic_derivative(xa, period), yaa = fft::periodic_derivative(ya, period);

    CurveGeometry g;
    g.d1.resize(m);
    g.d2.resize(m);
    g.speed.resize(m);
    g.tangent.resize(m);
    g.normal.resize(m);
    g.curvature.resize(m);
    double area2 = 0.0, per = 0.0;
    for (int j = 0; j < m; ++j) {
        const double sa = std::hypot(xa[j], ya[j]);
        g.d1[j] = {xa[j], ya[j]};
        g.d2[j] = {xaa[j], yaa[j]};
        g.speed[j] = sa;
        g.tangent[j] = {xa[j] / sa, ya[j] / sa};
        g.normal[j] = {ya[j] / sa, -xa[j] / sa};
        g.curvature[j] = (xa[j] * yaa[j] - ya[j] * xaa[j]) / (sa * sa * sa);
        area2 += x[j] * ya[j] - y[j] * xa[j];
        per += sa;
    }
    g.area = 0.5 * area2 * g.dalpha();
    g.perimeter = per * g.dalpha();
    return g;
}

struct NormalVelocity {
    std::vector<double> V;
    double lambda = 0.0;
};

/// V = -H + lambda with lambda the mean curvature, so that the enclosed area
/// is stationary.
inline NormalVelocity vpmcf_velocity(const CurveGeometry& g)
{
    NormalVelocity out;
    out.lambda = g.arclength_integral(g.curvature) / g.perimeter;
    out.V.resize(g.size());
    for (int j = 0; j < g.size(); ++j) out.V[j] = -g.curvature[j] + out.lambda;
    return out;
}

// ---------------------------------------------------------------------------
// Trigonometric interpolation of periodic marker data.

/// Evaluates the trigonometric interpolant of periodic samples at arbitrary
/// parameter values.  O(M) per evaluation.
class TrigInterpolant {
public:
    explicit TrigInterpolant(const std::vector<double>& f) : n_(int(f.size()))
    {
        coef_ = fft::Plan1D::get(n_).forward(f);
        for (auto& c : coef_) c /= double(n_);
    }

    /// Value and first two alpha-derivatives.
    std::array<double, 3> eval(double alpha) const
    {
        double v = coef_[0].real(), d1 = 0.0, d2 = 0.0;
        for (int k = 1; k <= n_ / 2; ++k) {
            const double w = (2 * k == n_) ? 1.0 : 2.0;
            const double c = std::cos(k * alpha), s = std::sin(k * alpha);
            const double re = coef_[k].real(), im = coef_[k].imag();
            const double val = re * c - im * s;
            const double der = -re * s - im * c;
            v += w * val;
            if (2 * k != n_) {
                d1 += w * k * der;
                d2 -= w * k * k * val;
            }
        }
        return {v, d1, d2};
    }

private:
    int n_;
    std::vector<fft::cplx> coef_;
};

/// Resamples a curve so that its markers are equally spaced in arclength.
inline CurveState equalize_arclength(const CurveState& c, int m_out = 0)
{
    const int m = c.size();
    if (m_out <= 0) m_out = m;
    const auto g = geometry(c, false);
    const double period = 2.0 * std::numbers::pi;
    // s(alpha) = (L/2pi) alpha + periodic part
    const double mean_speed = g.perimeter / period;
    std::vector<double> fluct(m);
    for (int j = 0; j < m; ++j) fluct[j] = g.speed[j] - mean_speed;
    const auto per = fft::periodic_antiderivative(fluct, period);
    const TrigInterpolant sper(per), spd(g.speed);
    const TrigInterpolant xi(detail::component(c.markers, 0)), yi(detail::component(c.markers, 1));
    const double s0 = sper.eval(0.0)[0];

    CurveState out;
    out.t = c.t;
    out.markers.resize(m_out);
    double alpha = 0.0;
    for (int j = 0; j < m_out; ++j) {
        const double target = g.perimeter * j / m_out;
        for (int it = 0; it < 50; ++it) {
            const double s = mean_speed * alpha + sper.eval(alpha)[0] - s0;
            const double step = (s - target) / spd.eval(alpha)[0];
            alpha -= step;
            if (std::abs(step) < 1e-15) break;
        }
        out.markers[j] = {xi.eval(alpha)[0], yi.eval(alpha)[0]};
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shapes.

inline CurveState make_circle(Point center, double radius, int m)
{
    CurveState c;
    c.markers.resize(m);
    for (int j = 0; j < m; ++j) {
        const double a = 2.0 * std::numbers::pi * j / m;
        c.markers[j] = {center[0] + radius * std::cos(a), center[1] + radius * std::sin(a)};
    }
    return c;
}

/// Ellipse with semi-axes a (along x) and b, sampled at uniform angle theta
/// unless `equal_arclength` is set.
inline CurveState make_ellipse(Point center, double a, double b, int m, bool equal_arclength = true)
{
    CurveState c;
    c.markers.resize(m);
    for (int j = 0; j < m; ++j) {
        const double th = 2.0 * std::numbers::pi * j / m;
        c.markers[j] = {center[0] + a * std::cos(th), center[1] + b * std::sin(th)};
    }
    return equal_arclength ? equalize_arclength(c) : c;
}

/// r(theta) = R (1 + sum_k a_k cos(k theta + phase_k)) with random amplitudes
/// of total size `amplitude` on modes 2..max_mode.
inline CurveState make_perturbed_circle(Point center, double radius, int m, double amplitude, int max_mode,
                                        unsigned seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> amp, phase;
    double total = 0.0;
    for (int k = 2; k <= max_mode; ++k) {
        amp.push_back(uni(rng) / (k * k));
        phase.push_back(2.0 * std::numbers::pi * uni(rng));
        total += amp.back();
    }
    for (double& a : amp) a *= amplitude / total;
    CurveState c;
    c.markers.resize(m);
    for (int j = 0; j < m; ++j) {
        const double th = 2.0 * std::numbers::pi * j / m;
        double r = 1.0;
        for (std::size_t k = 0; k < amp.size(); ++k) r += amp[k] * std::cos((k + 2) * th + phase[k]);
        c.markers[j] = {center[0] + radius * r * std::cos(th), center[1] + radius * r * std::sin(th)};
    }
    return equalize_arclength(c);
}

// ---------------------------------------------------------------------------
// Evolution.

struct EvolveOptions {
    double dt = 1e-4;
    /// Output times; the integrator lands on each exactly.  Must be sorted.
    std::vector<double> snapshot_times;
    /// Rate at which deviations from uniform arclength spacing are relaxed.
    /// <= 0 selects max(H^2) of the initial curve.
    double redistribution_rate = -1.0;
    bool check_simple = true;
};

struct Trajectory {
    std::vector<CurveState> snapshots;
    int steps = 0;
    bool stiffness_warning = false;
};

/// Marker velocity V nu + T tau, with the tangential part chosen so that
/// d/dt |x_alpha| = dL/dt / 2pi + rate * (L/2pi - |x_alpha|).
inline std::vector<Point> marker_velocity(const CurveState& c, double redistribution_rate)
{
    const auto g = geometry(c, false);
    const auto nv = vpmcf_velocity(g);
    const int m = g.size();
    const double period = 2.0 * std::numbers::pi;
    std::vector<double> hv(m);
    for (int j = 0; j < m; ++j) hv[j] = g.curvature[j] * nv.V[j];
    const double dL = g.arclength_integral(hv);
    const double mean_speed = g.perimeter / period;
    std::vector<double> ta(m);
    for (int j = 0; j < m; ++j)
        ta[j] = dL / period - g.speed[j] * hv[j] + redistribution_rate * (mean_speed - g.speed[j]);
    const auto tang = fft::periodic_antiderivative(ta, period);
    std::vector<Point> vel(m);
    for (int j = 0; j < m; ++j) vel[j] = nv.V[j] * g.normal[j] + tang[j] * g.tangent[j];
    return vel;
}

/// Largest step for which classical RK4 stays inside its stability region on
/// the stiffest (highest-wavenumber) curvature mode, with a safety factor 1/2.
inline double stable_dt(const CurveGeometry& g)
{
    const double kmax = (g.size() / 2) / (g.perimeter / (2.0 * std::numbers::pi));
    return 0.5 * 2.78 / (kmax * kmax);
}

inline Trajectory evolve(const CurveState& initial, const EvolveOptions& opt)
{
    if (!(opt.dt > 0.0)) throw ConfigError("evolve: dt must be positive");
    Trajectory out;
    CurveState c = initial;
    const int m = c.size();
    const auto g0 = geometry(c, opt.check_simple);
    double rate = opt.redistribution_rate;
    if (rate <= 0.0) {
        rate = 0.0;
        for (double h : g0.curvature) rate = std::max(rate, h * h);
    }

    auto advance = [&](double h) {
        auto shifted = [&](const std::vector<Point>& k, double a) {
            CurveState s;
            s.markers.resize(m);
            for (int j = 0; j < m; ++j) s.markers[j] = c.markers[j] + a * k[j];
            return s;
        };
        const auto k1 = marker_velocity(c, rate);
        const auto k2 = marker_velocity(shifted(k1, 0.5 * h), rate);
        const auto k3 = marker_velocity(shifted(k2, 0.5 * h), rate);
        const auto k4 = marker_velocity(shifted(k3, h), rate);
        for (int j = 0; j < m; ++j)
            c.markers[j] = c.markers[j] + (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        c.t += h;
        ++out.steps;
    };

    for (double target : opt.snapshot_times) {
        if (target < c.t - 1e-14) throw ConfigError("evolve: snapshot times must be sorted and >= t0");
        while (c.t < target - 1e-14 * std::max(1.0, std::abs(target))) {
            const double h = std::min(opt.dt, target - c.t);
            const auto g = geometry(c, false);
            double hmax = 0.0;
            for (double k : g.curvature) hmax = std::max(hmax, std::abs(k));
            if (hmax * h > 0.1) out.stiffness_warning = true;
            advance(h);
        }
        c.t = target;
        if (opt.check_simple && !is_simple(c.markers))
            throw SelfIntersection("curve self-intersects at t = " + std::to_string(c.t));
        out.snapshots.push_back(c);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trajectory files: one CSV per snapshot ("t,<time>" line, "x,y" header, one
// marker per row) plus index.csv listing "snapshot,t,file".

inline void write_trajectory(const std::filesystem::path& dir, const std::vector<CurveState>& snaps)
{
    std::filesystem::create_directories(dir);
    std::ofstream index(dir / "index.csv");
    if (!index) throw IoError("cannot write " + (dir / "index.csv").string());
    index << "snapshot,t,file\n";
    index.precision(17);
    for (std::size_t k = 0; k < snaps.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "snapshot_%04zu.csv", k);
        std::ofstream os(dir / name);
        if (!os) throw IoError(std::string("cannot write ") + name);
        os.precision(17);
        os << "t," << snaps[k].t << "\nx,y\n";
        for (const auto& p : snaps[k].markers) os << p[0] << ',' << p[1] << '\n';
        index << k << ',' << snaps[k].t << ',' << name << '\n';
    }
}

inline CurveState read_snapshot(const std::filesystem::path& file)
{
    std::ifstream is(file);
    if (!is) throw IoError("cannot read " + file.string());
    CurveState c;
    std::string line;
    std::getline(is, line);
    if (line.rfind("t,", 0) != 0) throw IoError(file.string() + ": missing 't,' line");
    c.t = std::stod(line.substr(2));
    std::getline(is, line); // header
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw IoError(file.string() + ": malformed row");
        c.markers.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
    }
    return c;
}

inline std::vector<CurveState> read_trajectory(const std::filesystem::path& dir)
{
    std::ifstream index(dir / "index.csv");
    if (!index) throw IoError("cannot read " + (dir / "index.csv").string());
    std::string line;
    std::getline(index, line);
    std::vector<CurveState> out;
    while (std::getline(index, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string k, t, file;
        std::getline(ss, k, ',');
        std::getline(ss, t, ',');
        std::getline(ss, file, ',');
        out.push_back(read_snapshot(dir / file));
    }
    return out;
}

} // namespace nlac
