#pragma once

// Error functionals between a phase field and a calibrated reference flow:
// the relative energy, the weighted bulk error, the L1 phase error, the
// coercivity quantities bounded by the relative energy, and a Gronwall monitor.

#include "nlac/calibration.hpp"
#include "nlac/curve.hpp"
#include "nlac/double_well.hpp"
#include "nlac/field.hpp"
#include "nlac/phase_solver.hpp"
#include "nlac/signed_distance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace nlac {

// ---------------------------------------------------------------------------
// Indicator of the enclosed region with exact area fractions on cut cells.

namespace detail {

/// Sutherland-Hodgman clip of a (possibly non-convex) polygon against the
/// axis-aligned box [x0,x1] x [y0,y1]; returns the area of the clipped part.
inline double clipped_area(const std::vector<Point>& poly, double x0, double x1, double y0, double y1)
{
    std::vector<Point> in = poly, out;
    auto clip = [&](auto inside, auto cut) {
        out.clear();
        const std::size_t n = in.size();
        for (std::size_t a = 0; a < n; ++a) {
            const Point p = in[a], q = in[(a + 1) % n];
            const bool pi = inside(p), qi = inside(q);
            if (pi) out.push_back(p);
            if (pi != qi) out.push_back(cut(p, q));
        }
        std::swap(in, out);
    };
    auto cut_x = [](double x) {
        return [x](Point p, Point q) { return Point{x, p[1] + (x - p[0]) / (q[0] - p[0]) * (q[1] - p[1])}; };
    };
    auto cut_y = [](double y) {
        return [y](Point p, Point q) { return Point{p[0] + (y - p[1]) / (q[1] - p[1]) * (q[0] - p[0]), y}; };
    };
    clip([&](Point p) { return p[0] >= x0; }, cut_x(x0));
    if (in.empty()) return 0.0;
    clip([&](Point p) { return p[0] <= x1; }, cut_x(x1));
    if (in.empty()) return 0.0;
    clip([&](Point p) { return p[1] >= y0; }, cut_y(y0));
    if (in.empty()) return 0.0;
    clip([&](Point p) { return p[1] <= y1; }, cut_y(y1));
    double a2 = 0.0;
    for (std::size_t a = 0; a < in.size(); ++a) a2 += cross(in[a], in[(a + 1) % in.size()]);
    return std::abs(0.5 * a2);
}

/// Polygon through the spline of the markers with `refine` points per marker.
inline std::vector<Point> refined_polygon(const CurveState& c, int refine)
{
    const auto g = geometry(c, false);
    const CurveInterpolant spline(c, g);
    std::vector<Point> out;
    out.reserve(std::size_t(c.size()) * refine);
    for (int j = 0; j < c.size() * refine; ++j) out.push_back(spline.eval(j * spline.dalpha() / refine).p);
    return out;
}

} // namespace detail

/// chi_Omega averaged over each grid cell: 0/1 by the even-odd test away
/// from the curve, exact polygon clipping on cells the curve passes through.
inline ScalarField indicator_fractions(const CurveState& curve, const PeriodicGrid& grid, int refine = 4)
{
    const auto poly = detail::refined_polygon(curve, refine);
    const auto inside = detail::polygon_inside_mask(poly, grid);
    ScalarField chi(grid);
    for (std::size_t k = 0; k < grid.size(); ++k) chi[k] = inside[k] ? 1.0 : 0.0;

    std::vector<std::uint8_t> cut(grid.size(), 0);
    const double hx = grid.hx(), hy = grid.hy();
    for (std::size_t a = 0; a < poly.size(); ++a) {
        const Point p = poly[a], q = poly[(a + 1) % poly.size()];
        const int i0 = int(std::floor(std::min(p[0], q[0]) / hx)), i1 = int(std::floor(std::max(p[0], q[0]) / hx));
        const int j0 = int(std::floor(std::min(p[1], q[1]) / hy)), j1 = int(std::floor(std::max(p[1], q[1]) / hy));
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i)
                if (i >= 0 && j >= 0 && i < grid.nx() && j < grid.ny()) cut[grid.index(i, j)] = 1;
    }
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i) {
            const auto k = grid.index(i, j);
            if (!cut[k]) continue;
            chi[k] = detail::clipped_area(poly, i * hx, (i + 1) * hx, j * hy, (j + 1) * hy) / (hx * hy);
        }
    return chi;
}

// ---------------------------------------------------------------------------

struct RelativeEnergyBreakdown {
    double energy = 0.0;       // E_eps[u]
    double E_rel = 0.0;        // discrepancy + tilt
    double discrepancy = 0.0;  // int eps/2 |grad u|^2 + W/eps - |grad psi|
    double tilt = 0.0;         // int (1 - xi . nu_eps) |grad psi|
    double F_bulk = 0.0;       // int |psi - chi| |theta|
    double F_signed = 0.0;     // int (psi - chi) theta
    bool sign_incoherent = false;
    double L1_error = 0.0;     // int |psi - chi|
    double tube_L1 = 0.0;      // int over |s| < delta of |psi - chi|
    double Q1 = 0.0, Q2 = 0.0, Q3 = 0.0, Q4 = 0.0;
    std::size_t nu_fallback_points = 0; // points where nu_eps = e = (1,0)
};

inline constexpr double nu_eps_threshold = 1e-14;
inline constexpr double sign_coherence_tolerance = 0.05;
/// Bulk errors below this are roundoff and always coherent.
inline constexpr double bulk_error_floor = 1e-13;

/// F = int (psi - chi) theta and int |psi - chi||theta| evaluated separately.
struct BulkError {
    double signed_value = 0.0;
    double abs_value = 0.0;
    bool coherent = true;
};

template <DoubleWellPotential P = QuarticWell>
BulkError bulk_error(const PhaseState& s, const ScalarField& chi, const Calibration& cal)
{
    KahanSum sg, ab;
    for (std::size_t k = 0; k < chi.grid().size(); ++k) {
        const double d = P::phi(s.u[k]) - chi[k];
        sg.add(d * cal.theta[k]);
        ab.add(std::abs(d) * std::abs(cal.theta[k]));
    }
    const double area = chi.grid().cell_area();
    BulkError out{sg.value() * area, ab.value() * area};
    out.coherent = std::abs(out.signed_value - out.abs_value) <= sign_coherence_tolerance * out.abs_value + bulk_error_floor;
    return out;
}

/// Throwing variant for callers that treat sign incoherence as an error.
template <DoubleWellPotential P = QuarticWell>
double bulk_error_checked(const PhaseState& s, const ScalarField& chi, const Calibration& cal)
{
    const auto b = bulk_error<P>(s, chi, cal);
    if (!b.coherent)
        throw SignIncoherence("signed and absolute bulk errors differ by more than 5% at t = " +
                              std::to_string(s.t));
    return b.abs_value;
}

/// All functionals at one time.  `q4_cap` is the constant in min(dist^2, cap).
template <DoubleWellPotential P = QuarticWell>
RelativeEnergyBreakdown relative_energy(const PhaseState& s, const Calibration& cal, const ScalarField& chi,
                                        double q4_cap, Backend backend = Backend::spectral)
{
    const auto& g = s.u.grid();
    if (!(cal.xi.grid() == g) || !(chi.grid() == g)) throw ConfigError("relative_energy: grids differ");
    const auto grad = gradient(s.u, backend);
    const double eps = s.eps;
    KahanSum energy, disc, tilt, l1, tube, q1, q2, q3, q4;
    RelativeEnergyBreakdown r;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double u = s.u[k];
        const double gx = grad.x[k], gy = grad.y[k];
        const double gu = std::hypot(gx, gy);
        const double dens = 0.5 * eps * gu * gu + P::W(u) / eps;
        // |grad psi| by the chain rule
        const double dphi = P::phi_prime(u);
        const double gpsi = dphi * gu;
        Point nu{1.0, 0.0};
        if (gpsi > nu_eps_threshold)
            nu = {-gx / gu, -gy / gu};
        else
            ++r.nu_fallback_points;
        const Point xi{cal.xi.x[k], cal.xi.y[k]};
        const Point diff = nu - xi;
        const double d2 = dot(diff, diff);

        energy.add(dens);
        disc.add(dens - gpsi);
        tilt.add((1.0 - dot(xi, nu)) * gpsi);
        const double e1 = std::sqrt(eps) * gu - P::sqrt_2W(u) / std::sqrt(eps);
        q1.add(e1 * e1);
        q2.add(d2 * gpsi);
        q3.add(d2 * eps * gu * gu);
        const double dist = std::abs(cal.sd.s[k]);
        q4.add(std::min(dist * dist, q4_cap) * dens);

        const double e = std::abs(P::phi(u) - chi[k]);
        l1.add(e);
        if (dist < cal.delta) tube.add(e);
    }
    const double a = g.cell_area();
    r.energy = energy.value() * a;
    r.discrepancy = disc.value() * a;
    r.tilt = tilt.value() * a;
    r.E_rel = r.discrepancy + r.tilt;
    r.Q1 = q1.value() * a;
    r.Q2 = q2.value() * a;
    r.Q3 = q3.value() * a;
    r.Q4 = q4.value() * a;
    r.L1_error = l1.value() * a;
    r.tube_L1 = tube.value() * a;
    const auto b = bulk_error<P>(s, chi, cal);
    r.F_bulk = b.abs_value;
    r.F_signed = b.signed_value;
    r.sign_incoherent = !b.coherent;
    return r;
}

// ---------------------------------------------------------------------------
// Gronwall monitor: minimal C >= 0 with log(E+F)(t) - log(E+F)(0) <= C t.

inline constexpr double gronwall_floor = 1e-16;

struct GronwallSample {
    double t = 0.0;
    double E = 0.0;
    double F = 0.0;
};

inline double gronwall_constant(const std::vector<GronwallSample>& rec)
{
    if (rec.size() < 2) throw ConfigError("gronwall_constant needs at least two records");
    const double l0 = std::log(std::max(rec.front().E + rec.front().F, gronwall_floor));
    double c = 0.0;
    for (std::size_t k = 1; k < rec.size(); ++k) {
        const double dt = rec[k].t - rec.front().t;
        if (!(dt > 0.0)) continue;
        c = std::max(c, (std::log(std::max(rec[k].E + rec[k].F, gronwall_floor)) - l0) / dt);
    }
    return c;
}

/// Uniformity across an eps-sweep: the largest constant within `factor` of the
/// smallest.
inline bool gronwall_uniform(const std::vector<double>& constants, double factor = 2.0)
{
    if (constants.empty()) return false;
    const auto [lo, hi] = std::minmax_element(constants.begin(), constants.end());
    if (*hi == 0.0) return true;
    return *lo > 0.0 && *hi < factor * *lo;
}

// ---------------------------------------------------------------------------
// Level sets and Hausdorff distance.

struct Segment {
    Point a, b;
};

/// Marching squares on the periodic grid (cells between neighbouring grid
/// points, without wrapping); saddles are resolved by the cell-centre value.
inline std::vector<Segment> level_set(const ScalarField& f, double level)
{
    const auto& g = f.grid();
    std::vector<Segment> segs;
    auto lerp = [&](Point p, Point q, double fp, double fq) {
        const double t = (level - fp) / (fq - fp);
        return p + t * (q - p);
    };
    for (int j = 0; j + 1 < g.ny(); ++j)
        for (int i = 0; i + 1 < g.nx(); ++i) {
            const Point p[4] = {{g.x(i), g.y(j)}, {g.x(i + 1), g.y(j)}, {g.x(i + 1), g.y(j + 1)}, {g.x(i), g.y(j + 1)}};
            const double v[4] = {f(i, j), f(i + 1, j), f(i + 1, j + 1), f(i, j + 1)};
            std::vector<Point> cross_pts;
            int edge_of[4];
            for (int e = 0; e < 4; ++e) {
                const int a = e, b = (e + 1) % 4;
                edge_of[e] = -1;
                if ((v[a] > level) != (v[b] > level)) {
                    edge_of[e] = int(cross_pts.size());
                    cross_pts.push_back(lerp(p[a], p[b], v[a], v[b]));
                }
            }
            if (cross_pts.size() == 2) {
                segs.push_back({cross_pts[0], cross_pts[1]});
            } else if (cross_pts.size() == 4) {
                const double centre = 0.25 * (v[0] + v[1] + v[2] + v[3]);
                // pair crossings so that corner 0 is separated consistently with the centre
                if ((centre > level) == (v[0] > level)) {
                    segs.push_back({cross_pts[edge_of[0]], cross_pts[edge_of[1]]});
                    segs.push_back({cross_pts[edge_of[2]], cross_pts[edge_of[3]]});
                } else {
                    segs.push_back({cross_pts[edge_of[3]], cross_pts[edge_of[0]]});
                    segs.push_back({cross_pts[edge_of[1]], cross_pts[edge_of[2]]});
                }
            }
        }
    return segs;
}

inline double point_segment_distance(Point x, Point a, Point b)
{
    const Point ab = b - a;
    const double l2 = dot(ab, ab);
    const double t = l2 > 0.0 ? std::clamp(dot(x - a, ab) / l2, 0.0, 1.0) : 0.0;
    return norm(x - (a + t * ab));
}

/// Symmetric Hausdorff distance between a set of segments and a closed
/// polygon, both sampled at their vertices.
inline double hausdorff_distance(const std::vector<Segment>& segs, const std::vector<Point>& polygon)
{
    if (segs.empty() || polygon.empty()) return std::numeric_limits<double>::infinity();
    double d = 0.0;
    const std::size_t n = polygon.size();
    for (const auto& s : segs)
        for (const Point x : {s.a, s.b}) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < n; ++a)
                best = std::min(best, point_segment_distance(x, polygon[a], polygon[(a + 1) % n]));
            d = std::max(d, best);
        }
    for (const Point x : polygon) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& s : segs) best = std::min(best, point_segment_distance(x, s.a, s.b));
        d = std::max(d, best);
    }
    return d;
}

} // namespace nlac
