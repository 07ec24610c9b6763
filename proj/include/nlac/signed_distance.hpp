#pragma once

// Signed distance to a marker curve on a periodic grid, with the foot point of
// the perpendicular.  Positive outside the enclosed region, negative inside.

#include "nlac/curve.hpp"
#include "nlac/errors.hpp"
#include "nlac/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

namespace nlac {

/// Piecewise quintic Hermite interpolant of the marker curve through the
/// markers and their spectral first and second alpha-derivatives.
class CurveInterpolant {
public:
    CurveInterpolant(const CurveState& c, const CurveGeometry& g) : p_(c.markers), d1_(g.d1), d2_(g.d2)
    {
        h_ = 2.0 * std::numbers::pi / p_.size();
    }

    struct Sample {
        Point p, d1, d2;
    };

    int size() const { return int(p_.size()); }
    double dalpha() const { return h_; }

    Sample eval(double alpha) const
    {
        const int m = size();
        const double period = 2.0 * std::numbers::pi;
        alpha = std::fmod(alpha, period);
        if (alpha < 0) alpha += period;
        int j = std::min(int(alpha / h_), m - 1);
        const double t = alpha / h_ - j;
        const int k = (j + 1) % m;
        const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
        // basis values and first/second t-derivatives
        const double b[6] = {1 - 10 * t3 + 15 * t4 - 6 * t5, t - 6 * t3 + 8 * t4 - 3 * t5,
                             0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5, 0.5 * t3 - t4 + 0.5 * t5,
                             -4 * t3 + 7 * t4 - 3 * t5, 10 * t3 - 15 * t4 + 6 * t5};
        const double db[6] = {-30 * t2 + 60 * t3 - 30 * t4, 1 - 18 * t2 + 32 * t3 - 15 * t4,
                              t - 4.5 * t2 + 6 * t3 - 2.5 * t4, 1.5 * t2 - 4 * t3 + 2.5 * t4,
                              -12 * t2 + 28 * t3 - 15 * t4, 30 * t2 - 60 * t3 + 30 * t4};
        const double ddb[6] = {-60 * t + 180 * t2 - 120 * t3, -36 * t + 96 * t2 - 60 * t3,
                               1 - 9 * t + 18 * t2 - 10 * t3, 3 * t - 12 * t2 + 10 * t3,
                               -24 * t + 84 * t2 - 60 * t3, 60 * t - 180 * t2 + 120 * t3};
        const double h = h_;
        auto combine = [&](const double* w, double scale) {
            Point r{};
            for (int c = 0; c < 2; ++c)
                r[c] = (w[0] * p_[j][c] + w[1] * h * d1_[j][c] + w[2] * h * h * d2_[j][c] +
                        w[3] * h * h * d2_[k][c] + w[4] * h * d1_[k][c] + w[5] * p_[k][c]) *
                       scale;
            return r;
        };
        return {combine(b, 1.0), combine(db, 1.0 / h), combine(ddb, 1.0 / (h * h))};
    }

private:
    std::vector<Point> p_, d1_, d2_;
    double h_;
};

/// Cubic Hermite interpolant of a per-marker periodic scalar using its
/// spectral alpha-derivative.
class MarkerScalarInterpolant {
public:
    explicit MarkerScalarInterpolant(std::vector<double> values)
        : v_(std::move(values)), dv_(fft::periodic_derivative(v_, 2.0 * std::numbers::pi))
    {
        h_ = 2.0 * std::numbers::pi / v_.size();
    }

    double operator()(double alpha) const
    {
        const int m = int(v_.size());
        const double period = 2.0 * std::numbers::pi;
        alpha = std::fmod(alpha, period);
        if (alpha < 0) alpha += period;
        const int j = std::min(int(alpha / h_), m - 1);
        const int k = (j + 1) % m;
        const double t = alpha / h_ - j, t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * v_[j] + (t3 - 2 * t2 + t) * h_ * dv_[j] + (-2 * t3 + 3 * t2) * v_[k] +
               (t3 - t2) * h_ * dv_[k];
    }

private:
    std::vector<double> v_, dv_;
    double h_;
};

struct SignedDistanceField {
    /// Signed distance, clamped to [-reach, reach].
    ScalarField s;
    /// Foot of the perpendicular; only meaningful where |s| < reach.
    VectorField closest_point;
    /// Outward unit normal of the curve at the foot point (= grad s); zero
    /// outside reach.
    VectorField normal;
    /// Curve parameter of the foot point; NaN where |s| >= reach.
    ScalarField foot_alpha;
    /// Tubular radius of the calibration construction.
    double delta = 0.0;
    /// Distance up to which s is exact.
    double reach = 0.0;

    bool in_reach(std::size_t k) const { return std::abs(s[k]) < reach; }
};

/// Smallest distance between marker pairs that are far apart along the
/// curve (more than a half turn of the tightest osculating circle).
inline double min_self_distance(const CurveState& c, const CurveGeometry& g)
{
    const int m = c.size();
    double hmax = 0.0;
    for (double h : g.curvature) hmax = std::max(hmax, std::abs(h));
    const double sep = std::numbers::pi / std::max(hmax, 1e-12);
    std::vector<double> arc(m + 1, 0.0);
    for (int j = 0; j < m; ++j) arc[j + 1] = arc[j] + g.speed[j] * g.dalpha();
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < m; ++a)
        for (int b = a + 1; b < m; ++b) {
            const double along = std::min(arc[b] - arc[a], g.perimeter - (arc[b] - arc[a]));
            if (along <= sep) continue;
            best = std::min(best, norm(c.markers[a] - c.markers[b]));
        }
    return best;
}

/// Tubular radius of the calibration: the 2*delta tube stays inside the
/// focal distance 1/max|H| and away from the far side of the curve.
inline double tubular_radius(const CurveState& c, const CurveGeometry& g)
{
    double hmax = 0.0;
    for (double h : g.curvature) hmax = std::max(hmax, std::abs(h));
    return std::min(0.45 / std::max(hmax, 1e-12), 0.45 * min_self_distance(c, g));
}

namespace detail {

/// Even-odd rule on the marker polygon, one scanline per grid row.
inline std::vector<std::uint8_t> polygon_inside_mask(const std::vector<Point>& poly, const PeriodicGrid& grid)
{
    std::vector<std::uint8_t> inside(grid.size(), 0);
    const int m = int(poly.size());
    std::vector<double> xs;
    for (int j = 0; j < grid.ny(); ++j) {
        const double y = grid.y(j);
        xs.clear();
        for (int a = 0; a < m; ++a) {
            const Point p = poly[a], q = poly[(a + 1) % m];
            if ((p[1] <= y) != (q[1] <= y)) xs.push_back(p[0] + (y - p[1]) / (q[1] - p[1]) * (q[0] - p[0]));
        }
        std::sort(xs.begin(), xs.end());
        std::size_t cnt = 0;
        for (int i = 0; i < grid.nx(); ++i) {
            const double x = grid.x(i);
            while (cnt < xs.size() && xs[cnt] < x) ++cnt;
            inside[grid.index(i, j)] = (cnt % 2 == 1);
        }
    }
    return inside;
}

} // namespace detail

/// Signed distance of every grid point to the curve.  Exact (closest point on
/// the Hermite spline by Newton's method) within `reach` = 2.1*delta; clamped
/// beyond, with the sign taken from the even-odd test on the marker polygon.
inline SignedDistanceField signed_distance(const CurveState& curve, const PeriodicGrid& grid,
                                           double delta_override = 0.0)
{
    const auto g = geometry(curve, true);
    const double delta = delta_override > 0.0 ? delta_override : tubular_radius(curve, g);
    const double hmax = std::max(grid.hx(), grid.hy());
    if (delta < 8.0 * hmax)
        throw TubeTooThin("tubular radius " + std::to_string(delta) + " is resolved by fewer than 8 cells");

    const double reach = 2.1 * delta;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& p : curve.markers) {
        xmin = std::min(xmin, p[0]);
        xmax = std::max(xmax, p[0]);
        ymin = std::min(ymin, p[1]);
        ymax = std::max(ymax, p[1]);
    }
    if (xmin - reach < 0.0 || ymin - reach < 0.0 || xmax + reach > grid.lx() || ymax + reach > grid.ly())
        throw ConfigError("curve tube of radius 2.1*delta does not fit inside the periodic box");

    SignedDistanceField out{ScalarField(grid), VectorField(grid), VectorField(grid),
                            ScalarField(grid, std::numeric_limits<double>::quiet_NaN()), delta, reach};
    const auto inside = detail::polygon_inside_mask(curve.markers, grid);

    // nearest marker for every grid point within reach (+ half a marker gap)
    const int m = curve.size();
    double gap = 0.0;
    for (int j = 0; j < m; ++j) gap = std::max(gap, norm(curve.markers[(j + 1) % m] - curve.markers[j]));
    const double stamp = reach + gap;
    std::vector<int> nearest(grid.size(), -1);
    std::vector<double> nd2(grid.size(), std::numeric_limits<double>::infinity());
    for (int a = 0; a < m; ++a) {
        const Point p = curve.markers[a];
        const int i0 = std::max(0, int(std::floor((p[0] - stamp) / grid.hx())));
        const int i1 = std::min(grid.nx() - 1, int(std::ceil((p[0] + stamp) / grid.hx())));
        const int j0 = std::max(0, int(std::floor((p[1] - stamp) / grid.hy())));
        const int j1 = std::min(grid.ny() - 1, int(std::ceil((p[1] + stamp) / grid.hy())));
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) {
                const double dx = grid.x(i) - p[0], dy = grid.y(j) - p[1];
                const double d2 = dx * dx + dy * dy;
                const auto k = grid.index(i, j);
                if (d2 < nd2[k] && d2 <= stamp * stamp) {
                    nd2[k] = d2;
                    nearest[k] = a;
                }
            }
    }

    const CurveInterpolant spline(curve, g);
    const double h = spline.dalpha();
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i) {
            const auto k = grid.index(i, j);
            const double sign = inside[k] ? -1.0 : 1.0;
            if (nearest[k] < 0) {
                out.s[k] = sign * reach;
                continue;
            }
            const Point x{grid.x(i), grid.y(j)};
            const double lo = (nearest[k] - 1) * h, hi = (nearest[k] + 1) * h;
            double alpha = nearest[k] * h;
            for (int it = 0; it < 30; ++it) {
                const auto c = spline.eval(alpha);
                const Point r = c.p - x;
                const double f = dot(r, c.d1);
                const double df = dot(c.d1, c.d1) + dot(r, c.d2);
                double next = alpha - f / (df > 0 ? df : dot(c.d1, c.d1));
                next = std::clamp(next, lo, hi);
                const double step = next - alpha;
                alpha = next;
                if (std::abs(step) < 1e-14) break;
            }
            const auto c = spline.eval(alpha);
            const Point r = x - c.p;
            const double dist = norm(r);
            const Point nu{c.d1[1] / norm(c.d1), -c.d1[0] / norm(c.d1)};
            const double side = dot(r, nu);
            if (dist >= reach) {
                out.s[k] = sign * reach;
                continue;
            }
            out.s[k] = (side >= 0 ? 1.0 : -1.0) * dist;
            out.closest_point.set(k, c.p);
            out.normal.set(k, nu);
            const double period = 2.0 * std::numbers::pi;
            out.foot_alpha[k] = std::fmod(std::fmod(alpha, period) + period, period);
        }
    return out;
}

} // namespace nlac
