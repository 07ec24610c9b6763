#include "nlac/signed_distance.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace nlac;

TEST(SignedDistance, CircleMatchesClosedForm)
{
    const Point c{0.6, 0.6};
    const double R = 0.3;
    const PeriodicGrid g(96, 96, 1.2, 1.2);
    const auto sd = signed_distance(make_circle(c, R, 128), g);
    EXPECT_NEAR(sd.delta, 0.45 * R, 1e-9);
    std::size_t inside = 0;
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i) {
            const auto k = g.index(i, j);
            const double r = std::hypot(g.x(i) - c[0], g.y(j) - c[1]);
            if (!sd.in_reach(k)) {
                EXPECT_GE(std::abs(r - R), sd.reach - 1e-9);
                continue;
            }
            ++inside;
            EXPECT_NEAR(sd.s[k], r - R, 1e-8);
            // foot lies on the circle, normal is radial and unit
            const Point p = sd.closest_point.at(k);
            EXPECT_NEAR(norm(p - c), R, 1e-8);
            EXPECT_NEAR(norm(sd.normal.at(k)), 1.0, 1e-12);
            EXPECT_NEAR(sd.normal.x[k], (g.x(i) - c[0]) / r, 1e-7);
        }
    EXPECT_GT(inside, 1000u);
}

TEST(SignedDistance, SignAndEikonalOnEllipse)
{
    const PeriodicGrid g(160, 120, 1.6, 1.2);
    const auto sd = signed_distance(make_ellipse({0.8, 0.6}, 0.35, 0.25, 256), g);
    EXPECT_LT(sd.s(80, 60), 0.0);
    EXPECT_GT(sd.s(2, 2), 0.0);
    // |grad s| = 1 inside the tube, by centered differences
    for (int j = 1; j < g.ny() - 1; ++j)
        for (int i = 1; i < g.nx() - 1; ++i) {
            bool ok = true;
            for (auto [di, dj] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {0, 0}})
                ok = ok && std::abs(sd.s(i + di, j + dj)) < sd.delta;
            if (!ok) continue;
            const double gx = (sd.s(i + 1, j) - sd.s(i - 1, j)) / (2 * g.hx());
            const double gy = (sd.s(i, j + 1) - sd.s(i, j - 1)) / (2 * g.hy());
            EXPECT_NEAR(std::hypot(gx, gy), 1.0, 2e-3);
        }
}

TEST(SignedDistance, ThinTubeAndSmallBoxThrow)
{
    const auto c = make_circle({0.6, 0.6}, 0.3, 128);
    EXPECT_THROW(signed_distance(c, PeriodicGrid(16, 16, 1.2, 1.2)), TubeTooThin);
    EXPECT_THROW(signed_distance(make_circle({0.35, 0.35}, 0.3, 128), PeriodicGrid(128, 128, 0.7, 0.7)), ConfigError);
}

TEST(CurveInterpolant, ReproducesMarkers)
{
    const auto c = make_ellipse({0.0, 0.0}, 0.5, 0.3, 64);
    const auto g = geometry(c);
    const CurveInterpolant s(c, g);
    for (int j = 0; j < 64; ++j) {
        const auto e = s.eval(j * s.dalpha());
        EXPECT_NEAR(norm(e.p - c.markers[j]), 0.0, 1e-14);
        EXPECT_NEAR(norm(e.d1 - g.d1[j]), 0.0, 1e-12);
    }
}
