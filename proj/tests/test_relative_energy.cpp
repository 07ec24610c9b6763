#include "nlac/relative_energy.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace nlac;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST(ClippedArea, BoxesAndTriangles)
{
    const std::vector<Point> sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    EXPECT_DOUBLE_EQ(detail::clipped_area(sq, -1, 2, -1, 2), 1.0);
    EXPECT_DOUBLE_EQ(detail::clipped_area(sq, 0.5, 2, 0.25, 2), 0.375);
    EXPECT_DOUBLE_EQ(detail::clipped_area(sq, 2, 3, 2, 3), 0.0);
    const std::vector<Point> tri{{0, 0}, {1, 0}, {0, 1}};
    EXPECT_DOUBLE_EQ(detail::clipped_area(tri, 0, 0.5, 0, 0.5), 0.25);
}

TEST(Indicator, FractionsSumToEnclosedArea)
{
    const PeriodicGrid g(64, 48, 1.6, 1.2);
    const auto c = make_ellipse({0.8, 0.6}, 0.5, 0.3, 256);
    const auto chi = indicator_fractions(c, g);
    const auto poly = detail::refined_polygon(c, 4);
    double a = 0.0;
    for (std::size_t j = 0; j < poly.size(); ++j) a += cross(poly[j], poly[(j + 1) % poly.size()]);
    EXPECT_NEAR(integrate(chi), 0.5 * a, 1e-12);
    EXPECT_NEAR(0.5 * a, pi * 0.15, 1e-5);
    EXPECT_GE(chi.min(), 0.0);
    EXPECT_LE(chi.max(), 1.0);
}

TEST(BulkError, VanishesWhenPsiIsTheIndicator)
{
    const PeriodicGrid g(96, 96, 1.2, 1.2);
    const auto c = make_circle({0.6, 0.6}, 0.3, 256);
    const auto chi = indicator_fractions(c, g);
    // invert phi cell by cell so that psi(u) = chi exactly
    auto u = chi.map([](double target) {
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (QuarticWell::phi(mid) < target ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    });
    const PhaseState s{u, 0.05};
    const auto cal = build_calibration(c, g, 0.12);
    const auto b = bulk_error(s, chi, cal);
    EXPECT_NEAR(b.abs_value, 0.0, 1e-14);
    EXPECT_NEAR(bulk_error_checked(s, chi, cal), 0.0, 1e-14);
}

TEST(RelativeEnergy, WellPreparedCircleSatisfiesCoercivity)
{
    const PeriodicGrid g(192, 192, 1.2, 1.2);
    const auto c = make_circle({0.6, 0.6}, 0.3, 256);
    const double eps = 0.04;
    const auto s = well_prepared_init(c, eps, g);
    const auto cal = build_calibration(c, g, 0.135);
    const auto r = relative_energy(s, cal, indicator_fractions(c, g), cal.delta * cal.delta);
    EXPECT_NEAR(r.energy, 2 * pi * 0.3, 0.02);
    EXPECT_GE(r.E_rel, 0.0);
    EXPECT_LT(r.E_rel, 0.01 * r.energy);
    EXPECT_NEAR(r.E_rel, r.discrepancy + r.tilt, 1e-15);
    EXPECT_LE(r.Q1, 2 * r.E_rel);
    EXPECT_LE(r.Q2, 2 * r.E_rel);
    EXPECT_LE(r.Q3, 12 * r.E_rel);
    EXPECT_FALSE(r.sign_incoherent);
    EXPECT_LT(r.L1_error, 2 * eps);
    EXPECT_LE(r.tube_L1, r.L1_error);
}

TEST(RelativeEnergy, PsiOffsetGivesPositiveBulkError)
{
    const PeriodicGrid g(128, 128, 1.4, 1.4);
    const auto c = make_circle({0.7, 0.7}, 0.3, 256);
    const auto cal = build_calibration(c, g, 0.12);
    // a bigger disc: psi - chi > 0 and theta > 0 on the annulus between
    const auto big = well_prepared_init(make_circle({0.7, 0.7}, 0.34, 256), 0.03, g);
    const auto b = bulk_error(big, indicator_fractions(c, g), cal);
    EXPECT_GT(b.signed_value, 0.0);
    EXPECT_TRUE(b.coherent);
}

TEST(Gronwall, ConstantsFromRecords)
{
    std::vector<GronwallSample> flat{{0.0, 1e-3, 1e-4}, {0.1, 1e-3, 1e-4}, {0.2, 1e-3, 1e-4}};
    EXPECT_EQ(gronwall_constant(flat), 0.0);
    std::vector<GronwallSample> growth;
    for (int k = 0; k <= 4; ++k) growth.push_back({0.1 * k, std::exp(3.0 * 0.1 * k), 0.0});
    EXPECT_NEAR(gronwall_constant(growth), 3.0, 1e-12);
    EXPECT_THROW(gronwall_constant({{0.0, 1.0, 0.0}}), ConfigError);
}

TEST(Gronwall, Uniformity)
{
    EXPECT_TRUE(gronwall_uniform({0.0, 0.0, 0.0}));
    EXPECT_TRUE(gronwall_uniform({1.0, 1.5, 1.9}));
    EXPECT_FALSE(gronwall_uniform({1.0, 2.5}));
    EXPECT_FALSE(gronwall_uniform({0.0, 1.0}));
    EXPECT_FALSE(gronwall_uniform({}));
}

TEST(LevelSet, ZeroSetOfDistanceIsTheCircle)
{
    const PeriodicGrid g(128, 128, 1.2, 1.2);
    const auto f = ScalarField::sample(g, [](double x, double y) { return std::hypot(x - 0.6, y - 0.6) - 0.3; });
    const auto segs = level_set(f, 0.0);
    ASSERT_GT(segs.size(), 100u);
    const auto poly = make_circle({0.6, 0.6}, 0.3, 512).markers;
    EXPECT_LT(hausdorff_distance(segs, poly), 2e-4);
    EXPECT_NEAR(point_segment_distance({0, 1}, {-1, 0}, {1, 0}), 1.0, 1e-15);
    EXPECT_NEAR(point_segment_distance({2, 1}, {-1, 0}, {1, 0}), std::sqrt(2.0), 1e-15);
}
