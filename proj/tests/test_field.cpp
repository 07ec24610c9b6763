#include "nlac/field.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace nlac;

namespace {
constexpr double pi = std::numbers::pi;

ScalarField trig(const PeriodicGrid& g)
{
    return ScalarField::sample(g, [&](double x, double y) {
        return std::sin(2 * pi * x / g.lx()) * std::cos(4 * pi * y / g.ly());
    });
}
} // namespace

TEST(Grid, RejectsTinyOrDegenerateGrids)
{
    EXPECT_THROW(PeriodicGrid(4, 16, 1.0, 1.0), ConfigError);
    EXPECT_THROW(PeriodicGrid(16, 16, 0.0, 1.0), ConfigError);
}

TEST(Grid, CellCentres)
{
    const PeriodicGrid g(16, 8, 2.0, 1.0);
    EXPECT_DOUBLE_EQ(g.x(0), 0.0625);
    EXPECT_DOUBLE_EQ(g.y(7), 0.9375);
    EXPECT_EQ(g.index(3, 2), 35u);
}

TEST(Laplacian, SpectralIsExactOnTrigPolynomials)
{
    const PeriodicGrid g(32, 48, 2.0, 3.0);
    const auto f = trig(g);
    const double k2 = std::pow(2 * pi / 2.0, 2) + std::pow(4 * pi / 3.0, 2);
    const auto lap = laplacian(f);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(lap[k], -k2 * f[k], 1e-10);
}

TEST(Laplacian, SecondOrderDifferencesConverge)
{
    double err[2];
    for (int r = 0; r < 2; ++r) {
        const PeriodicGrid g(32 << r, 32 << r, 1.0, 1.0);
        const auto f = trig(g);
        const double k2 = std::pow(2 * pi, 2) + std::pow(4 * pi, 2);
        const auto lap = laplacian(f, Backend::fd2);
        err[r] = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) err[r] = std::max(err[r], std::abs(lap[k] + k2 * f[k]));
    }
    EXPECT_NEAR(std::log2(err[0] / err[1]), 2.0, 0.05);
}

TEST(Gradient, DivergenceOfGradientIsLaplacian)
{
    const PeriodicGrid g(32, 32, 1.0, 1.0);
    const auto f = trig(g);
    const auto a = divergence(gradient(f));
    const auto b = laplacian(f);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-9);
}

TEST(Integrate, ConstantsAndSquares)
{
    const PeriodicGrid g(24, 40, 1.5, 2.5);
    EXPECT_NEAR(integrate(ScalarField(g, 2.0)), 2.0 * 1.5 * 2.5, 1e-13);
    const auto f = trig(g);
    EXPECT_NEAR(integrate(f * f), 1.5 * 2.5 / 4.0, 1e-13);
}

TEST(KahanSum, RecoversSmallTerms)
{
    KahanSum s;
    s.add(1.0);
    for (int k = 0; k < 1000; ++k) s.add(1e-16);
    EXPECT_NEAR(s.value() - 1.0, 1e-13, 1e-16);
}

TEST(FieldIo, BinaryRoundTripIsExact)
{
    const PeriodicGrid g(16, 12, 1.0, 0.75);
    const auto f = trig(g);
    std::stringstream ss;
    write_binary(f, ss);
    const auto h = read_binary(ss);
    ASSERT_TRUE(h.grid() == g);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(h[k], f[k]);
}

TEST(FieldIo, TruncatedStreamThrows)
{
    const PeriodicGrid g(16, 16, 1.0, 1.0);
    std::stringstream ss;
    write_binary(ScalarField(g, 1.0), ss);
    std::string s = ss.str();
    std::stringstream cut(s.substr(0, s.size() / 2));
    EXPECT_THROW(read_binary(cut), IoError);
}

TEST(SpectralRefine, InterpolatesTrigPolynomialsExactly)
{
    const PeriodicGrid g(16, 24, 2.0, 3.0);
    const auto fine = spectral_refine(trig(g), 3);
    ASSERT_EQ(fine.grid().nx(), 48);
    ASSERT_EQ(fine.grid().ny(), 72);
    const auto exact = trig(fine.grid());
    for (std::size_t k = 0; k < exact.grid().size(); ++k) EXPECT_NEAR(fine[k], exact[k], 1e-13);
    EXPECT_THROW(spectral_refine(trig(g), 0), ConfigError);
    EXPECT_EQ(spectral_refine(trig(g), 1)[5], trig(g)[5]);
}
