#pragma once

// Double-well potential, the Modica-Mortola transform and the optimal profile.

#include <algorithm>
#include <cmath>
#include <concepts>

namespace nlac {

/// What the solver and the diagnostics need from a potential.
template <class P>
concept DoubleWellPotential = requires(double u) {
    { P::W(u) } -> std::convertible_to<double>;
    { P::Wprime(u) } -> std::convertible_to<double>;
    { P::Wsecond(u) } -> std::convertible_to<double>;
    { P::sqrt_2W(u) } -> std::convertible_to<double>;
    { P::phi(u) } -> std::convertible_to<double>;
    { P::phi_prime(u) } -> std::convertible_to<double>;
    { P::profile(u) } -> std::convertible_to<double>;
    { P::profile_prime(u) } -> std::convertible_to<double>;
    { P::sigma() } -> std::convertible_to<double>;
};

/// W(u) = 18 u^2 (u-1)^2, wells at 0 and 1, surface tension sigma = 1.
///
/// On [0,1], sqrt(2W(u)) = 6u(1-u), so phi(u) = 3u^2 - 2u^3 and the optimal
/// profile solving U' = sqrt(2W(U)) with U(0) = 1/2 is the logistic function
/// 1/(1+exp(-6s)).
struct QuarticWell {
    static double W(double u)
    {
        const double a = u * (u - 1.0);
        return 18.0 * a * a;
    }
    static double Wprime(double u) { return 36.0 * u * (u - 1.0) * (2.0 * u - 1.0); }
    static double Wsecond(double u) { return 36.0 * (6.0 * u * u - 6.0 * u + 1.0); }

    /// The literal square root |6u(1-u)|, nonnegative for every u.
    static double sqrt_2W(double u) { return std::abs(6.0 * u * (1.0 - u)); }

    /// phi(u) = int_0^u sqrt(2W); held constant outside [0,1].
    static double phi(double u)
    {
        const double v = std::clamp(u, 0.0, 1.0);
        return v * v * (3.0 - 2.0 * v);
    }
    static double phi_prime(double u) { return (u <= 0.0 || u >= 1.0) ? 0.0 : 6.0 * u * (1.0 - u); }

    static double profile(double s)
    {
        // both branches avoid overflow of exp for large |s|
        if (s >= 0.0) return 1.0 / (1.0 + std::exp(-6.0 * s));
        const double e = std::exp(6.0 * s);
        return e / (1.0 + e);
    }
    static double profile_prime(double s)
    {
        const double u = profile(s);
        return 6.0 * u * (1.0 - u);
    }

    static constexpr double sigma() { return 1.0; }

    /// max |W''| over [lo, hi]; W'' is a convex parabola so the max sits at an end.
    static double max_abs_Wsecond(double lo, double hi)
    {
        return std::max({std::abs(Wsecond(lo)), std::abs(Wsecond(hi)), std::abs(Wsecond(0.5))});
    }
};

static_assert(DoubleWellPotential<QuarticWell>);

} // namespace nlac
