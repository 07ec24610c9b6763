#pragma once

// Time integration of the nonlocal Allen-Cahn equation
//
//   u_t = Lap u - W'(u)/eps^2 + lambda_eps sqrt(2W(u)),
//   lambda_eps = - int (Lap u - W'(u)/eps^2) sqrt(2W(u)) / int 2W(u),
//
// which conserves int phi(u) in continuous time.

#include "nlac/curve.hpp"
#include "nlac/double_well.hpp"
#include "nlac/errors.hpp"
#include "nlac/field.hpp"
#include "nlac/signed_distance.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>

namespace nlac {

struct PhaseState {
    ScalarField u;
    double eps;
    double t = 0.0;
};

enum class Scheme { explicit_euler, stabilized_imex };

inline constexpr double monitored_lo = -0.1, monitored_hi = 1.1;
inline constexpr double blowup_lo = -0.5, blowup_hi = 1.5;
inline constexpr double degenerate_denominator = 1e-14;
/// Below this value of 2W(u) the multiplier term is treated as exactly 0.
inline constexpr double multiplier_cutoff = 1e-30;

struct SolverConfig {
    double dt = 1e-5;
    Scheme scheme = Scheme::explicit_euler;
    /// Stabilization constant; negative selects the default 2*max|W''| on
    /// the monitored band.
    double kappa = -1.0;
    double T = 0.0;
    int record_every = 1;
    Backend backend = Backend::spectral;
    /// Optional post-step projection back onto the initial mass.
    bool mass_correction = false;
    double mass_correction_threshold = 1e-8;
};

template <DoubleWellPotential P = QuarticWell>
double default_kappa()
{
    return 2.0 * P::max_abs_Wsecond(monitored_lo, monitored_hi);
}

/// Explicit-scheme guard dt <= 0.2 min(h^2/4, eps^2/max|W''|).
template <DoubleWellPotential P = QuarticWell>
double explicit_dt_limit(const PeriodicGrid& g, double eps)
{
    const double h = std::min(g.hx(), g.hy());
    return 0.2 * std::min(h * h / 4.0, eps * eps / P::max_abs_Wsecond(monitored_lo, monitored_hi));
}

template <DoubleWellPotential P = QuarticWell>
ScalarField psi_of(const ScalarField& u)
{
    return u.map([](double v) { return P::phi(v); });
}

template <DoubleWellPotential P = QuarticWell>
double mass(const PhaseState& s)
{
    return integrate(psi_of<P>(s.u));
}

/// Cahn-Hilliard energy int eps/2 |grad u|^2 + W(u)/eps.
template <DoubleWellPotential P = QuarticWell>
double energy(const PhaseState& s, Backend backend = Backend::spectral)
{
    const auto grad = gradient(s.u, backend);
    ScalarField dens(s.u.grid());
    for (std::size_t k = 0; k < dens.grid().size(); ++k) {
        const double g2 = grad.x[k] * grad.x[k] + grad.y[k] * grad.y[k];
        dens[k] = 0.5 * s.eps * g2 + P::W(s.u[k]) / s.eps;
    }
    return integrate(dens);
}

namespace detail {

struct MultiplierParts {
    double numerator = 0.0;   // int (Lap u - W'/eps^2) sqrt(2W)
    double denominator = 0.0; // int 2W
};

template <DoubleWellPotential P>
MultiplierParts multiplier_parts(const ScalarField& u, const ScalarField& lap, double eps)
{
    const double inv_e2 = 1.0 / (eps * eps);
    KahanSum num, den;
    for (std::size_t k = 0; k < u.grid().size(); ++k) {
        const double v = u[k];
        num.add((lap[k] - inv_e2 * P::Wprime(v)) * P::sqrt_2W(v));
        den.add(2.0 * P::W(v));
    }
    const double area = u.grid().cell_area();
    return {num.value() * area, den.value() * area};
}

} // namespace detail

template <DoubleWellPotential P = QuarticWell>
double lagrange_multiplier(const PhaseState& s, Backend backend = Backend::spectral)
{
    const auto lap = laplacian(s.u, backend);
    const auto parts = detail::multiplier_parts<P>(s.u, lap, s.eps);
    if (parts.denominator < degenerate_denominator)
        throw DegenerateInterface("int 2W(u) = " + std::to_string(parts.denominator) +
                                  ": no diffuse interface left");
    return -parts.numerator / parts.denominator;
}

struct Rhs {
    ScalarField dudt;
    double lambda = 0.0;
    bool degenerate = false;
};

/// Right-hand side u_t with the explicit multiplier.  At pure-phase states the
/// multiplier term is dropped instead of raising DegenerateInterface.
template <DoubleWellPotential P = QuarticWell>
Rhs rhs(const PhaseState& s, Backend backend = Backend::spectral)
{
    auto lap = laplacian(s.u, backend);
    const auto parts = detail::multiplier_parts<P>(s.u, lap, s.eps);
    Rhs out{std::move(lap)};
    out.degenerate = parts.denominator < degenerate_denominator;
    out.lambda = out.degenerate ? 0.0 : -parts.numerator / parts.denominator;
    const double inv_e2 = 1.0 / (s.eps * s.eps);
    for (std::size_t k = 0; k < s.u.grid().size(); ++k) {
        const double v = s.u[k];
        const double m = (2.0 * P::W(v) < multiplier_cutoff) ? 0.0 : P::sqrt_2W(v);
        out.dudt[k] += -inv_e2 * P::Wprime(v) + out.lambda * m;
    }
    return out;
}

namespace detail {

inline void check_band(const PhaseState& s, double dt)
{
    const double lo = s.u.min(), hi = s.u.max();
    if (!(lo >= blowup_lo) || !(hi <= blowup_hi)) {
        std::ostringstream os;
        os << "phase field left [" << blowup_lo << ", " << blowup_hi << "] at t = " << s.t << " (min " << lo
           << ", max " << hi << ", dt = " << dt << ", eps = " << s.eps << ")";
        throw BlowUp(os.str());
    }
}

/// Symbol of the discrete Laplacian for mode (i, j) of the r2c layout.
inline double laplacian_symbol(const PeriodicGrid& g, Backend backend, int i, int j)
{
    if (backend == Backend::spectral) {
        const double kx = fft::full_wavenumber(i, g.nx(), g.lx());
        const double ky = fft::full_wavenumber(j, g.ny(), g.ly());
        return -(kx * kx + ky * ky);
    }
    const double kx = fft::full_wavenumber(i, g.nx(), g.lx());
    const double ky = fft::full_wavenumber(j, g.ny(), g.ly());
    const double sx = std::sin(0.5 * kx * g.hx()), sy = std::sin(0.5 * ky * g.hy());
    return -4.0 * (sx * sx / (g.hx() * g.hx()) + sy * sy / (g.hy() * g.hy()));
}

} // namespace detail

/// Uniform shift of u on the diffuse interface {2W(u) > threshold} restoring
/// int phi(u) = target_mass (Newton on the scalar shift).
template <DoubleWellPotential P = QuarticWell>
void correct_mass(PhaseState& s, double target_mass, double threshold)
{
    std::vector<std::uint8_t> mask(s.u.grid().size());
    for (std::size_t k = 0; k < mask.size(); ++k) mask[k] = 2.0 * P::W(s.u[k]) > threshold;
    const ScalarField base = s.u;
    double shift = 0.0;
    for (int it = 0; it < 20; ++it) {
        ScalarField val(base.grid()), der(base.grid());
        for (std::size_t k = 0; k < mask.size(); ++k) {
            const double v = base[k] + (mask[k] ? shift : 0.0);
            val[k] = P::phi(v);
            der[k] = mask[k] ? P::phi_prime(v) : 0.0;
        }
        const double f = integrate(val) - target_mass, df = integrate(der);
        if (df <= 0.0) break;
        const double step = f / df;
        shift -= step;
        if (std::abs(step) < 1e-16) break;
    }
    for (std::size_t k = 0; k < mask.size(); ++k)
        if (mask[k]) s.u[k] = base[k] + shift;
}

/// One time step.  Explicit Euler, or stabilized IMEX
///   (1 - dt Lap + dt kappa/eps^2) u+ = u + dt (kappa/eps^2 u - W'(u)/eps^2 + lambda sqrt(2W(u)))
/// with the linear solve diagonal in Fourier space.
template <DoubleWellPotential P = QuarticWell>
PhaseState step(const PhaseState& s, const SolverConfig& cfg, double target_mass = -1.0)
{
    const auto& g = s.u.grid();
    if (!(cfg.dt > 0.0)) throw ConfigError("step: dt must be positive");
    if (cfg.scheme == Scheme::explicit_euler) {
        const double limit = explicit_dt_limit<P>(g, s.eps);
        if (cfg.dt > limit * (1.0 + 1e-12))
            throw ConfigError("explicit step: dt = " + std::to_string(cfg.dt) + " exceeds stability guard " +
                              std::to_string(limit));
    }

    const auto lap = laplacian(s.u, cfg.backend);
    const auto parts = detail::multiplier_parts<P>(s.u, lap, s.eps);
    const double lambda =
        parts.denominator < degenerate_denominator ? 0.0 : -parts.numerator / parts.denominator;
    const double inv_e2 = 1.0 / (s.eps * s.eps);
    auto reaction = [&](double v) {
        const double m = (2.0 * P::W(v) < multiplier_cutoff) ? 0.0 : P::sqrt_2W(v);
        return -inv_e2 * P::Wprime(v) + lambda * m;
    };

    PhaseState next{ScalarField(g), s.eps, s.t + cfg.dt};
    if (cfg.scheme == Scheme::explicit_euler) {
        for (std::size_t k = 0; k < g.size(); ++k) next.u[k] = s.u[k] + cfg.dt * (lap[k] + reaction(s.u[k]));
    } else {
        const double a = (cfg.kappa >= 0.0 ? cfg.kappa : default_kappa<P>()) * inv_e2;
        ScalarField b(g);
        for (std::size_t k = 0; k < g.size(); ++k) b[k] = s.u[k] + cfg.dt * (reaction(s.u[k]) + a * s.u[k]);
        const auto& plan = fft::Plan2D::get(g.nx(), g.ny());
        auto spec = plan.forward(b.values());
        const int nxc = g.nx() / 2 + 1;
        for (int j = 0; j < g.ny(); ++j)
            for (int i = 0; i < nxc; ++i)
                spec[std::size_t(j) * nxc + i] /=
                    1.0 - cfg.dt * detail::laplacian_symbol(g, cfg.backend, i, j) + cfg.dt * a;
        next.u = ScalarField(g, plan.inverse(std::move(spec)));
    }

    if (cfg.mass_correction && target_mass >= 0.0) correct_mass<P>(next, target_mass, cfg.mass_correction_threshold);
    detail::check_band(next, cfg.dt);
    return next;
}

// ---------------------------------------------------------------------------
// Well-prepared initial data u = U((-s - a)/eps) with a fixed by the mass
// constraint int phi(u) = |Omega|.

template <DoubleWellPotential P = QuarticWell>
ScalarField glued_profile(const ScalarField& s, double eps, double shift)
{
    return s.map([&](double d) { return P::profile((-d - shift) / eps); });
}

/// Finds the shift a in [-10 eps, 10 eps] with int phi(U((-s-a)/eps)) =
/// target_mass to relative tolerance 1e-12.
template <DoubleWellPotential P = QuarticWell>
double solve_mass_shift(const ScalarField& s, double eps, double target_mass)
{
    auto residual = [&](double a) { return integrate(psi_of<P>(glued_profile<P>(s, eps, a))) - target_mass; };
    double lo = -10.0 * eps, hi = 10.0 * eps;
    double flo = residual(lo), fhi = residual(hi);
    if (!(flo > 0.0 && fhi < 0.0))
        throw RootBracketFailure("no shift in [-10 eps, 10 eps] matches the enclosed area (eps = " +
                                 std::to_string(eps) + ")");
    const double tol = 1e-12 * std::abs(target_mass);
    // bisection down to a narrow bracket, then secant steps kept inside it
    for (int it = 0; it < 200 && hi - lo > 1e-6 * eps; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = residual(mid);
        if (std::abs(fm) <= tol) return mid;
        (fm > 0.0 ? lo : hi) = mid;
        (fm > 0.0 ? flo : fhi) = fm;
    }
    double a = lo, fa = flo, b = hi, fb = fhi;
    for (int it = 0; it < 100; ++it) {
        double c = b - fb * (b - a) / (fb - fa);
        if (!(c > std::min(lo, hi) && c < std::max(lo, hi))) c = 0.5 * (lo + hi);
        const double fc = residual(c);
        if (std::abs(fc) <= tol) return c;
        (fc > 0.0 ? lo : hi) = c;
        a = b;
        fa = fb;
        b = c;
        fb = fc;
    }
    return b;
}

template <DoubleWellPotential P = QuarticWell>
PhaseState well_prepared_init(const CurveState& curve, double eps, const PeriodicGrid& grid)
{
    const auto sd = signed_distance(curve, grid);
    const double area = geometry(curve).area;
    const double a = solve_mass_shift<P>(sd.s, eps, area);
    return PhaseState{glued_profile<P>(sd.s, eps, a), eps, curve.t};
}

// ---------------------------------------------------------------------------
// Diagnostics of a single state.

struct StepDiagnostics {
    double t = 0.0;
    double mass = 0.0;
    double energy = 0.0;
    double lambda_eps = 0.0;
    double dissipation = 0.0; // int eps u_t^2
    double min_u = 0.0, max_u = 0.0;
    double fraction_outside_unit = 0.0; // share of grid points with u outside [0,1]
};

template <DoubleWellPotential P = QuarticWell>
StepDiagnostics diagnose(const PhaseState& s, Backend backend = Backend::spectral)
{
    StepDiagnostics d;
    d.t = s.t;
    d.mass = mass<P>(s);
    d.energy = energy<P>(s, backend);
    const auto r = rhs<P>(s, backend);
    d.lambda_eps = r.lambda;
    d.dissipation = s.eps * integrate(r.dudt * r.dudt);
    d.min_u = s.u.min();
    d.max_u = s.u.max();
    std::size_t out = 0;
    for (double v : s.u.values()) out += (v < 0.0 || v > 1.0);
    d.fraction_outside_unit = double(out) / s.u.grid().size();
    return d;
}

} // namespace nlac
