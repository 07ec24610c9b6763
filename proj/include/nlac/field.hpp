#pragma once

// Periodic cell-centred grids, scalar and vector fields on them, and the
// differential operators / quadrature used by every other module.

#include "nlac/errors.hpp"
#include "nlac/fft.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace nlac {

/// Fully periodic, cell-centred rectangle [0,lx) x [0,ly).  Cell (i,j) has its
/// centre at ((i+1/2)hx, (j+1/2)hy) and is stored at j*nx + i.
class PeriodicGrid {
public:
    PeriodicGrid(int nx, int ny, double lx, double ly) : nx_(nx), ny_(ny), lx_(lx), ly_(ly)
    {
        if (nx < 8 || ny < 8)
            throw ConfigError("PeriodicGrid: nx and ny must be at least 8");
        if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly))
            throw ConfigError("PeriodicGrid: side lengths must be positive and finite");
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double lx() const { return lx_; }
    double ly() const { return ly_; }
    double hx() const { return lx_ / nx_; }
    double hy() const { return ly_ / ny_; }
    double cell_area() const { return hx() * hy(); }
    std::size_t size() const { return std::size_t(nx_) * std::size_t(ny_); }

    double x(int i) const { return (i + 0.5) * hx(); }
    double y(int j) const { return (j + 0.5) * hy(); }
    std::size_t index(int i, int j) const { return std::size_t(j) * nx_ + i; }

    bool operator==(const PeriodicGrid&) const = default;

private:
    int nx_, ny_;
    double lx_, ly_;
};

enum class Backend { spectral, fd2 };

class ScalarField {
public:
    explicit ScalarField(PeriodicGrid g, double value = 0.0) : grid_(g), v_(g.size(), value) {}
    ScalarField(PeriodicGrid g, std::vector<double> values) : grid_(g), v_(std::move(values))
    {
        if (v_.size() != grid_.size()) throw ConfigError("ScalarField: value count does not match grid");
    }

    /// Samples f(x, y) at cell centres.
    template <class F>
    static ScalarField sample(PeriodicGrid g, F&& f)
    {
        ScalarField out(g);
        for (int j = 0; j < g.ny(); ++j)
            for (int i = 0; i < g.nx(); ++i) out(i, j) = f(g.x(i), g.y(j));
        return out;
    }

    const PeriodicGrid& grid() const { return grid_; }
    std::span<double> values() { return v_; }
    std::span<const double> values() const { return v_; }
    std::vector<double>& raw() { return v_; }
    const std::vector<double>& raw() const { return v_; }

    double& operator()(int i, int j) { return v_[grid_.index(i, j)]; }
    double operator()(int i, int j) const { return v_[grid_.index(i, j)]; }
    double& operator[](std::size_t k) { return v_[k]; }
    double operator[](std::size_t k) const { return v_[k]; }

    /// Periodic access with wrap-around of the indices.
    double wrapped(int i, int j) const
    {
        const int nx = grid_.nx(), ny = grid_.ny();
        i = ((i % nx) + nx) % nx;
        j = ((j % ny) + ny) % ny;
        return v_[grid_.index(i, j)];
    }

    template <class F>
    ScalarField map(F&& f) const
    {
        ScalarField out(grid_);
        std::transform(v_.begin(), v_.end(), out.v_.begin(), f);
        return out;
    }

    double min() const { return *std::min_element(v_.begin(), v_.end()); }
    double max() const { return *std::max_element(v_.begin(), v_.end()); }
    bool all_finite() const
    {
        return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
    }

    ScalarField& operator+=(const ScalarField& o)
    {
        for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += o.v_[k];
        return *this;
    }
    ScalarField& operator-=(const ScalarField& o)
    {
        for (std::size_t k = 0; k < v_.size(); ++k) v_[k] -= o.v_[k];
        return *this;
    }
    ScalarField& operator*=(double a)
    {
        for (double& x : v_) x *= a;
        return *this;
    }
    friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
    friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
    friend ScalarField operator*(double s, ScalarField a) { return a *= s; }
    friend ScalarField operator*(const ScalarField& a, const ScalarField& b)
    {
        ScalarField out(a.grid_);
        for (std::size_t k = 0; k < a.v_.size(); ++k) out.v_[k] = a.v_[k] * b.v_[k];
        return out;
    }

private:
    PeriodicGrid grid_;
    std::vector<double> v_;
};

/// Two-component field stored as separate x and y planes.
struct VectorField {
    explicit VectorField(PeriodicGrid g) : x(g), y(g) {}
    VectorField(ScalarField fx, ScalarField fy) : x(std::move(fx)), y(std::move(fy))
    {
        if (!(x.grid() == y.grid())) throw ConfigError("VectorField: component grids differ");
    }

    const PeriodicGrid& grid() const { return x.grid(); }
    std::array<double, 2> at(std::size_t k) const { return {x[k], y[k]}; }
    void set(std::size_t k, std::array<double, 2> v)
    {
        x[k] = v[0];
        y[k] = v[1];
    }

    ScalarField norm() const
    {
        ScalarField out(grid());
        for (std::size_t k = 0; k < out.grid().size(); ++k) out[k] = std::hypot(x[k], y[k]);
        return out;
    }

    ScalarField x, y;
};

inline ScalarField dot(const VectorField& a, const VectorField& b)
{
    ScalarField out(a.grid());
    for (std::size_t k = 0; k < out.grid().size(); ++k) out[k] = a.x[k] * b.x[k] + a.y[k] * b.y[k];
    return out;
}

/// Compensated (Kahan) running sum.
class KahanSum {
public:
    void add(double v)
    {
        const double y = v - comp_;
        const double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

private:
    double sum_ = 0.0, comp_ = 0.0;
};

/// Midpoint rule: hx*hy times the sum of the values.
inline double integrate(const ScalarField& f)
{
    KahanSum sum;
    for (double v : f.values()) sum.add(v);
    return sum.value() * f.grid().cell_area();
}

namespace detail {

template <class Mult>
ScalarField spectral_apply(const ScalarField& f, Mult&& mult)
{
    const auto& g = f.grid();
    const auto& plan = fft::Plan2D::get(g.nx(), g.ny());
    auto spec = plan.forward(f.values());
    const int nxc = g.nx() / 2 + 1;
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < nxc; ++i) spec[std::size_t(j) * nxc + i] *= mult(i, j);
    return ScalarField(g, plan.inverse(std::move(spec)));
}

} // namespace detail

/// Trigonometric interpolant of f sampled on the grid refined `factor` times
/// in each direction.  Nyquist modes are dropped.
inline ScalarField spectral_refine(const ScalarField& f, int factor)
{
    if (factor < 1) throw ConfigError("spectral_refine: factor must be >= 1");
    if (factor == 1) return f;
    const auto& g = f.grid();
    const PeriodicGrid fg(g.nx() * factor, g.ny() * factor, g.lx(), g.ly());
    const auto spec = fft::Plan2D::get(g.nx(), g.ny()).forward(f.values());
    const auto& fine = fft::Plan2D::get(fg.nx(), fg.ny());
    std::vector<fft::cplx> out(fine.spectrum_size());
    const int nxc = g.nx() / 2 + 1, fxc = fg.nx() / 2 + 1;
    // cell centres move from (i + 1/2) h to (i + 1/2) h/factor
    const double sx = 0.5 * (fg.hx() - g.hx()), sy = 0.5 * (fg.hy() - g.hy());
    const double scale = double(factor) * factor;
    for (int j = 0; j < g.ny(); ++j) {
        if (2 * j == g.ny()) continue;
        const int jf = (2 * j < g.ny()) ? j : j + fg.ny() - g.ny();
        const double ky = fft::full_wavenumber(j, g.ny(), g.ly());
        for (int i = 0; i < nxc; ++i) {
            if (2 * i == g.nx()) continue;
            const double kx = fft::full_wavenumber(i, g.nx(), g.lx());
            out[std::size_t(jf) * fxc + i] = scale * spec[std::size_t(j) * nxc + i] * std::polar(1.0, kx * sx + ky * sy);
        }
    }
    return ScalarField(fg, fine.inverse(std::move(out)));
}

inline ScalarField laplacian(const ScalarField& f, Backend backend = Backend::spectral)
{
    const auto& g = f.grid();
    if (backend == Backend::spectral) {
        return detail::spectral_apply(f, [&](int i, int j) {
            const double kx = fft::full_wavenumber(i, g.nx(), g.lx());
            const double ky = fft::full_wavenumber(j, g.ny(), g.ly());
            return fft::cplx(-(kx * kx + ky * ky), 0.0);
        });
    }
    ScalarField out(g);
    const double ax = 1.0 / (g.hx() * g.hx()), ay = 1.0 / (g.hy() * g.hy());
    const int nx = g.nx(), ny = g.ny();
    for (int j = 0; j < ny; ++j) {
        const int jm = (j + ny - 1) % ny, jp = (j + 1) % ny;
        for (int i = 0; i < nx; ++i) {
            const int im = (i + nx - 1) % nx, ip = (i + 1) % nx;
            const double c = f(i, j);
            out(i, j) = ax * (f(ip, j) - 2.0 * c + f(im, j)) + ay * (f(i, jp) - 2.0 * c + f(i, jm));
        }
    }
    return out;
}

inline ScalarField partial_x(const ScalarField& f, Backend backend = Backend::spectral)
{
    const auto& g = f.grid();
    if (backend == Backend::spectral) {
        return detail::spectral_apply(f, [&](int i, int) {
            return fft::cplx(0.0, fft::derivative_wavenumber(i, g.nx(), g.lx()));
        });
    }
    ScalarField out(g);
    const double a = 0.5 / g.hx();
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i) out(i, j) = a * (f.wrapped(i + 1, j) - f.wrapped(i - 1, j));
    return out;
}

inline ScalarField partial_y(const ScalarField& f, Backend backend = Backend::spectral)
{
    const auto& g = f.grid();
    if (backend == Backend::spectral) {
        return detail::spectral_apply(f, [&](int, int j) {
            return fft::cplx(0.0, fft::derivative_wavenumber(j, g.ny(), g.ly()));
        });
    }
    ScalarField out(g);
    const double a = 0.5 / g.hy();
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i) out(i, j) = a * (f.wrapped(i, j + 1) - f.wrapped(i, j - 1));
    return out;
}

inline VectorField gradient(const ScalarField& f, Backend backend = Backend::spectral)
{
    if (backend == Backend::spectral) {
        // one forward transform shared by both components
        const auto& g = f.grid();
        const auto& plan = fft::Plan2D::get(g.nx(), g.ny());
        const auto spec = plan.forward(f.values());
        const int nxc = g.nx() / 2 + 1;
        auto sx = spec, sy = spec;
        for (int j = 0; j < g.ny(); ++j) {
            const double ky = fft::derivative_wavenumber(j, g.ny(), g.ly());
            for (int i = 0; i < nxc; ++i) {
                const double kx = fft::derivative_wavenumber(i, g.nx(), g.lx());
                const std::size_t k = std::size_t(j) * nxc + i;
                sx[k] *= fft::cplx(0.0, kx);
                sy[k] *= fft::cplx(0.0, ky);
            }
        }
        return VectorField(ScalarField(g, plan.inverse(std::move(sx))), ScalarField(g, plan.inverse(std::move(sy))));
    }
    return VectorField(partial_x(f, backend), partial_y(f, backend));
}

inline ScalarField divergence(const VectorField& v, Backend backend = Backend::spectral)
{
    return partial_x(v.x, backend) + partial_y(v.y, backend);
}

// ---------------------------------------------------------------------------
// Snapshot I/O.  Binary layout: nx, ny (int64), lx, ly (float64), all
// little-endian, followed by nx*ny float64 values in row-major order (x
// fastest).

namespace detail {

template <class T>
void write_le(std::ostream& os, T value)
{
    static_assert(sizeof(T) == 8);
    auto bits = std::bit_cast<std::uint64_t>(value);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    os.write(reinterpret_cast<const char*>(&bits), 8);
}

template <class T>
T read_le(std::istream& is)
{
    std::uint64_t bits = 0;
    is.read(reinterpret_cast<char*>(&bits), 8);
    if (!is) throw IoError("field snapshot: truncated stream");
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    return std::bit_cast<T>(bits);
}

} // namespace detail

inline void write_binary(const ScalarField& f, std::ostream& os)
{
    const auto& g = f.grid();
    detail::write_le<std::int64_t>(os, g.nx());
    detail::write_le<std::int64_t>(os, g.ny());
    detail::write_le<double>(os, g.lx());
    detail::write_le<double>(os, g.ly());
    for (double v : f.values()) detail::write_le<double>(os, v);
}

inline ScalarField read_binary(std::istream& is)
{
    const auto nx = detail::read_le<std::int64_t>(is);
    const auto ny = detail::read_le<std::int64_t>(is);
    const auto lx = detail::read_le<double>(is);
    const auto ly = detail::read_le<double>(is);
    if (nx <= 0 || ny <= 0 || nx > (1 << 16) || ny > (1 << 16)) throw IoError("field snapshot: bad dimensions");
    PeriodicGrid g(int(nx), int(ny), lx, ly);
    std::vector<double> v(g.size());
    for (double& x : v) x = detail::read_le<double>(is);
    return ScalarField(g, std::move(v));
}

/// "x,y,value" rows at cell centres, for plotting.
inline void write_csv(const ScalarField& f, std::ostream& os)
{
    const auto& g = f.grid();
    os << "x,y,value\n";
    os.precision(17);
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i) os << g.x(i) << ',' << g.y(j) << ',' << f(i, j) << '\n';
}

} // namespace nlac
