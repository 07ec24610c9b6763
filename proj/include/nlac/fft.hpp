#pragma once

// Thin RAII layer over FFTW.  Plans are created once per size, cached for the
// lifetime of the process and executed with the new-array interface so that
// any std::vector can be transformed.  Planning is serialized; execution is
// thread-safe.

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

namespace nlac::fft {

using cplx = std::complex<double>;

namespace detail {

inline std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}

// FFTW_ESTIMATE keeps plan selection deterministic, which keeps run outputs
// bit-reproducible across invocations.
constexpr unsigned plan_flags = FFTW_ESTIMATE | FFTW_UNALIGNED;

struct PlanDeleter {
    void operator()(fftw_plan_s* p) const
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(p);
    }
};
using PlanPtr = std::unique_ptr<fftw_plan_s, PlanDeleter>;

} // namespace detail

/// Real 2D transform on an ny x nx row-major array (x fastest).  The spectrum
/// has ny x (nx/2+1) entries.  inverse() includes the 1/(nx*ny) factor.
class Plan2D {
public:
    static const Plan2D& get(int nx, int ny)
    {
        auto& m = detail::planner_mutex(); // must outlive the cache
        static std::map<std::pair<int, int>, std::unique_ptr<Plan2D>> cache;
        std::lock_guard lock(m);
        auto& slot = cache[{nx, ny}];
        if (!slot) slot.reset(new Plan2D(nx, ny));
        return *slot;
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    std::size_t spectrum_size() const { return std::size_t(ny_) * (nx_ / 2 + 1); }

    std::vector<cplx> forward(std::span<const double> in) const
    {
        std::vector<double> work(in.begin(), in.end());
        std::vector<cplx> out(spectrum_size());
        fftw_execute_dft_r2c(fwd_.get(), work.data(), reinterpret_cast<fftw_complex*>(out.data()));
        return out;
    }

    /// Consumes the spectrum (c2r transforms destroy their input).
    std::vector<double> inverse(std::vector<cplx> spec) const
    {
        std::vector<double> out(std::size_t(nx_) * ny_);
        fftw_execute_dft_c2r(bwd_.get(), reinterpret_cast<fftw_complex*>(spec.data()), out.data());
        const double scale = 1.0 / (double(nx_) * ny_);
        for (double& v : out) v *= scale;
        return out;
    }

private:
    Plan2D(int nx, int ny) : nx_(nx), ny_(ny)
    {
        std::vector<double> r(std::size_t(nx) * ny);
        std::vector<cplx> c(spectrum_size());
        auto* cp = reinterpret_cast<fftw_complex*>(c.data());
        fwd_.reset(fftw_plan_dft_r2c_2d(ny, nx, r.data(), cp, detail::plan_flags));
        bwd_.reset(fftw_plan_dft_c2r_2d(ny, nx, cp, r.data(), detail::plan_flags));
    }

    int nx_, ny_;
    detail::PlanPtr fwd_, bwd_;
};

/// Real 1D transform of length n; spectrum has n/2+1 entries.
class Plan1D {
public:
    static const Plan1D& get(int n)
    {
        auto& m = detail::planner_mutex();
        static std::map<int, std::unique_ptr<Plan1D>> cache;
        std::lock_guard lock(m);
        auto& slot = cache[n];
        if (!slot) slot.reset(new Plan1D(n));
        return *slot;
    }

    int size() const { return n_; }

    std::vector<cplx> forward(std::span<const double> in) const
    {
        std::vector<double> work(in.begin(), in.end());
        std::vector<cplx> out(std::size_t(n_ / 2 + 1));
        fftw_execute_dft_r2c(fwd_.get(), work.data(), reinterpret_cast<fftw_complex*>(out.data()));
        return out;
    }

    std::vector<double> inverse(std::vector<cplx> spec) const
    {
        std::vector<double> out(std::size_t(n_), 0.0);
        fftw_execute_dft_c2r(bwd_.get(), reinterpret_cast<fftw_complex*>(spec.data()), out.data());
        const double scale = 1.0 / n_;
        for (double& v : out) v *= scale;
        return out;
    }

private:
    explicit Plan1D(int n) : n_(n)
    {
        std::vector<double> r(static_cast<std::size_t>(n));
        std::vector<cplx> c(std::size_t(n / 2 + 1));
        auto* cp = reinterpret_cast<fftw_complex*>(c.data());
        fwd_.reset(fftw_plan_dft_r2c_1d(n, r.data(), cp, detail::plan_flags));
        bwd_.reset(fftw_plan_dft_c2r_1d(n, cp, r.data(), detail::plan_flags));
    }

    int n_;
    detail::PlanPtr fwd_, bwd_;
};

/// Angular wavenumber of spectral index k for a period of length `period`,
/// with the Nyquist mode zeroed (the convention for odd-order derivatives).
inline double derivative_wavenumber(int k, int n, double period)
{
    const double two_pi = 6.283185307179586;
    if (2 * k == n) return 0.0;
    const int kk = (2 * k < n) ? k : k - n;
    return two_pi * kk / period;
}

/// Same, but keeping the Nyquist mode (used for even-order operators).
inline double full_wavenumber(int k, int n, double period)
{
    const double two_pi = 6.283185307179586;
    const int kk = (2 * k <= n) ? k : k - n;
    return two_pi * kk / period;
}

/// Spectral derivative of a periodic sample on a uniform grid of length n over
/// `period`.  order 1 or 2.
inline std::vector<double> periodic_derivative(std::span<const double> f, double period, int order = 1)
{
    const int n = int(f.size());
    const auto& plan = Plan1D::get(n);
    auto spec = plan.forward(f);
    for (int k = 0; k <= n / 2; ++k) {
        if (order == 1) {
            spec[k] *= cplx(0.0, derivative_wavenumber(k, n, period));
        } else {
            const double w = full_wavenumber(k, n, period);
            spec[k] *= -w * w;
        }
    }
    return plan.inverse(std::move(spec));
}

/// Zero-mean periodic antiderivative of a zero-mean periodic sample.  The mean
/// of `f` is discarded.
inline std::vector<double> periodic_antiderivative(std::span<const double> f, double period)
{
    const int n = int(f.size());
    const auto& plan = Plan1D::get(n);
    auto spec = plan.forward(f);
    spec[0] = 0.0;
    for (int k = 1; k <= n / 2; ++k) {
        const double w = derivative_wavenumber(k, n, period);
        spec[k] = (w == 0.0) ? cplx(0.0) : spec[k] / cplx(0.0, w);
    }
    return plan.inverse(std::move(spec));
}

} // namespace nlac::fft
