#pragma once

// Log-log least-squares fits for convergence orders.

#include "nlac/errors.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nlac {

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    /// RMS of the residuals of log(value).
    double residual = 0.0;
    double slope_stderr = 0.0;
    /// 95% confidence interval of the slope (t-distribution, n-2 dof).
    double ci_low = 0.0, ci_high = 0.0;
    int n = 0;
};

/// Least squares fit of log(value) = slope*log(x) + intercept.
inline SlopeFit fit_slope(std::span<const std::pair<double, double>> pairs)
{
    if (pairs.size() < 3) throw ConfigError("fit_slope needs at least 3 points");
    for (const auto& [x, v] : pairs)
        if (!(x > 0.0) || !(v > 0.0))
            throw NonPositiveValue("fit_slope: non-positive pair (" + std::to_string(x) + ", " + std::to_string(v) + ")");
    const double n = double(pairs.size());
    double mx = 0.0, my = 0.0;
    for (const auto& [x, v] : pairs) {
        mx += std::log(x);
        my += std::log(v);
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, v] : pairs) {
        const double dx = std::log(x) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(v) - my);
    }
    if (!(sxx > 0.0)) throw ConfigError("fit_slope: abscissae must not all coincide");
    SlopeFit f;
    f.n = int(pairs.size());
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0.0;
    for (const auto& [x, v] : pairs) {
        const double r = std::log(v) - (f.slope * std::log(x) + f.intercept);
        ss += r * r;
    }
    f.residual = std::sqrt(ss / n);
    f.slope_stderr = std::sqrt(ss / (n - 2.0) / sxx);
    const boost::math::students_t dist(n - 2.0);
    const double q = boost::math::quantile(boost::math::complement(dist, 0.025));
    f.ci_low = f.slope - q * f.slope_stderr;
    f.ci_high = f.slope + q * f.slope_stderr;
    return f;
}

inline SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& v)
{
    if (x.size() != v.size()) throw ConfigError("fit_slope: size mismatch");
    std::vector<std::pair<double, double>> p;
    for (std::size_t k = 0; k < x.size(); ++k) p.emplace_back(x[k], v[k]);
    return fit_slope(p);
}

} // namespace nlac
