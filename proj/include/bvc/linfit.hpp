#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace bvc {

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t n = 0;
};

// Ordinary least squares y = slope*x + intercept. Constant y (zero total
// variance) reports r2 = 0 so callers can flag the fit as uninformative.
inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    LinearFit out;
    out.n = x.size() < y.size() ? x.size() : y.size();
    if (out.n < 2) return out;
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < out.n; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / static_cast<double>(out.n);
    const double my = sy / static_cast<double>(out.n);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < out.n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx <= 0.0) return out;
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    if (syy <= 1e-30) {
        out.r2 = 0.0;
        return out;
    }
    double ssr = 0;
    for (std::size_t i = 0; i < out.n; ++i) {
        const double r = y[i] - (out.slope * x[i] + out.intercept);
        ssr += r * r;
    }
    out.r2 = 1.0 - ssr / syy;
    return out;
}

} // namespace bvc
