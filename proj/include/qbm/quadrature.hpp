// quadrature.hpp - adaptive composite Gauss-Legendre integration

#pragma once

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "qbm/errors.hpp"

namespace qbm {

struct QuadratureOptions {
    double abs_tol{1e-10};
    // Initial number of panels; "resolution" in convergence studies.
    int base_panels{8};
    int max_depth{40};
    // Exponential cutoffs are integrated on [0, span * Lambda].
    double exponential_span{40.0};
};

namespace detail {

template <class F>
double gl_panel(const F& f, double a, double b) {
    return boost::math::quadrature::gauss<double, 20>::integrate(f, a, b);
}

template <class F>
double adapt_panel(const F& f, double a, double b, double whole, double tol, int depth,
                   double previous = std::numeric_limits<double>::infinity()) {
    const double mid = 0.5 * (a + b);
    const double left = gl_panel(f, a, mid);
    const double right = gl_panel(f, mid, b);
    const double refined = left + right;
    const double diff = std::abs(refined - whole);
    // Roundoff floor. The scale is the integrand size, not |left| + |right|,
    // which cancel for oscillatory f.
    const double size = std::max({std::abs(f(a)), std::abs(f(mid)), std::abs(f(b))});
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() *
                         std::max(std::abs(left) + std::abs(right), (b - a) * size);
    // A smooth panel's estimates converge by orders of magnitude per bisection;
    // if the difference stops shrinking it is roundoff (e.g. cos of a large argument).
    if (depth <= 0 || diff <= std::max(tol, floor) || diff > 0.5 * previous) return refined;
    return adapt_panel(f, a, mid, left, 0.5 * tol, depth - 1, diff) +
           adapt_panel(f, mid, b, right, 0.5 * tol, depth - 1, diff);
}

} // namespace detail

// Integrates f over [a, b]. The interval is first split into enough panels
// to put at most half an oscillation of cos(frequency * x) in each panel, then
// every panel is bisected until two consecutive 20-point Gauss-Legendre
// estimates agree to its share of the absolute tolerance.
template <class F>
double integrate(const F& f, double a, double b, const QuadratureOptions& opt = {},
                 double frequency = 0.0) {
    if (!(b > a)) return 0.0;
    const double oscillations = std::abs(frequency) * (b - a) / pi;
    const auto panels = static_cast<std::size_t>(opt.base_panels) +
                        static_cast<std::size_t>(std::ceil(oscillations));
    const double width = (b - a) / static_cast<double>(panels);
    const double panel_tol = opt.abs_tol / static_cast<double>(panels);
    double total = 0.0;
    for (std::size_t i = 0; i < panels; ++i) {
        const double lo = a + width * static_cast<double>(i);
        const double hi = (i + 1 == panels) ? b : lo + width;
        total += detail::adapt_panel(f, lo, hi, detail::gl_panel(f, lo, hi), panel_tol,
                                     opt.max_depth);
    }
    return total;
}

// Summation in a fixed binary tree; the result depends only on the order of
// the inputs, not on how they were produced.
inline double pairwise_sum(const double* x, std::size_t n) {
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

} // namespace qbm
