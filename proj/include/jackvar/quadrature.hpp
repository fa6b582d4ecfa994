#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>

#include "jackvar/errors.hpp"

namespace jackvar::quad {

struct Result {
    double value = 0.0;
    double error_estimate = 0.0;
    bool converged = true;
};

namespace detail {

template <class F>
double adaptive_simpson_step(const F& f, double a, double b, double fa, double fm, double fb,
                             double whole, double tol, int depth, Result& acc) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double h = b - a;
    const double left = h / 12.0 * (fa + 4.0 * flm + fm);
    const double right = h / 12.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol || h <= 1e-15 * (std::abs(a) + std::abs(b) + 1.0)) {
        acc.error_estimate += std::abs(delta) / 15.0;
        return left + right + delta / 15.0;
    }
    if (depth <= 0) {
        acc.converged = false;
        acc.error_estimate += std::abs(delta) / 15.0;
        return left + right + delta / 15.0;
    }
    return adaptive_simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, acc) +
           adaptive_simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, acc);
}

} // namespace detail

/// Adaptive Simpson with Richardson correction. Does not throw; check `converged`.
template <class F>
Result adaptive_simpson(const F& f, double a, double b, double abs_tol, int max_depth = 48) {
    Result r;
    if (a == b) return r;
    // Split into a few panels first so that narrow features are not missed by the
    // initial five-point probe.
    constexpr int panels = 8;
    const double step = (b - a) / panels;
    for (int k = 0; k < panels; ++k) {
        const double lo = a + k * step;
        const double hi = (k + 1 == panels) ? b : a + (k + 1) * step;
        const double flo = f(lo);
        const double fhi = f(hi);
        const double fm = f(0.5 * (lo + hi));
        const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi);
        r.value += detail::adaptive_simpson_step(f, lo, hi, flo, fm, fhi, whole, abs_tol / panels,
                                                 max_depth, r);
    }
    return r;
}

/// Adaptive Simpson that throws numerical_error when the tolerance is not met.
template <class F>
double integrate(const F& f, double a, double b, double abs_tol, const char* what = "integral") {
    const Result r = adaptive_simpson(f, a, b, abs_tol);
    if (!r.converged && r.error_estimate > abs_tol) {
        std::ostringstream msg;
        msg << what << ": adaptive quadrature did not converge on [" << a << ", " << b
            << "], achieved error estimate " << r.error_estimate << " (requested " << abs_tol << ")";
        throw numerical_error(msg.str());
    }
    return r.value;
}

/// Composite Simpson weights for `intervals` (even) equal intervals of width h.
inline double simpson_weight(std::size_t k, std::size_t intervals, double h) {
    if (k == 0 || k == intervals) return h / 3.0;
    return (k % 2 == 1) ? 4.0 * h / 3.0 : 2.0 * h / 3.0;
}

} // namespace jackvar::quad
