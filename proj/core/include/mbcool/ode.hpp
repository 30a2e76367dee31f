#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "mbcool/errors.hpp"

namespace mbcool {

/// Error control for the adaptive stepper plus the fixed-step fallback.
/// fixed_steps > 0 selects classic RK4 on that many uniform steps instead of
/// the embedded adaptive scheme (used for grid-reproducibility checks);
/// fixed_steps < 0 asks pulse-level wrappers to use the pulse's own
/// n_time_samples grid.
struct IntegratorOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    int fixed_steps = 0;
    std::size_t max_steps = 20'000'000;
};

namespace detail {
using cvec = std::vector<std::complex<double>>;
} // namespace detail

/// Embedded Cash-Karp RK4(5) with step-size control. rhs(t, y, dydt) fills the
/// derivative. Throws IntegrationError if the step size underflows, the step
/// budget is exhausted, or the state stops being finite.
template <typename Rhs>
void integrate_adaptive(Rhs&& rhs, detail::cvec& y, double t0, double t1,
                        const IntegratorOptions& opts = {}) {
    using detail::cvec;
    static constexpr double a2 = 1.0 / 5, a3 = 3.0 / 10, a4 = 3.0 / 5, a5 = 1.0, a6 = 7.0 / 8;
    static constexpr double b21 = 1.0 / 5;
    static constexpr double b31 = 3.0 / 40, b32 = 9.0 / 40;
    static constexpr double b41 = 3.0 / 10, b42 = -9.0 / 10, b43 = 6.0 / 5;
    static constexpr double b51 = -11.0 / 54, b52 = 5.0 / 2, b53 = -70.0 / 27, b54 = 35.0 / 27;
    static constexpr double b61 = 1631.0 / 55296, b62 = 175.0 / 512, b63 = 575.0 / 13824,
                            b64 = 44275.0 / 110592, b65 = 253.0 / 4096;
    static constexpr double c1 = 37.0 / 378, c3 = 250.0 / 621, c4 = 125.0 / 594, c6 = 512.0 / 1771;
    // difference between the 5th- and embedded 4th-order weights
    static constexpr double d1 = c1 - 2825.0 / 27648, d3 = c3 - 18575.0 / 48384,
                            d4 = c4 - 13525.0 / 55296, d5 = -277.0 / 14336, d6 = c6 - 1.0 / 4;

    const std::size_t dim = y.size();
    const double span = t1 - t0;
    if (span <= 0.0) return;

    cvec k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), y_try(dim), y5(dim);
    double t = t0;
    double h = span / 64.0;
    const double h_min = span * 1e-14;

    std::size_t steps = 0;
    while (t < t1) {
        if (++steps > opts.max_steps)
            throw IntegrationError("adaptive integrator exceeded step budget", t);
        if (h > t1 - t) h = t1 - t;

        rhs(t, y, k1);
        for (std::size_t i = 0; i < dim; ++i) y_try[i] = y[i] + h * (b21 * k1[i]);
        rhs(t + a2 * h, y_try, k2);
        for (std::size_t i = 0; i < dim; ++i) y_try[i] = y[i] + h * (b31 * k1[i] + b32 * k2[i]);
        rhs(t + a3 * h, y_try, k3);
        for (std::size_t i = 0; i < dim; ++i)
            y_try[i] = y[i] + h * (b41 * k1[i] + b42 * k2[i] + b43 * k3[i]);
        rhs(t + a4 * h, y_try, k4);
        for (std::size_t i = 0; i < dim; ++i)
            y_try[i] = y[i] + h * (b51 * k1[i] + b52 * k2[i] + b53 * k3[i] + b54 * k4[i]);
        rhs(t + a5 * h, y_try, k5);
        for (std::size_t i = 0; i < dim; ++i)
            y_try[i] = y[i] + h * (b61 * k1[i] + b62 * k2[i] + b63 * k3[i] + b64 * k4[i] + b65 * k5[i]);
        rhs(t + a6 * h, y_try, k6);

        double err = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            y5[i] = y[i] + h * (c1 * k1[i] + c3 * k3[i] + c4 * k4[i] + c6 * k6[i]);
            const std::complex<double> e =
                h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i]);
            const double scale =
                opts.abs_tol + opts.rel_tol * std::max(std::abs(y[i]), std::abs(y5[i]));
            err = std::max(err, std::abs(e) / scale);
        }
        if (!std::isfinite(err))
            throw IntegrationError("non-finite state in adaptive step", t);

        if (err <= 1.0) { // accept
            t += h;
            y.swap(y5);
            const double grow = err == 0.0 ? 5.0 : 0.9 * std::pow(err, -0.2);
            h *= std::min(5.0, std::max(0.2, grow));
        } else { // reject, shrink
            h *= std::max(0.2, 0.9 * std::pow(err, -0.25));
            if (h < h_min)
                throw IntegrationError("step size underflow in adaptive integrator", t);
        }
    }
}

/// Classic fixed-step RK4 on n_steps uniform steps.
template <typename Rhs>
void integrate_fixed(Rhs&& rhs, detail::cvec& y, double t0, double t1, int n_steps) {
    using detail::cvec;
    if (n_steps < 1) throw std::invalid_argument("integrate_fixed: n_steps < 1");
    const std::size_t dim = y.size();
    const double h = (t1 - t0) / n_steps;
    cvec k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
    for (int s = 0; s < n_steps; ++s) {
        const double t = t0 + s * h;
        rhs(t, y, k1);
        for (std::size_t i = 0; i < dim; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
        rhs(t + 0.5 * h, tmp, k2);
        for (std::size_t i = 0; i < dim; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
        rhs(t + 0.5 * h, tmp, k3);
        for (std::size_t i = 0; i < dim; ++i) tmp[i] = y[i] + h * k3[i];
        rhs(t + h, tmp, k4);
        for (std::size_t i = 0; i < dim; ++i)
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

} // namespace mbcool
