#include "pcalc/deriv.hpp"

#include <cmath>
#include <sstream>

#include "pcalc/errors.hpp"

namespace pcalc {

namespace {

double raw_quotient(const RealFunction& f, double x, double p) {
    const double xp = std::pow(x, p);
    return (f(xp) - f(x)) / (xp - x);
}

// Aitken delta-squared acceleration of a sequence generated on a geometric
// abscissa ladder. Returns the limit once successive extrapolants agree.
double extrapolate_limit(const std::function<double(int)>& value_at_step,
                         const LimitOptions& opt, const char* where) {
    double v0 = 0.0, v1 = 0.0, v2 = 0.0;
    double prev_ext = std::numeric_limits<double>::quiet_NaN();

    for (int k = 0; k < opt.max_steps; ++k) {
        v0 = v1;
        v1 = v2;
        v2 = value_at_step(k);
        if (!std::isfinite(v2)) {
            std::ostringstream msg;
            msg << "p-derivative limit at " << where
                << ": non-finite sample at step " << k;
            throw NumericError(msg.str());
        }
        if (k < 2) continue;

        const double d1 = v2 - v1;
        const double d2 = d1 - (v1 - v0);
        double ext;
        if (d2 == 0.0) {
            ext = v2; // flat or arithmetic tail; no acceleration possible
        } else {
            ext = v2 - d1 * d1 / d2;
        }
        if (std::isfinite(prev_ext) &&
            std::fabs(ext - prev_ext) <=
                opt.rel_tol * std::fmax(1.0, std::fabs(ext))) {
            return ext;
        }
        prev_ext = ext;
    }

    std::ostringstream msg;
    msg << "p-derivative limit at " << where << " did not converge in "
        << opt.max_steps << " steps; last extrapolants " << prev_ext << ", "
        << v2;
    throw NonConvergenceError(msg.str());
}

} // namespace

double p_derivative_boundary(const RealFunction& f, BoundaryPoint at, PParam p,
                             const LimitOptions& options) {
    if (!(options.h0 > 0.0) || (at == BoundaryPoint::one && options.h0 >= 1.0)) {
        throw DomainError("limit options require 0 < h0 (< 1 at the point 1)");
    }
    const double pv = p.value();

    if (at == BoundaryPoint::zero) {
        return extrapolate_limit(
            [&](int k) {
                const double x = options.h0 * std::ldexp(1.0, -k);
                return raw_quotient(f, x, pv);
            },
            options, "0");
    }

    // Two-sided limit at 1: both approaches must settle and agree.
    const double above = extrapolate_limit(
        [&](int k) {
            const double x = 1.0 + options.h0 * std::ldexp(1.0, -k);
            return raw_quotient(f, x, pv);
        },
        options, "1+");
    const double below = extrapolate_limit(
        [&](int k) {
            const double x = 1.0 - options.h0 * std::ldexp(1.0, -k);
            return raw_quotient(f, x, pv);
        },
        options, "1-");

    const double scale = std::fmax(1.0, std::fmax(std::fabs(above), std::fabs(below)));
    if (std::fabs(above - below) > 1e-7 * scale) {
        std::ostringstream msg;
        msg << "p-derivative limit at 1: one-sided limits disagree (" << above
            << " vs " << below << ")";
        throw NonConvergenceError(msg.str());
    }
    return 0.5 * (above + below);
}

double p_derivative(const RealFunction& f, double x, PParam p) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
        throw DomainError("p-derivative requires a finite x >= 0");
    }
    if (x == 0.0) return p_derivative_boundary(f, BoundaryPoint::zero, p);
    if (std::fabs(x - 1.0) < k_near_one_threshold) {
        return p_derivative_boundary(f, BoundaryPoint::one, p);
    }
    return raw_quotient(f, x, p.value());
}

double p_derivative_n(const RealFunction& f, double x, PParam p, int n) {
    if (n < 0) throw DomainError("derivative order must be non-negative");
    if (n == 0) return f(x);
    if (n == 1) return p_derivative(f, x, p);
    const RealFunction inner = [&f, p, n](double t) {
        return p_derivative_n(f, t, p, n - 1);
    };
    return p_derivative(inner, x, p);
}

} // namespace pcalc
