#pragma once

#include "pcalc/fp.hpp"
#include "pcalc/lattice.hpp"

namespace pcalc {

/// Below this distance from 1 the difference quotient is a 0/0 form and the
/// operator delegates to the limit procedure.
inline constexpr double k_near_one_threshold = 1e-8;

/// The p-derivative (f(x^p) - f(x)) / (x^p - x). At x = 0 and near x = 1 the
/// value is obtained as a numerical limit. NaN/Inf produced by f propagate to
/// the result; callers decide.
double p_derivative(const RealFunction& f, double x, PParam p);

enum class BoundaryPoint { zero, one };

/// Controls for the boundary-limit extrapolation.
struct LimitOptions {
    double h0 = 0.5;      ///< first offset of the geometric sequence
    double rel_tol = 1e-9;///< agreement required between extrapolants
    int max_steps = 40;
};

/// Numerical limit of the p-derivative at 0 (one-sided) or 1 (two-sided):
/// evaluate along x_k = h0/2^k, extrapolate the last three iterates, stop
/// when successive extrapolants agree to rel_tol. Throws NonConvergenceError
/// when the limit does not settle (e.g. a kink at the point).
double p_derivative_boundary(const RealFunction& f, BoundaryPoint at, PParam p,
                             const LimitOptions& options = {});

/// n-fold iterate of the p-derivative; n = 0 returns f(x). The expansion
/// touches the n+1 nodes x^(p^j), j = 0..n.
double p_derivative_n(const RealFunction& f, double x, PParam p, int n);

} // namespace pcalc
