#pragma once

#include <vector>

#include "pcalc/fp.hpp"
#include "pcalc/lattice.hpp"

namespace pcalc {

/// Which interval regime produced a definite p-integral.
enum class IntegralCase { from1, to1, from0, zero_one, general };

const char* to_string(IntegralCase c) noexcept;

/// One recorded quadrature term; `term` carries the sign it contributed to
/// the final value, `gap` is the raw node gap.
struct IntegralTerm {
    int j;
    double node;
    double gap;
    double term;
};

struct IntegralResult {
    double value = 0.0;
    long terms_used = 0;
    double tail_bound = 0.0; ///< estimated magnitude of the omitted tail
    IntegralCase case_tag = IntegralCase::general;
    bool truncated_at_cap = false; ///< j_max reached before the tail settled
};

/// Integral over (1, b]: sum of (b^(p^j) - b^(p^(j+1))) f(b^(p^j)), j >= 0,
/// summed ascending with compensated accumulation. Accepts b = 1 (empty).
IntegralResult integral_from_1(const RealFunction& f, double b, PParam p,
                               const TruncationPolicy& policy = {},
                               std::vector<IntegralTerm>* dump = nullptr);

/// Integral over [b, 1) for 0 < b < 1: sum of (b^(p^(j+1)) - b^(p^j)) f(b^(p^j)).
IntegralResult integral_to_1(const RealFunction& f, double b, PParam p,
                             const TruncationPolicy& policy = {},
                             std::vector<IntegralTerm>* dump = nullptr);

/// Integral over (0, b] for 0 < b < 1: sum of
/// (b^(p^-j) - b^(p^-j-1)) f(b^(p^-j-1)). Throws DivergenceError when term
/// magnitudes stop decaying (integrand unbounded at 0). b = 0 yields 0.
IntegralResult integral_from_0(const RealFunction& f, double b, PParam p,
                               const TruncationPolicy& policy = {},
                               std::vector<IntegralTerm>* dump = nullptr);

/// Integral over (0, 1): the bi-infinite sum over the orbit p^(p^j), j in Z,
/// truncated independently toward both accumulation points.
IntegralResult integral_zero_one(const RealFunction& f, PParam p,
                                 const TruncationPolicy& policy = {},
                                 std::vector<IntegralTerm>* dump = nullptr);

/// The definite p-integral over [a, b] for any 0 <= a, b. Dispatches on the
/// interval regime; a > b negates the swapped integral bit-exactly. Endpoint
/// pairs on a common lattice (a = b^(p^k), both above 1) collapse to the
/// exact finite sum.
IntegralResult p_integral(const RealFunction& f, double a, double b, PParam p,
                          const TruncationPolicy& policy = {},
                          std::vector<IntegralTerm>* dump = nullptr);

/// n-fold iterate of the base-point integral over (0, x); n = 0 returns
/// f(b). Inner iterates are evaluated on demand at outer quadrature nodes,
/// so cost grows quickly with n.
double p_integral_n(const RealFunction& f, double b, PParam p,
                    const TruncationPolicy& policy, int n);

/// | p_integral(D_p F, a, b) - (F(b) - F(a)) |.
double ftc_residual(const RealFunction& F, double a, double b, PParam p,
                    const TruncationPolicy& policy = {});

/// Residual of p-integration by parts:
/// | int f D_p g  -  [ f g |_a^b  -  int g(t^p) D_p f ] |.
double by_parts_residual(const RealFunction& f, const RealFunction& g,
                         double a, double b, PParam p,
                         const TruncationPolicy& policy = {});

namespace detail {

/// Variant that truncates by node distance to the accumulation point instead
/// of by term size, so integrands supported on a few lattice nodes are not
/// cut before their support is reached. No common-lattice shortcut.
IntegralResult p_integral_fixed_depth(const RealFunction& f, double a,
                                      double b, PParam p,
                                      const TruncationPolicy& policy);

} // namespace detail

} // namespace pcalc
