#include "pcalc/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pcalc/deriv.hpp"
#include "pcalc/errors.hpp"

namespace pcalc {

const char* to_string(IntegralCase c) noexcept {
    switch (c) {
    case IntegralCase::from1: return "from1";
    case IntegralCase::to1: return "to1";
    case IntegralCase::from0: return "from0";
    case IntegralCase::zero_one: return "zero-one";
    case IntegralCase::general: return "general";
    }
    return "general";
}

namespace {

enum class StopRule {
    tail_estimate, ///< stop when the first omitted term and its geometric
                   ///< tail extrapolation fall below the margin
    node_distance, ///< stop when the node reaches the accumulation point
};

// Stop margins are tighter than policy.eps so that the composite dispatch
// (up to three truncated series per definite integral) still lands inside
// eps overall.
constexpr double k_series_margin = 0.25;
constexpr double k_bi_series_margin = 0.125;

// Divergence is declared on joint evidence, sustained over a short window
// near the accumulation point: term magnitudes stopped decaying AND the
// integrand itself keeps blowing up (at least doubling per lattice step).
// Either signal alone misfires: away-ray gaps legitimately grow for
// log2(1/(1-b)) steps before their doubly-exponential collapse, and a
// bounded integrand crossing a zero near 1 grows for several steps while
// the gaps shrink only as fast as p. The window is short because nodes of
// an away ray reach the underflow range within a handful of steps.
constexpr int k_divergence_window = 4;
constexpr double k_deep_zone = 0.05;

struct SeriesAccum {
    CompensatedSum sum;
    double prev_mag = -1.0;
    double prev_f_mag = -1.0;
    int blowing_up = 0;

    void watch(double mag, double f_mag, bool near_limit, double eps,
               const char* what) {
        if (mag > 1e300) {
            throw DivergenceError(std::string(what) +
                                  ": term magnitude overflowed");
        }
        if (near_limit && prev_mag >= 0.0 &&
            mag >= prev_mag * (1.0 - 1e-12) && mag > eps &&
            f_mag >= 2.0 * prev_f_mag) {
            if (++blowing_up >= k_divergence_window) {
                throw DivergenceError(std::string(what) +
                                      ": terms stopped decaying");
            }
        } else {
            blowing_up = 0;
        }
        prev_mag = mag;
        prev_f_mag = f_mag;
    }
};

// The sub-representable stand-in: nodes that underflow to 0 are sampled at
// the smallest normal double instead, which the difference quotient of a
// function continuous at 0 handles without a limit procedure. The weight of
// such a term is itself far below any usable eps.
inline double clamp_node(double x) {
    return x == 0.0 ? std::numeric_limits<double>::min() : x;
}

void check_finite(double fx, double node, const char* what) {
    if (!std::isfinite(fx)) {
        std::ostringstream msg;
        msg << what << ": integrand not finite at node " << node;
        throw NumericError(msg.str());
    }
}

struct EngineSpec {
    const RealFunction& f;
    double base;
    double p;
    const TruncationPolicy& policy;
    StopRule stop;
    std::vector<IntegralTerm>* dump;
    double dump_sign;
    const char* what;
};

// Shared single-ray engine. `away` selects the exponent direction; the three
// interval cases differ only in gap orientation and which node samples f.
IntegralResult run_series(const EngineSpec& spec, bool away, bool sample_low,
                          IntegralCase tag) {
    const TruncationPolicy& pol = spec.policy;
    const double margin = pol.eps * k_series_margin;
    const double limit = away ? 0.0 : 1.0;

    detail::NodeStream stream(spec.base, away ? 1.0 / spec.p : spec.p);
    SeriesAccum acc;
    IntegralResult res;
    res.case_tag = tag;

    // ring of recent term magnitudes: the decay ratio is estimated over a
    // window because quantized tail gaps jitter pairwise around the true
    // ratio
    constexpr int k_ratio_window = 8;
    double recent[k_ratio_window] = {};
    double last_added_mag = -1.0;
    double prev_added_mag = -1.0;

    for (int j = 0; j < pol.j_max; ++j) {
        const double node = stream.node;
        stream.advance();
        const double next = stream.node;
        const double gap = away ? node - next : std::fabs(next - node);
        if (gap == 0.0) {
            // the lattice exhausted double precision; trust the sum only if
            // the terms were decaying into the exhaustion point
            if (last_added_mag > prev_added_mag &&
                last_added_mag >
                    pol.eps * std::fmax(1.0, std::fabs(acc.sum.value()))) {
                throw DivergenceError(
                    std::string(spec.what) +
                    ": tail did not settle before the lattice exhausted "
                    "double precision");
            }
            res.terms_used = j;
            res.tail_bound = 0.0;
            res.value = acc.sum.value();
            return res;
        }

        const double sample =
            clamp_node(sample_low && away ? next : node);
        const double fx = spec.f(sample);
        check_finite(fx, sample, spec.what);
        const double term = gap * fx;
        check_finite(term, sample, spec.what);
        const double mag = std::fabs(term);
        const bool near_limit = std::fabs(sample - limit) < k_deep_zone;

        if (spec.stop == StopRule::tail_estimate && j >= pol.j_min &&
            j >= k_ratio_window && mag <= margin && last_added_mag >= 0.0 &&
            last_added_mag <= margin) {
            const double oldest = recent[j % k_ratio_window];
            double est = std::numeric_limits<double>::infinity();
            if (mag == 0.0 || oldest == 0.0) {
                est = mag;
            } else if (mag < oldest) {
                const double ratio =
                    std::pow(mag / oldest, 1.0 / k_ratio_window);
                est = mag / (1.0 - ratio);
            }
            if (est <= margin) {
                res.terms_used = j;
                res.tail_bound = est;
                res.value = acc.sum.value();
                return res;
            }
        }

        acc.watch(mag, std::fabs(fx), near_limit, pol.eps, spec.what);
        acc.sum.add(term);
        if (spec.dump) {
            spec.dump->push_back({j, sample, gap, spec.dump_sign * term});
        }
        recent[j % k_ratio_window] = mag;
        prev_added_mag = last_added_mag;
        last_added_mag = mag;

        if (spec.stop == StopRule::node_distance && j >= pol.j_min &&
            std::fabs(next - limit) < pol.eps * std::fmax(1.0, spec.base)) {
            res.terms_used = j + 1;
            res.tail_bound = std::fabs(next - limit);
            res.value = acc.sum.value();
            return res;
        }
    }

    res.terms_used = pol.j_max;
    res.tail_bound = std::fmax(last_added_mag, 0.0);
    res.truncated_at_cap = true;
    res.value = acc.sum.value();
    return res;
}

IntegralResult from_1_impl(const RealFunction& f, double b, PParam p,
                           const TruncationPolicy& policy,
                           std::vector<IntegralTerm>* dump, double sign,
                           StopRule stop) {
    validate(policy);
    if (!(b >= 1.0) || !std::isfinite(b)) {
        throw DomainError("integral_from_1 requires b >= 1");
    }
    if (b == 1.0) return {0.0, 0, 0.0, IntegralCase::from1, false};
    // gaps node - next are positive: the orbit of b > 1 descends toward 1
    return run_series({f, b, p.value(), policy, stop, dump, sign,
                       "p-integral over (1,b]"},
                      /*away=*/false, /*sample_low=*/false,
                      IntegralCase::from1);
}

IntegralResult to_1_impl(const RealFunction& f, double b, PParam p,
                         const TruncationPolicy& policy,
                         std::vector<IntegralTerm>* dump, double sign,
                         StopRule stop) {
    validate(policy);
    if (!(b > 0.0) || !(b < 1.0)) {
        throw DomainError("integral_to_1 requires 0 < b < 1");
    }
    return run_series({f, b, p.value(), policy, stop, dump, sign,
                       "p-integral over [b,1)"},
                      /*away=*/false, /*sample_low=*/false, IntegralCase::to1);
}

IntegralResult from_0_impl(const RealFunction& f, double b, PParam p,
                           const TruncationPolicy& policy,
                           std::vector<IntegralTerm>* dump, double sign,
                           StopRule stop) {
    validate(policy);
    if (b == 0.0) return {0.0, 0, 0.0, IntegralCase::from0, false};
    if (!(b > 0.0) || !(b < 1.0)) {
        throw DomainError("integral_from_0 requires 0 <= b < 1");
    }
    // f sampled at the lower node of each gap
    return run_series({f, b, p.value(), policy, stop, dump, sign,
                       "p-integral over (0,b]"},
                      /*away=*/true, /*sample_low=*/true, IntegralCase::from0);
}

IntegralResult zero_one_impl(const RealFunction& f, PParam p,
                             const TruncationPolicy& policy,
                             std::vector<IntegralTerm>* dump, double sign,
                             StopRule stop) {
    validate(policy);
    const double pv = p.value();
    const double margin = policy.eps * k_bi_series_margin;
    const bool by_distance = stop == StopRule::node_distance;
    const char* what = "p-integral over (0,1)";

    IntegralResult res;
    res.case_tag = IntegralCase::zero_one;

    // Negative-index tail first (nodes p^(p^-j) falling to 0), buffered so
    // the final reduction runs in ascending j order.
    std::vector<IntegralTerm> negative;
    double tail_low = 0.0;
    {
        detail::NodeStream stream(pv, 1.0 / pv);
        SeriesAccum acc; // divergence watch only
        double upper = pv;
        for (int j = 1;; ++j) {
            if (j >= policy.j_max) {
                res.truncated_at_cap = true;
                break;
            }
            stream.advance();
            const double node = stream.node;
            const double gap = upper - node;
            if (gap == 0.0) break;
            const double sample = clamp_node(node);
            const double fx = f(sample);
            check_finite(fx, sample, what);
            const double term = gap * fx;
            check_finite(term, sample, what);
            acc.watch(std::fabs(term), std::fabs(fx), node < k_deep_zone,
                      policy.eps, what);
            negative.push_back({-j, node, gap, term});
            upper = node;
            tail_low = node;
            const bool settled =
                by_distance ? node < policy.eps
                            : (std::fabs(term) <= margin && node <= margin);
            if (j >= policy.j_min && settled) break;
        }
    }

    CompensatedSum sum;
    for (auto it = negative.rbegin(); it != negative.rend(); ++it) {
        sum.add(it->term);
        if (dump) dump->push_back({it->j, it->node, it->gap, sign * it->term});
    }
    res.terms_used = static_cast<long>(negative.size());

    // Positive-index tail: nodes p^(p^j) climbing to 1.
    double tail_high = 0.0;
    {
        detail::NodeStream stream(pv, pv);
        SeriesAccum acc;
        for (int j = 0;; ++j) {
            if (j >= policy.j_max) {
                res.truncated_at_cap = true;
                break;
            }
            const double node = stream.node;
            stream.advance();
            const double next = stream.node;
            const double gap = next - node;
            if (gap == 0.0) break;
            const double fx = f(node);
            check_finite(fx, node, what);
            const double term = gap * fx;
            check_finite(term, node, what);
            acc.watch(std::fabs(term), std::fabs(fx),
                      1.0 - node < k_deep_zone, policy.eps, what);
            sum.add(term);
            if (dump) dump->push_back({j, node, gap, sign * term});
            ++res.terms_used;
            tail_high = 1.0 - next;
            const bool settled =
                by_distance
                    ? tail_high < policy.eps
                    : (std::fabs(term) <= margin && tail_high <= margin);
            if (j >= policy.j_min && settled) break;
        }
    }

    res.tail_bound = tail_low + std::fmax(tail_high, 0.0);
    res.value = sum.value();
    return res;
}

struct Dispatcher {
    PParam p;
    const TruncationPolicy& policy;
    std::vector<IntegralTerm>* dump;
    StopRule stop;
    bool allow_common_shortcut;

    IntegralResult run(const RealFunction& f, double a, double b,
                       double sign) const {
        if (!(a >= 0.0) || !(b >= 0.0) || !std::isfinite(a) ||
            !std::isfinite(b)) {
            throw DomainError("p-integral endpoints must be finite and >= 0");
        }
        if (a == b) return {0.0, 0, 0.0, IntegralCase::general, false};
        if (a > b) {
            IntegralResult r = run(f, b, a, -sign);
            r.value = -r.value;
            return r;
        }

        if (a >= 1.0) return above_one(f, a, b, sign);
        if (b <= 1.0) return below_one(f, a, b, sign);

        // 0 <= a < 1 < b: [0,1) orbit + (1,b] ray, minus the (0,a] ray.
        IntegralResult mid = zero_one_impl(f, p, policy, dump, sign, stop);
        IntegralResult top = from_1_impl(f, b, p, policy, dump, sign, stop);
        IntegralResult bot =
            from_0_impl(f, a, p, policy, dump, -sign, stop);
        IntegralResult res;
        res.value = (mid.value + top.value) - bot.value;
        res.terms_used = mid.terms_used + top.terms_used + bot.terms_used;
        res.tail_bound = mid.tail_bound + top.tail_bound + bot.tail_bound;
        res.case_tag = IntegralCase::general;
        res.truncated_at_cap =
            mid.truncated_at_cap || top.truncated_at_cap || bot.truncated_at_cap;
        return res;
    }

    IntegralResult above_one(const RealFunction& f, double a, double b,
                             double sign) const {
        if (a == 1.0) return from_1_impl(f, b, p, policy, dump, sign, stop);

        if (allow_common_shortcut) {
            // On a common lattice the two base-point series share every node
            // below a, so their difference is exactly the k-term sum.
            if (auto k = common_lattice_index(a, b, p, 1e-12, policy.j_max)) {
                return finite_sum(f, b, *k, sign);
            }
        }
        IntegralResult top = from_1_impl(f, b, p, policy, dump, sign, stop);
        IntegralResult bot = from_1_impl(f, a, p, policy, dump, -sign, stop);
        IntegralResult res;
        res.value = top.value - bot.value;
        res.terms_used = top.terms_used + bot.terms_used;
        res.tail_bound = top.tail_bound + bot.tail_bound;
        res.case_tag = IntegralCase::from1;
        res.truncated_at_cap = top.truncated_at_cap || bot.truncated_at_cap;
        return res;
    }

    IntegralResult below_one(const RealFunction& f, double a, double b,
                             double sign) const {
        if (a == 0.0 && b == 1.0) {
            return zero_one_impl(f, p, policy, dump, sign, stop);
        }
        if (a == 0.0) return from_0_impl(f, b, p, policy, dump, sign, stop);
        if (b == 1.0) return to_1_impl(f, a, p, policy, dump, sign, stop);

        IntegralResult top = from_0_impl(f, b, p, policy, dump, sign, stop);
        IntegralResult bot = from_0_impl(f, a, p, policy, dump, -sign, stop);
        IntegralResult res;
        res.value = top.value - bot.value;
        res.terms_used = top.terms_used + bot.terms_used;
        res.tail_bound = top.tail_bound + bot.tail_bound;
        res.case_tag = IntegralCase::from0;
        res.truncated_at_cap = top.truncated_at_cap || bot.truncated_at_cap;
        return res;
    }

    IntegralResult finite_sum(const RealFunction& f, double b, int k,
                              double sign) const {
        detail::NodeStream stream(b, p.value());
        CompensatedSum sum;
        for (int j = 0; j < k; ++j) {
            const double node = stream.node;
            stream.advance();
            const double gap = node - stream.node;
            const double fx = f(node);
            check_finite(fx, node, "p-integral over common lattice");
            const double term = gap * fx;
            sum.add(term);
            if (dump) dump->push_back({j, node, gap, sign * term});
        }
        return {sum.value(), k, 0.0, IntegralCase::from1, false};
    }
};

} // namespace

IntegralResult integral_from_1(const RealFunction& f, double b, PParam p,
                               const TruncationPolicy& policy,
                               std::vector<IntegralTerm>* dump) {
    return from_1_impl(f, b, p, policy, dump, 1.0, StopRule::tail_estimate);
}

IntegralResult integral_to_1(const RealFunction& f, double b, PParam p,
                             const TruncationPolicy& policy,
                             std::vector<IntegralTerm>* dump) {
    return to_1_impl(f, b, p, policy, dump, 1.0, StopRule::tail_estimate);
}

IntegralResult integral_from_0(const RealFunction& f, double b, PParam p,
                               const TruncationPolicy& policy,
                               std::vector<IntegralTerm>* dump) {
    return from_0_impl(f, b, p, policy, dump, 1.0, StopRule::tail_estimate);
}

IntegralResult integral_zero_one(const RealFunction& f, PParam p,
                                 const TruncationPolicy& policy,
                                 std::vector<IntegralTerm>* dump) {
    return zero_one_impl(f, p, policy, dump, 1.0, StopRule::tail_estimate);
}

IntegralResult p_integral(const RealFunction& f, double a, double b, PParam p,
                          const TruncationPolicy& policy,
                          std::vector<IntegralTerm>* dump) {
    validate(policy);
    Dispatcher d{p, policy, dump, StopRule::tail_estimate, true};
    return d.run(f, a, b, 1.0);
}

IntegralResult detail::p_integral_fixed_depth(const RealFunction& f, double a,
                                              double b, PParam p,
                                              const TruncationPolicy& policy) {
    validate(policy);
    Dispatcher d{p, policy, nullptr, StopRule::node_distance, false};
    return d.run(f, a, b, 1.0);
}

double p_integral_n(const RealFunction& f, double b, PParam p,
                    const TruncationPolicy& policy, int n) {
    if (n < 0) throw DomainError("integral order must be non-negative");
    if (n == 0) return f(b);
    if (!(b >= 0.0) || !(b < 1.0)) {
        throw DomainError("higher-order p-integral requires 0 <= b < 1");
    }
    RealFunction g = f;
    for (int level = 0; level < n; ++level) {
        g = [g, p, policy](double x) {
            return integral_from_0(g, x, p, policy).value;
        };
    }
    return g(b);
}

double ftc_residual(const RealFunction& F, double a, double b, PParam p,
                    const TruncationPolicy& policy) {
    const RealFunction dF = [&F, p](double t) { return p_derivative(F, t, p); };
    const double integral = p_integral(dF, a, b, p, policy).value;
    return std::fabs(integral - (F(b) - F(a)));
}

double by_parts_residual(const RealFunction& f, const RealFunction& g,
                         double a, double b, PParam p,
                         const TruncationPolicy& policy) {
    const double pv = p.value();
    const RealFunction lhs_fn = [&](double t) {
        return f(t) * p_derivative(g, t, p);
    };
    const RealFunction rhs_fn = [&](double t) {
        return g(std::pow(t, pv)) * p_derivative(f, t, p);
    };
    const double lhs = p_integral(lhs_fn, a, b, p, policy).value;
    const double boundary = f(b) * g(b) - f(a) * g(a);
    const double rhs = boundary - p_integral(rhs_fn, a, b, p, policy).value;
    return std::fabs(lhs - rhs);
}

} // namespace pcalc
