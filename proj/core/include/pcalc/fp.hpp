#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>

namespace pcalc {

/// A real-valued function of one real variable, the common currency between
/// expressions, grid functions and the calculus operators.
using RealFunction = std::function<double(double)>;

/// Neumaier-compensated accumulator. Deterministic for a fixed add order.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::fabs(sum_) >= std::fabs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }

    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// True when a and b agree to within `ulps` units in the last place of the
/// larger magnitude.
inline bool almost_equal_ulps(double a, double b, double ulps = 4.0) noexcept {
    if (a == b) return true;
    const double diff = std::fabs(a - b);
    const double scale = std::fmax(std::fabs(a), std::fabs(b));
    return diff <= ulps * std::numeric_limits<double>::epsilon() * scale;
}

/// Deterministic low-discrepancy sampler (additive Weyl recurrence on
/// square-root irrationals, one per dimension). The seed offsets the origin,
/// so equal seeds reproduce equal sample streams.
class QuasiRandomSampler {
public:
    static constexpr int max_dims = 6;

    explicit QuasiRandomSampler(std::uint64_t seed = 0) noexcept {
        constexpr double primes[max_dims] = {2.0, 3.0, 5.0, 7.0, 11.0, 13.0};
        const double shift =
            static_cast<double>(seed % 1048573u) * 0.6180339887498949;
        for (int d = 0; d < max_dims; ++d) {
            alpha_[d] = frac(std::sqrt(primes[d]));
            state_[d] = frac(0.5 + shift * (d + 1));
        }
    }

    /// Advance to the next sample point.
    void next() noexcept {
        for (int d = 0; d < max_dims; ++d) {
            state_[d] = frac(state_[d] + alpha_[d]);
        }
    }

    /// Current coordinate in [0,1) for dimension d.
    double coord(int d) const noexcept { return state_[d]; }

    /// Current coordinate mapped affinely onto [lo, hi].
    double coord(int d, double lo, double hi) const noexcept {
        return lo + (hi - lo) * state_[d];
    }

private:
    static double frac(double x) noexcept { return x - std::floor(x); }

    double alpha_[max_dims]{};
    double state_[max_dims]{};
};

} // namespace pcalc
