#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "pcalc/errors.hpp"

namespace pcalc {

/// The deformation parameter of the difference node x -> x^p, constrained to
/// the open interval (0,1).
class PParam {
public:
    explicit PParam(double p) : p_(p) {
        if (!(p > 0.0) || !(p < 1.0)) {
            throw DomainError("p must lie strictly inside (0,1)");
        }
    }

    double value() const noexcept { return p_; }

private:
    double p_;
};

/// Where infinite lattice series are cut and at what tolerance.
struct TruncationPolicy {
    double eps = 1e-12; ///< series tail tolerance
    int j_max = 10'000; ///< hard cap on terms per ray
    int j_min = 8;      ///< minimum terms before the tail test may fire
};

inline void validate(const TruncationPolicy& policy) {
    if (!(policy.eps > 0.0)) throw DomainError("policy.eps must be positive");
    if (policy.j_min < 0 || policy.j_min > policy.j_max) {
        throw DomainError("policy requires 0 <= j_min <= j_max");
    }
}

enum class RayDirection {
    toward_one, ///< exponents p^j, j >= 0; points converge to 1
    away,       ///< exponents p^-j, j >= 0; points fall to 0 (base < 1)
};

/// One orbit {base^(p^(+-j))} of the map x -> x^p, truncated per policy.
struct LatticeRay {
    double base = 0.0;
    double p = 0.0;
    RayDirection direction = RayDirection::toward_one;
    std::vector<double> exponents; ///< p^(+-j) per point
    std::vector<double> points;    ///< base^exponent, index order j = 0..J
    int truncation_level = 0;      ///< J
    double limit = 1.0;            ///< 1 (toward_one) or 0 (away, base < 1)
};

/// Generate a lattice ray. Away rays with base > 1 grow without bound and
/// require an explicit upper cutoff value.
LatticeRay ray(double base, PParam p, RayDirection direction,
               const TruncationPolicy& policy = {},
               std::optional<double> upper_cutoff = std::nullopt);

/// The sorted union of the toward-one rays of a and b. The accumulation
/// points 0 and 1 are carried as endpoint markers, not ordinary points, so
/// they never enter quadrature unless an integrand supplies limits there.
struct UnionLattice {
    double a = 0.0;
    double b = 0.0;
    double p = 0.0;
    TruncationPolicy policy;

    std::vector<double> points; ///< ascending, deduplicated, open lattice
    std::vector<int> shift;     ///< index of points[i]^p, or -1 past truncation
    std::vector<int> a_ray;     ///< canonical indices of [a]_p in ray order
    std::vector<int> b_ray;     ///< canonical indices of [b]_p in ray order

    /// Locate a point: bitwise match first, then within 4 ulp.
    std::optional<int> find(double x) const;

    int size() const noexcept { return static_cast<int>(points.size()); }
};

/// Build [a,b]_p = [a]_p union [b]_p for 0 < a <= b. Cross-ray collisions are
/// deduplicated within an eps-relative tolerance (the b-ray value is kept).
UnionLattice union_lattice(double a, double b, PParam p,
                           const TruncationPolicy& policy = {});

/// Smallest k >= 1 with b^(p^k) = a to within tol*a (for 1 < a < b), or the
/// mirrored test a^(p^k) = b when both endpoints sit below 1. Empty when no
/// such k exists up to k_max.
std::optional<int> common_lattice_index(double a, double b, PParam p,
                                        double tol, int k_max = 10'000);

namespace detail {

/// Streams base^(p^j) (factor p) or base^(p^-j) (factor 1/p). Every module
/// obtains node values through this one code path so that lattice points,
/// quadrature nodes and grid samples agree bit for bit.
struct NodeStream {
    double base;
    double factor;
    double exponent = 1.0;
    double node;

    NodeStream(double base_, double factor_) : base(base_), factor(factor_), node(base_) {}

    double peek() const { return std::pow(base, exponent * factor); }

    void advance() {
        exponent *= factor;
        node = std::pow(base, exponent);
    }
};

} // namespace detail

} // namespace pcalc
