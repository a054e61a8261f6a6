#include "pcalc/lattice.hpp"

#include <algorithm>
#include <limits>

namespace pcalc {

LatticeRay ray(double base, PParam p, RayDirection direction,
               const TruncationPolicy& policy,
               std::optional<double> upper_cutoff) {
    validate(policy);
    if (!(base > 0.0) || !std::isfinite(base)) {
        throw DomainError("ray base must be a positive finite real");
    }

    LatticeRay r;
    r.base = base;
    r.p = p.value();
    r.direction = direction;

    if (base == 1.0) {
        // Degenerate orbit: the fixed point of x -> x^p.
        r.exponents = {1.0};
        r.points = {1.0};
        r.truncation_level = 0;
        r.limit = 1.0;
        return r;
    }

    const bool away = direction == RayDirection::away;
    if (away && base > 1.0 && !upper_cutoff) {
        throw DomainError(
            "away ray with base > 1 is unbounded; supply an upper cutoff");
    }
    r.limit = away ? 0.0 : 1.0;

    const double factor = away ? 1.0 / p.value() : p.value();
    const double conv_tol = policy.eps * std::fmax(1.0, base);

    detail::NodeStream stream(base, factor);
    for (int j = 0;; ++j) {
        if (away && base > 1.0 && stream.node > *upper_cutoff) break;
        r.exponents.push_back(stream.exponent);
        r.points.push_back(stream.node);
        r.truncation_level = j;
        const bool converged =
            std::fabs(stream.node - r.limit) < conv_tol && j >= policy.j_min;
        if (converged || j + 1 >= policy.j_max) break;
        stream.advance();
        if (stream.node == r.points.back()) break; // fp fixed point reached
    }
    return r;
}

std::optional<int> UnionLattice::find(double x) const {
    const auto begin = points.begin();
    auto it = std::lower_bound(begin, points.end(), x);
    // check the insertion neighbourhood for a bitwise or 4-ulp match
    for (int step = 0; step < 2; ++step) {
        const auto probe = (step == 0) ? it : (it == begin ? points.end() : it - 1);
        if (probe != points.end()) {
            const double pt = *probe;
            if (pt == x || std::fabs(pt - x) <= 4.0 * std::numeric_limits<double>::epsilon() * std::fabs(pt)) {
                return static_cast<int>(probe - begin);
            }
        }
    }
    return std::nullopt;
}

UnionLattice union_lattice(double a, double b, PParam p,
                           const TruncationPolicy& policy) {
    validate(policy);
    if (!(a > 0.0) || !(b > 0.0) || !(a <= b) || !std::isfinite(b)) {
        throw DomainError("union_lattice requires 0 < a <= b, both finite");
    }

    UnionLattice lat;
    lat.a = a;
    lat.b = b;
    lat.p = p.value();
    lat.policy = policy;

    const auto strip_one = [](std::vector<double> pts) {
        std::erase(pts, 1.0);
        return pts;
    };

    // Endpoints on a shared orbit (detected eps-relative): the a-ray is the
    // b-ray shifted by k, so the union is the b-ray with shared indices.
    // Identifying the rays structurally keeps the shift chains consistent;
    // value-proximity merging cannot tell interleaved tail points apart.
    const auto k = (a == b) ? std::optional<int>(0)
                            : common_lattice_index(a, b, p, policy.eps,
                                                   policy.j_max);
    if (k && (a > 1.0 || b < 1.0 || a == b)) {
        const bool above = a > 1.0 || a == b;
        const double outer = above ? b : a; // the ray containing the other
        const LatticeRay r = ray(outer, p, RayDirection::toward_one, policy);
        const std::vector<double> pts = strip_one(r.points);
        const int n = static_cast<int>(pts.size());

        // ray order j ascending = descending values above 1, ascending below
        lat.points = pts;
        std::vector<int> order(static_cast<std::size_t>(n));
        if (outer > 1.0) {
            std::reverse(lat.points.begin(), lat.points.end());
            for (int j = 0; j < n; ++j) order[static_cast<std::size_t>(j)] = n - 1 - j;
        } else {
            for (int j = 0; j < n; ++j) order[static_cast<std::size_t>(j)] = j;
        }

        lat.shift.assign(static_cast<std::size_t>(n), -1);
        for (int j = 0; j + 1 < n; ++j) {
            lat.shift[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])] =
                order[static_cast<std::size_t>(j + 1)];
        }
        if (above) {
            lat.b_ray = order;
            lat.a_ray.assign(order.begin() + std::min(*k, n), order.end());
        } else {
            lat.a_ray = order;
            lat.b_ray.assign(order.begin() + std::min(*k, n), order.end());
        }
        return lat;
    }

    const LatticeRay ra = ray(a, p, RayDirection::toward_one, policy);
    const LatticeRay rb = ray(b, p, RayDirection::toward_one, policy);
    const std::vector<double> pa = strip_one(ra.points);
    const std::vector<double> pb = strip_one(rb.points);

    struct Tagged {
        double x;
        bool from_b;
        int j; // position along its ray
    };
    std::vector<Tagged> merged;
    merged.reserve(pa.size() + pb.size());
    for (std::size_t j = 0; j < pb.size(); ++j) {
        merged.push_back({pb[j], true, static_cast<int>(j)});
    }
    for (std::size_t j = 0; j < pa.size(); ++j) {
        merged.push_back({pa[j], false, static_cast<int>(j)});
    }
    std::stable_sort(merged.begin(), merged.end(),
                     [](const Tagged& l, const Tagged& r) { return l.x < r.x; });

    // Off a shared orbit the rays can still quantize onto the same double
    // near the accumulation point; identical doubles are one lattice point.
    std::vector<int> canon_a(pa.size(), -1);
    std::vector<int> canon_b(pb.size(), -1);
    for (const Tagged& cur : merged) {
        if (lat.points.empty() || lat.points.back() != cur.x) {
            lat.points.push_back(cur.x);
        }
        const int canonical = static_cast<int>(lat.points.size()) - 1;
        (cur.from_b ? canon_b : canon_a)[static_cast<std::size_t>(cur.j)] =
            canonical;
    }

    lat.b_ray = std::move(canon_b);
    lat.a_ray = std::move(canon_a);

    // Shift map: within a ray, the p-power of point j is point j+1. The b-ray
    // wins on shared points.
    lat.shift.assign(lat.points.size(), -1);
    const auto chain = [&lat](const std::vector<int>& ray_idx) {
        for (std::size_t j = 0; j + 1 < ray_idx.size(); ++j) {
            if (ray_idx[j] != ray_idx[j + 1]) {
                lat.shift[static_cast<std::size_t>(ray_idx[j])] = ray_idx[j + 1];
            }
        }
    };
    chain(lat.a_ray);
    chain(lat.b_ray);
    return lat;
}

std::optional<int> common_lattice_index(double a, double b, PParam p,
                                        double tol, int k_max) {
    if (!(a > 0.0) || !(b > 0.0) || !(a < b)) return std::nullopt;
    if ((a < 1.0) != (b < 1.0)) return std::nullopt; // straddles the fixed point

    // Walk the larger-in-orbit endpoint toward 1 and look for the other one.
    const bool above = a > 1.0;
    const double walk_base = above ? b : a;
    const double target = above ? a : b;

    detail::NodeStream stream(walk_base, p.value());
    for (int k = 1; k <= k_max; ++k) {
        stream.advance();
        const double x = stream.node;
        if (std::fabs(target - x) <= tol * target) return k;
        if (above ? (x < target * (1.0 - tol)) : (x > target * (1.0 + tol))) {
            break; // walked past the target; orbits are monotone
        }
        if (x == 1.0) break;
    }
    return std::nullopt;
}

} // namespace pcalc
