#include "pcalc/variational.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "pcalc/deriv.hpp"
#include "pcalc/errors.hpp"

namespace pcalc {

// ---------------------------------------------------------------------------
// Lagrangian

double Lagrangian::default_fd_step() {
    return std::cbrt(std::numeric_limits<double>::epsilon());
}

Lagrangian::Lagrangian(Expression L, std::optional<Expression> dL_du,
                       std::optional<Expression> dL_dv, double fd_step)
    : L_(std::move(L)),
      dL_du_(std::move(dL_du)),
      dL_dv_(std::move(dL_dv)),
      fd_step_(fd_step) {
    if (L_.variables().size() != 3) {
        throw DomainError("Lagrangian must be declared over exactly {t,u,v}");
    }
    if (!(fd_step_ > 0.0)) {
        throw DomainError("Lagrangian fd_step must be positive");
    }
}

Lagrangian Lagrangian::parse(std::string_view L,
                             std::optional<std::string_view> dL_du,
                             std::optional<std::string_view> dL_dv,
                             bool verify, double fd_step) {
    const std::vector<std::string> vars{"t", "u", "v"};
    std::optional<Expression> du, dv;
    if (dL_du) du = Expression::parse(*dL_du, vars);
    if (dL_dv) dv = Expression::parse(*dL_dv, vars);
    Lagrangian lag(Expression::parse(L, vars), std::move(du), std::move(dv),
                   fd_step);
    if (verify) lag.verify_partials();
    return lag;
}

double Lagrangian::operator()(double t, double u, double v) const {
    const std::array<double, 3> args{t, u, v};
    return L_.eval(std::span<const double>(args));
}

double Lagrangian::d2(double t, double u, double v) const {
    if (dL_du_) {
        const std::array<double, 3> args{t, u, v};
        return dL_du_->eval(std::span<const double>(args));
    }
    const double h = fd_step_ * std::fmax(1.0, std::fabs(u));
    return ((*this)(t, u + h, v) - (*this)(t, u - h, v)) / (2.0 * h);
}

double Lagrangian::d3(double t, double u, double v) const {
    if (dL_dv_) {
        const std::array<double, 3> args{t, u, v};
        return dL_dv_->eval(std::span<const double>(args));
    }
    const double h = fd_step_ * std::fmax(1.0, std::fabs(v));
    return ((*this)(t, u, v + h) - (*this)(t, u, v - h)) / (2.0 * h);
}

void Lagrangian::verify_partials(double tol) const {
    if (!dL_du_ && !dL_dv_) return;
    QuasiRandomSampler sampler(7);
    for (int s = 0; s < 64; ++s) {
        sampler.next();
        const double t = sampler.coord(0, 0.5, 2.0);
        const double u = sampler.coord(1, -2.0, 2.0);
        const double v = sampler.coord(2, -2.0, 2.0);
        const double h = fd_step_;

        const auto check = [&](const std::optional<Expression>& closed,
                               double fd, const char* which) {
            if (!closed) return;
            const std::array<double, 3> args{t, u, v};
            const double cf = closed->eval(std::span<const double>(args));
            const double scale = std::fmax(1.0, std::fmax(std::fabs(cf), std::fabs(fd)));
            if (std::fabs(cf - fd) > tol * scale) {
                std::ostringstream msg;
                msg << "closed-form " << which
                    << " disagrees with central difference at (t,u,v)=(" << t
                    << "," << u << "," << v << "): " << cf << " vs " << fd;
                throw DomainError(msg.str());
            }
        };
        check(dL_du_,
              ((*this)(t, u + h, v) - (*this)(t, u - h, v)) / (2.0 * h), "dL/du");
        check(dL_dv_,
              ((*this)(t, u, v + h) - (*this)(t, u, v - h)) / (2.0 * h), "dL/dv");
    }
}

// ---------------------------------------------------------------------------
// GridFunction

GridFunction::GridFunction(std::shared_ptr<const UnionLattice> lattice,
                           std::vector<double> values, double value_at_0,
                           double value_at_1, RealFunction off_lattice)
    : lattice_(std::move(lattice)),
      values_(std::move(values)),
      value_at_0_(value_at_0),
      value_at_1_(value_at_1),
      off_lattice_(std::move(off_lattice)) {
    if (!lattice_) throw DomainError("GridFunction requires a lattice");
    if (static_cast<int>(values_.size()) != lattice_->size()) {
        throw LatticeError("GridFunction value count must match the lattice");
    }
}

GridFunction GridFunction::sample(const RealFunction& f,
                                  std::shared_ptr<const UnionLattice> lattice) {
    if (!lattice) throw DomainError("GridFunction requires a lattice");
    std::vector<double> values;
    values.reserve(lattice->points.size());
    for (const double x : lattice->points) values.push_back(f(x));
    const double at0 = f(0.0);
    const double at1 = f(1.0);
    return GridFunction(std::move(lattice), std::move(values), at0, at1, f);
}

double GridFunction::shifted_value(int i) const {
    const int s = shift_of(i);
    return s >= 0 ? value(s) : value_at_1_;
}

double GridFunction::shifted_node(int i) const {
    const int s = shift_of(i);
    return s >= 0 ? node(s) : std::pow(node(i), lattice_->p);
}

double GridFunction::dp_at(int i) const {
    const double t = node(i);
    const double tp = shifted_node(i);
    return (shifted_value(i) - value(i)) / (tp - t);
}

double GridFunction::operator()(double x) const {
    if (x == 0.0) return value_at_0_;
    if (x == 1.0) return value_at_1_;
    if (const auto i = lattice_->find(x)) return value(*i);
    if (off_lattice_) return off_lattice_(x);
    std::ostringstream msg;
    msg << "point " << x << " is not on the stored lattice";
    throw EvalError(msg.str());
}

GridFunction add_scaled(const GridFunction& y, const GridFunction& eta,
                        double c) {
    if (y.lattice_ptr() != eta.lattice_ptr() &&
        y.lattice().points != eta.lattice().points) {
        throw LatticeError("add_scaled requires a shared lattice");
    }
    std::vector<double> values(static_cast<std::size_t>(y.size()));
    for (int i = 0; i < y.size(); ++i) {
        values[static_cast<std::size_t>(i)] = y.value(i) + c * eta.value(i);
    }
    RealFunction off;
    if (y.has_off_lattice() && eta.has_off_lattice()) {
        off = [y, eta, c](double x) { return y(x) + c * eta(x); };
    }
    return GridFunction(y.lattice_ptr(), std::move(values),
                        y.at_zero() + c * eta.at_zero(),
                        y.at_one() + c * eta.at_one(), std::move(off));
}

// ---------------------------------------------------------------------------
// VariationalProblem

VariationalProblem::VariationalProblem(Lagrangian lagrangian_, double a_,
                                       double b_, double alpha_, double beta_,
                                       PParam p_, TruncationPolicy policy_)
    : lagrangian(std::move(lagrangian_)),
      a(a_),
      b(b_),
      alpha(alpha_),
      beta(beta_),
      p(p_),
      policy(policy_) {
    if (!(a > 0.0) || !(b > 0.0) || !(a < b) || !std::isfinite(b)) {
        throw DomainError("problem requires 0 < a < b, both finite");
    }
    if (!std::isfinite(alpha) || !std::isfinite(beta)) {
        throw DomainError("boundary values must be finite");
    }
    validate(policy);
}

std::shared_ptr<const UnionLattice> problem_lattice(
    const VariationalProblem& prob) {
    return std::make_shared<const UnionLattice>(
        union_lattice(prob.a, prob.b, prob.p, prob.policy));
}

// ---------------------------------------------------------------------------
// Admissibility and norm

AdmissibilityReport admissible(const GridFunction& y,
                               const VariationalProblem& prob, double tol,
                               bool as_variation) {
    AdmissibilityReport rep;
    double ya, yb;
    try {
        ya = y(prob.a);
        yb = y(prob.b);
    } catch (const EvalError&) {
        throw LatticeError("grid function does not cover [a,b]_p");
    }
    const double ta = as_variation ? 0.0 : prob.alpha;
    const double tb = as_variation ? 0.0 : prob.beta;
    rep.boundary_error_a = std::fabs(ya - ta);
    rep.boundary_error_b = std::fabs(yb - tb);
    rep.boundary_a_ok = rep.boundary_error_a <= tol;
    rep.boundary_b_ok = rep.boundary_error_b <= tol;

    rep.bounded = std::isfinite(y.at_zero()) && std::isfinite(y.at_one());
    for (int i = 0; i < y.size() && rep.bounded; ++i) {
        if (!std::isfinite(y.value(i))) rep.bounded = false;
        if (y.shift_of(i) >= 0 && !std::isfinite(y.dp_at(i))) rep.bounded = false;
    }

    rep.admissible = rep.boundary_a_ok && rep.boundary_b_ok && rep.bounded;
    return rep;
}

double y_norm(const GridFunction& y, const VariationalProblem&) {
    double sup_y = 0.0;
    double sup_dp = 0.0;
    for (int i = 0; i < y.size(); ++i) {
        sup_y = std::fmax(sup_y, std::fabs(y.value(i)));
        if (y.shift_of(i) >= 0) {
            sup_dp = std::fmax(sup_dp, std::fabs(y.dp_at(i)));
        }
    }
    return sup_y + sup_dp;
}

// ---------------------------------------------------------------------------
// Functional, first variation, Euler-Lagrange residual

namespace {

// u = y(t^p) and v = D_p y(t) at a quadrature node: stored shifts when the
// node is on the lattice, otherwise the retained closed form.
struct NodeState {
    double u;
    double v;
};

NodeState state_at(const GridFunction& y, double t, PParam p) {
    if (const auto i = y.lattice().find(t)) {
        return {y.shifted_value(*i), y.dp_at(*i)};
    }
    const double tp = std::pow(t, p.value());
    const double u = y(tp);
    const RealFunction fn = [&y](double x) { return y(x); };
    return {u, p_derivative(fn, t, p)};
}

} // namespace

IntegralResult functional_value(const VariationalProblem& prob,
                                const GridFunction& y) {
    const Lagrangian& L = prob.lagrangian;
    const RealFunction integrand = [&](double t) {
        const NodeState s = state_at(y, t, prob.p);
        return L(t, s.u, s.v);
    };
    return p_integral(integrand, prob.a, prob.b, prob.p, prob.policy);
}

double first_variation(const VariationalProblem& prob, const GridFunction& y,
                       const GridFunction& eta) {
    const Lagrangian& L = prob.lagrangian;
    const RealFunction integrand = [&](double t) {
        const NodeState sy = state_at(y, t, prob.p);
        const NodeState se = state_at(eta, t, prob.p);
        return L.d2(t, sy.u, sy.v) * se.u + L.d3(t, sy.u, sy.v) * se.v;
    };
    return p_integral(integrand, prob.a, prob.b, prob.p, prob.policy).value;
}

ElResidual el_residual(const VariationalProblem& prob, const GridFunction& y) {
    const Lagrangian& L = prob.lagrangian;
    const UnionLattice& lat = y.lattice();

    const auto phi = [&](int i) {
        return L.d3(y.node(i), y.shifted_value(i), y.dp_at(i));
    };

    ElResidual out;
    for (int i = 0; i < y.size(); ++i) {
        const int s = y.shift_of(i);
        if (s < 0) continue;
        if (lat.shift[static_cast<std::size_t>(s)] < 0) continue;
        const double t = y.node(i);
        const double tp = y.node(s);
        const double d2 = L.d2(t, y.shifted_value(i), y.dp_at(i));
        const double dphi = (phi(s) - phi(i)) / (tp - t);
        out.nodes.push_back(t);
        out.residuals.push_back(d2 - dphi);
    }
    if (out.nodes.empty()) {
        throw LatticeError("insufficient lattice depth for the outer shift");
    }
    for (const double r : out.residuals) {
        out.sup_norm = std::fmax(out.sup_norm, std::fabs(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Convexity probe

ProbeBox ProbeBox::for_problem(const VariationalProblem& prob) {
    const double umax = std::fmax(std::fabs(prob.alpha), std::fabs(prob.beta));
    const double slope = (prob.beta - prob.alpha) / (prob.b - prob.a);
    const double uspan = 2.0 * (umax + 1.0);
    const double vspan = 2.0 * (std::fabs(slope) + 1.0);
    return ProbeBox{prob.a,    prob.b,   -uspan, uspan,  -vspan,
                    vspan,     -uspan,   uspan,  -vspan, vspan};
}

ConvexityReport convexity_probe(const Lagrangian& L, const ProbeBox& box,
                                long n_samples, double tol,
                                std::uint64_t seed) {
    if (n_samples < 1) throw DomainError("convexity probe needs n_samples >= 1");
    ConvexityReport rep;
    QuasiRandomSampler sampler(seed);
    for (long n = 0; n < n_samples; ++n) {
        sampler.next();
        const double t = sampler.coord(0, box.t_lo, box.t_hi);
        const double u = sampler.coord(1, box.u_lo, box.u_hi);
        const double v = sampler.coord(2, box.v_lo, box.v_hi);
        const double u1 = sampler.coord(3, box.u1_lo, box.u1_hi);
        const double v1 = sampler.coord(4, box.v1_lo, box.v1_hi);

        const double lhs = L(t, u + u1, v + v1) - L(t, u, v);
        const double rhs = L.d2(t, u, v) * u1 + L.d3(t, u, v) * v1;
        ++rep.samples;

        if (!rep.convex_counterexample && lhs < rhs - tol) {
            rep.convex_counterexample =
                ConvexityCounterexample{t, u, v, u1, v1, rhs - lhs};
        }
        if (!rep.concave_counterexample && lhs > rhs + tol) {
            rep.concave_counterexample =
                ConvexityCounterexample{t, u, v, u1, v1, lhs - rhs};
        }
        if (rep.convex_counterexample && rep.concave_counterexample) break;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Direct solver on a common lattice

namespace {

// Dense Gaussian elimination with partial pivoting; returns false when the
// matrix is numerically singular.
bool solve_dense(std::vector<double>& A, std::vector<double>& rhs, int n) {
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        double best = std::fabs(A[static_cast<std::size_t>(col * n + col)]);
        for (int r = col + 1; r < n; ++r) {
            const double cand = std::fabs(A[static_cast<std::size_t>(r * n + col)]);
            if (cand > best) {
                best = cand;
                pivot = r;
            }
        }
        if (!(best > 1e-300)) return false;
        if (pivot != col) {
            for (int c = 0; c < n; ++c) {
                std::swap(A[static_cast<std::size_t>(col * n + c)],
                          A[static_cast<std::size_t>(pivot * n + c)]);
            }
            std::swap(rhs[static_cast<std::size_t>(col)],
                      rhs[static_cast<std::size_t>(pivot)]);
        }
        const double d = A[static_cast<std::size_t>(col * n + col)];
        for (int r = col + 1; r < n; ++r) {
            const double m = A[static_cast<std::size_t>(r * n + col)] / d;
            if (m == 0.0) continue;
            for (int c = col; c < n; ++c) {
                A[static_cast<std::size_t>(r * n + c)] -=
                    m * A[static_cast<std::size_t>(col * n + c)];
            }
            rhs[static_cast<std::size_t>(r)] -= m * rhs[static_cast<std::size_t>(col)];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double acc = rhs[static_cast<std::size_t>(r)];
        for (int c = r + 1; c < n; ++c) {
            acc -= A[static_cast<std::size_t>(r * n + c)] *
                   rhs[static_cast<std::size_t>(c)];
        }
        const double d = A[static_cast<std::size_t>(r * n + r)];
        rhs[static_cast<std::size_t>(r)] = acc / d;
        if (!std::isfinite(rhs[static_cast<std::size_t>(r)])) return false;
    }
    return true;
}

// The reduced k-term functional and its gradient in the interior unknowns.
struct ReducedProblem {
    const Lagrangian& L;
    std::vector<double> nodes;   // t_0 = b .. t_k = a
    std::vector<double> weights; // w_j = t_j - t_{j+1} > 0
    double alpha, beta;

    int unknowns() const { return static_cast<int>(nodes.size()) - 2; }

    double value_at(const std::vector<double>& z, int i) const {
        const int k = static_cast<int>(nodes.size()) - 1;
        if (i == 0) return beta;
        if (i == k) return alpha;
        return z[static_cast<std::size_t>(i - 1)];
    }

    double functional(const std::vector<double>& z) const {
        const int k = static_cast<int>(nodes.size()) - 1;
        CompensatedSum s;
        for (int j = 0; j < k; ++j) {
            const double dd = nodes[static_cast<std::size_t>(j + 1)] -
                              nodes[static_cast<std::size_t>(j)];
            const double v = (value_at(z, j + 1) - value_at(z, j)) / dd;
            s.add(weights[static_cast<std::size_t>(j)] *
                  L(nodes[static_cast<std::size_t>(j)], value_at(z, j + 1), v));
        }
        return s.value();
    }

    // dS/dz_i = w_{i-1} d2(term i-1) - d3(term i-1) + d3(term i)
    std::vector<double> gradient(const std::vector<double>& z) const {
        const int k = static_cast<int>(nodes.size()) - 1;
        std::vector<double> d2v(static_cast<std::size_t>(k));
        std::vector<double> d3v(static_cast<std::size_t>(k));
        for (int j = 0; j < k; ++j) {
            const double dd = nodes[static_cast<std::size_t>(j + 1)] -
                              nodes[static_cast<std::size_t>(j)];
            const double u = value_at(z, j + 1);
            const double v = (u - value_at(z, j)) / dd;
            const double t = nodes[static_cast<std::size_t>(j)];
            d2v[static_cast<std::size_t>(j)] = L.d2(t, u, v);
            d3v[static_cast<std::size_t>(j)] = L.d3(t, u, v);
        }
        std::vector<double> g(static_cast<std::size_t>(unknowns()));
        for (int i = 1; i < k; ++i) {
            g[static_cast<std::size_t>(i - 1)] =
                weights[static_cast<std::size_t>(i - 1)] *
                    d2v[static_cast<std::size_t>(i - 1)] -
                d3v[static_cast<std::size_t>(i - 1)] +
                d3v[static_cast<std::size_t>(i)];
        }
        return g;
    }
};

double sup_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (const double x : v) m = std::fmax(m, std::fabs(x));
    return m;
}

} // namespace

SolveResult solve_common_lattice(const VariationalProblem& prob,
                                 std::optional<int> k_hint) {
    if (!(prob.a > 1.0)) {
        throw DomainError(
            "direct solve requires 1 < a < b on a common lattice");
    }
    int k;
    if (k_hint) {
        k = *k_hint;
        if (k < 1) throw DomainError("common-lattice index must be >= 1");
    } else {
        const auto found =
            common_lattice_index(prob.a, prob.b, prob.p, 1e-12, prob.policy.j_max);
        if (!found) {
            throw DomainError("endpoints do not share a common lattice");
        }
        k = *found;
    }

    ReducedProblem red{prob.lagrangian, {}, {}, prob.alpha, prob.beta};
    detail::NodeStream stream(prob.b, prob.p.value());
    red.nodes.push_back(stream.node);
    for (int j = 0; j < k; ++j) {
        stream.advance();
        red.nodes.push_back(stream.node);
        const std::size_t m = red.nodes.size();
        red.weights.push_back(red.nodes[m - 2] - red.nodes[m - 1]);
    }
    if (std::fabs(red.nodes.back() - prob.a) > 1e-10 * prob.a) {
        throw DomainError("a does not equal b^(p^k) for the requested k");
    }

    SolveResult result{red.nodes,
                       {},
                       GridFunction(std::make_shared<const UnionLattice>(),
                                    {}, 0.0, 0.0),
                       0.0,
                       0.0,
                       0,
                       false,
                       {}};

    result.convexity = convexity_probe(prob.lagrangian,
                                       ProbeBox::for_problem(prob), 2000,
                                       1e-9, 0);
    result.minimizer_certified = result.convexity.convex_ok();

    const int n = red.unknowns();
    std::vector<double> z(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        // secant initial guess between the boundary values
        const double t = red.nodes[static_cast<std::size_t>(i)];
        z[static_cast<std::size_t>(i - 1)] =
            prob.beta + (prob.alpha - prob.beta) * (t - prob.b) / (prob.a - prob.b);
    }

    const double gtol = 1e-10;
    const int max_iter = 500;
    std::vector<double> g = red.gradient(z);
    double gn = sup_norm(g);
    int iter = 0;

    while (gn > gtol && iter < max_iter && n > 0) {
        ++iter;
        // central-difference Hessian of the reduced functional
        std::vector<double> H(static_cast<std::size_t>(n) * n);
        for (int i = 0; i < n; ++i) {
            const double h = Lagrangian::default_fd_step() *
                             std::fmax(1.0, std::fabs(z[static_cast<std::size_t>(i)]));
            std::vector<double> zp = z, zm = z;
            zp[static_cast<std::size_t>(i)] += h;
            zm[static_cast<std::size_t>(i)] -= h;
            const std::vector<double> gp = red.gradient(zp);
            const std::vector<double> gm = red.gradient(zm);
            for (int r = 0; r < n; ++r) {
                H[static_cast<std::size_t>(r * n + i)] =
                    (gp[static_cast<std::size_t>(r)] -
                     gm[static_cast<std::size_t>(r)]) /
                    (2.0 * h);
            }
        }
        // symmetrize
        for (int r = 0; r < n; ++r) {
            for (int c = r + 1; c < n; ++c) {
                const double avg = 0.5 * (H[static_cast<std::size_t>(r * n + c)] +
                                          H[static_cast<std::size_t>(c * n + r)]);
                H[static_cast<std::size_t>(r * n + c)] = avg;
                H[static_cast<std::size_t>(c * n + r)] = avg;
            }
        }

        std::vector<double> step(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) step[static_cast<std::size_t>(i)] = -g[static_cast<std::size_t>(i)];
        std::vector<double> Hcopy = H;
        const bool solved = solve_dense(Hcopy, step, n);

        if (!solved) {
            // coordinate-descent sweep on the gradient
            for (int i = 0; i < n; ++i) {
                const double h =
                    Lagrangian::default_fd_step() *
                    std::fmax(1.0, std::fabs(z[static_cast<std::size_t>(i)]));
                std::vector<double> zp = z, zm = z;
                zp[static_cast<std::size_t>(i)] += h;
                zm[static_cast<std::size_t>(i)] -= h;
                const double gi_p = red.gradient(zp)[static_cast<std::size_t>(i)];
                const double gi_m = red.gradient(zm)[static_cast<std::size_t>(i)];
                const double slope = (gi_p - gi_m) / (2.0 * h);
                if (std::fabs(slope) > 1e-300) {
                    z[static_cast<std::size_t>(i)] -=
                        g[static_cast<std::size_t>(i)] / slope;
                }
            }
            g = red.gradient(z);
            gn = sup_norm(g);
            continue;
        }

        // damped step: on certified-convex problems backtrack on the
        // functional, otherwise on the gradient norm
        const double f0 = red.functional(z);
        double lambda = 1.0;
        bool accepted = false;
        for (int half = 0; half < 40; ++half) {
            std::vector<double> trial = z;
            for (int i = 0; i < n; ++i) {
                trial[static_cast<std::size_t>(i)] +=
                    lambda * step[static_cast<std::size_t>(i)];
            }
            const std::vector<double> gt = red.gradient(trial);
            const double gnt = sup_norm(gt);
            const bool better = result.minimizer_certified
                                    ? (red.functional(trial) <= f0 || gnt < gn)
                                    : gnt < gn;
            if (better || gnt <= gtol) {
                z = std::move(trial);
                g = gt;
                gn = gnt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!accepted) break; // stalled
    }

    if (gn > gtol) {
        std::ostringstream msg;
        msg << "direct solve did not converge: gradient sup-norm " << gn
            << " after " << iter << " iterations";
        throw NonConvergenceError(msg.str());
    }

    // assemble the solution grid function on the k+1-node sub-lattice
    auto lat = std::make_shared<UnionLattice>();
    lat->a = prob.a;
    lat->b = prob.b;
    lat->p = prob.p.value();
    lat->policy = prob.policy;
    lat->points.assign(red.nodes.rbegin(), red.nodes.rend());
    const int npts = lat->size();
    lat->shift.assign(static_cast<std::size_t>(npts), -1);
    for (int i = npts - 1; i > 0; --i) {
        lat->shift[static_cast<std::size_t>(i)] = i - 1; // ascending order: t^p is the previous point
    }
    lat->b_ray.resize(static_cast<std::size_t>(npts));
    for (int i = 0; i < npts; ++i) {
        lat->b_ray[static_cast<std::size_t>(i)] = npts - 1 - i;
    }
    lat->a_ray = {0};

    std::vector<double> values(static_cast<std::size_t>(npts));
    for (int i = 0; i < npts; ++i) {
        const int node_index = npts - 1 - i; // position along the b-ray
        values[static_cast<std::size_t>(i)] =
            red.value_at(z, node_index);
    }

    result.values.clear();
    for (int j = 0; j <= k; ++j) {
        result.values.push_back(red.value_at(z, j));
    }
    result.y = GridFunction(std::shared_ptr<const UnionLattice>(lat),
                            std::move(values), 0.0, 0.0);
    result.functional = red.functional(z);
    result.grad_norm = gn;
    result.iterations = iter;
    return result;
}

// ---------------------------------------------------------------------------
// Fundamental-lemma probe

namespace {

struct LemmaCandidate {
    double node;
    double gap;
    double sign;
    int ray;
    int j;
};

// Quadrature nodes of int_a^b in scan order: b-ray first, then a-ray,
// ascending j, mirroring the series each regime actually sums.
std::vector<LemmaCandidate> lemma_candidates(double a, double b, double p,
                                             const TruncationPolicy& policy) {
    std::vector<LemmaCandidate> out;
    const auto walk_toward_one = [&](double base, double sign, int ray) {
        detail::NodeStream stream(base, p);
        for (int j = 0; j < policy.j_max; ++j) {
            const double node = stream.node;
            stream.advance();
            const double gap = std::fabs(node - stream.node);
            if (gap == 0.0) break;
            out.push_back({node, gap, sign, ray, j});
            if (std::fabs(stream.node - 1.0) < policy.eps * std::fmax(1.0, base)) {
                break;
            }
        }
    };
    const auto walk_away = [&](double base, double sign, int ray) {
        detail::NodeStream stream(base, 1.0 / p);
        for (int j = 0; j < policy.j_max; ++j) {
            const double high = stream.node;
            stream.advance();
            const double low = stream.node;
            const double gap = high - low;
            if (gap == 0.0) break;
            out.push_back({low, gap, sign, ray, j});
            if (low < policy.eps) break;
        }
    };

    if (a > 1.0) {
        walk_toward_one(b, +1.0, 0);
        walk_toward_one(a, -1.0, 1);
    } else if (b < 1.0) {
        walk_away(b, +1.0, 0);
        walk_away(a, -1.0, 1);
    } else {
        walk_toward_one(b, +1.0, 0);
        if (a > 0.0) walk_away(a, -1.0, 1);
    }
    return out;
}

} // namespace

std::optional<LemmaWitness> fundamental_lemma_probe(
    const RealFunction& f, double a, double b, PParam p,
    const TruncationPolicy& policy, double tol) {
    validate(policy);
    if (!(a >= 0.0) || !(a < b)) {
        throw DomainError("fundamental-lemma probe requires 0 <= a < b");
    }
    const double pv = p.value();

    for (const LemmaCandidate& cand :
         lemma_candidates(a, b, pv, policy)) {
        const double support = std::pow(cand.node, pv);
        // admissible test functions vanish at the endpoints
        if (std::fabs(support - a) <= 1e-12 * std::fmax(a, 1.0)) continue;
        if (std::fabs(support - b) <= 1e-12 * b) continue;

        const double fval = f(cand.node);
        if (!std::isfinite(fval)) {
            throw NumericError("fundamental-lemma probe: f not finite");
        }
        if (fval == 0.0) continue;

        const RealFunction integrand = [&f, support, fval, pv](double t) {
            return std::pow(t, pv) == support ? f(t) * fval : 0.0;
        };
        const double integral =
            detail::p_integral_fixed_depth(integrand, a, b, p, policy).value;
        if (std::fabs(integral) > tol) {
            const double closed = cand.sign * (cand.gap * (fval * fval));
            return LemmaWitness{cand.node, support,  cand.gap, cand.ray,
                                cand.j,    integral, closed};
        }
    }
    return std::nullopt;
}

} // namespace pcalc
