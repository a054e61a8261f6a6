#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "pcalc/expr.hpp"
#include "pcalc/fp.hpp"
#include "pcalc/integrate.hpp"
#include "pcalc/lattice.hpp"

namespace pcalc {

/// The integrand L(t, u, v) of a variational problem, with u standing for
/// y(t^p) and v for the p-derivative of y at t. Closed-form partials in u
/// and v may be supplied; otherwise central differences with a step scaled
/// by fd_step are used.
class Lagrangian {
public:
    explicit Lagrangian(Expression L,
                        std::optional<Expression> dL_du = std::nullopt,
                        std::optional<Expression> dL_dv = std::nullopt,
                        double fd_step = default_fd_step());

    /// Parse from source text over the variables {t, u, v}. With
    /// verify = true, supplied closed-form partials are checked against
    /// central differences on a sample box (throws DomainError on mismatch).
    static Lagrangian parse(std::string_view L,
                            std::optional<std::string_view> dL_du = std::nullopt,
                            std::optional<std::string_view> dL_dv = std::nullopt,
                            bool verify = false,
                            double fd_step = default_fd_step());

    double operator()(double t, double u, double v) const;
    double d2(double t, double u, double v) const; ///< dL/du
    double d3(double t, double u, double v) const; ///< dL/dv

    bool has_closed_partials() const noexcept {
        return dL_du_.has_value() && dL_dv_.has_value();
    }

    /// Check closed-form partials against central differences on a sample
    /// box; throws DomainError when they disagree beyond tol.
    void verify_partials(double tol = 1e-6) const;

    static double default_fd_step();

private:
    Expression L_;
    std::optional<Expression> dL_du_;
    std::optional<Expression> dL_dv_;
    double fd_step_;
};

/// A real function represented by values on a stored lattice together with
/// its limits at the accumulation points 0 and 1. An optional off-lattice
/// callable (kept when sampling a closed form) covers quadrature nodes that
/// fall outside the stored set.
class GridFunction {
public:
    GridFunction(std::shared_ptr<const UnionLattice> lattice,
                 std::vector<double> values, double value_at_0,
                 double value_at_1, RealFunction off_lattice = {});

    /// Sample a callable at every stored node and at the 0/1 limits; the
    /// callable is retained for off-lattice evaluation.
    static GridFunction sample(const RealFunction& f,
                               std::shared_ptr<const UnionLattice> lattice);

    const UnionLattice& lattice() const noexcept { return *lattice_; }
    std::shared_ptr<const UnionLattice> lattice_ptr() const noexcept {
        return lattice_;
    }

    int size() const noexcept { return static_cast<int>(values_.size()); }
    double node(int i) const { return lattice_->points[static_cast<std::size_t>(i)]; }
    double value(int i) const { return values_[static_cast<std::size_t>(i)]; }
    double at_zero() const noexcept { return value_at_0_; }
    double at_one() const noexcept { return value_at_1_; }

    int shift_of(int i) const { return lattice_->shift[static_cast<std::size_t>(i)]; }

    /// y(node^p): the stored shifted value, or the limit at 1 when the shift
    /// leaves the truncated lattice.
    double shifted_value(int i) const;

    /// The abscissa of node(i)^p: the stored next node when present.
    double shifted_node(int i) const;

    /// Lattice-shift p-derivative at a stored node.
    double dp_at(int i) const;

    /// Evaluate anywhere: stored nodes, the 0/1 limits, or the off-lattice
    /// callable. Throws EvalError for unresolvable points.
    double operator()(double x) const;

    bool has_off_lattice() const noexcept { return static_cast<bool>(off_lattice_); }

private:
    std::shared_ptr<const UnionLattice> lattice_;
    std::vector<double> values_;
    double value_at_0_;
    double value_at_1_;
    RealFunction off_lattice_;
};

/// y + c * eta on a shared lattice.
GridFunction add_scaled(const GridFunction& y, const GridFunction& eta,
                        double c);

/// The full datum of the variational problem: extremize
/// int_a^b L(t, y(t^p), D_p y(t)) d_p t  subject to y(a) = alpha, y(b) = beta.
struct VariationalProblem {
    VariationalProblem(Lagrangian lagrangian, double a, double b, double alpha,
                       double beta, PParam p, TruncationPolicy policy = {});

    Lagrangian lagrangian;
    double a;
    double b;
    double alpha;
    double beta;
    PParam p;
    TruncationPolicy policy;
};

/// The stored [a,b]_p lattice of a problem.
std::shared_ptr<const UnionLattice> problem_lattice(const VariationalProblem&);

struct AdmissibilityReport {
    bool admissible = false;
    bool boundary_a_ok = false;
    bool boundary_b_ok = false;
    bool bounded = false;
    double boundary_error_a = 0.0;
    double boundary_error_b = 0.0;
};

/// Boundary and boundedness check; with as_variation = true the boundary
/// targets are 0 instead of alpha/beta.
AdmissibilityReport admissible(const GridFunction& y,
                               const VariationalProblem& prob, double tol,
                               bool as_variation = false);

/// sup |y| + sup |D_p y| over the stored lattice (lattice-shift derivative).
double y_norm(const GridFunction& y, const VariationalProblem& prob);

/// The functional value int_a^b L(t, y(t^p), D_p y(t)) d_p t.
IntegralResult functional_value(const VariationalProblem& prob,
                                const GridFunction& y);

/// First variation: int_a^b ( dL/du * eta(t^p) + dL/dv * D_p eta ) d_p t.
double first_variation(const VariationalProblem& prob, const GridFunction& y,
                       const GridFunction& eta);

struct ElResidual {
    std::vector<double> nodes;
    std::vector<double> residuals;
    double sup_norm = 0.0;
};

/// Pointwise Euler-Lagrange residual
///   r(t) = dL/du(t, y(t^p), D_p y(t)) - D_p[ s -> dL/dv(s, y(s^p), D_p y(s)) ](t)
/// at every stored node deep enough for the outer shift (the two deepest
/// nodes of each ray are excluded; the inner map already consumes one shift).
ElResidual el_residual(const VariationalProblem& prob, const GridFunction& y);

struct ConvexityCounterexample {
    double t, u, v, u1, v1;
    double gap; ///< violated margin: lhs - rhs (convex) or rhs - lhs (concave)
};

struct ConvexityReport {
    long samples = 0;
    std::optional<ConvexityCounterexample> convex_counterexample;
    std::optional<ConvexityCounterexample> concave_counterexample;

    bool convex_ok() const noexcept { return !convex_counterexample; }
    bool concave_ok() const noexcept { return !concave_counterexample; }
};

struct ProbeBox {
    double t_lo, t_hi;
    double u_lo, u_hi;
    double v_lo, v_hi;
    double u1_lo, u1_hi;
    double v1_lo, v1_hi;

    /// A box sized from the problem data: t spans [a,b], u the boundary
    /// values, v the boundary slope scale.
    static ProbeBox for_problem(const VariationalProblem&);
};

/// Falsification-only supporting-hyperplane test of joint convexity and
/// concavity in (u, v) on quasi-random samples from the box.
ConvexityReport convexity_probe(const Lagrangian& L, const ProbeBox& box,
                                long n_samples, double tol,
                                std::uint64_t seed = 0);

struct SolveResult {
    std::vector<double> nodes;  ///< b^(p^j), j = 0..k (descending values)
    std::vector<double> values; ///< y at those nodes
    GridFunction y;
    double functional = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    bool minimizer_certified = false; ///< convexity probe found no violation
    ConvexityReport convexity;
};

/// Direct minimization on a common lattice a = b^(p^k), 1 < a < b: the
/// functional is the k-term positive-weight sum, the unknowns are y at the
/// k-1 interior nodes. Damped Newton on the gradient, coordinate-descent
/// fallback; converged when the gradient sup-norm reaches 1e-10. When the
/// convexity probe fails, the result is a stationary point only
/// (minimizer_certified = false).
SolveResult solve_common_lattice(const VariationalProblem& prob,
                                 std::optional<int> k_hint = std::nullopt);

struct LemmaWitness {
    double node;        ///< quadrature node where f was sampled
    double support;     ///< the single point carrying the test function
    double gap;         ///< node gap weighting the isolated term
    int ray;            ///< 0 = b-ray, 1 = a-ray
    int j;              ///< position along that ray's series
    double integral;    ///< int f(t) h(t^p) d_p t for the single-node h
    double closed_form; ///< +-gap * f(node)^2
};

/// Scan single-node admissible test functions h (b-ray first, then a-ray,
/// ascending j): h carries the value f(node) at the node's p-power and
/// vanishes elsewhere, so the integral isolates one weighted term
/// +-gap * f(node)^2. Returns the first node whose isolated term exceeds
/// tol, or empty when none does (consistent with f = 0 on the scanned set).
std::optional<LemmaWitness> fundamental_lemma_probe(
    const RealFunction& f, double a, double b, PParam p,
    const TruncationPolicy& policy = {}, double tol = 1e-12);

} // namespace pcalc
