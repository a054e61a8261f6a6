#include <doctest.h>

#include <cmath>

#include "pcalc/deriv.hpp"
#include "pcalc/errors.hpp"
#include "pcalc/fp.hpp"

using namespace pcalc;

namespace {
const RealFunction id = [](double x) { return x; };
const RealFunction sq = [](double x) { return x * x; };
const RealFunction cube = [](double x) { return x * x * x; };
} // namespace

TEST_CASE("the identity has p-derivative exactly 1") {
    for (const double p : {0.2, 0.5, 0.8}) {
        for (const double x : {0.3, 0.7, 2.0, 4.5}) {
            CHECK(p_derivative(id, x, PParam(p)) == 1.0);
        }
    }
}

TEST_CASE("constants have p-derivative exactly 0") {
    const RealFunction c = [](double) { return -7.25; };
    for (const double x : {0.3, 2.0, 4.5}) {
        CHECK(p_derivative(c, x, PParam(0.5)) == 0.0);
    }
}

TEST_CASE("difference of squares: D_p x^2 at 4 with p = 1/2 is 6") {
    CHECK(p_derivative(sq, 4.0, PParam(0.5)) == 6.0);
}

TEST_CASE("boundary limits recover classical one-sided derivatives") {
    CHECK(std::fabs(p_derivative_boundary(sq, BoundaryPoint::zero, PParam(0.5))) < 1e-8);
    CHECK(std::fabs(p_derivative_boundary(sq, BoundaryPoint::one, PParam(0.5)) - 2.0) < 1e-8);
    CHECK(std::fabs(p_derivative_boundary(cube, BoundaryPoint::one, PParam(0.3)) - 3.0) < 1e-8);
}

TEST_CASE("a kink at 1 fails to converge") {
    const RealFunction kink = [](double x) { return std::fabs(x - 1.0); };
    CHECK_THROWS_AS(p_derivative_boundary(kink, BoundaryPoint::one, PParam(0.5)),
                    NonConvergenceError);
}

TEST_CASE("evaluation near 1 delegates to the limit") {
    const double v = p_derivative(sq, 1.0 + 1e-10, PParam(0.5));
    CHECK(std::fabs(v - 2.0) < 1e-6);
    const double v0 = p_derivative(sq, 0.0, PParam(0.5));
    CHECK(std::fabs(v0) < 1e-8);
}

TEST_CASE("domain guards") {
    CHECK_THROWS_AS(p_derivative(sq, -1.0, PParam(0.5)), DomainError);
    CHECK_THROWS_AS(p_derivative_n(sq, 2.0, PParam(0.5), -1), DomainError);
}

TEST_CASE("higher order: base cases") {
    CHECK(p_derivative_n(sq, 3.0, PParam(0.5), 0) == 9.0);
    CHECK(p_derivative_n(id, 2.0, PParam(0.5), 2) == 0.0);
}

TEST_CASE("second derivative of x^2 at 16, p = 1/2") {
    const PParam p(0.5);
    const double got = p_derivative_n(sq, 16.0, p, 2);

    // direct 3-node expansion oracle over x, x^p, x^(p^2)
    const double x = 16.0, xp = std::pow(x, 0.5), xpp = std::pow(x, 0.25);
    const double inner_hi = (sq(xpp) - sq(xp)) / (xpp - xp);
    const double inner_lo = (sq(xp) - sq(x)) / (xp - x);
    const double expansion = (inner_hi - inner_lo) / (xp - x);

    CHECK(almost_equal_ulps(got, expansion, 4.0));
    CHECK(got == doctest::Approx(7.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("linearity holds to 4 ulp on random polynomials") {
    QuasiRandomSampler s(17);
    for (int n = 0; n < 50; ++n) {
        s.next();
        const double c3 = s.coord(0, -2.0, 2.0);
        const double c1 = s.coord(1, -2.0, 2.0);
        const double alpha = s.coord(2, -3.0, 3.0);
        const double beta = s.coord(3, -3.0, 3.0);
        double x = s.coord(4, 0.1, 5.0);
        if (std::fabs(x - 1.0) < 0.05) x += 0.1;
        const double p = s.coord(5, 0.1, 0.9);

        const RealFunction f = [c3, c1](double v) { return c3 * v * v * v + c1 * v; };
        const RealFunction g = [](double v) { return std::sin(v); };
        const PParam pp(p);
        const double tf = alpha * p_derivative(f, x, pp);
        const double tg = beta * p_derivative(g, x, pp);
        const double lhs = p_derivative(
            [&](double v) { return alpha * f(v) + beta * g(v); }, x, pp);
        // rounding lives in the sampled function values, amplified by the
        // node gap of the difference quotient
        const double xp = std::pow(x, p);
        const double scale = (std::fabs(alpha) * (std::fabs(f(xp)) + std::fabs(f(x))) +
                              std::fabs(beta) * (std::fabs(g(xp)) + std::fabs(g(x)))) /
                             std::fabs(xp - x);
        CHECK(std::fabs(lhs - (tf + tg)) <=
              4.0 * std::numeric_limits<double>::epsilon() * scale);
    }
}

TEST_CASE("product rule within 1e-12 relative on smooth samples") {
    QuasiRandomSampler s(19);
    double worst = 0.0;
    for (int n = 0; n < 60; ++n) {
        s.next();
        double x = s.coord(0, 0.1, 5.0);
        if (std::fabs(x - 1.0) < 0.05) x += 0.1;
        const double p = s.coord(1, 0.1, 0.9);
        const PParam pp(p);
        const double xp = std::pow(x, p);

        const RealFunction f = [](double v) { return v * v * v - 2.0 * v + 1.0; };
        const RealFunction g = [](double v) { return 2.0 + std::cos(v); };
        const double lhs = p_derivative([&](double v) { return f(v) * g(v); }, x, pp);
        const double rhs = g(xp) * p_derivative(f, x, pp) + f(x) * p_derivative(g, x, pp);
        worst = std::fmax(worst,
                          std::fabs(lhs - rhs) /
                              std::fmax(1.0, std::fmax(std::fabs(lhs), std::fabs(rhs))));
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("quotient rule within 1e-10 relative where g g(x^p) != 0") {
    QuasiRandomSampler s(23);
    double worst = 0.0;
    for (int n = 0; n < 60; ++n) {
        s.next();
        double x = s.coord(0, 0.1, 5.0);
        if (std::fabs(x - 1.0) < 0.05) x += 0.1;
        const double p = s.coord(1, 0.1, 0.9);
        const PParam pp(p);
        const double xp = std::pow(x, p);

        const RealFunction f = [](double v) { return std::sin(v) + v; };
        const RealFunction g = [](double v) { return v * v + 1.0; };
        const double lhs = p_derivative([&](double v) { return f(v) / g(v); }, x, pp);
        const double rhs = (g(x) * p_derivative(f, x, pp) - f(x) * p_derivative(g, x, pp)) /
                           (g(x) * g(xp));
        worst = std::fmax(worst,
                          std::fabs(lhs - rhs) /
                              std::fmax(1.0, std::fmax(std::fabs(lhs), std::fabs(rhs))));
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("classical limit: error decreases monotonically as p -> 1") {
    double prev = std::numeric_limits<double>::infinity();
    for (int m = 2; m <= 10; ++m) {
        const double p = 1.0 - std::ldexp(1.0, -m);
        const double err = std::fabs(p_derivative(cube, 2.0, PParam(p)) - 12.0);
        CHECK(err < prev);
        prev = err;
    }
    CHECK(prev <= 1e-2);
}
