// Microbenchmarks for the series engines, the difference operator and the
// direct solver. Requires the google/benchmark library.

#include <cmath>

#include <benchmark/benchmark.h>

#include "pcalc/deriv.hpp"
#include "pcalc/expr.hpp"
#include "pcalc/integrate.hpp"
#include "pcalc/variational.hpp"

using namespace pcalc;

namespace {

void bm_expression_eval(benchmark::State& state) {
    const Expression e = Expression::parse("sin(t)*exp(t/3) - t^1.5 + 2*t", {"t"});
    double t = 1.7;
    for (auto _ : state) {
        benchmark::DoNotOptimize(e.eval(std::span<const double>(&t, 1)));
        t += 1e-9;
    }
}
BENCHMARK(bm_expression_eval);

void bm_p_derivative(benchmark::State& state) {
    const PParam p(0.5);
    const RealFunction f = [](double x) { return std::sin(x) * x; };
    for (auto _ : state) {
        benchmark::DoNotOptimize(p_derivative(f, 2.3, p));
    }
}
BENCHMARK(bm_p_derivative);

void bm_integral_from_1(benchmark::State& state) {
    const PParam p(0.5);
    const RealFunction f = [](double x) { return std::sin(x) + x; };
    for (auto _ : state) {
        benchmark::DoNotOptimize(integral_from_1(f, 2.0, p).value);
    }
}
BENCHMARK(bm_integral_from_1);

void bm_integral_zero_one(benchmark::State& state) {
    const PParam p(0.5);
    const RealFunction f = [](double x) { return std::sin(x) + x; };
    for (auto _ : state) {
        benchmark::DoNotOptimize(integral_zero_one(f, p).value);
    }
}
BENCHMARK(bm_integral_zero_one);

void bm_general_integral(benchmark::State& state) {
    const PParam p(0.5);
    const RealFunction f = [](double x) { return std::exp(x / 4.0); };
    for (auto _ : state) {
        benchmark::DoNotOptimize(p_integral(f, 0.5, 2.0, p).value);
    }
}
BENCHMARK(bm_general_integral);

void bm_solve_common_lattice(benchmark::State& state) {
    const double b = 2.0;
    const double a = std::pow(b, std::pow(0.5, static_cast<double>(state.range(0))));
    VariationalProblem prob(Lagrangian::parse("t + 1/2*v^2"), a, b, a, b, PParam(0.5));
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_common_lattice(prob, static_cast<int>(state.range(0))));
    }
}
BENCHMARK(bm_solve_common_lattice)->Arg(4)->Arg(8);

} // namespace

BENCHMARK_MAIN();
