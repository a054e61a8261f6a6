#pragma once

// Independent plain-loop oracles for the p-integral series and the reduced
// variational problem. Deliberately naive (no compensation, no adaptive
// stopping) and kept free of any dependence on the library's summation
// paths, so they can vouch for them.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracle {

using Fn = std::function<double(double)>;

// sum_{j=0}^{n_terms-1} (b^(p^j) - b^(p^(j+1))) f(b^(p^j)), b > 1
inline double from_1(const Fn& f, double b, double p, double eps = 1e-14,
                     int n_terms = 500) {
    double s = 0.0, E = 1.0;
    for (int j = 0; j < n_terms; ++j) {
        const double node = std::pow(b, E);
        const double next = std::pow(b, E * p);
        const double term = (node - next) * f(node);
        s += term;
        if (j >= 8 && std::fabs(term) < eps) break;
        E *= p;
    }
    return s;
}

// sum (b^(p^(j+1)) - b^(p^j)) f(b^(p^j)), 0 < b < 1
inline double to_1(const Fn& f, double b, double p, double eps = 1e-14,
                   int n_terms = 500) {
    double s = 0.0, E = 1.0;
    for (int j = 0; j < n_terms; ++j) {
        const double node = std::pow(b, E);
        const double next = std::pow(b, E * p);
        const double term = (next - node) * f(node);
        s += term;
        if (j >= 8 && std::fabs(term) < eps) break;
        E *= p;
    }
    return s;
}

// sum (b^(p^-j) - b^(p^-j-1)) f(b^(p^-j-1)), 0 < b < 1
inline double from_0(const Fn& f, double b, double p, double eps = 1e-14,
                     int n_terms = 500) {
    double s = 0.0, E = 1.0;
    for (int j = 0; j < n_terms; ++j) {
        const double hi = std::pow(b, E);
        const double lo = std::pow(b, E / p);
        const double term = (hi - lo) * f(lo);
        s += term;
        if (j >= 8 && std::fabs(term) < eps) break;
        E /= p;
        if (!std::isfinite(E)) break;
    }
    return s;
}

// sum_{j=-j_range}^{j_range} (p^(p^(j+1)) - p^(p^j)) f(p^(p^j)); zero-gap
// terms (nodes quantized onto the fixed points) carry no weight and are
// skipped so integrands with singular quotients there stay finite
inline double zero_one(const Fn& f, double p, int j_range = 60) {
    double s = 0.0;
    for (int j = -j_range; j <= j_range; ++j) {
        const double Ej = std::pow(p, static_cast<double>(j));
        const double Ej1 = std::pow(p, static_cast<double>(j + 1));
        const double node = std::pow(p, Ej);
        const double next = std::pow(p, Ej1);
        if (next != node && node != 0.0) s += (next - node) * f(node);
    }
    return s;
}

// General endpoint dispatch mirroring the three-regime decomposition, built
// purely from the plain loops above.
inline double general(const Fn& f, double a, double b, double p) {
    if (a == b) return 0.0;
    if (a > b) return -general(f, b, a, p);
    if (a >= 1.0) {
        if (a == 1.0) return from_1(f, b, p);
        return from_1(f, b, p) - from_1(f, a, p);
    }
    if (b <= 1.0) {
        if (a == 0.0 && b == 1.0) return zero_one(f, p);
        if (a == 0.0) return from_0(f, b, p);
        if (b == 1.0) return to_1(f, a, p);
        return from_0(f, b, p) - from_0(f, a, p);
    }
    const double low = a == 0.0 ? 0.0 : from_0(f, a, p);
    return zero_one(f, p) + from_1(f, b, p) - low;
}

// Tridiagonal normal equations of the reduced quadratic problem
//   minimize sum_j (y_{j+1} - y_j)^2 / (2 w_j),  y_0 = beta, y_k = alpha
// solved by plain Gaussian elimination; the optimality system reads
//   (y_i - y_{i-1})/w_{i-1} = (y_{i+1} - y_i)/w_i.
inline std::vector<double> dirichlet_chain(const std::vector<double>& weights,
                                           double beta, double alpha) {
    const int k = static_cast<int>(weights.size());
    const int n = k - 1;
    if (n <= 0) return {};
    std::vector<double> diag(n), off(n - 1 > 0 ? n - 1 : 0), rhs(n, 0.0);
    for (int i = 0; i < n; ++i) {
        diag[i] = 1.0 / weights[i] + 1.0 / weights[i + 1];
        if (i + 1 < n) off[i] = -1.0 / weights[i + 1];
    }
    rhs[0] += beta / weights[0];
    rhs[n - 1] += alpha / weights[n - 1 + 1];
    // Thomas algorithm
    std::vector<double> c(n, 0.0), d(n, 0.0);
    c[0] = (n > 1) ? off[0] / diag[0] : 0.0;
    d[0] = rhs[0] / diag[0];
    for (int i = 1; i < n; ++i) {
        const double m = diag[i] - off[i - 1] * c[i - 1];
        if (i < n - 1) c[i] = off[i] / m;
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / m;
    }
    std::vector<double> y(n);
    y[n - 1] = d[n - 1];
    for (int i = n - 2; i >= 0; --i) y[i] = d[i] - c[i] * y[i + 1];
    return y;
}

// Frozen values computed by the loops above (p = 0.5, eps = 1e-14, 500 terms;
// the zero-one sum over |j| <= 60).
inline constexpr double k_int_1_2_of_t = 1.7031571664589062;
inline constexpr double k_int_half_1_of_t = 0.3405873238513733;
inline constexpr double k_int_0_half_of_t = 0.074447691207755184;
inline constexpr double k_int_0_1_of_t = 0.41503501505913837;
inline constexpr double k_model_functional_y_t = 2.1354356415007891;

} // namespace oracle
