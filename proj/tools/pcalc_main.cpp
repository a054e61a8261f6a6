// pcalc: command-line front end for the p-calculus toolkit.
//
// Subcommands: deriv | integrate | lattice | functional | variation |
//              residual | solve | convexity | verify
//
// Results are JSON on stdout (or --output) and carry {p, eps, j_max, ...}
// provenance; truncated series are meaningless without their truncation
// record. Failures print a diagnostic JSON object on stderr.
//
// Exit codes: 0 success, 1 usage error, 2 expression parse error,
//             3 numeric failure (divergence, non-convergence).

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pcalc/deriv.hpp"
#include "pcalc/errors.hpp"
#include "pcalc/expr.hpp"
#include "pcalc/integrate.hpp"
#include "pcalc/lattice.hpp"
#include "pcalc/variational.hpp"

using json = nlohmann::ordered_json;

namespace {

std::string fmt(double v) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

void write_text(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw pcalc::DomainError("cannot open output file: " + path);
    out << text;
}

struct CommonOpts {
    double p = 0.5;
    double eps = 1e-12;
    int j_max = 10'000;
    std::string format = "json";
    std::string output;
    std::uint64_t seed = 0;

    pcalc::PParam pparam() const { return pcalc::PParam(p); }
    pcalc::TruncationPolicy policy() const {
        pcalc::TruncationPolicy pol;
        pol.eps = eps;
        pol.j_max = j_max;
        validate(pol);
        return pol;
    }

    void provenance(json& j) const {
        j["p"] = p;
        j["eps"] = eps;
        j["j_max"] = j_max;
    }
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_p = true) {
    if (with_p) cmd->add_option("--p", opts.p, "deformation parameter in (0,1)")->required();
    cmd->add_option("--eps", opts.eps, "series tail tolerance");
    cmd->add_option("--jmax", opts.j_max, "cap on series terms");
    cmd->add_option("--format", opts.format, "output format: json|csv")
        ->check(CLI::IsMember({"json", "csv"}));
    cmd->add_option("--output", opts.output, "write output to a file");
    cmd->add_option("--seed", opts.seed, "seed for probe sampling");
}

pcalc::Expression parse_t_expr(const std::string& src) {
    return pcalc::Expression::parse(src, {"t"});
}

// --------------------------------------------------------------------------
// verify: built-in identity suites

struct SuiteResult {
    std::string name;
    long cases = 0;
    double max_err = 0.0;
    double tol = 0.0;
    bool pass = true;
    std::string note;
};

class SuiteRunner {
public:
    SuiteRunner(double p, double eps, std::uint64_t seed)
        : p_(p), pol_{eps, 10'000, 8}, seed_(seed) {}

    std::vector<SuiteResult> run_all() {
        std::vector<SuiteResult> out;
        const auto guarded = [&out](const char* name, auto&& fn) {
            try {
                out.push_back(fn());
            } catch (const std::exception& e) {
                SuiteResult r;
                r.name = name;
                r.pass = false;
                r.note = e.what();
                out.push_back(r);
            }
        };
        guarded("derivative_rules", [&] { return derivative_rules(); });
        guarded("classical_limit", [&] { return classical_limit(); });
        guarded("ftc", [&] { return ftc(); });
        guarded("integration_by_parts", [&] { return by_parts(); });
        guarded("telescoping", [&] { return telescoping(); });
        guarded("additivity_orientation", [&] { return additivity_orientation(); });
        guarded("domination", [&] { return domination(); });
        guarded("euler_lagrange", [&] { return euler_lagrange(); });
        guarded("fundamental_lemma", [&] { return fundamental_lemma(); });
        return out;
    }

private:
    struct Fixture {
        pcalc::RealFunction f;
    };

    double sample_x(pcalc::QuasiRandomSampler& s) const {
        double x = s.coord(0, 0.1, 5.0);
        if (std::fabs(x - 1.0) < 0.05) x += 0.1;
        return x;
    }

    SuiteResult derivative_rules() {
        SuiteResult r;
        r.name = "derivative_rules";
        r.tol = 1e-10;
        const pcalc::RealFunction f = [](double x) { return x * x * x - 2.0 * x + 1.0; };
        const pcalc::RealFunction g = [](double x) { return 2.0 + std::cos(x); };
        const pcalc::RealFunction h = [](double x) { return std::exp(x / 4.0); };
        pcalc::QuasiRandomSampler s(seed_);
        const pcalc::PParam pp(p_);
        for (int n = 0; n < 40; ++n) {
            s.next();
            const double x = sample_x(s);
            const double xp = std::pow(x, p_);

            // constants and the identity are exact
            const double dc = pcalc::p_derivative([](double) { return 3.25; }, x, pp);
            const double di = pcalc::p_derivative([](double t) { return t; }, x, pp);
            if (dc != 0.0 || di != 1.0) r.pass = false;

            const double df = pcalc::p_derivative(f, x, pp);
            const double dg = pcalc::p_derivative(g, x, pp);
            const double dh = pcalc::p_derivative(h, x, pp);

            // product rule
            const double lhs_p = pcalc::p_derivative([&](double t) { return f(t) * g(t); }, x, pp);
            const double rhs_p = g(xp) * df + f(x) * dg;
            track(r, rel_err(lhs_p, rhs_p));

            // quotient rule
            const double lhs_q = pcalc::p_derivative([&](double t) { return f(t) / g(t); }, x, pp);
            const double rhs_q = (g(x) * df - f(x) * dg) / (g(x) * g(xp));
            track(r, rel_err(lhs_q, rhs_q));

            // linearity
            const double lhs_l = pcalc::p_derivative([&](double t) { return 2.5 * f(t) - 0.75 * h(t); }, x, pp);
            const double rhs_l = 2.5 * df - 0.75 * dh;
            track(r, rel_err(lhs_l, rhs_l));
            ++r.cases;
        }
        return r;
    }

    SuiteResult classical_limit() {
        SuiteResult r;
        r.name = "classical_limit";
        r.tol = 1e-2;
        const pcalc::RealFunction f = [](double x) { return x * x * x; };
        double prev = std::numeric_limits<double>::infinity();
        double err = 0.0;
        for (int m = 2; m <= 10; ++m) {
            const double pm = 1.0 - std::ldexp(1.0, -m);
            err = std::fabs(pcalc::p_derivative(f, 2.0, pcalc::PParam(pm)) - 12.0);
            if (err >= prev) r.pass = false;
            prev = err;
            ++r.cases;
        }
        r.max_err = err;
        if (err > r.tol) r.pass = false;
        return r;
    }

    SuiteResult ftc() {
        SuiteResult r;
        r.name = "ftc";
        r.tol = 1e-8;
        for (const auto& F : fixtures()) {
            for (const auto& [a, b] : intervals()) {
                track(r, pcalc::ftc_residual(F.f, a, b, pcalc::PParam(p_), pol_));
                ++r.cases;
            }
        }
        finish(r);
        return r;
    }

    SuiteResult by_parts() {
        SuiteResult r;
        r.name = "integration_by_parts";
        r.tol = 1e-8;
        const pcalc::RealFunction id = [](double t) { return t; };
        const pcalc::RealFunction sq = [](double t) { return t * t; };
        const pcalc::RealFunction sn = [](double t) { return std::sin(t); };
        for (const auto& [a, b] : intervals()) {
            track(r, pcalc::by_parts_residual(id, id, a, b, pcalc::PParam(p_), pol_));
            track(r, pcalc::by_parts_residual(sq, sn, a, b, pcalc::PParam(p_), pol_));
            r.cases += 2;
        }
        finish(r);
        return r;
    }

    SuiteResult telescoping() {
        SuiteResult r;
        r.name = "telescoping";
        r.tol = 1e-12;
        const pcalc::RealFunction one = [](double) { return 1.0; };
        const pcalc::PParam pp(p_);
        const auto check = [&](double a, double b) {
            track(r, std::fabs(pcalc::p_integral(one, a, b, pp, pol_).value - (b - a)));
            ++r.cases;
        };
        check(1.2, 2.0);
        check(0.3, 0.8);
        check(0.5, 2.0);
        check(0.0, 1.0);
        check(0.0, 2.5);
        finish(r);
        return r;
    }

    SuiteResult additivity_orientation() {
        SuiteResult r;
        r.name = "additivity_orientation";
        r.tol = 1e-12;
        const pcalc::RealFunction f = [](double t) { return std::sin(t) + t; };
        const pcalc::PParam pp(p_);
        pcalc::QuasiRandomSampler s(seed_ + 1);
        const auto triple = [&](double lo, double hi) {
            s.next();
            double x[3];
            for (int i = 0; i < 3; ++i) x[i] = s.coord(i, lo, hi);
            std::sort(x, x + 3);
            const double whole = pcalc::p_integral(f, x[0], x[2], pp, pol_).value;
            const double split = pcalc::p_integral(f, x[0], x[1], pp, pol_).value +
                                 pcalc::p_integral(f, x[1], x[2], pp, pol_).value;
            track(r, std::fabs(whole - split) / std::fmax(1.0, std::fabs(whole)));
            // orientation is bit-exact
            const double fwd = whole;
            const double rev = pcalc::p_integral(f, x[2], x[0], pp, pol_).value;
            if (fwd != -rev) r.pass = false;
            ++r.cases;
        };
        for (int n = 0; n < 8; ++n) triple(1.05, 3.0);
        for (int n = 0; n < 8; ++n) triple(0.05, 0.95);
        for (int n = 0; n < 8; ++n) triple(0.2, 2.8);
        finish(r);
        return r;
    }

    SuiteResult domination() {
        SuiteResult r;
        r.name = "domination";
        r.tol = 0.0;
        const pcalc::PParam pp(p_);
        pcalc::QuasiRandomSampler s(seed_ + 2);
        for (int n = 0; n < 25; ++n) {
            s.next();
            const double c = s.coord(0, -2.0, 2.0);
            const pcalc::RealFunction f = [c](double t) { return c * std::sin(3.0 * t) - t / 2.0; };
            const pcalc::RealFunction g = [&f](double t) { return std::fabs(f(t)) + 0.1; };
            const double y = s.coord(1, 1.1, 3.0);
            const double x = s.coord(2, 0.1, 0.9);

            const double fy = pcalc::p_integral(f, 1.0, y, pp, pol_).value;
            const double gy = pcalc::p_integral(g, 1.0, y, pp, pol_).value;
            track(r, std::fmax(0.0, std::fabs(fy) - gy));

            const double fx = pcalc::p_integral(f, 1.0, x, pp, pol_).value;
            const double gx = pcalc::p_integral(g, 1.0, x, pp, pol_).value;
            track(r, std::fmax(0.0, std::fabs(fx) - (-gx)));

            const double fxy = pcalc::p_integral(f, x, y, pp, pol_).value;
            const double gxy = pcalc::p_integral(g, x, y, pp, pol_).value;
            track(r, std::fmax(0.0, std::fabs(fxy) - gxy));
            track(r, std::fmax(0.0, -gy));
            track(r, std::fmax(0.0, -gxy));
            ++r.cases;
        }
        finish(r);
        return r;
    }

    SuiteResult euler_lagrange() {
        SuiteResult r;
        r.name = "euler_lagrange";
        r.tol = 1e-10;
        const double b = 2.0;
        const double a = std::pow(b, std::pow(p_, 4.0));
        pcalc::Lagrangian L = pcalc::Lagrangian::parse("t + 1/2*v^2", "0", "v");
        pcalc::VariationalProblem prob(L, a, b, a, b, pcalc::PParam(p_), pol_);
        auto lat = pcalc::problem_lattice(prob);
        auto y = pcalc::GridFunction::sample([](double t) { return t; }, lat);
        const auto el = pcalc::el_residual(prob, y);
        track(r, el.sup_norm);
        r.cases = static_cast<long>(el.nodes.size());
        finish(r);
        return r;
    }

    SuiteResult fundamental_lemma() {
        SuiteResult r;
        r.name = "fundamental_lemma";
        r.tol = 0.0;
        const pcalc::PParam pp(p_);
        const auto none = pcalc::fundamental_lemma_probe(
            [](double) { return 0.0; }, 0.5, 2.0, pp, pol_, 1e-12);
        if (none) r.pass = false;
        const auto witness = pcalc::fundamental_lemma_probe(
            [](double t) { return t - 1.0; }, 0.5, 2.0, pp, pol_, 1e-12);
        if (!witness) {
            r.pass = false;
        } else {
            track(r, std::fabs(witness->integral - witness->closed_form) /
                         std::fmax(std::fabs(witness->closed_form), 1e-300));
            r.tol = 4.0 * std::numeric_limits<double>::epsilon();
            if (r.max_err > r.tol) r.pass = false;
        }
        r.cases = 2;
        return r;
    }

    static double rel_err(double a, double b) {
        const double scale = std::fmax(1.0, std::fmax(std::fabs(a), std::fabs(b)));
        return std::fabs(a - b) / scale;
    }

    static void track(SuiteResult& r, double err) {
        r.max_err = std::fmax(r.max_err, err);
    }

    static void finish(SuiteResult& r) {
        if (r.max_err > r.tol) r.pass = false;
    }

    std::vector<Fixture> fixtures() const {
        return {
            {[](double x) { return x; }},
            {[](double x) { return x * x * x; }},
            {[](double x) { return std::sin(x); }},
            {[](double x) { return std::exp(x / 4.0); }},
        };
    }

    static std::vector<std::pair<double, double>> intervals() {
        return {{1.2, 2.0}, {0.3, 0.8}, {0.5, 2.0}};
    }

    double p_;
    pcalc::TruncationPolicy pol_;
    std::uint64_t seed_;
};

// --------------------------------------------------------------------------

int run_deriv(const CommonOpts& opts, const std::string& fsrc, double x, int n) {
    const pcalc::Expression e = parse_t_expr(fsrc);
    const pcalc::RealFunction f = pcalc::to_function(e);
    const pcalc::PParam pp = opts.pparam();
    const double value = pcalc::p_derivative_n(f, x, pp, n);

    json out;
    out["schema"] = 1;
    out["command"] = "deriv";
    opts.provenance(out);
    out["x"] = x;
    out["n"] = n;
    out["value"] = value;
    json nodes = json::array();
    double node = x;
    for (int j = 0; j <= n; ++j) {
        nodes.push_back(node);
        node = std::pow(node, opts.p);
    }
    out["nodes_used"] = nodes;
    write_text(out.dump(2) + "\n", opts.output);
    return 0;
}

int run_integrate(const CommonOpts& opts, const std::string& fsrc, double a,
                  double b, const std::string& dump_path) {
    const pcalc::Expression e = parse_t_expr(fsrc);
    const pcalc::RealFunction f = pcalc::to_function(e);
    std::vector<pcalc::IntegralTerm> terms;
    std::vector<pcalc::IntegralTerm>* dump = dump_path.empty() ? nullptr : &terms;

    const pcalc::IntegralResult res =
        pcalc::p_integral(f, a, b, opts.pparam(), opts.policy(), dump);

    if (dump) {
        std::string csv = "j,node,gap,term\n";
        for (const auto& t : terms) {
            csv += std::to_string(t.j) + "," + fmt(t.node) + "," + fmt(t.gap) +
                   "," + fmt(t.term) + "\n";
        }
        write_text(csv, dump_path);
    }

    json out;
    out["schema"] = 1;
    out["command"] = "integrate";
    opts.provenance(out);
    out["a"] = a;
    out["b"] = b;
    out["value"] = res.value;
    out["terms_used"] = res.terms_used;
    out["tail_bound"] = res.tail_bound;
    out["case_tag"] = pcalc::to_string(res.case_tag);
    out["truncated_at_cap"] = res.truncated_at_cap;
    write_text(out.dump(2) + "\n", opts.output);
    return 0;
}

int run_lattice(const CommonOpts& opts, double t, bool away,
                std::optional<double> cutoff) {
    const pcalc::LatticeRay r =
        pcalc::ray(t, opts.pparam(),
                   away ? pcalc::RayDirection::away : pcalc::RayDirection::toward_one,
                   opts.policy(), cutoff);
    std::string csv = "j,exponent,point\n";
    for (std::size_t j = 0; j < r.points.size(); ++j) {
        csv += std::to_string(j) + "," + fmt(r.exponents[j]) + "," +
               fmt(r.points[j]) + "\n";
    }
    write_text(csv, opts.output);
    return 0;
}

struct ProblemOpts {
    std::string lagrangian;
    std::string dLdu, dLdv;
    double a = 0.0;
    double b = 0.0;
    std::string alpha = "auto";
    std::string beta = "auto";
    double fd_step = pcalc::Lagrangian::default_fd_step();
};

double boundary_value(const std::string& text, double fallback) {
    if (text == "auto") return fallback;
    return std::stod(text);
}

pcalc::VariationalProblem make_problem(const CommonOpts& opts,
                                       const ProblemOpts& po,
                                       double default_alpha,
                                       double default_beta) {
    std::optional<std::string_view> du, dv;
    if (!po.dLdu.empty()) du = po.dLdu;
    if (!po.dLdv.empty()) dv = po.dLdv;
    pcalc::Lagrangian L = pcalc::Lagrangian::parse(po.lagrangian, du, dv,
                                                   /*verify=*/du || dv,
                                                   po.fd_step);
    return pcalc::VariationalProblem(
        std::move(L), po.a, po.b, boundary_value(po.alpha, default_alpha),
        boundary_value(po.beta, default_beta), opts.pparam(), opts.policy());
}

int run_functional(const CommonOpts& opts, const ProblemOpts& po,
                   const std::string& ysrc) {
    const pcalc::RealFunction yfn = pcalc::to_function(parse_t_expr(ysrc));
    pcalc::VariationalProblem prob = make_problem(opts, po, yfn(po.a), yfn(po.b));
    auto lat = pcalc::problem_lattice(prob);
    const auto y = pcalc::GridFunction::sample(yfn, lat);
    const pcalc::IntegralResult res = pcalc::functional_value(prob, y);

    json out;
    out["schema"] = 1;
    out["command"] = "functional";
    opts.provenance(out);
    out["a"] = prob.a;
    out["b"] = prob.b;
    out["alpha"] = prob.alpha;
    out["beta"] = prob.beta;
    out["value"] = res.value;
    out["terms_used"] = res.terms_used;
    out["tail_bound"] = res.tail_bound;
    out["case_tag"] = pcalc::to_string(res.case_tag);
    write_text(out.dump(2) + "\n", opts.output);
    return 0;
}

int run_variation(const CommonOpts& opts, const ProblemOpts& po,
                  const std::string& ysrc, const std::string& etasrc) {
    const pcalc::RealFunction yfn = pcalc::to_function(parse_t_expr(ysrc));
    const pcalc::RealFunction etafn = pcalc::to_function(parse_t_expr(etasrc));
    pcalc::VariationalProblem prob = make_problem(opts, po, yfn(po.a), yfn(po.b));
    auto lat = pcalc::problem_lattice(prob);
    const auto y = pcalc::GridFunction::sample(yfn, lat);
    const auto eta = pcalc::GridFunction::sample(etafn, lat);
    const double value = pcalc::first_variation(prob, y, eta);

    json out;
    out["schema"] = 1;
    out["command"] = "variation";
    opts.provenance(out);
    out["value"] = value;
    write_text(out.dump(2) + "\n", opts.output);
    return 0;
}

int run_residual(const CommonOpts& opts, const ProblemOpts& po,
                 const std::string& ysrc) {
    const pcalc::RealFunction yfn = pcalc::to_function(parse_t_expr(ysrc));
    pcalc::VariationalProblem prob = make_problem(opts, po, yfn(po.a), yfn(po.b));
    auto lat = pcalc::problem_lattice(prob);
    const auto y = pcalc::GridFunction::sample(yfn, lat);
    const pcalc::ElResidual res = pcalc::el_residual(prob, y);

    json out;
    out["schema"] = 1;
    out["command"] = "residual";
    opts.provenance(out);
    out["nodes"] = res.nodes;
    out["residuals"] = res.residuals;
    out["sup_norm"] = res.sup_norm;
    write_text(out.dump(2) + "\n", opts.output);
    return 0;
}

int run_solve(const CommonOpts& opts, ProblemOpts po, int k,
              const std::string& csv_path) {
    if (k > 0) {
        po.a = std::pow(po.b, std::pow(opts.p, static_cast<double>(k)));
    } else if (!(po.a > 0.0)) {
        throw pcalc::DomainError("solve requires either --a or --k");
    }
    pcalc::VariationalProblem prob = make_problem(opts, po, po.a, po.b);
    const pcalc::SolveResult sol = pcalc::solve_common_lattice(
        prob, k > 0 ? std::optional<int>(k) : std::nullopt);

    if (!csv_path.empty()) {
        std::string csv = "node,y\n";
        for (std::size_t i = 0; i < sol.nodes.size(); ++i) {
            csv += fmt(sol.nodes[i]) + "," + fmt(sol.values[i]) + "\n";
        }
        write_text(csv, csv_path);
    }

    json out;
    out["schema"] = 1;
    out["command"] = "solve";
    opts.provenance(out);
    out["a"] = prob.a;
    out["b"] = prob.b;
    out["alpha"] = prob.alpha;
    out["beta"] = prob.beta;
    out["k"] = static_cast<int>(sol.nodes.size()) - 1;
    out["nodes"] = sol.nodes;
    out["values"] = sol.values;
    out["functional"] = sol.functional;
    out["grad_norm"] = sol.grad_norm;
    out["iterations"] = sol.iterations;
    out["convex"] = sol.minimizer_certified;
    out["terms_used"] = static_cast<int>(sol.nodes.size()) - 1;
    write_text(out.dump(2) + "\n", opts.output);
    return 0;
}

int run_convexity(const CommonOpts& opts, const ProblemOpts& po, long samples,
                  double tol) {
    pcalc::VariationalProblem prob = make_problem(opts, po, 0.0, 1.0);
    const pcalc::ConvexityReport rep = pcalc::convexity_probe(
        prob.lagrangian, pcalc::ProbeBox::for_problem(prob), samples, tol,
        opts.seed);

    const auto cx_json = [](const std::optional<pcalc::ConvexityCounterexample>& cx) {
        if (!cx) return json(nullptr);
        json j;
        j["t"] = cx->t;
        j["u"] = cx->u;
        j["v"] = cx->v;
        j["u1"] = cx->u1;
        j["v1"] = cx->v1;
        j["gap"] = cx->gap;
        return j;
    };

    json out;
    out["schema"] = 1;
    out["command"] = "convexity";
    opts.provenance(out);
    out["samples"] = rep.samples;
    out["tol"] = tol;
    out["seed"] = opts.seed;
    out["convex"] = rep.convex_ok();
    out["concave"] = rep.concave_ok();
    out["convex_counterexample"] = cx_json(rep.convex_counterexample);
    out["concave_counterexample"] = cx_json(rep.concave_counterexample);
    write_text(out.dump(2) + "\n", opts.output);
    return 0;
}

int run_verify(const CommonOpts& opts) {
    SuiteRunner runner(opts.p, opts.eps, opts.seed);
    const std::vector<SuiteResult> suites = runner.run_all();
    bool all_pass = true;
    for (const auto& s : suites) all_pass = all_pass && s.pass;

    if (opts.format == "csv") {
        std::string csv = "suite,cases,max_err,tol,pass\n";
        for (const auto& s : suites) {
            csv += s.name + "," + std::to_string(s.cases) + "," + fmt(s.max_err) +
                   "," + fmt(s.tol) + "," + (s.pass ? "true" : "false") + "\n";
        }
        write_text(csv, opts.output);
    } else {
        json out;
        out["schema"] = 1;
        out["command"] = "verify";
        opts.provenance(out);
        out["seed"] = opts.seed;
        json arr = json::array();
        for (const auto& s : suites) {
            json j;
            j["name"] = s.name;
            j["cases"] = s.cases;
            j["max_err"] = s.max_err;
            j["tol"] = s.tol;
            j["pass"] = s.pass;
            if (!s.note.empty()) j["note"] = s.note;
            arr.push_back(j);
        }
        out["suites"] = arr;
        out["all_pass"] = all_pass;
        write_text(out.dump(2) + "\n", opts.output);
    }
    return all_pass ? 0 : 3;
}

json error_json(const char* type, const std::string& message) {
    json out;
    out["schema"] = 1;
    out["error"]["type"] = type;
    out["error"]["message"] = message;
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pcalc: p-calculus and p-variational toolkit"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string fsrc, ysrc, etasrc, dump_path, csv_path;
    ProblemOpts po;
    double x = 0.0, a = 0.0, b = 0.0, t = 0.0;
    int n = 1, k = 0;
    long samples = 10'000;
    double probe_tol = 1e-9;
    bool away = false;
    double cutoff_value = 0.0;

    auto* c_deriv = app.add_subcommand("deriv", "p-derivative of f at x");
    c_deriv->add_option("--f", fsrc, "expression in t")->required();
    c_deriv->add_option("--x", x, "evaluation point")->required();
    c_deriv->add_option("--n", n, "derivative order (default 1)");
    add_common(c_deriv, opts);

    auto* c_int = app.add_subcommand("integrate", "definite p-integral of f over [a,b]");
    c_int->add_option("--f", fsrc, "expression in t")->required();
    c_int->add_option("--a", a, "lower endpoint")->required();
    c_int->add_option("--b", b, "upper endpoint")->required();
    c_int->add_option("--dump-terms", dump_path, "write per-term CSV (j,node,gap,term)");
    add_common(c_int, opts);

    auto* c_lat = app.add_subcommand("lattice", "dump a lattice ray as CSV");
    c_lat->add_option("--t", t, "ray base")->required();
    c_lat->add_flag("--away", away, "exponents p^-j instead of p^j");
    auto* cutoff_opt = c_lat->add_option("--cutoff", cutoff_value,
                                         "upper cutoff for away rays with base > 1");
    add_common(c_lat, opts);

    const auto add_problem = [&](CLI::App* cmd, bool need_a) {
        cmd->add_option("--lagrangian", po.lagrangian, "expression in t,u,v")->required();
        cmd->add_option("--dLdu", po.dLdu, "closed-form dL/du (optional)");
        cmd->add_option("--dLdv", po.dLdv, "closed-form dL/dv (optional)");
        auto* ao = cmd->add_option("--a", po.a, "left endpoint");
        cmd->add_option("--b", po.b, "right endpoint")->required();
        cmd->add_option("--alpha", po.alpha, "boundary value at a, or 'auto'");
        cmd->add_option("--beta", po.beta, "boundary value at b, or 'auto'");
        cmd->add_option("--fd-step", po.fd_step,
                        "step scale for numeric Lagrangian partials");
        if (need_a) ao->required();
        add_common(cmd, opts);
    };

    auto* c_fun = app.add_subcommand("functional", "variational functional of y");
    c_fun->add_option("--y", ysrc, "candidate y as an expression in t")->required();
    add_problem(c_fun, true);

    auto* c_var = app.add_subcommand("variation", "first variation at y along eta");
    c_var->add_option("--y", ysrc, "candidate y as an expression in t")->required();
    c_var->add_option("--eta", etasrc, "variation as an expression in t")->required();
    add_problem(c_var, true);

    auto* c_res = app.add_subcommand("residual", "Euler-Lagrange residual of y");
    c_res->add_option("--y", ysrc, "candidate y as an expression in t")->required();
    add_problem(c_res, true);

    auto* c_solve = app.add_subcommand("solve", "direct minimization on a common lattice");
    c_solve->add_option("--k", k, "common-lattice index: a = b^(p^k)");
    c_solve->add_option("--csv", csv_path, "write (node,y) CSV for plotting");
    add_problem(c_solve, false);

    auto* c_conv = app.add_subcommand("convexity", "joint-convexity probe of the Lagrangian");
    c_conv->add_option("--samples", samples, "number of probe samples");
    c_conv->add_option("--tol", probe_tol, "probe tolerance");
    add_problem(c_conv, false);

    auto* c_verify = app.add_subcommand("verify", "run the built-in identity suites");
    add_common(c_verify, opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (c_deriv->parsed()) return run_deriv(opts, fsrc, x, n);
        if (c_int->parsed()) return run_integrate(opts, fsrc, a, b, dump_path);
        if (c_lat->parsed()) {
            std::optional<double> cutoff;
            if (cutoff_opt->count() > 0) cutoff = cutoff_value;
            return run_lattice(opts, t, away, cutoff);
        }
        if (c_fun->parsed()) return run_functional(opts, po, ysrc);
        if (c_var->parsed()) return run_variation(opts, po, ysrc, etasrc);
        if (c_res->parsed()) return run_residual(opts, po, ysrc);
        if (c_solve->parsed()) return run_solve(opts, po, k, csv_path);
        if (c_conv->parsed()) {
            if (!(po.a > 0.0)) po.a = 0.5;
            if (!(po.b > po.a)) po.b = 2.0;
            return run_convexity(opts, po, samples, probe_tol);
        }
        if (c_verify->parsed()) return run_verify(opts);
        std::cerr << error_json("usage", "no subcommand").dump() << "\n";
        return 1;
    } catch (const pcalc::ParseError& e) {
        json out = error_json("parse", e.what());
        out["error"]["offset"] = e.offset();
        std::cerr << out.dump() << "\n";
        return 2;
    } catch (const pcalc::NumericError& e) {
        std::cerr << error_json("numeric", e.what()).dump() << "\n";
        return 3;
    } catch (const pcalc::Error& e) {
        std::cerr << error_json("domain", e.what()).dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << error_json("internal", e.what()).dump() << "\n";
        return 1;
    }
}
