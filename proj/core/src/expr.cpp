#include "pcalc/expr.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "pcalc/errors.hpp"

namespace pcalc {

namespace {

enum class Op : std::uint8_t {
    number,
    variable,
    add,
    sub,
    mul,
    div,
    pow,
    neg,
    call_sin,
    call_cos,
    call_exp,
    call_log,
    call_sqrt,
    call_abs,
    call_pow,
};

struct FunctionInfo {
    const char* name;
    Op op;
    int arity;
};

constexpr std::array<FunctionInfo, 7> k_functions{{
    {"sin", Op::call_sin, 1},
    {"cos", Op::call_cos, 1},
    {"exp", Op::call_exp, 1},
    {"log", Op::call_log, 1},
    {"sqrt", Op::call_sqrt, 1},
    {"abs", Op::call_abs, 1},
    {"pow", Op::call_pow, 2},
}};

} // namespace

struct Expression::Impl {
    struct Node {
        Op op;
        double value = 0.0; // number payload
        int var = -1;       // variable index
        int lhs = -1;
        int rhs = -1;
    };

    std::vector<Node> nodes;
    int root = -1;
    std::vector<std::string> variables;

    double eval_node(int i, std::span<const double> v) const {
        const Node& n = nodes[static_cast<std::size_t>(i)];
        switch (n.op) {
        case Op::number: return n.value;
        case Op::variable: return v[static_cast<std::size_t>(n.var)];
        case Op::add: return eval_node(n.lhs, v) + eval_node(n.rhs, v);
        case Op::sub: return eval_node(n.lhs, v) - eval_node(n.rhs, v);
        case Op::mul: return eval_node(n.lhs, v) * eval_node(n.rhs, v);
        case Op::div: return eval_node(n.lhs, v) / eval_node(n.rhs, v);
        case Op::pow:
        case Op::call_pow:
            return std::pow(eval_node(n.lhs, v), eval_node(n.rhs, v));
        case Op::neg: return -eval_node(n.lhs, v);
        case Op::call_sin: return std::sin(eval_node(n.lhs, v));
        case Op::call_cos: return std::cos(eval_node(n.lhs, v));
        case Op::call_exp: return std::exp(eval_node(n.lhs, v));
        case Op::call_log: return std::log(eval_node(n.lhs, v));
        case Op::call_sqrt: return std::sqrt(eval_node(n.lhs, v));
        case Op::call_abs: return std::fabs(eval_node(n.lhs, v));
        }
        return std::numeric_limits<double>::quiet_NaN();
    }
};

namespace {

struct Token {
    enum class Kind {
        number,
        identifier,
        plus,
        minus,
        star,
        slash,
        caret,
        lparen,
        rparen,
        comma,
        end,
    };
    Kind kind;
    std::size_t offset;
    double number = 0.0;
    std::string_view text{};
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        while (pos_ < src_.size() &&
               (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' ||
                src_[pos_] == '\r')) {
            ++pos_;
        }
        const std::size_t at = pos_;
        if (pos_ >= src_.size()) return {Token::Kind::end, at};

        const char c = src_[pos_];
        switch (c) {
        case '+': ++pos_; return {Token::Kind::plus, at};
        case '-': ++pos_; return {Token::Kind::minus, at};
        case '*': ++pos_; return {Token::Kind::star, at};
        case '/': ++pos_; return {Token::Kind::slash, at};
        case '^': ++pos_; return {Token::Kind::caret, at};
        case '(': ++pos_; return {Token::Kind::lparen, at};
        case ')': ++pos_; return {Token::Kind::rparen, at};
        case ',': ++pos_; return {Token::Kind::comma, at};
        default: break;
        }

        if ((c >= '0' && c <= '9') || c == '.') {
            double value = 0.0;
            const char* begin = src_.data() + pos_;
            const char* end = src_.data() + src_.size();
            auto [ptr, ec] = std::from_chars(begin, end, value);
            if (ec != std::errc{} || ptr == begin) {
                throw ParseError("malformed number", at);
            }
            pos_ = static_cast<std::size_t>(ptr - src_.data());
            Token t{Token::Kind::number, at};
            t.number = value;
            return t;
        }

        if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_') {
            std::size_t len = 0;
            while (pos_ + len < src_.size()) {
                const char d = src_[pos_ + len];
                const bool ident = (d >= 'a' && d <= 'z') ||
                                   (d >= 'A' && d <= 'Z') ||
                                   (d >= '0' && d <= '9') || d == '_';
                if (!ident) break;
                ++len;
            }
            Token t{Token::Kind::identifier, at};
            t.text = src_.substr(pos_, len);
            pos_ += len;
            return t;
        }

        throw ParseError(std::string("unexpected character '") + c + "'", at);
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;
};

class Parser {
public:
    Parser(std::string_view src, Expression::Impl& out)
        : lexer_(src), impl_(out) {
        advance();
    }

    void run() {
        impl_.root = parse_sum();
        if (cur_.kind != Token::Kind::end) {
            throw ParseError("unexpected trailing input", cur_.offset);
        }
    }

private:
    using Node = Expression::Impl::Node;

    void advance() { cur_ = lexer_.next(); }

    int emit(Node n) {
        impl_.nodes.push_back(n);
        return static_cast<int>(impl_.nodes.size() - 1);
    }

    int parse_sum() {
        int lhs = parse_product();
        for (;;) {
            if (cur_.kind == Token::Kind::plus) {
                advance();
                const int rhs = parse_product();
                lhs = emit({Op::add, 0.0, -1, lhs, rhs});
            } else if (cur_.kind == Token::Kind::minus) {
                advance();
                const int rhs = parse_product();
                lhs = emit({Op::sub, 0.0, -1, lhs, rhs});
            } else {
                return lhs;
            }
        }
    }

    int parse_product() {
        int lhs = parse_unary();
        for (;;) {
            if (cur_.kind == Token::Kind::star) {
                advance();
                const int rhs = parse_unary();
                lhs = emit({Op::mul, 0.0, -1, lhs, rhs});
            } else if (cur_.kind == Token::Kind::slash) {
                advance();
                const int rhs = parse_unary();
                lhs = emit({Op::div, 0.0, -1, lhs, rhs});
            } else {
                return lhs;
            }
        }
    }

    // Unary minus binds looser than ^: -x^2 parses as -(x^2).
    int parse_unary() {
        if (cur_.kind == Token::Kind::minus) {
            advance();
            const int operand = parse_unary();
            return emit({Op::neg, 0.0, -1, operand, -1});
        }
        return parse_power();
    }

    // Right-associative; the exponent may carry its own unary minus (2^-3).
    int parse_power() {
        const int base = parse_primary();
        if (cur_.kind == Token::Kind::caret) {
            advance();
            const int exponent = parse_unary();
            return emit({Op::pow, 0.0, -1, base, exponent});
        }
        return base;
    }

    int parse_primary() {
        if (++depth_ > 200) {
            throw ParseError("expression nested too deeply", cur_.offset);
        }
        struct DepthGuard {
            int& d;
            ~DepthGuard() { --d; }
        } guard{depth_};

        switch (cur_.kind) {
        case Token::Kind::number: {
            const double v = cur_.number;
            advance();
            return emit({Op::number, v, -1, -1, -1});
        }
        case Token::Kind::lparen: {
            advance();
            const int inner = parse_sum();
            expect(Token::Kind::rparen, "expected ')'");
            return inner;
        }
        case Token::Kind::identifier:
            return parse_identifier();
        default:
            throw ParseError("expected operand", cur_.offset);
        }
    }

    int parse_identifier() {
        const std::string_view name = cur_.text;
        const std::size_t at = cur_.offset;
        advance();

        if (cur_.kind == Token::Kind::lparen) {
            for (const FunctionInfo& fn : k_functions) {
                if (name == fn.name) return parse_call(fn);
            }
            throw ParseError("unknown function '" + std::string(name) + "'",
                             at);
        }

        if (name == "pi") {
            return emit({Op::number, std::numbers::pi, -1, -1, -1});
        }
        if (name == "e") {
            return emit({Op::number, std::numbers::e, -1, -1, -1});
        }
        for (std::size_t i = 0; i < impl_.variables.size(); ++i) {
            if (name == impl_.variables[i]) {
                Node n{Op::variable, 0.0, static_cast<int>(i), -1, -1};
                return emit(n);
            }
        }
        throw ParseError("unknown identifier '" + std::string(name) + "'", at);
    }

    int parse_call(const FunctionInfo& fn) {
        expect(Token::Kind::lparen, "expected '('");
        const int first = parse_sum();
        int second = -1;
        if (fn.arity == 2) {
            expect(Token::Kind::comma, "expected ','");
            second = parse_sum();
        }
        expect(Token::Kind::rparen, "expected ')'");
        return emit({fn.op, 0.0, -1, first, second});
    }

    void expect(Token::Kind kind, const char* message) {
        if (cur_.kind != kind) throw ParseError(message, cur_.offset);
        advance();
    }

    Lexer lexer_;
    Token cur_{Token::Kind::end, 0};
    Expression::Impl& impl_;
    int depth_ = 0;
};

std::string format_number(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

// Precedence levels used by the printer; parentheses are emitted whenever a
// child's level is below the minimum its position requires.
constexpr int k_prec_add = 10;
constexpr int k_prec_mul = 20;
constexpr int k_prec_neg = 30;
constexpr int k_prec_pow = 40;
constexpr int k_prec_atom = 100;

void print_node(const Expression::Impl& impl, int i, int min_prec,
                std::string& out) {
    const auto& n = impl.nodes[static_cast<std::size_t>(i)];

    const auto binary = [&](const char* sym, int prec) {
        const bool parens = prec < min_prec;
        if (parens) out += '(';
        print_node(impl, n.lhs, prec, out);
        out += sym;
        print_node(impl, n.rhs, prec + 1, out);
        if (parens) out += ')';
    };

    switch (n.op) {
    case Op::number:
        out += format_number(n.value);
        return;
    case Op::variable:
        out += impl.variables[static_cast<std::size_t>(n.var)];
        return;
    case Op::add: binary(" + ", k_prec_add); return;
    case Op::sub: binary(" - ", k_prec_add); return;
    case Op::mul: binary("*", k_prec_mul); return;
    case Op::div: binary("/", k_prec_mul); return;
    case Op::pow: {
        const bool parens = k_prec_pow < min_prec;
        if (parens) out += '(';
        print_node(impl, n.lhs, k_prec_pow + 1, out);
        out += '^';
        print_node(impl, n.rhs, k_prec_neg, out); // right-assoc, allows 2^-3
        if (parens) out += ')';
        return;
    }
    case Op::neg: {
        const bool parens = k_prec_neg < min_prec;
        if (parens) out += '(';
        out += '-';
        print_node(impl, n.lhs, k_prec_neg + 1, out);
        if (parens) out += ')';
        return;
    }
    case Op::call_sin:
    case Op::call_cos:
    case Op::call_exp:
    case Op::call_log:
    case Op::call_sqrt:
    case Op::call_abs:
    case Op::call_pow: {
        for (const FunctionInfo& fn : k_functions) {
            if (fn.op == n.op) {
                out += fn.name;
                break;
            }
        }
        out += '(';
        print_node(impl, n.lhs, 0, out);
        if (n.rhs >= 0) {
            out += ", ";
            print_node(impl, n.rhs, 0, out);
        }
        out += ')';
        return;
    }
    }
}

bool nodes_equal(const Expression::Impl& a, int ia, const Expression::Impl& b,
                 int ib) {
    const auto& na = a.nodes[static_cast<std::size_t>(ia)];
    const auto& nb = b.nodes[static_cast<std::size_t>(ib)];
    if (na.op != nb.op || na.var != nb.var) return false;
    if (na.op == Op::number) {
        // bit comparison: round-tripping must preserve the exact value
        return na.value == nb.value ||
               (std::isnan(na.value) && std::isnan(nb.value));
    }
    if ((na.lhs >= 0) != (nb.lhs >= 0)) return false;
    if (na.lhs >= 0 && !nodes_equal(a, na.lhs, b, nb.lhs)) return false;
    if ((na.rhs >= 0) != (nb.rhs >= 0)) return false;
    if (na.rhs >= 0 && !nodes_equal(a, na.rhs, b, nb.rhs)) return false;
    return true;
}

} // namespace

Expression Expression::parse(std::string_view src,
                             std::vector<std::string> variables) {
    if (src.empty()) throw ParseError("empty expression", 0);
    auto impl = std::make_shared<Impl>();
    impl->variables = std::move(variables);
    Parser parser(src, *impl);
    parser.run();
    return Expression(std::move(impl));
}

double Expression::eval(std::span<const double> values) const {
    if (values.size() != impl_->variables.size()) {
        throw EvalError("binding count does not match declared variables");
    }
    return impl_->eval_node(impl_->root, values);
}

double Expression::eval(const std::map<std::string, double>& bindings) const {
    std::vector<double> values;
    values.reserve(impl_->variables.size());
    for (const std::string& name : impl_->variables) {
        const auto it = bindings.find(name);
        if (it == bindings.end()) {
            throw EvalError("missing binding for variable '" + name + "'");
        }
        values.push_back(it->second);
    }
    return impl_->eval_node(impl_->root, values);
}

const std::vector<std::string>& Expression::variables() const noexcept {
    return impl_->variables;
}

std::string Expression::str() const {
    std::string out;
    print_node(*impl_, impl_->root, 0, out);
    return out;
}

bool structurally_equal(const Expression& a, const Expression& b) {
    if (a.impl_->variables != b.impl_->variables) return false;
    return nodes_equal(*a.impl_, a.impl_->root, *b.impl_, b.impl_->root);
}

RealFunction to_function(const Expression& e) {
    if (e.variables().size() != 1) {
        throw DomainError("to_function requires a one-variable expression");
    }
    return [e](double x) { return e.eval(std::span<const double>(&x, 1)); };
}

} // namespace pcalc
