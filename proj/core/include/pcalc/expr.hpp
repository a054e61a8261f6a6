#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pcalc/fp.hpp"

namespace pcalc {

/// A parsed closed-form real function given as text.
///
/// Grammar: decimal literals, declared variables, binary + - * / ^
/// (^ right-associative, binding tighter than * and /, which bind tighter
/// than + and -; unary minus binds looser than ^, so -x^2 == -(x^2)),
/// calls of sin, cos, exp, log, sqrt, abs, pow, and the constants pi and e.
///
/// Expressions are immutable after parse and evaluation is pure, so they can
/// be shared freely across threads. Arithmetic follows IEEE-754 double
/// semantics; NaN and infinities are returned, not trapped.
class Expression {
public:
    /// Parse `src` against a fixed set of variable names. Throws ParseError
    /// with a byte offset on malformed input or unknown identifiers.
    static Expression parse(std::string_view src,
                            std::vector<std::string> variables);

    /// Evaluate with values bound positionally to the declared variables.
    double eval(std::span<const double> values) const;

    /// Evaluate with named bindings; all declared variables must be covered.
    double eval(const std::map<std::string, double>& bindings) const;

    const std::vector<std::string>& variables() const noexcept;

    /// Render back to text. The result reparses to a structurally identical
    /// tree.
    std::string str() const;

    friend bool structurally_equal(const Expression& a, const Expression& b);

    struct Impl; ///< opaque parse tree

private:
    explicit Expression(std::shared_ptr<const Impl> impl)
        : impl_(std::move(impl)) {}

    std::shared_ptr<const Impl> impl_;
};

bool structurally_equal(const Expression& a, const Expression& b);

/// Adapt a one-variable expression to a plain callable.
RealFunction to_function(const Expression& e);

} // namespace pcalc
