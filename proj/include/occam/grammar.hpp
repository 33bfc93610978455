#pragma once

// Canonical infix grammar for expressions.
//
//   expr     := term (('+' | '-') term)*
//   term     := unary (('*' | '/') unary)*
//   unary    := '-' unary | power
//   power    := primary ('^' ['-'] (number | placeholder))?
//   primary  := number | variable | placeholder | name '(' expr (',' expr)* ')' | '(' expr ')'
//
// Multiplication is always explicit. Placeholders (`c`, `c0`, `c1`, ...) that
// are not declared variables become tunable constants initialised to 1.
// Literal operands select the constant-carrying bases: `a + 2` is x+c,
// `2*a` is x*c, `a^1.7` is x^c, while `a^2` / `a^3` map to the fixed powers.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "occam/basis.hpp"
#include "occam/error.hpp"
#include "occam/expression.hpp"

namespace occam {

inline std::string format_number(double v, int precision) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, precision);
    return std::string(buf, res.ptr);
}

namespace detail {

enum Prec : int { kAdditive = 1, kMultiplicative = 2, kUnary = 3, kPower = 4, kAtom = 5 };

struct Rendered {
    std::string text;
    int prec = kAtom;
};

class Printer {
public:
    Printer(const Expression& e, std::span<const double> c, int precision) : expr_(e), constants_(c), precision_(precision) {
        cache_.resize(e.nodes().size());
    }

    const Rendered& render(std::int32_t i) {
        auto& slot = cache_[static_cast<std::size_t>(i)];
        if (!slot) slot = build(i);
        return *slot;
    }

private:
    Rendered number(double v) const {
        return {format_number(v, precision_), std::signbit(v) ? int(kUnary) : int(kAtom)};
    }

    static std::string wrap(const Rendered& r, bool parens) { return parens ? "(" + r.text + ")" : r.text; }

    Rendered build(std::int32_t i) {
        const Node& n = expr_.nodes()[static_cast<std::size_t>(i)];
        if (n.kind == NodeKind::Variable) return {expr_.variables().at(static_cast<std::size_t>(n.variable)), kAtom};
        const double* c = constants_.data() + n.first_constant;
        if (n.kind == NodeKind::Constant) return number(c[0]);

        const BasisDef& b = *n.basis;
        auto arg = [&](int k) -> Rendered { return render(n.args[k]); };
        switch (b.style) {
        case RenderStyle::Infix: {
            const Rendered l = arg(0);
            const Rendered r = arg(1);
            switch (b.symbol) {
            case '+': return {wrap(l, l.prec < kAdditive) + " + " + wrap(r, r.prec < kAdditive), kAdditive};
            case '-': return {wrap(l, l.prec < kAdditive) + " - " + wrap(r, r.prec <= kAdditive), kAdditive};
            case '*': return {wrap(l, l.prec < kMultiplicative) + "*" + wrap(r, r.prec <= kMultiplicative), kMultiplicative};
            default: return {wrap(l, l.prec < kMultiplicative) + "/" + wrap(r, r.prec <= kMultiplicative), kMultiplicative};
            }
        }
        case RenderStyle::AddConstant: {
            const Rendered a = arg(0);
            const std::string op = std::signbit(c[0]) ? " - " : " + ";
            return {wrap(a, a.prec < kAdditive) + op + format_number(std::fabs(c[0]), precision_), kAdditive};
        }
        case RenderStyle::MulConstant: {
            const Rendered a = arg(0);
            return {format_number(c[0], precision_) + "*" + wrap(a, a.prec < kMultiplicative), kMultiplicative};
        }
        case RenderStyle::PowLiteral: {
            const Rendered a = arg(0);
            return {wrap(a, a.prec < kAtom) + "^" + std::to_string(b.power), kPower};
        }
        case RenderStyle::PowConstant: {
            const Rendered a = arg(0);
            return {wrap(a, a.prec < kAtom) + "^" + format_number(c[0], precision_), kPower};
        }
        case RenderStyle::ConstantLeaf: return number(c[0]);
        case RenderStyle::Call: break;
        }
        std::string text = b.name + "(";
        for (int k = 0; k < b.arity; ++k) {
            if (k) text += ", ";
            text += arg(k).text;
        }
        for (int k = 0; k < b.constant_slots; ++k) {
            if (k || b.arity) text += ", ";
            text += format_number(c[k], precision_);
        }
        return {text + ")", kAtom};
    }

    const Expression& expr_;
    std::span<const double> constants_;
    int precision_;
    std::vector<std::optional<Rendered>> cache_;
};

} // namespace detail

/// Deterministic infix rendering of root `root` with `precision` significant digits.
inline std::string to_canonical_string(const Expression& expr, std::span<const double> constants, int precision = 6,
                                       std::size_t root = 0) {
    if (constants.size() != expr.constants().size()) throw ValidationError("constants length mismatch");
    detail::Printer p(expr, constants, precision);
    return p.render(expr.roots().at(root)).text;
}

inline std::string to_canonical_string(const Expression& expr, int precision = 6) {
    return to_canonical_string(expr, expr.constants(), precision);
}

namespace detail {

inline bool is_placeholder_name(std::string_view s) {
    if (s.empty() || s[0] != 'c') return false;
    for (std::size_t i = 1; i < s.size(); ++i)
        if (s[i] < '0' || s[i] > '9') return false;
    return true;
}

class Parser {
public:
    Parser(std::string_view text, const Expression::Names& vars, const BasisCatalog& catalog)
        : text_(text), catalog_(catalog), expr_(vars) {}

    Expression run() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
        Operand root = parse_expr();
        skip_ws();
        if (pos_ < text_.size()) {
            const char ch = text_[pos_];
            if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '(' || ch == '.' || ch == '_')
                throw ParseError("implicit multiplication is not supported; use '*'", pos_);
            throw ParseError(std::string("unexpected character '") + ch + "'", pos_);
        }
        expr_.add_root(materialize(root));
        return std::move(expr_);
    }

private:
    struct Operand {
        bool literal = false;
        double value = 0.0;
        std::int32_t node = -1;
    };

    static Operand lit(double v) { return {true, v, -1}; }
    static Operand node(std::int32_t n) { return {false, 0.0, n}; }

    std::int32_t materialize(const Operand& o) { return o.literal ? expr_.add_constant(o.value) : o.node; }

    std::int32_t apply(std::string_view basis, std::initializer_list<std::int32_t> args, std::initializer_list<double> consts = {}) {
        const std::vector<std::int32_t> a(args);
        const std::vector<double> c(consts);
        return expr_.add_basis(catalog_.at(basis), a, c);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char ch) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ch) {
            ++pos_;
            return true;
        }
        return false;
    }

    Operand parse_expr() {
        Operand lhs = parse_term();
        for (;;) {
            if (accept('+')) {
                Operand rhs = parse_term();
                if (!rhs.literal) lhs = lhs.literal ? node(apply("x+c", {rhs.node}, {lhs.value})) : node(apply("+", {lhs.node, rhs.node}));
                else lhs = node(apply("x+c", {materialize(lhs)}, {rhs.value}));
            } else if (accept('-')) {
                Operand rhs = parse_term();
                if (rhs.literal) lhs = node(apply("x+c", {materialize(lhs)}, {-rhs.value}));
                else lhs = node(apply("-", {materialize(lhs), rhs.node}));
            } else {
                return lhs;
            }
        }
    }

    Operand parse_term() {
        Operand lhs = parse_unary();
        for (;;) {
            if (accept('*')) {
                Operand rhs = parse_unary();
                if (lhs.literal) lhs = node(apply("x*c", {materialize(rhs)}, {lhs.value}));
                else if (rhs.literal) lhs = node(apply("x*c", {lhs.node}, {rhs.value}));
                else lhs = node(apply("*", {lhs.node, rhs.node}));
            } else if (accept('/')) {
                Operand rhs = parse_unary();
                const std::int32_t l = materialize(lhs);
                lhs = node(apply("/", {l, materialize(rhs)}));
            } else {
                return lhs;
            }
        }
    }

    Operand parse_unary() {
        if (accept('-')) {
            Operand inner = parse_unary();
            if (inner.literal) return lit(-inner.value);
            return node(apply("x*c", {inner.node}, {-1.0}));
        }
        return parse_power();
    }

    Operand parse_power() {
        Operand base = parse_primary();
        if (!accept('^')) return base;
        skip_ws();
        const std::size_t at = pos_;
        const bool negative = accept('-');
        skip_ws();
        double exponent = 0.0;
        bool is_literal_number = false;
        if (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
            exponent = parse_number();
            is_literal_number = true;
        } else {
            const std::string name = parse_identifier();
            if (name.empty() || !is_placeholder_name(name) || is_variable(name))
                throw ParseError("exponent must be a number or a constant placeholder", at);
            exponent = 1.0;
        }
        if (negative) exponent = -exponent;
        const std::int32_t b = materialize(base);
        if (is_literal_number && !negative && exponent == 2.0) return node(apply("x^2", {b}));
        if (is_literal_number && !negative && exponent == 3.0) return node(apply("x^3", {b}));
        return node(apply("x^c", {b}, {exponent}));
    }

    Operand parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("unexpected end of expression", pos_);
        const char ch = text_[pos_];
        if (ch == '(') {
            ++pos_;
            Operand inner = parse_expr();
            if (!accept(')')) throw ParseError("expected ')'", pos_);
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') return lit(parse_number());
        const std::size_t at = pos_;
        const std::string name = parse_identifier();
        if (name.empty()) throw ParseError(std::string("unexpected character '") + ch + "'", at);
        skip_ws();
        const bool call = pos_ < text_.size() && text_[pos_] == '(';
        if (call) {
            if (is_variable(name)) throw ParseError("'" + name + "' is a variable; implicit multiplication is not supported", at);
            return parse_call(name, at);
        }
        if (auto v = variable_index(name)) return node(expr_.add_variable(*v));
        if (is_placeholder_name(name)) return node(expr_.add_constant(1.0));
        throw ParseError("unknown symbol '" + name + "'", at);
    }

    Operand parse_call(const std::string& name, std::size_t at) {
        const BasisDef* def = catalog_.find(name);
        if (!def || def->style == RenderStyle::Infix || def->style == RenderStyle::ConstantLeaf)
            throw ParseError("unknown function '" + name + "'", at);
        accept('(');
        std::vector<Operand> args;
        if (!accept(')')) {
            do {
                args.push_back(parse_expr());
            } while (accept(','));
            if (!accept(')')) throw ParseError("expected ')' after arguments", pos_);
        }
        const auto given = args.size();
        const auto arity = static_cast<std::size_t>(def->arity);
        const auto slots = static_cast<std::size_t>(def->constant_slots);
        if (given != arity && given != arity + slots)
            throw ParseError("'" + name + "' expects " + std::to_string(arity) + " argument(s)", at);
        std::vector<std::int32_t> nodes;
        for (std::size_t k = 0; k < arity; ++k) nodes.push_back(materialize(args[k]));
        std::vector<double> consts;
        for (std::size_t k = arity; k < given; ++k) {
            if (!args[k].literal) throw ParseError("constant argument of '" + name + "' must be a number", at);
            consts.push_back(args[k].value);
        }
        return node(expr_.add_basis(*def, nodes, consts));
    }

    double parse_number() {
        const char* begin = text_.data() + pos_;
        const char* end = text_.data() + text_.size();
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(begin, end, v);
        if (ec != std::errc()) throw ParseError("malformed number", pos_);
        pos_ += static_cast<std::size_t>(ptr - begin);
        return v;
    }

    std::string parse_identifier() {
        const std::size_t start = pos_;
        if (pos_ < text_.size() && (std::isalpha(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
            while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
        }
        return std::string(text_.substr(start, pos_ - start));
    }

    std::optional<std::size_t> variable_index(std::string_view name) const {
        const auto& vars = expr_.variables();
        for (std::size_t i = 0; i < vars.size(); ++i)
            if (vars[i] == name) return i;
        return std::nullopt;
    }
    bool is_variable(std::string_view name) const { return variable_index(name).has_value(); }

    std::string_view text_;
    std::size_t pos_ = 0;
    const BasisCatalog& catalog_;
    Expression expr_;
};

} // namespace detail

/// Parses canonical infix text over the named variables.
inline Expression parse_expression(std::string_view text, const Expression::Names& variables,
                                   const BasisCatalog& catalog = BasisCatalog::builtin()) {
    return detail::Parser(text, variables, catalog).run();
}

inline Expression parse_expression(std::string_view text, std::vector<std::string> variables,
                                   const BasisCatalog& catalog = BasisCatalog::builtin()) {
    return parse_expression(text, std::make_shared<const std::vector<std::string>>(std::move(variables)), catalog);
}

/// Parses against a library's inputs; every basis used must occur in one of its layers.
inline Expression parse_expression(std::string_view text, const BasisLibrary& library,
                                   const BasisCatalog& catalog = BasisCatalog::builtin()) {
    Expression e = parse_expression(text, library.inputs(), catalog);
    for (const auto& n : e.nodes()) {
        if (n.kind != NodeKind::Basis) continue;
        bool found = false;
        for (const auto& layer : library.layers())
            for (const auto* b : layer) found = found || b == n.basis;
        if (!found) throw ParseError("basis '" + n.basis->name + "' is not in the library", 0);
    }
    return e;
}

} // namespace occam
