#pragma once

#include <map>
#include <string>
#include <vector>

#include "occam/basis.hpp"
#include "occam/error.hpp"
#include "occam/expression.hpp"
#include "occam/rational.hpp"

namespace occam {

enum class UnitTag : std::uint8_t { Concrete, Mismatch, Wildcard };

/// Exponent vector over a UnitSpec's base units, or one of the two special
/// outcomes: Mismatch (poison, absorbs everything) and Wildcard (any unit).
struct UnitVector {
    UnitTag tag = UnitTag::Concrete;
    std::vector<Rational> exponents;

    static UnitVector concrete(std::vector<Rational> e) { return {UnitTag::Concrete, std::move(e)}; }
    static UnitVector dimensionless(std::size_t u) { return {UnitTag::Concrete, std::vector<Rational>(u)}; }
    static UnitVector mismatch() { return {UnitTag::Mismatch, {}}; }
    static UnitVector wildcard() { return {UnitTag::Wildcard, {}}; }

    bool is_concrete() const noexcept { return tag == UnitTag::Concrete; }
    bool is_mismatch() const noexcept { return tag == UnitTag::Mismatch; }
    bool is_wildcard() const noexcept { return tag == UnitTag::Wildcard; }
    bool is_dimensionless() const {
        if (!is_concrete()) return false;
        for (auto e : exponents)
            if (!(e == Rational(0))) return false;
        return true;
    }

    std::string to_string() const {
        if (is_mismatch()) return "mismatch";
        if (is_wildcard()) return "wildcard";
        std::string s = "[";
        for (std::size_t i = 0; i < exponents.size(); ++i) s += (i ? "," : "") + exponents[i].to_string();
        return s + "]";
    }

    friend bool operator==(const UnitVector& a, const UnitVector& b) {
        return a.tag == b.tag && (a.tag != UnitTag::Concrete || a.exponents == b.exponents);
    }
};

struct UnitSpec {
    std::vector<std::string> unit_names;
    std::map<std::string, UnitVector> variables;
    double w_units = 100.0;

    UnitSpec() = default;
    UnitSpec(std::vector<std::string> names, double weight = 100.0) : unit_names(std::move(names)), w_units(weight) {}

    /// Declares a variable's unit from double exponents (must be short decimals).
    UnitSpec& set(const std::string& variable, const std::vector<double>& exponents) {
        if (exponents.size() != unit_names.size())
            throw ValidationError("variable '" + variable + "' has " + std::to_string(exponents.size()) + " exponents, expected " +
                                  std::to_string(unit_names.size()));
        std::vector<Rational> r;
        for (double e : exponents) r.push_back(Rational::from_double(e));
        variables[variable] = UnitVector::concrete(std::move(r));
        return *this;
    }

    const UnitVector& unit_of(const std::string& variable) const {
        auto it = variables.find(variable);
        if (it == variables.end()) throw ValidationError("no unit declared for variable '" + variable + "'");
        return it->second;
    }

    bool has(const std::string& variable) const { return variables.count(variable) != 0; }
};

namespace detail {

inline UnitVector combine(const BasisDef& b, const UnitVector* args, std::size_t u) {
    for (int a = 0; a < b.arity; ++a)
        if (args[a].is_mismatch()) return UnitVector::mismatch();
    switch (b.unit_rule) {
    case UnitRule::RequireDimensionless:
        for (int a = 0; a < b.arity; ++a)
            if (args[a].is_concrete() && !args[a].is_dimensionless()) return UnitVector::mismatch();
        return UnitVector::dimensionless(u);
    case UnitRule::RequireEqual: {
        const UnitVector* concrete = nullptr;
        for (int a = 0; a < b.arity; ++a) {
            if (args[a].is_wildcard()) continue;
            if (concrete && !(*concrete == args[a])) return UnitVector::mismatch();
            concrete = &args[a];
        }
        return concrete ? *concrete : UnitVector::wildcard();
    }
    case UnitRule::AddExponents:
    case UnitRule::SubtractExponents: {
        for (int a = 0; a < b.arity; ++a)
            if (args[a].is_wildcard()) return UnitVector::wildcard();
        UnitVector out = args[0];
        for (int a = 1; a < b.arity; ++a)
            for (std::size_t k = 0; k < u; ++k)
                out.exponents[k] = b.unit_rule == UnitRule::AddExponents ? out.exponents[k] + args[a].exponents[k]
                                                                         : out.exponents[k] - args[a].exponents[k];
        return out;
    }
    case UnitRule::ScaleByLiteral: {
        if (args[0].is_wildcard()) return UnitVector::wildcard();
        UnitVector out = args[0];
        for (auto& e : out.exponents) e = e * b.unit_scale;
        return out;
    }
    case UnitRule::ScaleByTunableConstant:
    case UnitRule::WildcardOut: return UnitVector::wildcard();
    case UnitRule::Passthrough: return b.arity ? args[0] : UnitVector::wildcard();
    }
    return UnitVector::mismatch();
}

} // namespace detail

/// Bottom-up unit outcome of every root. Depends only on structure and spec.
inline std::vector<UnitVector> propagate_units(const Expression& expr, const UnitSpec& spec) {
    const std::size_t u = spec.unit_names.size();
    std::vector<UnitVector> unit(expr.nodes().size());
    for (std::size_t i = 0; i < expr.nodes().size(); ++i) {
        const Node& n = expr.nodes()[i];
        if (n.kind == NodeKind::Variable) {
            unit[i] = spec.unit_of(expr.variables().at(static_cast<std::size_t>(n.variable)));
        } else if (n.kind == NodeKind::Constant) {
            unit[i] = UnitVector::wildcard();
        } else {
            UnitVector args[kMaxArity];
            for (int a = 0; a < n.basis->arity; ++a) args[a] = unit[static_cast<std::size_t>(n.args[a])];
            unit[i] = detail::combine(*n.basis, args, u);
        }
    }
    std::vector<UnitVector> out;
    for (auto r : expr.roots()) out.push_back(unit[static_cast<std::size_t>(r)]);
    return out;
}

inline bool units_consistent(const UnitVector& root, const UnitVector& target) {
    if (root.is_mismatch()) return false;
    if (root.is_wildcard()) return true;
    return target.is_wildcard() || root == target;
}

/// True iff root `root_index` is Wildcard or equals the target's declared unit.
inline bool units_consistent(const Expression& expr, const UnitSpec& spec, const UnitVector& target, std::size_t root_index = 0) {
    return units_consistent(propagate_units(expr, spec).at(root_index), target);
}

inline bool units_consistent(const Expression& expr, const UnitSpec& spec, const std::string& target, std::size_t root_index = 0) {
    return units_consistent(expr, spec, spec.unit_of(target), root_index);
}

} // namespace occam
