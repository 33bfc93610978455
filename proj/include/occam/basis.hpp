#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "occam/error.hpp"
#include "occam/rational.hpp"

namespace occam {

inline constexpr int kMaxArity = 4;

/// How a basis maps argument units to an output unit.
enum class UnitRule : std::uint8_t {
    RequireDimensionless,    // sin, log, ...: inputs must be [0..0], output [0..0]
    RequireEqual,            // +, -: inputs must agree, output is that unit
    AddExponents,            // *
    SubtractExponents,       // /
    ScaleByLiteral,          // x^2, sqrt: exponents times a fixed rational
    ScaleByTunableConstant,  // x^c: exponent unknown until fitted, output wildcard
    WildcardOut,             // x*c, poly2, standalone constants
    Passthrough,             // x+c: the constant adopts the argument's unit
};

/// How a basis is rendered in (and recovered from) the canonical grammar.
enum class RenderStyle : std::uint8_t {
    Infix,         // a + b, a - b, a*b, a/b
    AddConstant,   // a + c
    MulConstant,   // c*a
    PowLiteral,    // a^2
    PowConstant,   // a^c
    Call,          // name(args..., constants...)
    ConstantLeaf,  // c
};

/// Elementwise kernel: out[i] = f(args[0][i], ..., constants) for i < n.
using BasisKernel = void (*)(const double* const* args, const double* constants, double* out, std::size_t n);

struct BasisDef {
    std::string name;
    int arity = 1;
    int constant_slots = 0;
    UnitRule unit_rule = UnitRule::Passthrough;
    Rational unit_scale{1};  // only for ScaleByLiteral
    RenderStyle style = RenderStyle::Call;
    char symbol = 0;         // infix operator character
    int power = 0;           // PowLiteral exponent
    BasisKernel kernel = nullptr;
};

namespace kernels {

inline void add(const double* const* a, const double*, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = a[0][i] + a[1][i];
}
inline void sub(const double* const* a, const double*, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = a[0][i] - a[1][i];
}
inline void mul(const double* const* a, const double*, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = a[0][i] * a[1][i];
}
inline void div(const double* const* a, const double*, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = a[0][i] / a[1][i];
}
inline void add_const(const double* const* a, const double* c, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = a[0][i] + c[0];
}
inline void mul_const(const double* const* a, const double* c, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = c[0] * a[0][i];
}
inline void square(const double* const* a, const double*, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = a[0][i] * a[0][i];
}
inline void cube(const double* const* a, const double*, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = a[0][i] * a[0][i] * a[0][i];
}
inline void sqrt(const double* const* a, const double*, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = std::sqrt(a[0][i]);
}
inline void pow_const(const double* const* a, const double* c, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = std::pow(a[0][i], c[0]);
}
inline void poly2(const double* const* a, const double* c, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = c[0] * a[0][i] * a[0][i] + c[1] * a[0][i] + c[2];
}
inline void log(const double* const* a, const double*, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = std::log(a[0][i]);
}
inline void exp(const double* const* a, const double*, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = std::exp(a[0][i]);
}
inline void sin(const double* const* a, const double*, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = std::sin(a[0][i]);
}
inline void cos(const double* const* a, const double*, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = std::cos(a[0][i]);
}
inline void constant(const double* const*, const double* c, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = c[0];
}

} // namespace kernels

/// Registry of basis definitions. Entries live in a deque so pointers handed
/// to expressions stay valid; a catalog must outlive everything built from it.
class BasisCatalog {
public:
    const BasisDef& add(BasisDef def) {
        if (def.arity < 0 || def.arity > kMaxArity) throw ValidationError("basis '" + def.name + "' has unsupported arity");
        if (def.constant_slots < 0) throw ValidationError("basis '" + def.name + "' has negative constant slots");
        if (!def.kernel) throw ValidationError("basis '" + def.name + "' has no kernel");
        if (find(def.name)) throw ValidationError("duplicate basis '" + def.name + "'");
        return defs_.emplace_back(std::move(def));
    }

    void alias(std::string alias_name, std::string_view target) {
        if (!find(target)) throw ValidationError("alias target '" + std::string(target) + "' unknown");
        aliases_.emplace_back(std::move(alias_name), std::string(target));
    }

    const BasisDef* find(std::string_view name) const {
        for (const auto& d : defs_)
            if (d.name == name) return &d;
        for (const auto& [a, t] : aliases_)
            if (a == name) return find(t);
        return nullptr;
    }

    const BasisDef& at(std::string_view name) const {
        if (const auto* d = find(name)) return *d;
        throw ValidationError("unknown basis '" + std::string(name) + "'");
    }

    const std::deque<BasisDef>& entries() const noexcept { return defs_; }

    /// The built-in bases. Static storage; safe to reference for the program lifetime.
    static const BasisCatalog& builtin();

private:
    std::deque<BasisDef> defs_;
    std::vector<std::pair<std::string, std::string>> aliases_;
};

inline const BasisCatalog& BasisCatalog::builtin() {
    static const BasisCatalog catalog = [] {
        BasisCatalog c;
        using R = UnitRule;
        using S = RenderStyle;
        c.add({"+", 2, 0, R::RequireEqual, 1, S::Infix, '+', 0, kernels::add});
        c.add({"-", 2, 0, R::RequireEqual, 1, S::Infix, '-', 0, kernels::sub});
        c.add({"*", 2, 0, R::AddExponents, 1, S::Infix, '*', 0, kernels::mul});
        c.add({"/", 2, 0, R::SubtractExponents, 1, S::Infix, '/', 0, kernels::div});
        c.add({"x+c", 1, 1, R::Passthrough, 1, S::AddConstant, 0, 0, kernels::add_const});
        c.add({"x*c", 1, 1, R::WildcardOut, 1, S::MulConstant, 0, 0, kernels::mul_const});
        c.add({"x^2", 1, 0, R::ScaleByLiteral, 2, S::PowLiteral, 0, 2, kernels::square});
        c.add({"x^3", 1, 0, R::ScaleByLiteral, 3, S::PowLiteral, 0, 3, kernels::cube});
        c.add({"sqrt", 1, 0, R::ScaleByLiteral, Rational(1, 2), S::Call, 0, 0, kernels::sqrt});
        c.add({"x^c", 1, 1, R::ScaleByTunableConstant, 1, S::PowConstant, 0, 0, kernels::pow_const});
        c.add({"poly2", 1, 3, R::WildcardOut, 1, S::Call, 0, 0, kernels::poly2});
        c.add({"log", 1, 0, R::RequireDimensionless, 1, S::Call, 0, 0, kernels::log});
        c.add({"exp", 1, 0, R::RequireDimensionless, 1, S::Call, 0, 0, kernels::exp});
        c.add({"sin", 1, 0, R::RequireDimensionless, 1, S::Call, 0, 0, kernels::sin});
        c.add({"cos", 1, 0, R::RequireDimensionless, 1, S::Call, 0, 0, kernels::cos});
        c.add({"c", 0, 1, R::WildcardOut, 1, S::ConstantLeaf, 0, 0, kernels::constant});
        c.alias("x*y", "*");
        c.alias("x/y", "/");
        c.alias("x+y", "+");
        c.alias("x-y", "-");
        c.alias("x.c", "x*c");
        c.alias("c0*x^2+c1*x+c2", "poly2");
        return c;
    }();
    return catalog;
}

/// Ordered stack of basis layers over named inputs. Layer d may consume the
/// inputs and the outputs of every earlier layer, so expression depth is at
/// most depth().
class BasisLibrary {
public:
    BasisLibrary() = default;
    BasisLibrary(std::vector<std::string> inputs, std::vector<std::vector<const BasisDef*>> layers, std::size_t outputs = 1)
        : inputs_(std::move(inputs)), layers_(std::move(layers)), outputs_(outputs) {
        if (inputs_.empty()) throw ValidationError("library needs at least one input variable");
        if (layers_.empty()) throw ValidationError("library needs at least one layer");
        if (outputs_ == 0) throw ValidationError("library needs at least one output");
        for (std::size_t d = 0; d < layers_.size(); ++d) {
            if (layers_[d].empty()) throw ValidationError("library layer " + std::to_string(d) + " is empty");
            for (const auto* b : layers_[d])
                if (!b) throw ValidationError("library layer " + std::to_string(d) + " has a null basis");
        }
    }

    /// Parses a whitespace-separated basis list ("+ - * / x+c x*c") repeated `depth` times.
    static BasisLibrary from_string(std::string_view bases, int depth, std::vector<std::string> inputs,
                                    const BasisCatalog& catalog = BasisCatalog::builtin()) {
        if (depth < 1) throw ValidationError("library depth must be >= 1");
        std::vector<const BasisDef*> layer;
        std::istringstream in{std::string(bases)};
        for (std::string tok; in >> tok;) layer.push_back(&catalog.at(tok));
        if (layer.empty()) throw ValidationError("basis list is empty");
        return BasisLibrary(std::move(inputs), std::vector(static_cast<std::size_t>(depth), layer));
    }

    static BasisLibrary from_layers(const std::vector<std::vector<std::string>>& names, std::vector<std::string> inputs,
                                    const BasisCatalog& catalog = BasisCatalog::builtin()) {
        std::vector<std::vector<const BasisDef*>> layers;
        for (const auto& l : names) {
            auto& layer = layers.emplace_back();
            for (const auto& n : l) layer.push_back(&catalog.at(n));
        }
        return BasisLibrary(std::move(inputs), std::move(layers));
    }

    const std::vector<std::string>& inputs() const noexcept { return inputs_; }
    std::size_t num_inputs() const noexcept { return inputs_.size(); }
    std::size_t depth() const noexcept { return layers_.size(); }
    std::size_t outputs() const noexcept { return outputs_; }
    const std::vector<const BasisDef*>& layer(std::size_t d) const { return layers_.at(d); }
    const std::vector<std::vector<const BasisDef*>>& layers() const noexcept { return layers_; }

    std::size_t max_layer_width() const noexcept {
        std::size_t b = 0;
        for (const auto& l : layers_) b = std::max(b, l.size());
        return b;
    }

    /// Fingerprint of the library shape; checkpoints refuse to load against a different one.
    std::uint64_t hash() const noexcept {
        std::uint64_t h = 1469598103934665603ULL;
        auto mix = [&h](std::string_view s) {
            for (unsigned char ch : s) h = (h ^ ch) * 1099511628211ULL;
            h = (h ^ 0xff) * 1099511628211ULL;
        };
        for (const auto& i : inputs_) mix(i);
        mix("|");
        for (const auto& l : layers_) {
            for (const auto* b : l) mix(b->name);
            mix("/");
        }
        mix(std::to_string(outputs_));
        return h;
    }

    /// Same layers over a different set of inputs.
    BasisLibrary with_inputs(std::vector<std::string> inputs) const { return BasisLibrary(std::move(inputs), layers_, outputs_); }

private:
    std::vector<std::string> inputs_;
    std::vector<std::vector<const BasisDef*>> layers_;
    std::size_t outputs_ = 1;
};

} // namespace occam
