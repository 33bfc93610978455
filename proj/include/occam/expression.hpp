#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "occam/basis.hpp"
#include "occam/error.hpp"
#include "occam/matrix.hpp"

namespace occam {

enum class NodeKind : std::uint8_t { Variable, Constant, Basis };

struct Node {
    NodeKind kind = NodeKind::Variable;
    std::int32_t variable = -1;       // Variable: input column
    std::int32_t first_constant = 0;  // Constant / Basis: offset into the constants vector
    const BasisDef* basis = nullptr;  // Basis only
    std::array<std::int32_t, kMaxArity> args{};
};

struct ComplexityReport {
    int activation_count = 0;  // basis nodes
    int constant_count = 0;    // tunable constants
    int total() const noexcept { return activation_count + constant_count; }
    friend bool operator==(const ComplexityReport&, const ComplexityReport&) = default;
};

/// A rooted DAG of basis applications over input variables and tunable
/// constants. Nodes are stored in topological order (arguments precede their
/// users); constants are a flat vector filled in node order. Immutable once
/// built, so it can be shared and evaluated from many threads.
class Expression {
public:
    using Names = std::shared_ptr<const std::vector<std::string>>;

    Expression() = default;
    explicit Expression(Names variables) : variables_(std::move(variables)) {}
    explicit Expression(std::vector<std::string> variables)
        : variables_(std::make_shared<const std::vector<std::string>>(std::move(variables))) {}

    // --- building -------------------------------------------------------

    std::int32_t add_variable(std::size_t index) {
        if (index >= num_inputs()) throw ValidationError("variable index " + std::to_string(index) + " out of range");
        Node n;
        n.kind = NodeKind::Variable;
        n.variable = static_cast<std::int32_t>(index);
        return push(n, 0);
    }

    std::int32_t add_constant(double value) {
        Node n;
        n.kind = NodeKind::Constant;
        n.first_constant = static_cast<std::int32_t>(constants_.size());
        constants_.push_back(value);
        return push(n, 0);
    }

    /// Adds a basis node. Missing constant values default to 1.0.
    std::int32_t add_basis(const BasisDef& def, std::span<const std::int32_t> args, std::span<const double> constants = {}) {
        if (static_cast<int>(args.size()) != def.arity)
            throw ValidationError("basis '" + def.name + "' expects " + std::to_string(def.arity) + " arguments");
        if (def.arity == 0 && def.style == RenderStyle::ConstantLeaf)
            return add_constant(constants.empty() ? 1.0 : constants.front());
        Node n;
        n.kind = NodeKind::Basis;
        n.basis = &def;
        n.first_constant = static_cast<std::int32_t>(constants_.size());
        int depth = 0;
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (args[i] < 0 || args[i] >= static_cast<std::int32_t>(nodes_.size()))
                throw ValidationError("argument refers to a node that does not precede it");
            n.args[i] = args[i];
            depth = std::max(depth, depths_[static_cast<std::size_t>(args[i])]);
        }
        for (int c = 0; c < def.constant_slots; ++c)
            constants_.push_back(static_cast<std::size_t>(c) < constants.size() ? constants[static_cast<std::size_t>(c)] : 1.0);
        return push(n, depth + 1);
    }

    void add_root(std::int32_t node) {
        if (node < 0 || node >= static_cast<std::int32_t>(nodes_.size())) throw ValidationError("root out of range");
        roots_.push_back(node);
    }

    void set_root(std::size_t i, std::int32_t node) {
        if (node < 0 || node >= static_cast<std::int32_t>(nodes_.size())) throw ValidationError("root out of range");
        roots_.at(i) = node;
    }

    // --- inspection -----------------------------------------------------

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const std::vector<std::int32_t>& roots() const noexcept { return roots_; }
    const std::vector<double>& constants() const noexcept { return constants_; }
    std::vector<double>& mutable_constants() noexcept { return constants_; }
    void set_constants(std::vector<double> c) {
        if (c.size() != constants_.size()) throw ValidationError("constants length mismatch");
        constants_ = std::move(c);
    }

    std::size_t num_inputs() const noexcept { return variables_ ? variables_->size() : 0; }
    const std::vector<std::string>& variables() const {
        static const std::vector<std::string> none;
        return variables_ ? *variables_ : none;
    }
    const Names& variable_names() const noexcept { return variables_; }

    /// Nesting depth of basis applications along the deepest root-to-leaf path.
    int depth() const noexcept {
        int d = 0;
        for (auto r : roots_) d = std::max(d, depths_[static_cast<std::size_t>(r)]);
        return d;
    }
    int node_depth(std::int32_t node) const { return depths_.at(static_cast<std::size_t>(node)); }

    /// Nodes reachable from the roots, ascending.
    std::vector<std::int32_t> reachable() const {
        std::vector<char> mark(nodes_.size(), 0);
        for (auto r : roots_) mark[static_cast<std::size_t>(r)] = 1;
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            if (!mark[i] || nodes_[i].kind != NodeKind::Basis) continue;
            for (int a = 0; a < nodes_[i].basis->arity; ++a) mark[static_cast<std::size_t>(nodes_[i].args[a])] = 1;
        }
        std::vector<std::int32_t> out;
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (mark[i]) out.push_back(static_cast<std::int32_t>(i));
        return out;
    }

    /// Text key identifying the structure (bases, wiring, variables) but not
    /// constant values. Equal keys imply identical evaluation for equal constants.
    std::string structure_key() const {
        std::string key;
        key.reserve(nodes_.size() * 8);
        for (const auto& n : nodes_) {
            switch (n.kind) {
            case NodeKind::Variable: key += 'v' + std::to_string(n.variable); break;
            case NodeKind::Constant: key += 'c'; break;
            case NodeKind::Basis:
                key += n.basis->name;
                key += '(';
                for (int a = 0; a < n.basis->arity; ++a) {
                    if (a) key += ',';
                    key += std::to_string(n.args[a]);
                }
                key += ')';
                break;
            }
            key += ';';
        }
        key += "->";
        for (auto r : roots_) key += std::to_string(r) + ',';
        return key;
    }

private:
    std::int32_t push(const Node& n, int depth) {
        nodes_.push_back(n);
        depths_.push_back(depth);
        return static_cast<std::int32_t>(nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
    std::vector<int> depths_;
    std::vector<std::int32_t> roots_;
    std::vector<double> constants_;
    Names variables_;
};

/// Structure-only complexity: α = basis nodes, γ = tunable constants.
inline ComplexityReport complexity(const Expression& expr) {
    ComplexityReport r;
    for (auto i : expr.reachable()) {
        const auto& n = expr.nodes()[static_cast<std::size_t>(i)];
        if (n.kind == NodeKind::Basis) {
            ++r.activation_count;
            r.constant_count += n.basis->constant_slots;
        } else if (n.kind == NodeKind::Constant) {
            ++r.constant_count;
        }
    }
    return r;
}

/// Reusable evaluation workspace. Not thread-safe; use one per thread.
class Evaluator {
public:
    /// Evaluates root `root_index` over all rows of `inputs` (N×K_x) into `out`.
    /// Domain errors surface as NaN/inf in the affected rows; nothing throws.
    void evaluate_root(const Expression& expr, const Matrix& inputs, std::span<const double> constants, std::size_t root_index,
                       std::span<double> out) {
        const std::size_t n = inputs.rows();
        run(expr, inputs, constants);
        const double* src = ptrs_[static_cast<std::size_t>(expr.roots().at(root_index))];
        std::copy(src, src + n, out.begin());
    }

    /// Pointer to root values valid until the next call.
    const double* evaluate_root(const Expression& expr, const Matrix& inputs, std::span<const double> constants,
                                std::size_t root_index = 0) {
        run(expr, inputs, constants);
        return ptrs_[static_cast<std::size_t>(expr.roots().at(root_index))];
    }

private:
    void run(const Expression& expr, const Matrix& inputs, std::span<const double> constants) {
        if (inputs.cols() != expr.num_inputs())
            throw ValidationError("input column count " + std::to_string(inputs.cols()) + " does not match expression inputs " +
                                  std::to_string(expr.num_inputs()));
        if (constants.size() != expr.constants().size()) throw ValidationError("constants length mismatch");
        const std::size_t n = inputs.rows();
        const auto& nodes = expr.nodes();
        std::size_t computed = 0;
        for (const auto& node : nodes)
            if (node.kind != NodeKind::Variable) ++computed;
        buffer_.resize(computed * n);
        ptrs_.resize(nodes.size());
        std::size_t slot = 0;
        std::array<const double*, kMaxArity> args{};
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto& node = nodes[i];
            if (node.kind == NodeKind::Variable) {
                ptrs_[i] = inputs.col(static_cast<std::size_t>(node.variable)).data();
                continue;
            }
            double* dst = buffer_.data() + slot * n;
            ++slot;
            const double* c = constants.data() + node.first_constant;
            if (node.kind == NodeKind::Constant) {
                std::fill(dst, dst + n, *c);
            } else {
                for (int a = 0; a < node.basis->arity; ++a) args[static_cast<std::size_t>(a)] = ptrs_[static_cast<std::size_t>(node.args[a])];
                node.basis->kernel(args.data(), c, dst, n);
            }
            ptrs_[i] = dst;
        }
    }

    std::vector<double> buffer_;
    std::vector<const double*> ptrs_;
};

/// Evaluates every root: returns an N×K_y matrix.
inline Matrix evaluate(const Expression& expr, const Matrix& inputs, std::span<const double> constants) {
    Evaluator ev;
    Matrix out(inputs.rows(), expr.roots().size());
    for (std::size_t r = 0; r < expr.roots().size(); ++r) ev.evaluate_root(expr, inputs, constants, r, out.col(r));
    return out;
}

inline Matrix evaluate(const Expression& expr, const Matrix& inputs) { return evaluate(expr, inputs, expr.constants()); }

/// True when at least half of the values are NaN or infinite.
inline bool mostly_non_finite(std::span<const double> values) {
    std::size_t bad = 0;
    for (double v : values)
        if (!std::isfinite(v)) ++bad;
    return values.empty() || 2 * bad >= values.size();
}

} // namespace occam
