#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "occam/basis.hpp"
#include "occam/error.hpp"
#include "occam/expression.hpp"
#include "occam/parallel.hpp"
#include "occam/random.hpp"

namespace occam {

/// T·(1 + E·d/D): connection layer d (0 = nearest the inputs, D = output slots).
inline double effective_temperature(std::size_t d, double temperature, double equalization, std::size_t depth) {
    if (d > depth) throw ValidationError("layer index out of range");
    return temperature * (1.0 + equalization * static_cast<double>(d) / static_cast<double>(depth));
}

/// One chosen image per argument/output slot; -1 for slots the sample never reached.
using Connections = std::vector<std::int32_t>;

struct SampleBatch {
    std::vector<Expression> expressions;
    std::vector<double> log_probs;
    std::vector<Connections> provenance;

    std::size_t size() const noexcept { return expressions.size(); }
};

struct UpdateOptions {
    double max_step = 0.0;  // > 0 clips each weight change to ±max_step
};

/// Layered categorical distribution over expressions.
///
/// Images are numbered flat: inputs first, then the bases of layer 0, layer 1,
/// and so on. A basis in layer d draws each argument from every image below
/// it (inputs included), and each output slot draws from all images. Sampling
/// walks only the slots reachable from the outputs, so every expression's
/// probability is the product over the slots it actually uses.
class ProbNetwork {
public:
    ProbNetwork(BasisLibrary library, double temperature = 1.0, double equalization = 0.0)
        : library_(std::move(library)), temperature_(temperature), equalization_(equalization) {
        if (!(temperature_ > 0.0) || !std::isfinite(temperature_)) throw ValidationError("temperature must be positive");
        if (!(equalization_ >= 0.0)) throw ValidationError("equalization must be non-negative");
        const std::size_t depth = library_.depth();
        offset_.push_back(library_.num_inputs());
        for (std::size_t d = 0; d < depth; ++d) offset_.push_back(offset_.back() + library_.layer(d).size());
        for (std::size_t d = 0; d < depth; ++d) {
            for (std::size_t b = 0; b < library_.layer(d).size(); ++b) {
                first_arg_slot_.push_back(slot_layer_.size());
                image_basis_.push_back(library_.layer(d)[b]);
                for (int a = 0; a < library_.layer(d)[b]->arity; ++a) slot_layer_.push_back(d);
            }
        }
        first_output_slot_ = slot_layer_.size();
        for (std::size_t k = 0; k < library_.outputs(); ++k) slot_layer_.push_back(depth);
        names_ = std::make_shared<const std::vector<std::string>>(library_.inputs());
        weights_.resize(slot_layer_.size());
        for (std::size_t s = 0; s < weights_.size(); ++s) weights_[s].assign(offset_[slot_layer_[s]], 0.0);
        refresh();
    }

    const BasisLibrary& library() const noexcept { return library_; }
    double temperature() const noexcept { return temperature_; }
    double equalization() const noexcept { return equalization_; }
    std::size_t num_slots() const noexcept { return weights_.size(); }
    std::size_t num_images() const noexcept { return offset_.back(); }
    std::size_t slot_layer(std::size_t s) const { return slot_layer_.at(s); }
    std::size_t slot_width(std::size_t s) const { return weights_.at(s).size(); }
    std::size_t output_slot(std::size_t k) const { return first_output_slot_ + k; }

    double slot_temperature(std::size_t s) const {
        return effective_temperature(slot_layer_.at(s), temperature_, equalization_, library_.depth());
    }

    const std::vector<std::vector<double>>& weights() const noexcept { return weights_; }
    void set_weights(std::vector<std::vector<double>> w) {
        if (w.size() != weights_.size()) throw ValidationError("weight tensor count mismatch");
        for (std::size_t s = 0; s < w.size(); ++s)
            if (w[s].size() != weights_[s].size()) throw ValidationError("weight tensor shape mismatch at slot " + std::to_string(s));
        weights_ = std::move(w);
        refresh();
    }

    std::span<const double> probabilities(std::size_t slot) const { return probs_.at(slot); }

    /// Basis behind image g (nullptr for inputs).
    const BasisDef* image_basis(std::size_t g) const {
        return g < library_.num_inputs() ? nullptr : image_basis_.at(g - library_.num_inputs());
    }

    /// Argument slots of image g (empty for inputs).
    std::pair<std::size_t, std::size_t> arg_slots(std::size_t g) const {
        if (g < library_.num_inputs()) return {0, 0};
        const std::size_t i = g - library_.num_inputs();
        return {first_arg_slot_[i], first_arg_slot_[i] + static_cast<std::size_t>(image_basis_[i]->arity)};
    }

    /// Draws one connection set.
    Connections sample_connections(Rng& rng) const {
        Connections c(num_slots(), -1);
        std::vector<char> expanded(num_images(), 0);
        for (std::size_t k = 0; k < library_.outputs(); ++k) choose(output_slot(k), rng, c, expanded);
        return c;
    }

    /// Exact log-probability of a connection set; throws on a shape mismatch
    /// or when the set of decided slots is not exactly the reachable one.
    double log_probability(const Connections& c) const {
        if (c.size() != num_slots()) throw ValidationError("connection set has wrong length");
        std::vector<char> reached(num_slots(), 0);
        std::vector<std::size_t> stack;
        for (std::size_t k = 0; k < library_.outputs(); ++k) stack.push_back(output_slot(k));
        double lp = 0.0;
        std::vector<char> expanded(num_images(), 0);
        while (!stack.empty()) {
            const std::size_t s = stack.back();
            stack.pop_back();
            if (reached[s]) continue;
            reached[s] = 1;
            const auto g = c[s];
            if (g < 0 || static_cast<std::size_t>(g) >= slot_width(s)) throw ValidationError("slot " + std::to_string(s) + " has an invalid choice");
            lp += log_probs_[s][static_cast<std::size_t>(g)];
            if (expanded[static_cast<std::size_t>(g)]) continue;
            expanded[static_cast<std::size_t>(g)] = 1;
            auto [lo, hi] = arg_slots(static_cast<std::size_t>(g));
            for (std::size_t a = lo; a < hi; ++a) stack.push_back(a);
        }
        for (std::size_t s = 0; s < num_slots(); ++s)
            if (!reached[s] && c[s] != -1) throw ValidationError("slot " + std::to_string(s) + " is decided but unreachable");
        return lp;
    }

    /// Builds the expression a connection set describes. Shared images become
    /// shared DAG nodes; constants start at 1.
    Expression build(const Connections& c) const {
        Expression e(names());
        std::vector<std::int32_t> node(num_images(), -1);
        for (std::size_t k = 0; k < library_.outputs(); ++k) e.add_root(materialize(static_cast<std::size_t>(c.at(output_slot(k))), c, e, node));
        return e;
    }

    SampleBatch sample(std::size_t count, std::uint64_t seed, std::uint64_t epoch, std::size_t threads = 1) const {
        if (count == 0) throw ValidationError("sample count must be >= 1");
        SampleBatch batch;
        batch.provenance.resize(count);
        batch.log_probs.resize(count);
        batch.expressions.resize(count);
        parallel_for(count, threads, [&](std::size_t i) {
            Rng rng(seed, epoch, i);
            batch.provenance[i] = sample_connections(rng);
            batch.log_probs[i] = log_probability(batch.provenance[i]);
            batch.expressions[i] = build(batch.provenance[i]);
        });
        return batch;
    }

    SampleBatch sample(std::size_t count, Rng& rng) const { return sample(count, rng(), 0); }

    /// Gradient ascent on Σ_{i∈top} F_i·log p(i): top_q samples by fitness
    /// (desc), then complexity total (asc), then sample index. Non-finite
    /// fitnesses never enter the pool. Returns the selected indices.
    std::vector<std::size_t> update(const std::vector<Connections>& provenance, std::span<const double> fitness,
                                    std::span<const int> complexity_total, std::size_t top_q, double lr,
                                    const UpdateOptions& opt = {}) {
        if (top_q == 0) throw ValidationError("top_q must be >= 1");
        if (fitness.size() != provenance.size() || complexity_total.size() != provenance.size())
            throw ValidationError("update inputs have mismatched lengths");
        const auto top = select_top(fitness, complexity_total, top_q);
        if (lr == 0.0 || top.empty()) return top;
        std::vector<std::vector<double>> grad(weights_.size());
        for (std::size_t s = 0; s < weights_.size(); ++s) grad[s].assign(weights_[s].size(), 0.0);
        for (auto i : top) {
            const auto& c = provenance[i];
            for (std::size_t s = 0; s < c.size(); ++s) {
                if (c[s] < 0) continue;
                const double scale = fitness[i] / slot_temperature(s);
                const auto& p = probs_[s];
                for (std::size_t j = 0; j < p.size(); ++j) grad[s][j] -= scale * p[j];
                grad[s][static_cast<std::size_t>(c[s])] += scale;
            }
        }
        for (std::size_t s = 0; s < weights_.size(); ++s)
            for (std::size_t j = 0; j < weights_[s].size(); ++j) {
                double step = lr * grad[s][j];
                if (opt.max_step > 0.0) step = std::clamp(step, -opt.max_step, opt.max_step);
                weights_[s][j] += step;
            }
        refresh();
        return top;
    }

    std::vector<std::size_t> update(const SampleBatch& batch, std::span<const double> fitness, std::size_t top_q, double lr,
                                    const UpdateOptions& opt = {}) {
        std::vector<int> cx;
        for (const auto& e : batch.expressions) cx.push_back(complexity(e).total());
        return update(batch.provenance, fitness, cx, top_q, lr, opt);
    }

    static std::vector<std::size_t> select_top(std::span<const double> fitness, std::span<const int> complexity_total, std::size_t top_q) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < fitness.size(); ++i)
            if (std::isfinite(fitness[i])) idx.push_back(i);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            if (fitness[a] != fitness[b]) return fitness[a] > fitness[b];
            return complexity_total[a] < complexity_total[b];
        });
        if (idx.size() > top_q) idx.resize(top_q);
        return idx;
    }

    /// Every distinct connection set, for networks small enough to enumerate.
    /// Throws when more than `limit` sets exist.
    std::vector<Connections> enumerate(std::size_t limit = 100000) const {
        std::vector<Connections> out;
        Connections c(num_slots(), -1);
        std::vector<char> expanded(num_images(), 0);
        std::vector<std::size_t> pending;
        for (std::size_t k = library_.outputs(); k-- > 0;) pending.push_back(output_slot(k));
        enumerate_rec(c, expanded, pending, out, limit);
        return out;
    }

private:
    const Expression::Names& names() const noexcept { return names_; }

    void refresh() {
        probs_.resize(weights_.size());
        log_probs_.resize(weights_.size());
        for (std::size_t s = 0; s < weights_.size(); ++s) {
            const double t = slot_temperature(s);
            const auto& w = weights_[s];
            const double m = *std::max_element(w.begin(), w.end());
            auto& p = probs_[s];
            auto& lp = log_probs_[s];
            p.resize(w.size());
            lp.resize(w.size());
            double z = 0.0;
            for (std::size_t j = 0; j < w.size(); ++j) z += std::exp((w[j] - m) / t);
            const double logz = std::log(z);
            for (std::size_t j = 0; j < w.size(); ++j) {
                lp[j] = (w[j] - m) / t - logz;
                p[j] = std::exp(lp[j]);
            }
        }
    }

    void choose(std::size_t slot, Rng& rng, Connections& c, std::vector<char>& expanded) const {
        const auto& p = probs_[slot];
        const double u = rng.uniform();
        double acc = 0.0;
        std::size_t pick = p.size() - 1;
        for (std::size_t j = 0; j < p.size(); ++j) {
            acc += p[j];
            if (u < acc) {
                pick = j;
                break;
            }
        }
        c[slot] = static_cast<std::int32_t>(pick);
        if (expanded[pick]) return;
        expanded[pick] = 1;
        auto [lo, hi] = arg_slots(pick);
        for (std::size_t a = lo; a < hi; ++a) choose(a, rng, c, expanded);
    }

    std::int32_t materialize(std::size_t g, const Connections& c, Expression& e, std::vector<std::int32_t>& node) const {
        if (node[g] >= 0) return node[g];
        if (g < library_.num_inputs()) return node[g] = e.add_variable(g);
        auto [lo, hi] = arg_slots(g);
        std::array<std::int32_t, kMaxArity> args{};
        for (std::size_t a = lo; a < hi; ++a) {
            if (c.at(a) < 0) throw ValidationError("connection set leaves a reachable slot undecided");
            args[a - lo] = materialize(static_cast<std::size_t>(c[a]), c, e, node);
        }
        return node[g] = e.add_basis(*image_basis(g), std::span<const std::int32_t>(args.data(), hi - lo));
    }

    void enumerate_rec(Connections& c, std::vector<char>& expanded, std::vector<std::size_t>& pending, std::vector<Connections>& out,
                       std::size_t limit) const {
        if (pending.empty()) {
            if (out.size() >= limit) throw ValidationError("network has more than " + std::to_string(limit) + " connection sets");
            out.push_back(c);
            return;
        }
        const std::size_t s = pending.back();
        pending.pop_back();
        for (std::size_t g = 0; g < slot_width(s); ++g) {
            c[s] = static_cast<std::int32_t>(g);
            const bool expand = !expanded[g];
            const std::size_t mark = pending.size();
            if (expand) {
                expanded[g] = 1;
                auto [lo, hi] = arg_slots(g);
                for (std::size_t a = hi; a-- > lo;) pending.push_back(a);
            }
            enumerate_rec(c, expanded, pending, out, limit);
            pending.resize(mark);
            if (expand) expanded[g] = 0;
        }
        c[s] = -1;
        pending.push_back(s);
    }

    BasisLibrary library_;
    double temperature_;
    double equalization_;
    std::vector<std::size_t> offset_;
    std::vector<std::size_t> first_arg_slot_;
    std::vector<const BasisDef*> image_basis_;
    std::vector<std::size_t> slot_layer_;
    std::size_t first_output_slot_ = 0;
    std::vector<std::vector<double>> weights_;
    std::vector<std::vector<double>> probs_;
    std::vector<std::vector<double>> log_probs_;
    Expression::Names names_;
};

inline ProbNetwork init_network(BasisLibrary library, double temperature, double equalization) {
    return ProbNetwork(std::move(library), temperature, equalization);
}

} // namespace occam
