#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "occam/basis.hpp"
#include "occam/expression.hpp"
#include "occam/fitness.hpp"
#include "occam/grammar.hpp"
#include "occam/search.hpp"

namespace occam {

using nlohmann::json;

namespace detail {

// JSON has no inf/nan; they travel as strings.
inline json number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

inline double number(const json& j) {
    if (j.is_number()) return j.get<double>();
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw ValidationError("not a number: " + s);
}

inline json numbers(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(number(x));
    return a;
}

inline std::vector<double> numbers(const json& j) {
    std::vector<double> v;
    for (const auto& x : j) v.push_back(number(x));
    return v;
}

inline json matrix(const std::vector<std::vector<double>>& m) {
    json a = json::array();
    for (const auto& r : m) a.push_back(numbers(r));
    return a;
}

inline std::vector<std::vector<double>> matrix(const json& j) {
    std::vector<std::vector<double>> m;
    for (const auto& r : j) m.push_back(numbers(r));
    return m;
}

inline const char* status_name(FitnessStatus s) {
    switch (s) {
    case FitnessStatus::Ok: return "ok";
    case FitnessStatus::UnitRejected: return "unit_rejected";
    case FitnessStatus::Invalid: return "invalid";
    }
    return "?";
}

} // namespace detail

// --- expression graph --------------------------------------------------------

/// Exact DAG encoding: variables, node list in topological order, roots and constants.
inline json expression_to_json(const Expression& e) {
    json nodes = json::array();
    for (const auto& n : e.nodes()) {
        switch (n.kind) {
        case NodeKind::Variable: nodes.push_back({{"var", n.variable}}); break;
        case NodeKind::Constant: nodes.push_back({{"const", n.first_constant}}); break;
        case NodeKind::Basis: {
            json args = json::array();
            for (int a = 0; a < n.basis->arity; ++a) args.push_back(n.args[a]);
            nodes.push_back({{"basis", n.basis->name}, {"args", args}});
            break;
        }
        }
    }
    return {{"variables", e.variables()}, {"nodes", nodes}, {"roots", e.roots()}, {"constants", detail::numbers(e.constants())}};
}

inline Expression expression_from_json(const json& j, const BasisCatalog& catalog = BasisCatalog::builtin()) {
    Expression e(j.at("variables").get<std::vector<std::string>>());
    const auto constants = detail::numbers(j.at("constants"));
    std::size_t next = 0;
    auto take = [&](int n) {
        if (next + static_cast<std::size_t>(n) > constants.size()) throw ValidationError("expression constants too short");
        std::span<const double> s(constants.data() + next, static_cast<std::size_t>(n));
        next += static_cast<std::size_t>(n);
        return s;
    };
    for (const auto& n : j.at("nodes")) {
        if (n.contains("var")) {
            e.add_variable(n["var"].get<std::size_t>());
        } else if (n.contains("const")) {
            e.add_constant(take(1)[0]);
        } else {
            const auto& def = catalog.at(n.at("basis").get<std::string>());
            const auto args = n.at("args").get<std::vector<std::int32_t>>();
            e.add_basis(def, args, take(def.constant_slots));
        }
    }
    if (next != constants.size()) throw ValidationError("expression has unused constants");
    for (auto r : j.at("roots")) e.add_root(r.get<std::int32_t>());
    return e;
}

// --- reports -----------------------------------------------------------------

inline json to_json(const ComplexityReport& c) {
    return {{"activations", c.activation_count}, {"constants", c.constant_count}, {"total", c.total()}};
}

inline json to_json(const LossReport& l) {
    return {{"mse", detail::number(l.mse)},
            {"wmse", detail::number(l.wmse)},
            {"median", detail::number(l.median)},
            {"fitness", detail::number(l.fitness)},
            {"per_panel_errors", detail::numbers(l.per_panel_errors)}};
}

inline LossReport loss_from_json(const json& j) {
    LossReport l;
    l.mse = detail::number(j.at("mse"));
    l.wmse = detail::number(j.at("wmse"));
    l.median = detail::number(j.at("median"));
    l.fitness = detail::number(j.at("fitness"));
    l.per_panel_errors = detail::numbers(j.at("per_panel_errors"));
    return l;
}

inline json to_json(const EpochRecord& r) {
    return {{"epoch", r.epoch},
            {"best_fitness", detail::number(r.best_fitness)},
            {"epoch_best_fitness", detail::number(r.epoch_best_fitness)},
            {"unique_structures", r.unique_structures},
            {"fitted", r.fitted},
            {"unit_rejected", r.unit_rejected},
            {"invalid", r.invalid},
            {"updated", r.updated},
            {"seconds", r.seconds}};
}

inline EpochRecord epoch_from_json(const json& j) {
    EpochRecord r;
    r.epoch = j.at("epoch");
    r.best_fitness = detail::number(j.at("best_fitness"));
    r.epoch_best_fitness = detail::number(j.at("epoch_best_fitness"));
    r.unique_structures = j.at("unique_structures");
    r.fitted = j.at("fitted");
    r.unit_rejected = j.at("unit_rejected");
    r.invalid = j.at("invalid");
    r.updated = j.at("updated");
    r.seconds = j.at("seconds");
    return r;
}

/// Result summary. The epoch history is left to the CSV trace unless asked for.
inline json to_json(const FitResult& r, bool with_history = false, int precision = 6) {
    json j{{"target", r.target},
           {"found", r.found},
           {"fitness", detail::number(r.fitness)},
           {"complexity", to_json(r.complexity)},
           {"loss", to_json(r.loss)},
           {"seed", r.seed},
           {"wall_seconds", r.wall_seconds},
           {"data_evaluations", r.data_evaluations},
           {"output_scale", r.output_scale},
           {"provenance", r.provenance}};
    if (r.found) {
        j["expression"] = r.text(precision);
        j["graph"] = expression_to_json(r.expression);
        json panels = json::array();
        for (std::size_t p = 0; p < r.panel_constants.size(); ++p)
            panels.push_back({{"name", p < r.panel_names.size() ? r.panel_names[p] : std::to_string(p)},
                              {"expression", r.text(precision, p)},
                              {"constants", detail::numbers(r.panel_constants[p])}});
        j["panels"] = panels;
    }
    if (with_history) {
        json h = json::array();
        for (const auto& e : r.history) h.push_back(to_json(e));
        j["history"] = h;
    }
    return j;
}

inline FitResult fit_result_from_json(const json& j, const BasisCatalog& catalog = BasisCatalog::builtin()) {
    FitResult r;
    r.target = j.at("target");
    r.found = j.at("found");
    r.fitness = detail::number(j.at("fitness"));
    r.complexity.activation_count = j.at("complexity").at("activations");
    r.complexity.constant_count = j.at("complexity").at("constants");
    r.loss = loss_from_json(j.at("loss"));
    r.seed = j.at("seed");
    r.wall_seconds = j.at("wall_seconds");
    r.data_evaluations = j.at("data_evaluations");
    r.output_scale = j.at("output_scale");
    r.provenance = j.at("provenance").get<Connections>();
    if (r.found) {
        r.expression = expression_from_json(j.at("graph"), catalog);
        for (const auto& p : j.at("panels")) {
            r.panel_names.push_back(p.at("name"));
            r.panel_constants.push_back(detail::numbers(p.at("constants")));
        }
    }
    if (j.contains("history"))
        for (const auto& e : j["history"]) r.history.push_back(epoch_from_json(e));
    return r;
}

// --- checkpoints -------------------------------------------------------------

inline json to_json(const Checkpoint& c) {
    json h = json::array();
    for (const auto& e : c.history) h.push_back(to_json(e));
    return {{"format_version", Checkpoint::kFormatVersion},
            {"library_hash", c.library_hash},
            {"seed", c.seed},
            {"next_epoch", c.next_epoch},
            {"lr", c.lr},
            {"weights", detail::matrix(c.weights)},
            {"has_best", c.has_best},
            {"best_provenance", c.best_provenance},
            {"best_constants", detail::matrix(c.best_constants)},
            {"best_fitness", detail::number(c.best_fitness)},
            {"best_complexity", c.best_complexity},
            {"history", h}};
}

inline Checkpoint checkpoint_from_json(const json& j) {
    const int version = j.at("format_version");
    if (version != Checkpoint::kFormatVersion)
        throw ValidationError("checkpoint format version " + std::to_string(version) + " is not supported", "/format_version");
    Checkpoint c;
    c.library_hash = j.at("library_hash");
    c.seed = j.at("seed");
    c.next_epoch = j.at("next_epoch");
    c.lr = j.at("lr");
    c.weights = detail::matrix(j.at("weights"));
    c.has_best = j.at("has_best");
    c.best_provenance = j.at("best_provenance").get<Connections>();
    c.best_constants = detail::matrix(j.at("best_constants"));
    c.best_fitness = detail::number(j.at("best_fitness"));
    c.best_complexity = j.at("best_complexity");
    for (const auto& e : j.at("history")) c.history.push_back(epoch_from_json(e));
    return c;
}

// --- CSV artifacts -----------------------------------------------------------

inline void write_trace_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
    out << "epoch,best_fitness,epoch_best_fitness,unique_structures,fitted,unit_rejected,invalid,updated,seconds\n";
    out.precision(17);
    for (const auto& r : history)
        out << r.epoch << ',' << r.best_fitness << ',' << r.epoch_best_fitness << ',' << r.unique_structures << ',' << r.fitted << ','
            << r.unit_rejected << ',' << r.invalid << ',' << (r.updated ? 1 : 0) << ',' << r.seconds << '\n';
}

/// Observed vs predicted per row, one block per panel.
inline void write_predictions_csv(std::ostream& out, const FitResult& r, const PanelSet& panels, std::size_t target_col = 0) {
    out << "panel,row,time,observed,predicted\n";
    out.precision(17);
    if (!r.found) return;
    Evaluator ev;
    for (std::size_t p = 0; p < panels.panels.size(); ++p) {
        const auto& panel = panels.panels[p];
        const double* pred = ev.evaluate_root(r.expression, panel.inputs, r.panel_constants.at(p));
        const auto y = panel.targets.col(target_col);
        for (std::size_t i = 0; i < panel.rows(); ++i) {
            out << panel.name << ',' << i << ',';
            if (i < panel.time.size()) out << panel.time[i];
            out << ',' << y[i] * r.output_scale << ',' << pred[i] * r.output_scale << '\n';
        }
    }
}

} // namespace occam
