#pragma once

#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "occam/config.hpp"
#include "occam/data.hpp"
#include "occam/grammar.hpp"
#include "occam/numdiff.hpp"
#include "occam/pareto.hpp"
#include "occam/search.hpp"
#include "occam/serialize.hpp"

namespace occam {

/// Everything a run produces: the result document plus named CSV artifacts.
struct RunOutput {
    nlohmann::json result;
    std::map<std::string, std::string> files;  // file name → contents
};

using RunLog = std::function<void(const std::string&)>;

namespace detail {

struct LoadedData {
    std::vector<TimeSeries> series;  // generators and time-indexed CSV
    PanelSet panels;                 // regression data
    std::vector<SolowParams> solow;  // ground truth of generated Solow panels
};

inline LoadedData generate(const nlohmann::json& g) {
    LoadedData out;
    const std::string sys = g["system"];
    const auto params = g.value("params", nlohmann::json::object());
    auto known = [&](std::initializer_list<const char*> keys) {
        for (auto it = params.begin(); it != params.end(); ++it) {
            bool ok = false;
            for (const char* k : keys) ok = ok || it.key() == k;
            if (!ok) throw ValidationError("unknown parameter '" + it.key() + "' for " + sys, "/data/generator/params/" + it.key());
        }
    };
    auto p = [&](const char* key, double& field) {
        if (params.contains(key)) field = params[key].get<double>();
    };
    if (sys == "lotka_volterra") {
        known({"alpha", "beta", "gamma", "delta", "H0", "L0"});
        LotkaVolterraSpec s;
        p("alpha", s.alpha), p("beta", s.beta), p("gamma", s.gamma), p("delta", s.delta), p("H0", s.H0), p("L0", s.L0);
        s.h = g.value("h", s.h);
        s.steps = g.value("steps", s.steps);
        s.substeps = g.value("substeps", s.substeps);
        out.series.push_back(gen_lotka_volterra(s));
    } else if (sys == "sir") {
        known({"beta", "gamma", "s0", "i0", "r0"});
        SirSpec s;
        p("beta", s.beta), p("gamma", s.gamma), p("s0", s.s0), p("i0", s.i0), p("r0", s.r0);
        s.h = g.value("h", s.h);
        s.steps = g.value("steps", s.steps);
        s.substeps = g.value("substeps", s.substeps);
        try {
            out.series.push_back(gen_sir(s));
        } catch (const ValidationError& e) {
            throw ValidationError(e.what(), "/data/generator/params");
        }
    } else if (sys == "solow_panels") {
        known({"alpha"});
        SolowSpec s;
        if (params.contains("alpha")) s.force_alpha = params["alpha"].get<double>();
        s.h = g.value("h", s.h);
        s.steps = g.value("steps", s.steps);
        s.substeps = g.value("substeps", s.substeps);
        s.panels = g.value("panels", s.panels);
        s.seed = g.value("seed", s.seed);
        auto panels = gen_solow_panels(s);
        out.series = std::move(panels.series);
        out.solow = std::move(panels.params);
    } else {
        known({"a", "exponent", "noise", "x_min", "x_max"});
        PowerLawSpec s;
        p("a", s.a), p("exponent", s.exponent), p("noise", s.noise), p("x_min", s.x_min), p("x_max", s.x_max);
        s.n = g.value("steps", s.n);
        s.seed = g.value("seed", s.seed);
        out.panels = gen_power_law(s);
    }
    return out;
}

inline LoadedData load_data(const RunConfig& cfg, bool as_series) {
    const auto& d = cfg.section("data");
    LoadedData out;
    if (d.contains("generator")) {
        out = generate(d["generator"]);
    } else if (d.contains("degree_distribution")) {
        const auto& dd = d["degree_distribution"];
        std::set<long> drop{0, 1};
        if (dd.contains("drop")) drop = dd["drop"].get<std::set<long>>();
        out.panels = histogram_panel(degree_distribution(cfg.resolve(dd["edges"]).string(), dd.value("max_degree", 200L), drop));
    } else {
        const CsvTable table = read_csv(cfg.resolve(d["csv"]).string());
        if (as_series) {
            if (!d.contains("time_column")) throw ValidationError("time-series data needs time_column", "/data/time_column");
            std::vector<std::string> cols;
            auto add = [&](const std::vector<std::string>& names) {
                for (const auto& n : names)
                    if (std::find(cols.begin(), cols.end(), n) == cols.end()) cols.push_back(n);
            };
            const auto& ode = cfg.section("ode");
            add(ode.value("inputs", std::vector<std::string>{}));
            add(ode.value("targets", std::vector<std::string>{}));
            add(d.value("inputs", std::vector<std::string>{}));
            std::optional<std::string> panel;
            if (d.contains("panel_column")) panel = d["panel_column"].get<std::string>();
            out.series = series_from_table(table, d["time_column"], cols, panel);
        } else {
            CsvSchema schema;
            schema.inputs = d.value("inputs", std::vector<std::string>{});
            schema.targets = d.value("targets", std::vector<std::string>{});
            if (d.contains("panel_column")) schema.panel_column = d["panel_column"].get<std::string>();
            if (d.contains("time_column")) schema.time_column = d["time_column"].get<std::string>();
            out.panels = panels_from_table(table, schema);
        }
    }
    if (!as_series && out.panels.panels.empty() && !out.series.empty()) {
        // regression over a generated series: every column is an input unless named as target
        const auto& names = out.series[0].names;
        CsvSchema schema;
        schema.targets = d.value("targets", std::vector<std::string>{});
        schema.inputs = d.value("inputs", std::vector<std::string>{});
        if (schema.inputs.empty())
            for (const auto& n : names)
                if (std::find(schema.targets.begin(), schema.targets.end(), n) == schema.targets.end()) schema.inputs.push_back(n);
        for (std::size_t p = 0; p < out.series.size(); ++p) {
            const auto& s = out.series[p];
            std::vector<std::size_t> in, tg;
            for (const auto& n : schema.inputs) in.push_back(s.column(n));
            for (const auto& n : schema.targets) tg.push_back(s.column(n));
            std::vector<double> time;
            for (std::size_t i = 0; i < s.rows(); ++i) time.push_back(s.time(i));
            out.panels.panels.push_back({std::to_string(p), s.values.select_columns(in), s.values.select_columns(tg), time});
        }
        out.panels.input_names = schema.inputs;
        out.panels.target_names = schema.targets;
    }
    if (!as_series) {
        if (d.contains("log_log")) out.panels = log_log_transform(std::move(out.panels), d["log_log"].get<std::vector<std::string>>());
        out.panels.units = cfg.units;
        out.panels.validate();
    }
    return out;
}

inline OdeTask ode_task(const RunConfig& cfg) {
    const auto& ode = cfg.section("ode");
    OdeTask task;
    task.targets = ode["targets"].get<std::vector<std::string>>();
    task.inputs = ode.value("inputs", std::vector<std::string>{});
    task.derivative_scale = ode.value("derivative_scale", 1.0);
    if (ode.contains("smoothing"))
        for (const auto& s : ode["smoothing"]) {
            Smoothing sm;
            const std::string kind = s["kind"];
            sm.kind = kind == "spline" ? Smoothing::Kind::Spline : kind == "savitzky_golay" ? Smoothing::Kind::SavitzkyGolay : Smoothing::Kind::None;
            sm.window = s.value("window", sm.window);
            sm.order = s.value("order", sm.order);
            sm.samples = s.value("samples", sm.samples);
            task.smoothing.push_back(sm);
        }
    return task;
}

/// Regression panels: derivative targets when an ode section exists, else the data as given.
inline PanelSet regression_panels(const RunConfig& cfg) {
    if (!cfg.has("ode")) return load_data(cfg, false).panels;
    PanelSet ps = build_ode_panels(load_data(cfg, true).series, ode_task(cfg));
    ps.units = cfg.units;
    return ps;
}

inline std::string trace_csv(const FitResult& r) {
    std::ostringstream s;
    write_trace_csv(s, r.history);
    return s.str();
}

inline std::string predictions_csv(const FitResult& r, const PanelSet& ps, std::size_t col) {
    std::ostringstream s;
    write_predictions_csv(s, r, ps, col);
    return s.str();
}

inline std::string file_safe(std::string name) {
    for (char& c : name)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
    return name;
}

/// One target: grid search when a grid section exists (or mode is grid),
/// otherwise best-of-`seeds` training.
inline FitResult fit_target(const RunConfig& cfg, const PanelSet& ps, const BasisLibrary& lib, const TrainConfig& tc, std::size_t col,
                            nlohmann::json* grid_report, const RunLog& log) {
    if (cfg.has("grid") || cfg.mode == "grid") {
        GridSpec g;
        const auto& gj = cfg.section("grid");
        if (gj.contains("sigma")) g.sigma = gj["sigma"].get<std::vector<double>>();
        if (gj.contains("top_q")) g.top_q = gj["top_q"].get<std::vector<std::size_t>>();
        if (gj.contains("equalization")) g.equalization = gj["equalization"].get<std::vector<double>>();
        FitResult best;
        bool have = false;
        nlohmann::json cells = nlohmann::json::array();
        for (std::size_t k = 0; k < cfg.seeds; ++k) {
            TrainConfig t = tc;
            t.seed = cfg.seeds > 1 ? derive_seed(tc.seed, 0x5eed, k) : tc.seed;
            auto res = grid_search(ps, lib, g, t, col);
            for (const auto& c : res.cells) {
                nlohmann::json cj{{"sigma", c.sigma}, {"top_q", c.top_q}, {"equalization", c.equalization}, {"seed", c.seed}};
                if (c.result) {
                    cj["expression"] = c.result->text();
                    cj["wmse"] = detail::number(c.result->loss.wmse);
                    cj["complexity"] = c.result->complexity.total();
                } else {
                    cj["error"] = c.error;
                }
                cells.push_back(cj);
            }
            const auto& win = res.cells[res.winner()];
            if (win.result && (!have || rank_before(*win.result, best))) {
                best = *win.result;
                have = true;
            }
            log("grid pass " + std::to_string(k + 1) + "/" + std::to_string(cfg.seeds) + " done");
        }
        if (grid_report) *grid_report = cells;
        if (!have) throw std::runtime_error("every grid cell failed");
        return best;
    }
    if (cfg.seeds > 1) return best_of_seeds(ps, lib, tc, cfg.seeds, col);
    if (cfg.mode == "fit-ensemble") return ensemble_fit(ps, lib, tc, col);
    return train(ps, lib, tc, col);
}

inline double r_squared(std::span<const double> obs, std::span<const double> pred) {
    double mean = 0.0;
    for (double v : obs) mean += v;
    mean /= static_cast<double>(obs.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const double r = obs[i] - pred[i];
        ss_res += std::isfinite(r) ? r * r : std::numeric_limits<double>::infinity();
        ss_tot += (obs[i] - mean) * (obs[i] - mean);
    }
    return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity());
}

inline std::string series_csv(const std::vector<const TimeSeries*>& series, const std::vector<std::string>& labels) {
    std::ostringstream s;
    s.precision(17);
    s << "series,t";
    for (const auto& n : series.front()->names) s << ',' << n;
    s << '\n';
    for (std::size_t k = 0; k < series.size(); ++k)
        for (std::size_t i = 0; i < series[k]->rows(); ++i) {
            s << labels[k] << ',' << series[k]->time(i);
            for (std::size_t c = 0; c < series[k]->values.cols(); ++c) s << ',' << series[k]->values(i, c);
            s << '\n';
        }
    return s.str();
}

} // namespace detail

inline RunOutput run_fit(const RunConfig& cfg, const RunLog& log) {
    const PanelSet ps = detail::regression_panels(cfg);
    const auto lib = cfg.library.build(ps.input_names);
    RunOutput out;
    nlohmann::json fits = nlohmann::json::array();
    for (std::size_t col = 0; col < ps.target_names.size(); ++col) {
        log("fitting " + ps.target_names[col]);
        nlohmann::json grid;
        FitResult r = detail::fit_target(cfg, ps, lib, cfg.train, col, &grid, log);
        auto j = to_json(r);
        if (!grid.is_null()) j["grid"] = grid;
        fits.push_back(j);
        const auto stem = detail::file_safe(r.target);
        out.files["trace_" + stem + ".csv"] = detail::trace_csv(r);
        out.files["predictions_" + stem + ".csv"] = detail::predictions_csv(r, ps, col);
    }
    out.result["fits"] = fits;
    out.result["transforms"] = ps.transforms;
    return out;
}

inline RunOutput run_fit_ode(const RunConfig& cfg, const RunLog& log) {
    const auto data = detail::load_data(cfg, true);
    const auto& ode = cfg.section("ode");
    const OdeTask task = detail::ode_task(cfg);
    PanelSet ps = build_ode_panels(data.series, task);
    ps.units = cfg.units;
    RunOutput out;
    std::vector<FitResult> results;
    if (ode.contains("chain")) {
        std::vector<ChainStep> steps;
        for (const auto& s : ode["chain"]) {
            const std::string target = "d" + s["target"].get<std::string>();
            auto it = std::find(ps.target_names.begin(), ps.target_names.end(), target);
            if (it == ps.target_names.end()) throw ValidationError("chain target '" + s["target"].get<std::string>() + "' is not an ode target", "/ode/chain");
            steps.push_back({static_cast<std::size_t>(it - ps.target_names.begin()), s.value("depends_on", std::vector<std::string>{})});
        }
        log("fitting chain of " + std::to_string(steps.size()) + " targets");
        results = chain_coupled_fit(ps, cfg.library.layer_names(), steps, cfg.train);
    } else {
        const auto lib = cfg.library.build(ps.input_names);
        for (std::size_t col = 0; col < ps.target_names.size(); ++col) {
            TrainConfig t = cfg.train;
            const auto var = task.targets[col];
            if (ode.contains("per_target") && ode["per_target"].contains(var)) apply_train(t, ode["per_target"][var]);
            log("fitting " + ps.target_names[col]);
            results.push_back(detail::fit_target(cfg, ps, lib, t, col, nullptr, log));
        }
    }
    nlohmann::json fits = nlohmann::json::array();
    for (std::size_t k = 0; k < results.size(); ++k) {
        auto& r = results[k];
        r.output_scale = 1.0 / task.derivative_scale;
        auto j = to_json(r);
        if (task.derivative_scale != 1.0 && r.found)
            j["unscaled_expression"] = to_canonical_string(scale_roots(r.expression, 1.0 / task.derivative_scale), {}, 6);
        fits.push_back(j);
        const std::size_t col = static_cast<std::size_t>(std::find(ps.target_names.begin(), ps.target_names.end(), r.target) - ps.target_names.begin());
        const auto stem = detail::file_safe(r.target);
        out.files["trace_" + stem + ".csv"] = detail::trace_csv(r);
        out.files["predictions_" + stem + ".csv"] = detail::predictions_csv(r, ps, col);
    }
    out.result["fits"] = fits;

    // Re-integrate the fitted system from each panel's first smoothed state.
    const bool all_found = std::all_of(results.begin(), results.end(), [](const FitResult& r) { return r.found; });
    const bool chained = ode.contains("chain");
    if (ode.value("simulate", true) && all_found && !chained) {
        nlohmann::json sims = nlohmann::json::array();
        std::string csv;
        for (std::size_t p = 0; p < data.series.size(); ++p) {
            const TimeSeries smooth = apply_smoothing(data.series[p], task.smoothing);
            std::vector<Expression> system;
            std::vector<double> initial;
            for (std::size_t k = 0; k < results.size(); ++k) {
                Expression e = scale_roots(results[k].expression, 1.0 / task.derivative_scale);
                auto c = results[k].panel_constants.at(p);
                c.push_back(1.0 / task.derivative_scale);
                e.set_constants(c);
                system.push_back(std::move(e));
                initial.push_back(smooth.values(0, smooth.column(task.targets[k])));
            }
            TimeSeries exo;
            exo.t0 = smooth.t0;
            exo.h = smooth.h;
            exo.names = smooth.names;
            exo.values = smooth.values;
            const auto sim = simulate(system, task.targets, initial, smooth.h, smooth.rows() - 1, smooth.t0, &exo);
            nlohmann::json sj{{"panel", p}, {"aborted", sim.aborted}};
            nlohmann::json r2 = nlohmann::json::object();
            for (std::size_t k = 0; k < task.targets.size(); ++k) {
                const auto obs = smooth.values.col(smooth.column(task.targets[k]));
                std::vector<double> pred(obs.size(), std::numeric_limits<double>::quiet_NaN());
                for (std::size_t i = 0; i < sim.series.rows() && i < pred.size(); ++i) pred[i] = sim.series.values(i, k);
                r2[task.targets[k]] = detail::number(detail::r_squared(obs, pred));
            }
            sj["r_squared"] = r2;
            sims.push_back(sj);
            TimeSeries observed = smooth;
            std::vector<std::size_t> cols;
            for (const auto& t : task.targets) cols.push_back(smooth.column(t));
            observed.values = smooth.values.select_columns(cols);
            observed.names = task.targets;
            const std::string tag = std::to_string(p);
            auto block = detail::series_csv({&observed, &sim.series}, {"observed_" + tag, "simulated_" + tag});
            csv += p == 0 ? block : block.substr(block.find('\n') + 1);
        }
        out.result["simulation"] = sims;
        out.files["simulation.csv"] = csv;
    }
    if (!data.solow.empty()) {
        nlohmann::json truth = nlohmann::json::array();
        for (const auto& q : data.solow) truth.push_back({{"alpha", q.alpha}, {"delta", q.delta}, {"g", q.g}, {"g_plus_delta", q.g + q.delta}});
        out.result["generator_truth"] = truth;
    }
    return out;
}

inline RunOutput run_sweep(const RunConfig& cfg, const RunLog& log) {
    const PanelSet ps = detail::regression_panels(cfg);
    const auto lib = cfg.library.build(ps.input_names);
    std::vector<RegularizationPoint> grid;
    for (const auto& p : cfg.section("sweep")["points"]) grid.push_back({p.value("w_alpha", 0.0), p.value("w_gamma", 0.0)});
    log("sweeping " + std::to_string(grid.size()) + " regularization points");
    const auto sw = pareto_sweep(ps, lib, grid, cfg.train);
    RunOutput out;
    nlohmann::json pts = nlohmann::json::array();
    std::ostringstream csv;
    csv.precision(17);
    csv << "w_alpha,w_gamma,complexity,wmse,on_front,expression\n";
    for (std::size_t i = 0; i < sw.points.size(); ++i) {
        const auto& p = sw.points[i];
        const bool front = std::find(sw.front.begin(), sw.front.end(), i) != sw.front.end();
        pts.push_back({{"w_alpha", p.weights.w_alpha},
                       {"w_gamma", p.weights.w_gamma},
                       {"expression", p.text},
                       {"complexity", to_json(p.complexity)},
                       {"loss", to_json(p.loss)},
                       {"fitness", detail::number(p.fitness)},
                       {"on_front", front}});
        csv << p.weights.w_alpha << ',' << p.weights.w_gamma << ',' << p.complexity.total() << ',' << p.loss.wmse << ',' << (front ? 1 : 0)
            << ",\"" << p.text << "\"\n";
    }
    out.result["points"] = pts;
    out.result["front"] = sw.front;
    out.files["pareto.csv"] = csv.str();
    return out;
}

inline RunOutput run_implicit(const RunConfig& cfg, const RunLog& log) {
    const PanelSet ps = detail::regression_panels(cfg);
    log("implicit search over " + std::to_string(ps.input_names.size() + ps.target_names.size()) + " columns");
    const auto ranked = implicit_partition_search(ps, cfg.library.layer_names(), cfg.train,
                                                  cfg.section("implicit").value("max_columns", std::size_t{8}));
    RunOutput out;
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : ranked) {
        auto j = to_json(c.result);
        j["inputs"] = c.inputs;
        j["normalized_loss"] = detail::number(c.normalized_loss);
        cands.push_back(j);
    }
    out.result["candidates"] = cands;
    return out;
}

inline RunOutput run_synth(const RunConfig& cfg, const RunLog& log) {
    const auto data = detail::generate(cfg.section("data")["generator"]);
    RunOutput out;
    std::ostringstream csv;
    csv.precision(17);
    if (!data.series.empty()) {
        csv << "panel,t";
        for (const auto& n : data.series[0].names) csv << ',' << n;
        csv << '\n';
        for (std::size_t p = 0; p < data.series.size(); ++p)
            for (std::size_t i = 0; i < data.series[p].rows(); ++i) {
                csv << p << ',' << data.series[p].time(i);
                for (std::size_t c = 0; c < data.series[p].values.cols(); ++c) csv << ',' << data.series[p].values(i, c);
                csv << '\n';
            }
        out.result["panels"] = data.series.size();
        out.result["rows"] = data.series[0].rows();
    } else {
        const auto& ps = data.panels;
        csv << ps.input_names[0] << ',' << ps.target_names[0] << '\n';
        for (std::size_t i = 0; i < ps.panels[0].rows(); ++i) csv << ps.panels[0].inputs(i, 0) << ',' << ps.panels[0].targets(i, 0) << '\n';
        out.result["panels"] = 1;
        out.result["rows"] = ps.panels[0].rows();
    }
    if (!data.solow.empty()) {
        nlohmann::json truth = nlohmann::json::array();
        for (const auto& q : data.solow) truth.push_back({{"alpha", q.alpha}, {"delta", q.delta}, {"g", q.g}, {"k0", q.k0}, {"s0", q.s0}, {"n0", q.n0}});
        out.result["generator_truth"] = truth;
    }
    log("generated " + out.result["rows"].dump() + " rows");
    out.files["data.csv"] = csv.str();
    return out;
}

inline RunOutput run_simulate(const RunConfig& cfg, const RunLog& log) {
    const auto& s = cfg.section("simulate");
    std::vector<std::string> state;
    for (auto it = s["equations"].begin(); it != s["equations"].end(); ++it) state.push_back(it.key());
    std::vector<Expression> system;
    std::vector<double> initial;
    for (const auto& v : state) {
        try {
            system.push_back(parse_expression(s["equations"][v].get<std::string>(), state));
        } catch (const ParseError& e) {
            throw ValidationError(e.what(), "/simulate/equations/" + v);
        }
        if (!s["initial"].contains(v)) throw ValidationError("no initial value for '" + v + "'", "/simulate/initial");
        initial.push_back(s["initial"][v]);
    }
    log("simulating " + std::to_string(state.size()) + " equations");
    const auto sim = simulate(system, state, initial, s["h"], s["steps"], s.value("t0", 0.0));
    RunOutput out;
    out.result["aborted"] = sim.aborted;
    out.result["rows"] = sim.series.rows();
    out.result["state"] = state;
    out.files["simulation.csv"] = detail::series_csv({&sim.series}, {"simulated"});
    return out;
}

/// Executes a validated config. The result document echoes the config.
inline RunOutput run(const RunConfig& cfg, const RunLog& log = [](const std::string&) {}) {
    RunOutput out;
    if (cfg.mode == "fit" || cfg.mode == "fit-ensemble" || cfg.mode == "grid") out = run_fit(cfg, log);
    else if (cfg.mode == "fit-ode") out = run_fit_ode(cfg, log);
    else if (cfg.mode == "sweep") out = run_sweep(cfg, log);
    else if (cfg.mode == "implicit") out = run_implicit(cfg, log);
    else if (cfg.mode == "synth") out = run_synth(cfg, log);
    else out = run_simulate(cfg, log);
    out.result["mode"] = cfg.mode;
    out.result["config"] = cfg.document;
    return out;
}

} // namespace occam
