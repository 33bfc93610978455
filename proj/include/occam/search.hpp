#pragma once

#include <algorithm>
#include <chrono>
#include <climits>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "occam/basis.hpp"
#include "occam/error.hpp"
#include "occam/expression.hpp"
#include "occam/fitness.hpp"
#include "occam/grammar.hpp"
#include "occam/network.hpp"
#include "occam/panel.hpp"
#include "occam/parallel.hpp"
#include "occam/pareto.hpp"
#include "occam/random.hpp"
#include "occam/units.hpp"

namespace occam {

struct TrainConfig {
    int epochs = 1000;
    double lr = 5.0;
    double const_lr = 0.05;
    double decay = 1.0;
    double w_alpha = 0.0;
    double w_gamma = 0.0;
    double w_units = 100.0;
    std::optional<double> invalid_floor;
    double sigma = 5.0;
    std::size_t top_q = 5;
    double equalization = 0.0;
    double temperature = 1.0;
    std::size_t samples = 100;
    std::uint64_t seed = 0;
    int const_fit_iters = 50;
    ConstantMethod const_method = ConstantMethod::LevenbergMarquardt;
    double init_low = 1.0, init_high = 1.0;
    double max_step = 0.0;
    double fitness_resolution = 1e-6;  // ranking compares fitness in steps of this × total rows
    PanelAggregate aggregate = PanelAggregate::Mean;
    int polish_iters = 500;
    bool cache = true;
    bool record_samples = false;
    std::size_t threads = 0;  // 0 = default_thread_count()

    void validate() const {
        if (epochs < 0) throw ValidationError("epochs must be >= 0", "/train/epochs");
        if (samples < 1) throw ValidationError("samples must be >= 1", "/train/samples");
        if (!(lr >= 0.0)) throw ValidationError("lr must be >= 0", "/train/lr");
        if (!(const_lr > 0.0)) throw ValidationError("const_lr must be positive", "/train/const_lr");
        if (!(decay > 0.0)) throw ValidationError("decay must be positive", "/train/decay");
        if (top_q < 1) throw ValidationError("top_q must be >= 1", "/train/top_q");
        if (!(temperature > 0.0)) throw ValidationError("temperature must be positive", "/train/temperature");
        if (!(equalization >= 0.0)) throw ValidationError("equalization must be >= 0", "/train/equalization");
        if (!(sigma > 0.0)) throw ValidationError("sigma must be positive", "/train/sigma");
        if (w_alpha < 0.0 || w_gamma < 0.0 || w_units < 0.0) throw ValidationError("regularization weights must be >= 0", "/train");
        if (!(fitness_resolution >= 0.0)) throw ValidationError("fitness_resolution must be >= 0", "/train/fitness_resolution");
        if (const_fit_iters < 0) throw ValidationError("const_fit_iters must be >= 0", "/train/const_fit_iters");
    }

    FitnessConfig fitness() const { return {sigma, w_alpha, w_gamma, w_units, invalid_floor, aggregate}; }

    ConstantFitOptions constant_options() const {
        ConstantFitOptions o;
        o.method = const_method;
        o.const_lr = const_lr;
        o.iters = const_fit_iters;
        o.init_low = init_low;
        o.init_high = init_high;
        o.seed = seed;
        return o;
    }

    std::size_t worker_threads() const { return threads ? threads : default_thread_count(); }
};

struct EpochRecord {
    int epoch = 0;
    double best_fitness = 0.0;        // best-ever after this epoch
    double epoch_best_fitness = 0.0;  // best within this epoch's batch
    std::size_t unique_structures = 0;
    std::size_t fitted = 0;           // structures scored this epoch (cache misses)
    std::size_t unit_rejected = 0;
    std::size_t invalid = 0;
    bool updated = false;
    double seconds = 0.0;
};

struct SampleRecord {
    int epoch = 0;
    std::size_t index = 0;
    FitnessStatus status = FitnessStatus::Ok;
    double fitness = 0.0;
    std::size_t data_evaluations = 0;
    bool cached = false;
    Connections provenance;
};

/// A fitted structure kept for re-scoring under other regularization weights.
struct PoolEntry {
    Expression expression;
    std::vector<std::vector<double>> constants;
    double raw_fitness = 0.0;
    ComplexityReport complexity;
};

struct FitResult {
    std::string target;
    Expression expression;  // constants of panel 0
    std::vector<std::vector<double>> panel_constants;
    std::vector<std::string> panel_names;
    ComplexityReport complexity;
    LossReport loss;
    double fitness = -std::numeric_limits<double>::infinity();
    bool found = false;
    std::vector<EpochRecord> history;
    std::vector<SampleRecord> samples;
    std::vector<PoolEntry> pool;
    Connections provenance;
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
    std::size_t data_evaluations = 0;
    double output_scale = 1.0;  // reported expression = output_scale · expression

    std::string text(int precision = 6, std::size_t panel = 0) const {
        if (!found) return "";
        return to_canonical_string(expression, panel_constants.at(panel), precision);
    }
};

/// Training progress that a checkpoint captures.
struct Checkpoint {
    static constexpr int kFormatVersion = 1;
    std::uint64_t library_hash = 0;
    std::uint64_t seed = 0;
    int next_epoch = 0;
    double lr = 0.0;
    std::vector<std::vector<double>> weights;
    bool has_best = false;
    Connections best_provenance;
    std::vector<std::vector<double>> best_constants;
    double best_fitness = -std::numeric_limits<double>::infinity();
    int best_complexity = INT_MAX;
    std::vector<EpochRecord> history;
};

struct TrainHooks {
    int checkpoint_every = 0;
    std::function<void(const Checkpoint&)> on_checkpoint;
    const Checkpoint* resume = nullptr;
    int stop_after_epoch = -1;  // ≥ 0: stop once this epoch completes (for checkpoint tests)
    std::function<void(const EpochRecord&)> on_epoch;
};

/// Unit the target must carry: its own declaration, or for a derivative
/// target "dX" the unit of X.
inline UnitVector target_unit(const UnitSpec& spec, const std::string& target) {
    if (spec.has(target)) return spec.unit_of(target);
    if (target.size() > 1 && target[0] == 'd' && spec.has(target.substr(1))) return spec.unit_of(target.substr(1));
    throw ValidationError("no unit declared for target '" + target + "'");
}

namespace detail {

struct Scored {
    FitnessOutcome outcome;
    std::vector<std::vector<double>> constants;
    std::size_t evaluations = 0;
};

class Scorer {
public:
    Scorer(const PanelSet& panels, const TrainConfig& cfg, std::size_t target_col)
        : panels_(panels), fcfg_(cfg.fitness()), copt_(cfg.constant_options()), target_col_(target_col) {
        if (panels.units) unit_ = target_unit(*panels.units, panels.target_names.at(target_col));
    }

    Scored operator()(const Expression& e) const {
        Scored s;
        const bool ok = !unit_ || units_consistent(propagate_units(e, *panels_.units).at(0), *unit_);
        if (!ok) {
            s.outcome = regularized_fitness(e, panels_, {}, fcfg_, false);
            s.constants.assign(panels_.size(), e.constants());
            return s;
        }
        s.constants.resize(panels_.size());
        for (std::size_t p = 0; p < panels_.size(); ++p) {
            const auto& panel = panels_.panels[p];
            auto fit = fit_constants(e, panel.inputs, panel.targets.col(target_col_), copt_);
            s.constants[p] = std::move(fit.constants);
            s.evaluations += fit.evaluations;
        }
        s.outcome = regularized_fitness(e, panels_, s.constants, fcfg_, true, 0, target_col_);
        s.evaluations += panels_.size();
        return s;
    }

    const FitnessConfig& fitness_config() const noexcept { return fcfg_; }

private:
    const PanelSet& panels_;
    FitnessConfig fcfg_;
    ConstantFitOptions copt_;
    std::size_t target_col_;
    std::optional<UnitVector> unit_;
};

inline bool better(double fa, int ca, double fb, int cb) { return fa > fb || (fa == fb && ca < cb); }

/// Fitness rounded to the ranking resolution; values within a step tie and
/// fall back to complexity.
inline double rank_value(double f, double step) { return step > 0.0 && std::isfinite(f) ? std::round(f / step) * step : f; }

} // namespace detail

/// The epoch loop: sample, unit-check, fit constants (per panel), score,
/// update on the top_q, and keep the best-ever expression.
inline FitResult train(const PanelSet& panels, const BasisLibrary& library, const TrainConfig& cfg, std::size_t target_col = 0,
                       const TrainHooks& hooks = {}) {
    const auto start = std::chrono::steady_clock::now();
    cfg.validate();
    panels.validate();
    if (library.inputs() != panels.input_names) throw ValidationError("library inputs do not match the data's input columns");
    if (target_col >= panels.target_names.size()) throw ValidationError("target column out of range");

    const std::size_t threads = cfg.worker_threads();
    ProbNetwork net(library, cfg.temperature, cfg.equalization);
    const detail::Scorer scorer(panels, cfg, target_col);
    const double total_rows = static_cast<double>(panels.total_rows());
    const double step = cfg.fitness_resolution * total_rows;

    FitResult result;
    result.target = panels.target_names[target_col];
    result.seed = cfg.seed;
    for (const auto& p : panels.panels) result.panel_names.push_back(p.name);

    Checkpoint st;
    st.library_hash = library.hash();
    st.seed = cfg.seed;
    st.lr = cfg.lr;
    if (hooks.resume) {
        if (hooks.resume->library_hash != st.library_hash) throw ValidationError("checkpoint was written for a different library");
        if (hooks.resume->seed != cfg.seed) throw ValidationError("checkpoint seed does not match the configured seed");
        st = *hooks.resume;
        net.set_weights(st.weights);
    }

    std::unordered_map<std::string, detail::Scored> cache;
    std::map<std::pair<int, int>, PoolEntry> pool;
    const int last_epoch = std::max(cfg.epochs, 1);

    for (int epoch = st.next_epoch; epoch < last_epoch; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        SampleBatch batch = net.sample(cfg.samples, cfg.seed, static_cast<std::uint64_t>(epoch), threads);
        const std::size_t s = batch.size();
        std::vector<std::string> keys(s);
        for (std::size_t i = 0; i < s; ++i) keys[i] = batch.expressions[i].structure_key();

        std::unordered_map<std::string, detail::Scored> fresh;
        std::size_t rec_unique = 0;
        std::vector<std::size_t> todo;
        std::vector<char> hit(s, 0);
        {
            std::vector<std::string> distinct = keys;
            std::sort(distinct.begin(), distinct.end());
            rec_unique = static_cast<std::size_t>(std::unique(distinct.begin(), distinct.end()) - distinct.begin());
        }
        for (std::size_t i = 0; i < s; ++i) {
            if (!cfg.cache) {
                todo.push_back(i);  // no memoization: every sample is scored
                continue;
            }
            if (cache.count(keys[i])) {
                hit[i] = 1;
                continue;
            }
            if (fresh.emplace(keys[i], detail::Scored{}).second) todo.push_back(i);
            else hit[i] = 1;
        }
        std::vector<detail::Scored> scored(todo.size());
        parallel_for(todo.size(), threads, [&](std::size_t k) { scored[k] = scorer(batch.expressions[todo[k]]); });
        std::vector<const detail::Scored*> own(s, nullptr);
        for (std::size_t k = 0; k < todo.size(); ++k) {
            if (cfg.cache) fresh[keys[todo[k]]] = scored[k];
            else own[todo[k]] = &scored[k];
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.unique_structures = rec_unique;
        rec.fitted = todo.size();
        std::vector<double> fitness(s), weight(s);
        std::vector<int> cx(s);
        bool any_valid = false;
        double epoch_best = -std::numeric_limits<double>::infinity();
        std::vector<char> first_use(s, 0);
        for (std::size_t k = 0; k < todo.size(); ++k) first_use[todo[k]] = 1;
        for (std::size_t i = 0; i < s; ++i) {
            auto it = fresh.find(keys[i]);
            const detail::Scored& sc = own[i] ? *own[i] : it != fresh.end() ? it->second : cache.at(keys[i]);
            const auto& o = sc.outcome;
            fitness[i] = detail::rank_value(o.fitness, step);
            cx[i] = o.complexity.total();
            weight[i] = std::max(0.0, o.fitness) / total_rows;
            if (o.status == FitnessStatus::UnitRejected) ++rec.unit_rejected;
            if (o.status == FitnessStatus::Invalid) ++rec.invalid;
            if (o.status == FitnessStatus::Ok) any_valid = true;
            epoch_best = std::max(epoch_best, o.fitness);
            if (cfg.record_samples)
                result.samples.push_back({epoch, i, o.status, o.fitness, first_use[i] ? sc.evaluations : 0, !first_use[i], batch.provenance[i]});
            if (first_use[i]) result.data_evaluations += sc.evaluations;
            if (o.status == FitnessStatus::Ok && detail::better(fitness[i], cx[i], st.best_fitness, st.best_complexity)) {
                st.has_best = true;
                st.best_fitness = fitness[i];
                st.best_complexity = cx[i];
                st.best_provenance = batch.provenance[i];
                st.best_constants = sc.constants;
            }
            if (o.status == FitnessStatus::Ok && first_use[i]) {
                const auto key = std::make_pair(o.complexity.activation_count, o.complexity.constant_count);
                auto pit = pool.find(key);
                if (pit == pool.end() || o.raw > pit->second.raw_fitness)
                    pool[key] = PoolEntry{batch.expressions[i], sc.constants, o.raw, o.complexity};
            }
        }
        if (cfg.cache)
            for (auto& [k, v] : fresh) cache.emplace(k, std::move(v));

        if (cfg.epochs > 0 && any_valid) {
            UpdateOptions uo;
            uo.max_step = cfg.max_step;
            net.update(batch.provenance, weight, cx, cfg.top_q, st.lr, uo);
            rec.updated = true;
        }
        st.lr *= cfg.decay;
        rec.best_fitness = st.best_fitness;
        rec.epoch_best_fitness = epoch_best;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        st.history.push_back(rec);
        st.next_epoch = epoch + 1;
        if (hooks.on_epoch) hooks.on_epoch(rec);
        const bool stop = hooks.stop_after_epoch >= 0 && epoch >= hooks.stop_after_epoch;
        if (hooks.on_checkpoint && ((hooks.checkpoint_every > 0 && (epoch + 1) % hooks.checkpoint_every == 0) || stop)) {
            st.weights = net.weights();
            hooks.on_checkpoint(st);
        }
        if (stop) break;
    }

    result.history = st.history;
    for (auto& [k, v] : pool) result.pool.push_back(std::move(v));
    if (st.has_best) {
        result.found = true;
        result.provenance = st.best_provenance;
        result.expression = net.build(st.best_provenance);
        result.panel_constants = st.best_constants;
        if (cfg.polish_iters > 0 && !result.expression.constants().empty()) {
            ConstantFitOptions po = cfg.constant_options();
            po.method = ConstantMethod::LevenbergMarquardt;
            po.iters = cfg.polish_iters;
            for (std::size_t p = 0; p < panels.size(); ++p) {
                const auto& panel = panels.panels[p];
                const auto y = panel.targets.col(target_col);
                po.init = result.panel_constants[p];
                Evaluator ev;
                const double before = sum_squared_error(ev.evaluate_root(result.expression, panel.inputs, result.panel_constants[p]), y) /
                                      static_cast<double>(y.size());
                auto fit = fit_constants(result.expression, panel.inputs, y, po);
                if (fit.mse < before) result.panel_constants[p] = fit.constants;
            }
        }
        const auto& fcfg = scorer.fitness_config();
        const auto searched = regularized_fitness(result.expression, panels, st.best_constants, fcfg, true, 0, target_col);
        auto outcome = regularized_fitness(result.expression, panels, result.panel_constants, fcfg, true, 0, target_col);
        if (outcome.status != FitnessStatus::Ok || outcome.fitness < searched.fitness) {
            // polishing never makes the reported result worse than the search found
            result.panel_constants = st.best_constants;
            outcome = searched;
        }
        result.expression.set_constants(result.panel_constants[0]);
        result.fitness = outcome.fitness;
        result.complexity = complexity(result.expression);
        result.loss = panel_loss(result.expression, panels, result.panel_constants, 0, target_col);
        result.loss.fitness = result.fitness;
    }
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

/// Weight-shared fit across P ≥ 2 panels: one structure, constants per panel.
inline FitResult ensemble_fit(const PanelSet& panels, const BasisLibrary& library, const TrainConfig& cfg, std::size_t target_col = 0) {
    if (panels.size() < 2) throw ValidationError("ensemble fitting needs at least 2 panels");
    return train(panels, library, cfg, target_col);
}

/// Best of k seeded runs (seeds derived from cfg.seed), ranked by loss then complexity.
inline FitResult best_of_seeds(const PanelSet& panels, const BasisLibrary& library, TrainConfig cfg, std::size_t k, std::size_t target_col = 0) {
    FitResult best;
    bool have = false;
    const std::uint64_t base = cfg.seed;
    for (std::size_t r = 0; r < k; ++r) {
        cfg.seed = derive_seed(base, 0x5eed, r);
        FitResult fr = train(panels, library, cfg, target_col);
        if (!fr.found) continue;
        if (!have || fr.loss.wmse < best.loss.wmse ||
            (fr.loss.wmse == best.loss.wmse && fr.complexity.total() < best.complexity.total())) {
            best = std::move(fr);
            have = true;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Grid search

struct GridSpec {
    std::vector<double> sigma{0.5, 5.0, 50.0};
    std::vector<std::size_t> top_q{1, 5, 10};
    std::vector<double> equalization{0.0, 1.0, 5.0};

    std::size_t size() const noexcept { return sigma.size() * top_q.size() * equalization.size(); }
};

struct GridCell {
    double sigma = 0.0;
    std::size_t top_q = 0;
    double equalization = 0.0;
    std::uint64_t seed = 0;
    std::optional<FitResult> result;
    std::string error;
};

struct GridResult {
    std::vector<GridCell> cells;
    std::vector<std::size_t> ranking;  // cell indices, best first (failed cells last)
    std::size_t winner() const { return ranking.at(0); }
};

inline bool rank_before(const FitResult& a, const FitResult& b) {
    if (a.found != b.found) return a.found;
    if (a.loss.wmse != b.loss.wmse) return a.loss.wmse < b.loss.wmse;
    return a.complexity.total() < b.complexity.total();
}

/// Full cross-product σ × top_q × E; cell c runs with seed derive_seed(base, c).
/// Cells run in parallel; each cell's own training is single-threaded.
inline GridResult grid_search(const PanelSet& panels, const BasisLibrary& library, const GridSpec& grid, const TrainConfig& base,
                              std::size_t target_col = 0) {
    if (grid.size() == 0) throw ValidationError("grid has an empty axis");
    GridResult out;
    for (double s : grid.sigma)
        for (auto q : grid.top_q)
            for (double e : grid.equalization) out.cells.push_back({s, q, e, derive_seed(base.seed, out.cells.size()), std::nullopt, {}});
    const std::size_t threads = base.worker_threads();
    parallel_for(out.cells.size(), threads, [&](std::size_t c) {
        auto& cell = out.cells[c];
        TrainConfig cfg = base;
        cfg.sigma = cell.sigma;
        cfg.top_q = cell.top_q;
        cfg.equalization = cell.equalization;
        cfg.seed = grid.size() == 1 ? base.seed : cell.seed;
        cfg.threads = out.cells.size() > 1 ? 1 : base.threads;
        try {
            cell.result = train(panels, library, cfg, target_col);
        } catch (const std::exception& ex) {
            cell.error = ex.what();
        }
    });
    for (std::size_t c = 0; c < out.cells.size(); ++c) out.ranking.push_back(c);
    std::stable_sort(out.ranking.begin(), out.ranking.end(), [&](std::size_t a, std::size_t b) {
        const auto& ra = out.cells[a].result;
        const auto& rb = out.cells[b].result;
        if (ra.has_value() != rb.has_value()) return ra.has_value();
        if (!ra) return false;
        return rank_before(*ra, *rb);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Pareto sweep

struct RegularizationPoint {
    double w_alpha = 0.0;
    double w_gamma = 0.0;
};

struct SweepPoint {
    RegularizationPoint weights;
    Expression expression;
    std::vector<std::vector<double>> constants;
    ComplexityReport complexity;
    LossReport loss;
    double fitness = 0.0;
    std::string text;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    std::vector<std::size_t> front;
    std::vector<FitResult> runs;
};

/// One training run per regularization point. All fitted structures go into a
/// shared pool (best raw fitness per (α, γ) pair); each point then takes the
/// pool entry maximizing raw − w_α·α − w_γ·γ, so every point is judged against
/// the same candidates.
inline SweepResult pareto_sweep(const PanelSet& panels, const BasisLibrary& library, const std::vector<RegularizationPoint>& grid,
                                const TrainConfig& base, std::size_t target_col = 0) {
    if (grid.empty()) throw ValidationError("regularization grid is empty");
    SweepResult out;
    out.runs.resize(grid.size());
    const std::size_t threads = base.worker_threads();
    parallel_for(grid.size(), threads, [&](std::size_t g) {
        TrainConfig cfg = base;
        cfg.w_alpha = grid[g].w_alpha;
        cfg.w_gamma = grid[g].w_gamma;
        cfg.seed = derive_seed(base.seed, g);
        cfg.threads = grid.size() > 1 ? 1 : base.threads;
        out.runs[g] = train(panels, library, cfg, target_col);
    });
    std::map<std::pair<int, int>, const PoolEntry*> pool;
    for (const auto& run : out.runs)
        for (const auto& e : run.pool) {
            const auto key = std::make_pair(e.complexity.activation_count, e.complexity.constant_count);
            auto it = pool.find(key);
            if (it == pool.end() || e.raw_fitness > it->second->raw_fitness) pool[key] = &e;
        }
    if (pool.empty()) throw std::runtime_error("sweep produced no valid expressions");
    std::vector<ParetoPoint> pts;
    for (const auto& w : grid) {
        const PoolEntry* best = nullptr;
        double best_f = -std::numeric_limits<double>::infinity();
        for (const auto& [key, e] : pool) {
            const double f = e->raw_fitness - w.w_alpha * key.first - w.w_gamma * key.second;
            if (!best || detail::better(f, e->complexity.total(), best_f, best->complexity.total())) {
                best = e;
                best_f = f;
            }
        }
        SweepPoint sp;
        sp.weights = w;
        sp.expression = best->expression;
        sp.constants = best->constants;
        sp.expression.set_constants(sp.constants[0]);
        sp.complexity = best->complexity;
        sp.fitness = best_f;
        sp.loss = panel_loss(sp.expression, panels, sp.constants, 0, target_col);
        sp.loss.fitness = best_f;
        sp.text = to_canonical_string(sp.expression, sp.constants[0]);
        pts.push_back({static_cast<double>(sp.complexity.total()), sp.loss.wmse});
        out.points.push_back(std::move(sp));
    }
    out.front = pareto_front(pts);
    return out;
}

// ---------------------------------------------------------------------------
// Implicit relations

struct ImplicitCandidate {
    std::string target;
    std::vector<std::string> inputs;
    FitResult result;
    double normalized_loss = 0.0;  // wmse / target variance
};

/// Tries every column as the target with the rest as inputs. Candidates are
/// ranked by variance-normalized loss, then complexity, then later target column first.
inline std::vector<ImplicitCandidate> implicit_partition_search(const PanelSet& data, const std::vector<std::vector<std::string>>& layers,
                                                                const TrainConfig& cfg, std::size_t max_columns = 8,
                                                                const BasisCatalog& catalog = BasisCatalog::builtin()) {
    std::vector<std::string> cols = data.input_names;
    cols.insert(cols.end(), data.target_names.begin(), data.target_names.end());
    if (cols.size() < 2) throw ValidationError("implicit search needs at least 2 columns");
    if (cols.size() > max_columns) throw ValidationError("implicit search is limited to " + std::to_string(max_columns) + " columns");
    std::vector<ImplicitCandidate> out(cols.size());
    for (std::size_t t = 0; t < cols.size(); ++t) {
        PanelSet ps;
        ps.units = data.units;
        ps.target_names = {cols[t]};
        for (std::size_t c = 0; c < cols.size(); ++c)
            if (c != t) ps.input_names.push_back(cols[c]);
        for (const auto& p : data.panels) {
            Matrix all = p.inputs;
            for (std::size_t k = 0; k < p.targets.cols(); ++k) all.append_column(p.targets.col(k));
            std::vector<std::size_t> in_idx;
            for (std::size_t c = 0; c < cols.size(); ++c)
                if (c != t) in_idx.push_back(c);
            const std::size_t tg[] = {t};
            ps.panels.push_back({p.name, all.select_columns(in_idx), all.select_columns(tg), p.time});
        }
        auto lib = BasisLibrary::from_layers(layers, ps.input_names, catalog);
        TrainConfig c = cfg;
        c.seed = derive_seed(cfg.seed, t);
        out[t].target = cols[t];
        out[t].inputs = ps.input_names;
        out[t].result = train(ps, lib, c);
        double mean = 0.0, var = 0.0;
        std::size_t n = 0;
        for (const auto& p : ps.panels)
            for (double v : p.targets.col(0)) mean += v, ++n;
        mean /= static_cast<double>(n);
        for (const auto& p : ps.panels)
            for (double v : p.targets.col(0)) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n);
        const double loss = out[t].result.found ? out[t].result.loss.wmse : std::numeric_limits<double>::infinity();
        out[t].normalized_loss = var > 0.0 ? loss / var : loss;
    }
    std::vector<std::size_t> order(out.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = order.size() - 1 - i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (out[a].normalized_loss != out[b].normalized_loss) return out[a].normalized_loss < out[b].normalized_loss;
        return out[a].result.complexity.total() < out[b].result.complexity.total();
    });
    std::vector<ImplicitCandidate> ranked;
    for (auto i : order) ranked.push_back(std::move(out[i]));
    return ranked;
}

// ---------------------------------------------------------------------------
// Coupled ODE targets

struct ChainStep {
    std::size_t target_col = 0;          // column of the panel set's targets
    std::vector<std::string> depends_on; // earlier targets whose predictions become inputs
};

/// Checks that each step only depends on targets fitted before it.
inline void validate_chain(const PanelSet& panels, const std::vector<ChainStep>& steps) {
    std::vector<std::string> done;
    for (const auto& s : steps) {
        const auto& name = panels.target_names.at(s.target_col);
        for (const auto& d : s.depends_on) {
            if (d == name) throw ValidationError("target '" + name + "' depends on itself");
            if (std::find(done.begin(), done.end(), d) == done.end())
                throw ValidationError("dependency cycle or unknown dependency: '" + name + "' needs '" + d + "' first");
        }
        done.push_back(name);
    }
}

/// Fits targets in order; a step's declared dependencies are appended as input
/// columns holding the earlier fits' predictions.
inline std::vector<FitResult> chain_coupled_fit(const PanelSet& panels, const std::vector<std::vector<std::string>>& layers,
                                                const std::vector<ChainStep>& steps, const TrainConfig& cfg,
                                                const BasisCatalog& catalog = BasisCatalog::builtin()) {
    validate_chain(panels, steps);
    std::vector<FitResult> results;
    std::map<std::string, std::vector<std::vector<double>>> predictions;  // target → per-panel series
    for (std::size_t k = 0; k < steps.size(); ++k) {
        const auto& step = steps[k];
        PanelSet ps = panels.target(step.target_col);
        for (const auto& d : step.depends_on) {
            ps.input_names.push_back(d);
            for (std::size_t p = 0; p < ps.panels.size(); ++p) ps.panels[p].inputs.append_column(predictions.at(d)[p]);
        }
        auto lib = BasisLibrary::from_layers(layers, ps.input_names, catalog);
        TrainConfig c = cfg;
        c.seed = derive_seed(cfg.seed, 0xc4a1, k);
        FitResult fr = train(ps, lib, c);
        auto& pred = predictions[panels.target_names[step.target_col]];
        for (std::size_t p = 0; p < ps.panels.size(); ++p) {
            std::vector<double> y(ps.panels[p].rows(), std::numeric_limits<double>::quiet_NaN());
            if (fr.found) Evaluator().evaluate_root(fr.expression, ps.panels[p].inputs, fr.panel_constants[p], 0, y);
            pred.push_back(std::move(y));
        }
        results.push_back(std::move(fr));
    }
    return results;
}

// ---------------------------------------------------------------------------
// Exhaustive baseline

struct EnumerationBest {
    double fitness = -std::numeric_limits<double>::infinity();
    Connections provenance;
    std::size_t structures = 0;
};

/// Scores every connection set of a small network with the same scorer train uses.
inline EnumerationBest enumerate_best(const PanelSet& panels, const BasisLibrary& library, const TrainConfig& cfg, std::size_t limit = 100000,
                                      std::size_t target_col = 0) {
    ProbNetwork net(library, cfg.temperature, cfg.equalization);
    const detail::Scorer scorer(panels, cfg, target_col);
    EnumerationBest best;
    std::unordered_map<std::string, double> seen;
    int best_cx = INT_MAX;
    for (const auto& c : net.enumerate(limit)) {
        Expression e = net.build(c);
        const std::string key = e.structure_key();
        if (seen.count(key)) continue;
        const auto s = scorer(e);
        seen[key] = s.outcome.fitness;
        if (s.outcome.status == FitnessStatus::Ok && detail::better(s.outcome.fitness, s.outcome.complexity.total(), best.fitness, best_cx)) {
            best.fitness = s.outcome.fitness;
            best_cx = s.outcome.complexity.total();
            best.provenance = c;
        }
    }
    best.structures = seen.size();
    return best;
}

} // namespace occam
