#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "occam/error.hpp"
#include "occam/expression.hpp"
#include "occam/panel.hpp"
#include "occam/random.hpp"
#include "occam/units.hpp"

namespace occam {

enum class PanelAggregate : std::uint8_t { Mean, Median };

struct FitnessConfig {
    double sigma = 5.0;
    double w_alpha = 0.0;
    double w_gamma = 0.0;
    double w_units = 100.0;
    std::optional<double> invalid_floor;  // default −10·w_units − 1e6
    PanelAggregate aggregate = PanelAggregate::Mean;

    double floor() const { return invalid_floor.value_or(-10.0 * w_units - 1e6); }
    void validate() const {
        if (!(sigma > 0.0)) throw ValidationError("sigma must be positive");
        if (w_alpha < 0.0 || w_gamma < 0.0 || w_units < 0.0) throw ValidationError("regularization weights must be non-negative");
    }
};

struct LossReport {
    double mse = 0.0;     // pooled: Σ SSE_p / Σ N_p
    double wmse = 0.0;    // mean_p SSE_p / N_p
    double median = 0.0;  // median_p SSE_p / N_p
    double fitness = 0.0;
    std::vector<double> per_panel_errors;  // SSE_p / N_p
};

/// Σ exp(−(y−ŷ)²/2σ²); non-finite predictions contribute 0.
inline double gaussian_fitness(std::span<const double> predictions, std::span<const double> targets, double sigma) {
    if (predictions.size() != targets.size() || predictions.empty()) throw ValidationError("gaussian_fitness needs equal, non-empty inputs");
    if (!(sigma > 0.0)) throw ValidationError("sigma must be positive");
    const double inv = 1.0 / (2.0 * sigma * sigma);
    double f = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double r = targets[i] - predictions[i];
        if (std::isfinite(r)) f += std::exp(-r * r * inv);
    }
    return f;
}

inline double sum_squared_error(const double* pred, std::span<const double> target) {
    double s = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double r = pred[i] - target[i];
        s += r * r;
    }
    return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// Constant fitting

enum class ConstantMethod : std::uint8_t { GradientDescent, LevenbergMarquardt };

struct ConstantFitOptions {
    ConstantMethod method = ConstantMethod::LevenbergMarquardt;
    double const_lr = 0.05;
    int iters = 50;
    double fd_rel_step = 1e-6;
    std::optional<std::vector<double>> init;        // overrides the expression's own values
    double init_low = 1.0, init_high = 1.0;         // randomized init range when low < high
    std::uint64_t seed = 0;
};

struct ConstantFit {
    std::vector<double> constants;
    double mse = std::numeric_limits<double>::infinity();
    bool diverged = false;
    std::size_t evaluations = 0;  // full-data evaluations performed
};

namespace detail {

class Objective {
public:
    Objective(const Expression& e, const Matrix& x, std::span<const double> y, std::size_t root) : e_(e), x_(x), y_(y), root_(root) {}

    double sse(std::span<const double> c) {
        ++evaluations;
        return sum_squared_error(ev_.evaluate_root(e_, x_, c, root_), y_);
    }

    /// Residual vector ŷ − y into r; returns SSE.
    double residuals(std::span<const double> c, Eigen::VectorXd& r) {
        ++evaluations;
        const double* p = ev_.evaluate_root(e_, x_, c, root_);
        r.resize(static_cast<Eigen::Index>(y_.size()));
        for (std::size_t i = 0; i < y_.size(); ++i) r[static_cast<Eigen::Index>(i)] = p[i] - y_[i];
        const double s = r.squaredNorm();
        return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
    }

    std::size_t rows() const noexcept { return y_.size(); }
    std::size_t evaluations = 0;

private:
    const Expression& e_;
    const Matrix& x_;
    std::span<const double> y_;
    std::size_t root_;
    Evaluator ev_;
};

inline double fd_step(double c, double rel) { return rel * std::max(1.0, std::fabs(c)); }

inline void fit_gradient_descent(Objective& obj, std::vector<double>& c, const ConstantFitOptions& opt, ConstantFit& out) {
    const double n = static_cast<double>(obj.rows());
    double best = obj.sse(c) / n;
    std::vector<double> best_c = c;
    std::vector<double> grad(c.size());
    for (int it = 0; it < opt.iters && std::isfinite(best); ++it) {
        for (std::size_t j = 0; j < c.size(); ++j) {
            const double h = fd_step(c[j], opt.fd_rel_step);
            const double saved = c[j];
            c[j] = saved + h;
            const double up = obj.sse(c) / n;
            c[j] = saved - h;
            const double down = obj.sse(c) / n;
            c[j] = saved;
            grad[j] = (up - down) / (2.0 * h);
        }
        bool finite = true;
        for (std::size_t j = 0; j < c.size(); ++j) {
            c[j] -= opt.const_lr * grad[j];
            finite = finite && std::isfinite(c[j]);
        }
        const double m = finite ? obj.sse(c) / n : std::numeric_limits<double>::infinity();
        if (!std::isfinite(m)) {
            out.diverged = true;
            break;
        }
        if (m < best) {
            best = m;
            best_c = c;
        }
    }
    out.constants = std::move(best_c);
    out.mse = best;
}

inline void fit_levenberg_marquardt(Objective& obj, std::vector<double>& c, const ConstantFitOptions& opt, ConstantFit& out) {
    const auto p = static_cast<Eigen::Index>(c.size());
    const auto n = static_cast<Eigen::Index>(obj.rows());
    Eigen::VectorXd r, r_up, r_down;
    double sse = obj.residuals(c, r);
    if (!std::isfinite(sse)) {
        out.constants = c;
        out.mse = sse;
        out.diverged = true;
        return;
    }
    Eigen::MatrixXd jac(n, p);
    double lambda = 1e-3;
    std::vector<double> trial(c.size());
    for (int it = 0; it < opt.iters; ++it) {
        bool jac_ok = true;
        for (Eigen::Index j = 0; j < p; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            const double h = fd_step(c[ju], opt.fd_rel_step);
            const double saved = c[ju];
            c[ju] = saved + h;
            obj.residuals(c, r_up);
            c[ju] = saved - h;
            obj.residuals(c, r_down);
            c[ju] = saved;
            jac.col(j) = (r_up - r_down) / (2.0 * h);
            jac_ok = jac_ok && jac.col(j).allFinite();
        }
        if (!jac_ok) break;
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd g = jac.transpose() * r;
        if (g.lpNorm<Eigen::Infinity>() == 0.0) break;
        bool improved = false;
        for (int attempt = 0; attempt < 12; ++attempt) {
            Eigen::MatrixXd a = jtj;
            for (Eigen::Index j = 0; j < p; ++j) a(j, j) += lambda * std::max(jtj(j, j), 1e-12);
            const Eigen::VectorXd step = a.ldlt().solve(-g);
            if (!step.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            for (std::size_t j = 0; j < c.size(); ++j) trial[j] = c[j] + step[static_cast<Eigen::Index>(j)];
            Eigen::VectorXd r_trial;
            const double s = obj.residuals(trial, r_trial);
            if (s < sse) {
                const double rel = (sse - s) / std::max(sse, 1e-300);
                c = trial;
                r = std::move(r_trial);
                sse = s;
                lambda = std::max(lambda / 3.0, 1e-12);
                improved = true;
                if (rel < 1e-12) it = opt.iters;
                break;
            }
            lambda *= 4.0;
        }
        if (!improved || sse == 0.0) break;
    }
    out.constants = c;
    out.mse = sse / static_cast<double>(n);
}

} // namespace detail

/// Minimizes MSE of root `root` over the constants. Returns the best finite
/// iterate seen; `diverged` flags a non-finite loss along the way.
inline ConstantFit fit_constants(const Expression& expr, const Matrix& inputs, std::span<const double> targets,
                                 const ConstantFitOptions& opt = {}, std::size_t root = 0) {
    if (targets.size() != inputs.rows()) throw ValidationError("targets length does not match input rows");
    ConstantFit out;
    std::vector<double> c = opt.init ? *opt.init : expr.constants();
    if (c.size() != expr.constants().size()) throw ValidationError("initial constants length mismatch");
    if (!opt.init && opt.init_low < opt.init_high) {
        Rng rng(opt.seed);
        for (auto& v : c) v = rng.uniform(opt.init_low, opt.init_high);
    }
    detail::Objective obj(expr, inputs, targets, root);
    if (c.empty()) {
        out.constants = c;
        out.mse = obj.sse(c) / static_cast<double>(targets.size());
        out.evaluations = obj.evaluations;
        return out;
    }
    if (opt.method == ConstantMethod::GradientDescent) detail::fit_gradient_descent(obj, c, opt, out);
    else detail::fit_levenberg_marquardt(obj, c, opt, out);
    out.evaluations = obj.evaluations;
    return out;
}

// ---------------------------------------------------------------------------
// Scoring

enum class FitnessStatus : std::uint8_t { Ok, UnitRejected, Invalid };

struct FitnessOutcome {
    double fitness = 0.0;
    double raw = 0.0;  // unregularized kernel fitness
    FitnessStatus status = FitnessStatus::Ok;
    ComplexityReport complexity;
};

/// Unit gate for a root: true when no spec is given or the root may carry the target's unit.
inline bool unit_gate(const Expression& expr, const std::optional<UnitSpec>& spec, const std::string& target_unit_name, std::size_t root = 0) {
    if (!spec) return true;
    return units_consistent(expr, *spec, spec->unit_of(target_unit_name), root);
}

/// Panel-normalized kernel fitness: each panel's kernel sum is scaled by
/// N_tot/(P·N_p), so panels count equally and a single panel is unscaled.
inline double panel_gaussian_fitness(const std::vector<const double*>& predictions, const PanelSet& panels, std::size_t target_col,
                                     const FitnessConfig& cfg) {
    const double total = static_cast<double>(panels.total_rows());
    const double count = static_cast<double>(panels.size());
    std::vector<double> per(panels.size());
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const auto& panel = panels.panels[p];
        const auto y = panel.targets.col(target_col);
        per[p] = gaussian_fitness({predictions[p], y.size()}, y, cfg.sigma) / static_cast<double>(y.size());
    }
    if (cfg.aggregate == PanelAggregate::Median) {
        std::sort(per.begin(), per.end());
        const std::size_t m = per.size() / 2;
        const double med = per.size() % 2 ? per[m] : 0.5 * (per[m - 1] + per[m]);
        return total * med;
    }
    double f = 0.0;
    for (double v : per) f += v;
    return total * f / count;
}

/// Scores already-fitted constants (one vector per panel). Unit-inconsistent
/// expressions get exactly −w_units with no data touched; expressions that are
/// mostly non-finite on any panel get the invalid floor.
inline FitnessOutcome regularized_fitness(const Expression& expr, const PanelSet& panels, const std::vector<std::vector<double>>& constants,
                                          const FitnessConfig& cfg, bool units_ok = true, std::size_t root = 0,
                                          std::size_t target_col = 0) {
    FitnessOutcome out;
    out.complexity = complexity(expr);
    if (!units_ok) {
        out.status = FitnessStatus::UnitRejected;
        out.fitness = out.raw = -cfg.w_units;
        return out;
    }
    if (constants.size() != panels.size()) throw ValidationError("need one constants vector per panel");
    std::vector<std::vector<double>> preds(panels.size());
    std::vector<const double*> ptrs(panels.size());
    Evaluator ev;
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const auto& panel = panels.panels[p];
        preds[p].resize(panel.rows());
        ev.evaluate_root(expr, panel.inputs, constants[p], root, preds[p]);
        if (mostly_non_finite(preds[p])) {
            out.status = FitnessStatus::Invalid;
            out.fitness = out.raw = cfg.floor();
            return out;
        }
        ptrs[p] = preds[p].data();
    }
    out.raw = panel_gaussian_fitness(ptrs, panels, target_col, cfg);
    out.fitness = out.raw - cfg.w_alpha * out.complexity.activation_count - cfg.w_gamma * out.complexity.constant_count;
    return out;
}

/// Per-panel MSE, WMSE (mean of SSE_p/N_p), median and pooled MSE.
inline LossReport panel_loss(const Expression& expr, const PanelSet& panels, const std::vector<std::vector<double>>& constants,
                             std::size_t root = 0, std::size_t target_col = 0) {
    if (constants.size() != panels.size()) throw ValidationError("need one constants vector per panel");
    LossReport rep;
    Evaluator ev;
    double sse_total = 0.0;
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const auto& panel = panels.panels[p];
        if (panel.rows() == 0) throw ValidationError("empty panel");
        const double sse = sum_squared_error(ev.evaluate_root(expr, panel.inputs, constants[p], root), panel.targets.col(target_col));
        sse_total += sse;
        rep.per_panel_errors.push_back(sse / static_cast<double>(panel.rows()));
    }
    rep.mse = sse_total / static_cast<double>(panels.total_rows());
    double s = 0.0;
    for (double e : rep.per_panel_errors) s += e;
    rep.wmse = s / static_cast<double>(panels.size());
    auto sorted = rep.per_panel_errors;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size() / 2;
    rep.median = sorted.size() % 2 ? sorted[m] : 0.5 * (sorted[m - 1] + sorted[m]);
    return rep;
}

} // namespace occam
