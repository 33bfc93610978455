#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "occam/error.hpp"
#include "occam/expression.hpp"
#include "occam/matrix.hpp"
#include "occam/panel.hpp"

namespace occam {

/// Uniformly sampled multivariate series: row i is at t0 + i·h.
struct TimeSeries {
    double t0 = 0.0;
    double h = 1.0;
    Matrix values;
    std::vector<std::string> names;
    std::vector<char> endpoint;  // rows whose value came from a one-sided scheme

    std::size_t rows() const noexcept { return values.rows(); }
    double time(std::size_t i) const noexcept { return t0 + h * static_cast<double>(i); }

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return i;
        throw ValidationError("time series has no column '" + name + "'");
    }

    /// Builds a series from explicit times, checking the spacing is uniform.
    static TimeSeries from_times(const std::vector<double>& t, Matrix values, std::vector<std::string> names) {
        if (t.size() != values.rows()) throw ValidationError("time column length mismatch");
        if (t.size() < 2) throw ValidationError("time series needs at least 2 rows");
        const double h = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
        if (!(h > 0.0)) throw ValidationError("time must be increasing");
        for (std::size_t i = 1; i < t.size(); ++i)
            if (std::fabs((t[i] - t[i - 1]) - h) > 1e-6 * std::max(1.0, std::fabs(h)))
                throw ValidationError("non-uniform time spacing at row " + std::to_string(i));
        return {t.front(), h, std::move(values), std::move(names), {}};
    }
};

/// Interior rows: (f(t+h) − f(t−h))/2h. The first and last rows use one-sided
/// first-order differences and are flagged in `endpoint`.
inline TimeSeries central_difference(const TimeSeries& s) {
    const std::size_t n = s.rows();
    if (n < 3) throw ValidationError("central difference needs at least 3 rows");
    if (!(s.h > 0.0)) throw ValidationError("time step must be positive");
    TimeSeries d{s.t0, s.h, Matrix(n, s.values.cols()), {}, std::vector<char>(n, 0)};
    for (const auto& name : s.names) d.names.push_back("d" + name);
    for (std::size_t c = 0; c < s.values.cols(); ++c) {
        auto x = s.values.col(c);
        auto y = d.values.col(c);
        for (std::size_t i = 1; i + 1 < n; ++i) y[i] = (x[i + 1] - x[i - 1]) / (2.0 * s.h);
        y[0] = (x[1] - x[0]) / s.h;
        y[n - 1] = (x[n - 1] - x[n - 2]) / s.h;
    }
    d.endpoint[0] = d.endpoint[n - 1] = 1;
    return d;
}

/// Local least-squares polynomial smoothing. Rows within half a window of an
/// edge are evaluated from the polynomial fitted to the first/last full window,
/// so polynomials of degree ≤ order pass through unchanged everywhere.
inline TimeSeries savitzky_golay(const TimeSeries& s, int window, int order) {
    if (window < 1 || window % 2 == 0) throw ValidationError("window must be odd and positive");
    if (order < 0 || order >= window) throw ValidationError("order must be below the window length");
    const std::size_t n = s.rows();
    const auto w = static_cast<std::size_t>(window);
    if (n < w) throw ValidationError("series shorter than the smoothing window");
    const int half = window / 2;
    Eigen::MatrixXd a(window, order + 1);
    for (int i = 0; i < window; ++i)
        for (int j = 0; j <= order; ++j) a(i, j) = std::pow(static_cast<double>(i - half), j);
    // Rows of `proj` map a window of samples to polynomial coefficients.
    const Eigen::MatrixXd proj = a.colPivHouseholderQr().solve(Eigen::MatrixXd::Identity(window, window));
    auto eval_at = [&](const Eigen::VectorXd& coef, double offset) {
        double v = 0.0, p = 1.0;
        for (int j = 0; j <= order; ++j) {
            v += coef[j] * p;
            p *= offset;
        }
        return v;
    };
    TimeSeries out = s;
    out.values = Matrix(n, s.values.cols());
    for (std::size_t c = 0; c < s.values.cols(); ++c) {
        auto x = s.values.col(c);
        auto y = out.values.col(c);
        Eigen::VectorXd seg(window);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t start = i < static_cast<std::size_t>(half) ? 0 : i - static_cast<std::size_t>(half);
            start = std::min(start, n - w);
            for (std::size_t k = 0; k < w; ++k) seg[static_cast<Eigen::Index>(k)] = x[start + k];
            const Eigen::VectorXd coef = proj * seg;
            y[i] = eval_at(coef, static_cast<double>(i) - static_cast<double>(start) - half);
        }
    }
    return out;
}

/// Natural cubic spline through (t, y).
class CubicSpline {
public:
    CubicSpline(std::vector<double> t, std::vector<double> y) : t_(std::move(t)), y_(std::move(y)) {
        const std::size_t n = t_.size();
        if (n < 3 || y_.size() != n) throw ValidationError("spline needs at least 3 matching knots");
        for (std::size_t i = 1; i < n; ++i)
            if (!(t_[i] > t_[i - 1])) throw ValidationError("spline knots must be strictly increasing");
        // Tridiagonal system for the second derivatives; m[0] = m[n−1] = 0.
        m_.assign(n, 0.0);
        std::vector<double> c(n, 0.0), d(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = t_[i] - t_[i - 1], h1 = t_[i + 1] - t_[i];
            const double sub = h0, diag = 2.0 * (h0 + h1), sup = h1;
            const double rhs = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
            const double denom = diag - sub * c[i - 1];
            c[i] = sup / denom;
            d[i] = (rhs - sub * d[i - 1]) / denom;
        }
        for (std::size_t i = n - 1; i-- > 1;) m_[i] = d[i] - c[i] * m_[i + 1];
    }

    double operator()(double x) const {
        const std::size_t n = t_.size();
        std::size_t k = static_cast<std::size_t>(std::upper_bound(t_.begin(), t_.end(), x) - t_.begin());
        k = std::clamp<std::size_t>(k, 1, n - 1);
        const double h = t_[k] - t_[k - 1];
        const double a = (t_[k] - x) / h, b = (x - t_[k - 1]) / h;
        return a * y_[k - 1] + b * y_[k] + ((a * a * a - a) * m_[k - 1] + (b * b * b - b) * m_[k]) * h * h / 6.0;
    }

private:
    std::vector<double> t_, y_, m_;
};

/// Resamples every column at n equidistant times spanning the original range.
inline TimeSeries cubic_spline_resample(const TimeSeries& s, std::size_t n) {
    if (s.rows() < 4) throw ValidationError("spline resampling needs at least 4 points");
    if (n < 2) throw ValidationError("resample count must be >= 2");
    std::vector<double> t(s.rows());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = s.time(i);
    const double span = t.back() - t.front();
    TimeSeries out{s.t0, span / static_cast<double>(n - 1), Matrix(n, s.values.cols()), s.names, {}};
    for (std::size_t c = 0; c < s.values.cols(); ++c) {
        auto col = s.values.col(c);
        CubicSpline spline(t, std::vector<double>(col.begin(), col.end()));
        for (std::size_t i = 0; i < n; ++i) {
            const double x = i + 1 == n ? t.back() : s.t0 + out.h * static_cast<double>(i);
            out.values(i, c) = spline(x);
        }
    }
    return out;
}

struct Smoothing {
    enum class Kind { None, SavitzkyGolay, Spline } kind = Kind::None;
    int window = 19;
    int order = 3;
    std::size_t samples = 100;

    static Smoothing none() { return {}; }
    static Smoothing savitzky_golay(int window, int order) { return {Kind::SavitzkyGolay, window, order, 0}; }
    static Smoothing spline(std::size_t n) { return {Kind::Spline, 19, 3, n}; }
};

struct OdeTask {
    TimeSeries series;
    std::vector<std::string> inputs;   // state columns used as regression inputs (empty = all)
    std::vector<std::string> targets;  // columns to differentiate
    double derivative_scale = 1.0;
    std::vector<Smoothing> smoothing;  // applied in order before differentiation

    void validate() const {
        if (!(derivative_scale > 0.0)) throw ValidationError("derivative scale must be positive");
        if (targets.empty()) throw ValidationError("ODE task has no targets");
        for (const auto& s : smoothing)
            if (s.kind == Smoothing::Kind::SavitzkyGolay && (s.window % 2 == 0 || s.order >= s.window))
                throw ValidationError("Savitzky-Golay window must be odd and greater than the order");
    }
};

inline TimeSeries apply_smoothing(TimeSeries s, const std::vector<Smoothing>& steps) {
    for (const auto& st : steps) {
        if (st.kind == Smoothing::Kind::SavitzkyGolay) s = savitzky_golay(s, st.window, st.order);
        else if (st.kind == Smoothing::Kind::Spline) s = cubic_spline_resample(s, st.samples);
    }
    return s;
}

/// (X, Ẋ·scale) pairs as a one-panel set; flagged endpoint rows are dropped.
/// Target columns are named "d<var>".
inline PanelSet build_ode_regression(const OdeTask& task) {
    task.validate();
    const TimeSeries smooth = apply_smoothing(task.series, task.smoothing);
    const TimeSeries deriv = central_difference(smooth);
    std::vector<std::string> inputs = task.inputs.empty() ? smooth.names : task.inputs;
    PanelSet out;
    out.input_names = inputs;
    for (const auto& t : task.targets) out.target_names.push_back("d" + t);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < deriv.rows(); ++i)
        if (!deriv.endpoint[i]) rows.push_back(i);
    Panel p;
    p.inputs = Matrix(rows.size(), inputs.size());
    p.targets = Matrix(rows.size(), task.targets.size());
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const std::size_t c = smooth.column(inputs[k]);
        for (std::size_t r = 0; r < rows.size(); ++r) p.inputs(r, k) = smooth.values(rows[r], c);
    }
    for (std::size_t k = 0; k < task.targets.size(); ++k) {
        const std::size_t c = smooth.column(task.targets[k]);
        for (std::size_t r = 0; r < rows.size(); ++r) p.targets(r, k) = deriv.values(rows[r], c) * task.derivative_scale;
    }
    for (auto r : rows) p.time.push_back(smooth.time(r));
    out.panels.push_back(std::move(p));
    return out;
}

/// Wraps every root in a c·x node with c = factor (used to undo derivative scaling).
inline Expression scale_roots(const Expression& e, double factor, const BasisCatalog& catalog = BasisCatalog::builtin()) {
    Expression out = e;
    for (std::size_t r = 0; r < e.roots().size(); ++r) {
        const std::int32_t arg[] = {e.roots()[r]};
        const double c[] = {factor};
        out.set_root(r, out.add_basis(catalog.at("x*c"), arg, c));
    }
    return out;
}

struct SimulationResult {
    TimeSeries series;
    bool aborted = false;  // a non-finite state stopped integration early
};

/// Fixed-step RK4 for dx_k/dt = f_k(x, exo(t)). Each expression is one state
/// equation (root 0, with its own constants); variables are resolved by name
/// against the state names, then the exogenous series (linear interpolation).
inline SimulationResult simulate(const std::vector<Expression>& system, const std::vector<std::string>& state,
                                 const std::vector<double>& initial, double h, std::size_t steps, double t0 = 0.0,
                                 const TimeSeries* exogenous = nullptr) {
    if (system.size() != state.size() || initial.size() != state.size())
        throw ValidationError("simulate needs one expression and one initial value per state variable");
    if (!(h > 0.0)) throw ValidationError("step must be positive");
    struct Binding {
        std::vector<int> source;  // ≥0 state index, <0 −(exo column + 1)
    };
    std::vector<Binding> bind(system.size());
    for (std::size_t k = 0; k < system.size(); ++k) {
        for (const auto& v : system[k].variables()) {
            auto it = std::find(state.begin(), state.end(), v);
            if (it != state.end()) {
                bind[k].source.push_back(static_cast<int>(it - state.begin()));
                continue;
            }
            if (exogenous) {
                auto jt = std::find(exogenous->names.begin(), exogenous->names.end(), v);
                if (jt != exogenous->names.end()) {
                    bind[k].source.push_back(-static_cast<int>(jt - exogenous->names.begin()) - 1);
                    continue;
                }
            }
            throw ValidationError("variable '" + v + "' is neither a state nor an exogenous series");
        }
    }
    auto exo_at = [&](std::size_t col, double t) {
        const auto& e = *exogenous;
        double pos = (t - e.t0) / e.h;
        pos = std::clamp(pos, 0.0, static_cast<double>(e.rows() - 1));
        const auto i = static_cast<std::size_t>(std::floor(pos));
        if (i + 1 >= e.rows()) return e.values(e.rows() - 1, col);
        const double f = pos - static_cast<double>(i);
        return (1 - f) * e.values(i, col) + f * e.values(i + 1, col);
    };
    std::vector<Matrix> row(system.size());
    for (std::size_t k = 0; k < system.size(); ++k) row[k] = Matrix(1, system[k].num_inputs());
    Evaluator ev;
    auto rhs = [&](const std::vector<double>& x, double t, std::vector<double>& dx) {
        for (std::size_t k = 0; k < system.size(); ++k) {
            for (std::size_t v = 0; v < bind[k].source.size(); ++v) {
                const int s = bind[k].source[v];
                row[k](0, v) = s >= 0 ? x[static_cast<std::size_t>(s)] : exo_at(static_cast<std::size_t>(-s - 1), t);
            }
            dx[k] = *ev.evaluate_root(system[k], row[k], system[k].constants(), 0);
        }
    };
    const std::size_t m = state.size();
    SimulationResult res;
    res.series.t0 = t0;
    res.series.h = h;
    res.series.names = state;
    std::vector<std::vector<double>> traj{initial};
    std::vector<double> x = initial, k1(m), k2(m), k3(m), k4(m), tmp(m);
    for (std::size_t i = 0; i < steps; ++i) {
        const double t = t0 + h * static_cast<double>(i);
        rhs(x, t, k1);
        for (std::size_t j = 0; j < m; ++j) tmp[j] = x[j] + 0.5 * h * k1[j];
        rhs(tmp, t + 0.5 * h, k2);
        for (std::size_t j = 0; j < m; ++j) tmp[j] = x[j] + 0.5 * h * k2[j];
        rhs(tmp, t + 0.5 * h, k3);
        for (std::size_t j = 0; j < m; ++j) tmp[j] = x[j] + h * k3[j];
        rhs(tmp, t + h, k4);
        bool finite = true;
        for (std::size_t j = 0; j < m; ++j) {
            x[j] += h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
            finite = finite && std::isfinite(x[j]);
        }
        if (!finite) {
            res.aborted = true;
            break;
        }
        traj.push_back(x);
    }
    res.series.values = Matrix(traj.size(), m);
    for (std::size_t i = 0; i < traj.size(); ++i)
        for (std::size_t j = 0; j < m; ++j) res.series.values(i, j) = traj[i][j];
    return res;
}

} // namespace occam
