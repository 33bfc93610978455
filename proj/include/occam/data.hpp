#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "occam/error.hpp"
#include "occam/matrix.hpp"
#include "occam/numdiff.hpp"
#include "occam/panel.hpp"
#include "occam/random.hpp"

namespace occam {

// ---------------------------------------------------------------------------
// CSV

/// Header plus raw cells; numeric conversion happens per requested column.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::string source;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        std::string known;
        for (const auto& h : header) known += (known.empty() ? "" : ", ") + h;
        throw ValidationError("column '" + name + "' not found in " + source + " (columns: " + known + ")");
    }

    double number(std::size_t row, std::size_t col) const {
        const std::string& cell = rows.at(row).at(col);
        double v = 0.0;
        const char* b = cell.data();
        const char* e = b + cell.size();
        while (b < e && std::isspace(static_cast<unsigned char>(*b))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(e[-1]))) --e;
        auto [ptr, ec] = std::from_chars(b, e, v);
        if (ec != std::errc() || ptr != e || b == e)
            throw DataError(source + ": non-numeric cell '" + cell + "' at row " + std::to_string(row + 2) + ", column '" + header[col] + "'");
        return v;
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
    }
    return out;
}

inline CsvTable parse_csv(std::istream& in, std::string source = "csv") {
    CsvTable t;
    t.source = std::move(source);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r" || line[0] == '#') continue;
        auto cells = split_csv_line(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw DataError(t.source + ": line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) throw DataError(t.source + ": missing header row");
    return t;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return parse_csv(in, path);
}

struct CsvSchema {
    std::vector<std::string> inputs;
    std::vector<std::string> targets;
    std::optional<std::string> panel_column;
    std::optional<std::string> time_column;
};

/// Splits rows by the panel column (first-appearance order) and extracts the
/// requested numeric columns.
inline PanelSet panels_from_table(const CsvTable& t, const CsvSchema& schema) {
    PanelSet out;
    out.input_names = schema.inputs;
    out.target_names = schema.targets;
    std::vector<std::size_t> in_cols, tg_cols;
    for (const auto& c : schema.inputs) in_cols.push_back(t.column(c));
    for (const auto& c : schema.targets) tg_cols.push_back(t.column(c));
    std::optional<std::size_t> pcol, tcol;
    if (schema.panel_column) pcol = t.column(*schema.panel_column);
    if (schema.time_column) tcol = t.column(*schema.time_column);
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string key = pcol ? t.rows[r][*pcol] : std::string();
        if (!groups.count(key)) order.push_back(key);
        groups[key].push_back(r);
    }
    for (const auto& key : order) {
        const auto& rows = groups[key];
        Panel p;
        p.name = key;
        p.inputs = Matrix(rows.size(), in_cols.size());
        p.targets = Matrix(rows.size(), tg_cols.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t c = 0; c < in_cols.size(); ++c) p.inputs(i, c) = t.number(rows[i], in_cols[c]);
            for (std::size_t c = 0; c < tg_cols.size(); ++c) p.targets(i, c) = t.number(rows[i], tg_cols[c]);
            if (tcol) p.time.push_back(t.number(rows[i], *tcol));
        }
        out.panels.push_back(std::move(p));
    }
    if (out.panels.empty()) throw DataError(t.source + ": no data rows");
    out.validate();
    return out;
}

inline PanelSet load_csv(const std::string& path, const CsvSchema& schema) { return panels_from_table(read_csv(path), schema); }

/// Time series per panel: the time column must be uniformly spaced within each panel.
inline std::vector<TimeSeries> series_from_table(const CsvTable& t, const std::string& time_column, const std::vector<std::string>& columns,
                                                 const std::optional<std::string>& panel_column = std::nullopt) {
    std::vector<TimeSeries> out;
    {
        std::vector<std::size_t> cols;
        for (const auto& c : columns) cols.push_back(t.column(c));
        const std::size_t tc = t.column(time_column);
        std::optional<std::size_t> pc;
        if (panel_column) pc = t.column(*panel_column);
        std::vector<std::string> order;
        std::map<std::string, std::vector<std::size_t>> groups;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const std::string key = pc ? t.rows[r][*pc] : std::string();
            if (!groups.count(key)) order.push_back(key);
            groups[key].push_back(r);
        }
        for (const auto& key : order) {
            const auto& rows = groups[key];
            std::vector<double> times;
            Matrix m(rows.size(), cols.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                times.push_back(t.number(rows[i], tc));
                for (std::size_t c = 0; c < cols.size(); ++c) m(i, c) = t.number(rows[i], cols[c]);
            }
            try {
                out.push_back(TimeSeries::from_times(times, std::move(m), columns));
            } catch (const ValidationError& e) {
                throw DataError(t.source + (key.empty() ? "" : " panel '" + key + "'") + ": " + e.what());
            }
        }
    }
    if (out.empty()) throw DataError(t.source + ": no data rows");
    return out;
}

// ---------------------------------------------------------------------------
// Transforms

/// Natural log of the named columns (inputs or targets) in every panel.
inline PanelSet log_log_transform(PanelSet data, const std::vector<std::string>& columns) {
    for (const auto& name : columns) {
        Matrix* which = nullptr;
        std::size_t col = 0;
        bool is_input = false;
        for (std::size_t i = 0; i < data.input_names.size(); ++i)
            if (data.input_names[i] == name) is_input = true, col = i;
        if (!is_input) {
            auto it = std::find(data.target_names.begin(), data.target_names.end(), name);
            if (it == data.target_names.end()) throw ValidationError("cannot log-transform unknown column '" + name + "'");
            col = static_cast<std::size_t>(it - data.target_names.begin());
        }
        for (std::size_t p = 0; p < data.panels.size(); ++p) {
            which = is_input ? &data.panels[p].inputs : &data.panels[p].targets;
            for (std::size_t r = 0; r < which->rows(); ++r) {
                double& v = (*which)(r, col);
                if (!(v > 0.0))
                    throw DataError("log transform of non-positive value " + std::to_string(v) + " in column '" + name + "', row " +
                                    std::to_string(r) + (data.panels.size() > 1 ? ", panel " + std::to_string(p) : ""));
                v = std::log(v);
            }
        }
        data.transforms.push_back("log(" + name + ")");
    }
    return data;
}

/// Undirected degree histogram of an edge list ("a b" or "a,b" per line, '#'
/// comments). Degrees ≥ max_degree and those in `drop` are removed.
inline std::vector<std::pair<long, long>> degree_distribution(std::istream& in, long max_degree = 200, const std::set<long>& drop = {0, 1},
                                                              const std::string& source = "edge list") {
    std::unordered_map<std::string, long> degree;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        for (auto& ch : line)
            if (ch == ',' || ch == '\t' || ch == '\r') ch = ' ';
        std::istringstream ls(line);
        std::string a, b, extra;
        if (!(ls >> a)) continue;
        if (a[0] == '#') continue;
        if (!(ls >> b) || (ls >> extra && extra[0] != '#'))
            throw DataError(source + ": malformed edge at line " + std::to_string(lineno));
        ++degree[a];
        ++degree[b];
    }
    std::map<long, long> hist;
    for (const auto& [node, d] : degree) ++hist[d];
    std::vector<std::pair<long, long>> out;
    for (const auto& [d, count] : hist)
        if (d < max_degree && !drop.count(d)) out.emplace_back(d, count);
    return out;
}

inline std::vector<std::pair<long, long>> degree_distribution(const std::string& path, long max_degree = 200, const std::set<long>& drop = {0, 1}) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return degree_distribution(in, max_degree, drop, path);
}

inline PanelSet histogram_panel(const std::vector<std::pair<long, long>>& hist, std::string x = "degree", std::string y = "count") {
    PanelSet ps;
    ps.input_names = {std::move(x)};
    ps.target_names = {std::move(y)};
    Panel p;
    p.inputs = Matrix(hist.size(), 1);
    p.targets = Matrix(hist.size(), 1);
    for (std::size_t i = 0; i < hist.size(); ++i) {
        p.inputs(i, 0) = static_cast<double>(hist[i].first);
        p.targets(i, 0) = static_cast<double>(hist[i].second);
    }
    ps.panels.push_back(std::move(p));
    return ps;
}

// ---------------------------------------------------------------------------
// Synthetic systems

using OdeRhs = std::function<void(const std::vector<double>& x, std::vector<double>& dx)>;

/// `rows` samples h apart; each step is `substeps` RK4 steps.
inline TimeSeries integrate_rk4(const OdeRhs& f, std::vector<double> x, std::vector<std::string> names, double h, std::size_t rows,
                                std::size_t substeps = 1, double t0 = 0.0) {
    const std::size_t m = x.size();
    TimeSeries ts{t0, h, Matrix(rows, m), std::move(names), {}};
    std::vector<double> k1(m), k2(m), k3(m), k4(m), tmp(m);
    const double dt = h / static_cast<double>(substeps);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < m; ++j) ts.values(i, j) = x[j];
        if (i + 1 == rows) break;
        for (std::size_t s = 0; s < substeps; ++s) {
            f(x, k1);
            for (std::size_t j = 0; j < m; ++j) tmp[j] = x[j] + 0.5 * dt * k1[j];
            f(tmp, k2);
            for (std::size_t j = 0; j < m; ++j) tmp[j] = x[j] + 0.5 * dt * k2[j];
            f(tmp, k3);
            for (std::size_t j = 0; j < m; ++j) tmp[j] = x[j] + dt * k3[j];
            f(tmp, k4);
            for (std::size_t j = 0; j < m; ++j) x[j] += dt / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
        }
    }
    return ts;
}

struct LotkaVolterraSpec {
    double alpha = 0.03, beta = 0.001, gamma = 0.15, delta = 0.006;
    double H0 = 20.0, L0 = 20.0;
    double h = 1.0;
    std::size_t steps = 200;
    std::size_t substeps = 1;
};

/// dH/dt = αH − βHL, dL/dt = δHL − γL.
inline TimeSeries gen_lotka_volterra(const LotkaVolterraSpec& s = {}) {
    if (s.alpha < 0 || s.beta < 0 || s.gamma < 0 || s.delta < 0 || s.H0 < 0 || s.L0 < 0)
        throw ValidationError("Lotka-Volterra parameters must be non-negative");
    return integrate_rk4(
        [&](const std::vector<double>& x, std::vector<double>& dx) {
            dx[0] = s.alpha * x[0] - s.beta * x[0] * x[1];
            dx[1] = s.delta * x[0] * x[1] - s.gamma * x[1];
        },
        {s.H0, s.L0}, {"H", "L"}, s.h, s.steps, s.substeps);
}

struct SirSpec {
    double beta = 0.5, gamma = 0.2;
    double s0 = 0.99, i0 = 0.01, r0 = 0.0;
    double h = 1.0;
    std::size_t steps = 60;
    std::size_t substeps = 1;
};

/// ds/dt = −βsi, di/dt = βsi − γi, dr/dt = γi.
inline TimeSeries gen_sir(const SirSpec& s = {}) {
    if (s.beta < 0 || s.gamma < 0) throw ValidationError("SIR rates must be non-negative");
    if (s.s0 < 0 || s.i0 < 0 || s.r0 < 0 || std::fabs(s.s0 + s.i0 + s.r0 - 1.0) > 1e-9)
        throw ValidationError("SIR initial state must lie on the simplex (s0 + i0 + r0 = 1)");
    return integrate_rk4(
        [&](const std::vector<double>& x, std::vector<double>& dx) {
            dx[0] = -s.beta * x[0] * x[1];
            dx[1] = s.beta * x[0] * x[1] - s.gamma * x[1];
            dx[2] = s.gamma * x[1];
        },
        {s.s0, s.i0, s.r0}, {"s", "i", "r"}, s.h, s.steps, s.substeps);
}

struct Range {
    double lo, hi;
};

struct SolowSpec {
    std::size_t panels = 20;
    std::size_t steps = 30;
    double h = 1.0;
    std::size_t substeps = 200;  // RK4 steps per emitted row
    std::uint64_t seed = 0;
    Range alpha{0.01, 0.5}, delta{0.05, 0.1}, g{0.05, 0.1}, k0{0.01, 0.1}, s0{0.2, 0.8}, n0{0.01, 0.05};
    std::optional<double> force_alpha;
};

struct SolowParams {
    double alpha, delta, g, k0, s0, n0, y0;
};

struct SolowPanels {
    std::vector<TimeSeries> series;  // columns k, y, s, n
    std::vector<SolowParams> params;
};

/// dk/dt = s·y − k(δ+g+n), dy/dt = (αy/k)·dk/dt, ds/dt = 0.05, dn/dt = 0.05n, y0 = k0^α.
inline SolowPanels gen_solow_panels(const SolowSpec& spec = {}) {
    if (spec.panels == 0) throw ValidationError("panel count must be >= 1");
    SolowPanels out;
    for (std::size_t p = 0; p < spec.panels; ++p) {
        Rng rng(spec.seed, 0x501010, p);
        SolowParams q{};
        q.alpha = rng.uniform(spec.alpha.lo, spec.alpha.hi);
        q.delta = rng.uniform(spec.delta.lo, spec.delta.hi);
        q.g = rng.uniform(spec.g.lo, spec.g.hi);
        q.k0 = rng.uniform(spec.k0.lo, spec.k0.hi);
        q.s0 = rng.uniform(spec.s0.lo, spec.s0.hi);
        q.n0 = rng.uniform(spec.n0.lo, spec.n0.hi);
        if (spec.force_alpha) q.alpha = *spec.force_alpha;
        q.y0 = std::pow(q.k0, q.alpha);
        auto ts = integrate_rk4(
            [q](const std::vector<double>& x, std::vector<double>& dx) {
                const double k = x[0], y = x[1], s = x[2], n = x[3];
                dx[0] = s * y - k * (q.delta + q.g + n);
                dx[1] = q.alpha * y / k * dx[0];
                dx[2] = 0.05;
                dx[3] = 0.05 * n;
            },
            {q.k0, q.y0, q.s0, q.n0}, {"k", "y", "s", "n"}, spec.h, spec.steps, spec.substeps);
        out.series.push_back(std::move(ts));
        out.params.push_back(q);
    }
    return out;
}

struct PowerLawSpec {
    double a = 1.0, exponent = 1.0, noise = 0.0;
    std::size_t n = 50;
    double x_min = 1.0, x_max = 1000.0;
    std::uint64_t seed = 0;
};

/// y = a·x^β at log-spaced x, optionally times exp(N(0, noise²)).
inline PanelSet gen_power_law(const PowerLawSpec& s) {
    if (s.n < 2) throw ValidationError("power law needs n >= 2");
    if (!(s.x_min > 0.0) || !(s.x_max > s.x_min)) throw ValidationError("power law needs 0 < x_min < x_max");
    PanelSet ps;
    ps.input_names = {"x"};
    ps.target_names = {"y"};
    Panel p;
    p.inputs = Matrix(s.n, 1);
    p.targets = Matrix(s.n, 1);
    Rng rng(s.seed);
    const double l0 = std::log(s.x_min), l1 = std::log(s.x_max);
    for (std::size_t i = 0; i < s.n; ++i) {
        const double x = std::exp(l0 + (l1 - l0) * static_cast<double>(i) / static_cast<double>(s.n - 1));
        double y = s.a * std::pow(x, s.exponent);
        if (s.noise > 0.0) y *= std::exp(s.noise * rng.normal());
        p.inputs(i, 0) = x;
        p.targets(i, 0) = y;
    }
    ps.panels.push_back(std::move(p));
    return ps;
}

/// Builds one regression panel per series and stacks them into a panel set.
inline PanelSet build_ode_panels(const std::vector<TimeSeries>& series, OdeTask task) {
    PanelSet out;
    for (std::size_t p = 0; p < series.size(); ++p) {
        task.series = series[p];
        PanelSet one = build_ode_regression(task);
        if (p == 0) {
            out.input_names = one.input_names;
            out.target_names = one.target_names;
        }
        one.panels[0].name = std::to_string(p);
        out.panels.push_back(std::move(one.panels[0]));
    }
    out.validate();
    return out;
}

} // namespace occam
