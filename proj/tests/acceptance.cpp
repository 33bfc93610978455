// Acceptance runner: one PASS/FAIL line per criterion.
//
// Exit status is 0 when every criterion passes or is listed in --known-failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Dense>

#include "occam/config.hpp"
#include "occam/data.hpp"
#include "occam/network.hpp"
#include "occam/numdiff.hpp"
#include "occam/runner.hpp"
#include "occam/search.hpp"
#include "occam/serialize.hpp"
#include "occam_schema.hpp"

namespace {

using namespace occam;
using nlohmann::json;

struct Outcome {
    bool pass = false;
    std::string detail;
};

const std::filesystem::path kSource = OCCAM_SOURCE_DIR;

std::string fmt(double v, int prec = 6) {
    std::ostringstream o;
    o.precision(prec);
    o << v;
    return o.str();
}

json preset(const std::string& name) { return read_json_file(kSource / "presets" / (name + ".json")); }

RunConfig config(json doc) { return parse_run_config(std::move(doc), json::parse(kRunConfigSchema), {}, kSource / "presets"); }

bool g_full_grid = false;

// Best of 5 seeds at the preset's hyperparameters (the values the grid
// selection settled on), or with --full-grid the whole grid per seed.
void with_protocol(json& doc) {
    doc["seeds"] = 5;
    if (g_full_grid) doc["grid"] = {{"sigma", {0.5, 5, 50}}, {"top_q", {1, 5, 10}}, {"equalization", {0, 1, 5}}};
    else doc.erase("grid");
}

std::map<std::string, FitResult> fits_of(const json& result) {
    std::map<std::string, FitResult> out;
    for (const auto& f : result.at("fits")) out[f.at("target")] = fit_result_from_json(f);
    return out;
}

using Box = std::map<std::string, std::pair<double, double>>;
using Term = std::function<double(const std::map<std::string, double>&)>;

// Random points over a box, columns in the expression's variable order.
std::vector<std::map<std::string, double>> sample_box(const Box& box, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::vector<std::map<std::string, double>> pts(n);
    for (auto& p : pts)
        for (const auto& [name, range] : box) p[name] = std::uniform_real_distribution<double>(range.first, range.second)(gen);
    return pts;
}

std::vector<double> eval_at(const FitResult& r, std::size_t panel, const std::vector<std::map<std::string, double>>& pts) {
    Matrix x(pts.size(), r.expression.num_inputs());
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t v = 0; v < r.expression.num_inputs(); ++v) x(i, v) = pts[i].at(r.expression.variables()[v]);
    const Matrix y = evaluate(r.expression, x, r.panel_constants.at(panel));
    std::vector<double> out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = y(i, 0) * r.output_scale;
    return out;
}

struct Projection {
    Eigen::VectorXd coef;
    double rel_residual = INFINITY;
};

// Least squares of f onto the given terms. A relative residual near zero at
// generic points means f lies in their span, i.e. has exactly that form.
Projection project(const std::vector<double>& f, const std::vector<std::map<std::string, double>>& pts, const std::vector<Term>& terms) {
    Projection p;
    Eigen::MatrixXd a(pts.size(), terms.size());
    Eigen::VectorXd b(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!std::isfinite(f[i])) return p;
        b[i] = f[i];
        for (std::size_t k = 0; k < terms.size(); ++k) a(i, k) = terms[k](pts[i]);
    }
    p.coef = a.colPivHouseholderQr().solve(b);
    const double norm = b.norm();
    p.rel_residual = norm > 0 ? (a * p.coef - b).norm() / norm : INFINITY;
    return p;
}

bool within_rel(double v, double truth, double tol) { return std::fabs(v - truth) <= tol * std::fabs(truth); }

constexpr double kSpanTol = 1e-6;

Term var(const std::string& a) {
    return [a](const auto& p) { return p.at(a); };
}
Term prod(const std::string& a, const std::string& b) {
    return [a, b](const auto& p) { return p.at(a) * p.at(b); };
}

// ---------------------------------------------------------------------------

Outcome lotka_volterra() {
    auto doc = preset("lotka_volterra");
    with_protocol(doc);
    doc["ode"]["simulate"] = false;
    const auto fits = fits_of(run(config(doc)).result);
    const auto pts = sample_box({{"H", {5, 60}}, {"L", {5, 60}}}, 200, 1);
    const auto& dh = fits.at("dH");
    const auto& dl = fits.at("dL");
    const auto ph = project(eval_at(dh, 0, pts), pts, {var("H"), prod("H", "L")});
    const auto pl = project(eval_at(dl, 0, pts), pts, {prod("H", "L"), var("L")});
    const bool h_ok = ph.rel_residual < kSpanTol && within_rel(ph.coef[0], 0.03, 0.05) && within_rel(-ph.coef[1], 0.001, 0.05);
    const bool l_ok = pl.rel_residual < kSpanTol && within_rel(pl.coef[0], 0.006, 0.05) && within_rel(-pl.coef[1], 0.15, 0.05);
    std::string d = "dH=" + dh.text() + " dL=" + dl.text();
    if (ph.rel_residual < kSpanTol && pl.rel_residual < kSpanTol)
        d += " (alpha,beta,delta,gamma)=(" + fmt(ph.coef[0]) + "," + fmt(-ph.coef[1]) + "," + fmt(pl.coef[0]) + "," + fmt(-pl.coef[1]) + ")";
    return {h_ok && l_ok, d};
}

Outcome sir() {
    auto doc = preset("sir");
    with_protocol(doc);
    doc["ode"]["simulate"] = false;
    const auto fits = fits_of(run(config(doc)).result);
    const auto pts = sample_box({{"s", {0.01, 1}}, {"i", {0.01, 1}}}, 200, 2);
    const auto& ds = fits.at("ds");
    const auto& di = fits.at("di");
    const auto ps = project(eval_at(ds, 0, pts), pts, {prod("s", "i")});
    const auto pi = project(eval_at(di, 0, pts), pts, {prod("s", "i"), var("i")});
    const bool s_ok = ps.rel_residual < kSpanTol && -ps.coef[0] >= 0.475 && -ps.coef[0] <= 0.525;
    const bool i_ok = pi.rel_residual < kSpanTol && within_rel(pi.coef[0], 0.5, 0.1) && within_rel(-pi.coef[1], 0.2, 0.1);
    std::string d = "ds=" + ds.text() + " di=" + di.text();
    if (s_ok || i_ok) d += " c=" + fmt(-ps.coef[0]) + " (beta,gamma)=(" + fmt(pi.coef[0]) + "," + fmt(-pi.coef[1]) + ")";
    return {s_ok && i_ok, d};
}

Outcome solow() {
    auto doc = preset("solow_ensemble");
    with_protocol(doc);
    doc["ode"]["simulate"] = false;
    const auto out = run(config(doc));
    const auto fits = fits_of(out.result);
    const auto& dk = fits.at("dk");
    const auto& truth = out.result.at("generator_truth");
    const auto pts = sample_box({{"k", {0.01, 1}}, {"y", {0.01, 1}}, {"s", {0.1, 0.9}}, {"n", {0.005, 0.1}}}, 200, 3);
    std::size_t good = 0;
    double worst = 0.0;
    bool form = true;
    for (std::size_t p = 0; p < dk.panel_constants.size(); ++p) {
        const auto pr = project(eval_at(dk, p, pts), pts, {prod("s", "y"), prod("k", "n"), var("k")});
        // s·y − k·(n + c0): unit coefficients on s·y and k·n (1% tolerance for fitted constants)
        const bool shape = pr.rel_residual < kSpanTol && within_rel(pr.coef[0], 1.0, 0.01) && within_rel(-pr.coef[1], 1.0, 0.01);
        form = form && shape;
        const double gd = truth.at(p).at("g_plus_delta");
        const double c0 = shape ? -pr.coef[2] : NAN;
        if (shape && within_rel(c0, gd, 0.1)) ++good;
        if (shape) worst = std::max(worst, std::fabs(c0 - gd) / gd);
    }
    std::string d = "dk=" + dk.text() + " panels within 10%: " + std::to_string(good) + "/" + std::to_string(dk.panel_constants.size());
    if (form) d += " worst rel error " + fmt(worst, 3);
    else d += " (not of the form s*y - k*(n + c0))";
    return {form && good == dk.panel_constants.size(), d};
}

Outcome cobb_restricted() {
    auto doc = preset("cobb_restricted");
    with_protocol(doc);
    const auto fits = fits_of(run(config(doc)).result);
    const auto& y = fits.at("Y");
    const auto pts = sample_box({{"K", {100, 450}}, {"L", {100, 200}}}, 200, 4);
    auto f = eval_at(y, 0, pts);
    for (auto& v : f) v = v > 0 ? std::log(v) : NAN;
    // log Y = log c + a·log K + b·log L exactly when Y is a Cobb-Douglas power law
    const auto pr = project(f, pts, {[](const auto&) { return 1.0; }, [](const auto& p) { return std::log(p.at("K")); },
                                     [](const auto& p) { return std::log(p.at("L")); }});
    const bool shape = pr.rel_residual < kSpanTol;
    std::string d = "Y=" + y.text() + " wmse=" + fmt(y.loss.wmse);
    if (!shape) return {false, d + " (not a power law in K and L)"};
    d += " exponents (" + fmt(pr.coef[1], 4) + ", " + fmt(pr.coef[2], 4) + ")";
    return {std::fabs(pr.coef[1] - 0.25) <= 0.05 && std::fabs(pr.coef[2] - 0.75) <= 0.05, d};
}

Outcome pareto_shape() {
    bool ok = true;
    std::string d;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto doc = preset("cobb_default");
        doc["seed"] = seed;
        const auto res = run(config(doc)).result;
        const auto& pts = res.at("points");
        std::vector<int> cx;
        std::vector<double> w;
        for (const auto& p : pts) {
            cx.push_back(p.at("complexity").at("total"));
            w.push_back(p.at("w_alpha"));
        }
        bool monotone = std::is_sorted(w.begin(), w.end());
        for (std::size_t i = 1; i < cx.size(); ++i) monotone = monotone && cx[i] <= cx[i - 1];
        std::vector<std::pair<int, double>> front;
        for (const auto& p : pts)
            if (p.at("on_front")) front.emplace_back(p.at("complexity").at("total"), detail::number(p.at("loss").at("wmse")));
        bool nondominated = !front.empty();
        for (const auto& a : front)
            for (const auto& b : front)
                if (a.first <= b.first && a.second <= b.second && (a.first < b.first || a.second < b.second)) nondominated = false;
        ok = ok && monotone && nondominated;
        d += (seed ? " | " : "") + std::string("seed ") + std::to_string(seed) + ": cx";
        for (int c : cx) d += " " + std::to_string(c);
        if (!monotone) d += " (increasing)";
        if (!nondominated) d += " (dominated front)";
    }
    return {ok, d};
}

// Independent unit propagation: tag 0 concrete, 1 wildcard, 2 mismatch.
struct Dim {
    int tag = 0;
    std::vector<double> e;
};

Dim dim_of(const Expression& ex, std::int32_t i, const std::map<std::string, std::vector<double>>& units, std::size_t u) {
    const Node& n = ex.nodes()[static_cast<std::size_t>(i)];
    if (n.kind == NodeKind::Variable) return {0, units.at(ex.variables()[static_cast<std::size_t>(n.variable)])};
    if (n.kind == NodeKind::Constant) return {1, {}};
    const std::string& b = n.basis->name;
    std::vector<Dim> a;
    for (int k = 0; k < n.basis->arity; ++k) a.push_back(dim_of(ex, n.args[k], units, u));
    for (const auto& x : a)
        if (x.tag == 2) return {2, {}};
    const Dim wild{1, {}}, bad{2, {}}, none{0, std::vector<double>(u, 0.0)};
    auto dimensionless = [](const Dim& x) { return std::all_of(x.e.begin(), x.e.end(), [](double v) { return v == 0.0; }); };
    if (b == "+" || b == "-") {
        if (a[0].tag == 1) return a[1];
        if (a[1].tag == 1) return a[0];
        return a[0].e == a[1].e ? a[0] : bad;
    }
    if (b == "*" || b == "/") {
        if (a[0].tag == 1 || a[1].tag == 1) return wild;
        Dim out = a[0];
        for (std::size_t k = 0; k < u; ++k) out.e[k] += b == "*" ? a[1].e[k] : -a[1].e[k];
        return out;
    }
    if (b == "x^2" || b == "x^3" || b == "sqrt") {
        if (a[0].tag == 1) return wild;
        Dim out = a[0];
        for (auto& v : out.e) v *= b == "x^2" ? 2.0 : b == "x^3" ? 3.0 : 0.5;
        return out;
    }
    if (b == "log" || b == "exp" || b == "sin" || b == "cos") return a[0].tag == 0 && !dimensionless(a[0]) ? bad : none;
    if (b == "x+c") return a[0];
    return wild;  // x*c, x^c, poly2, c
}

Outcome unit_regularization() {
    SolowSpec spec;
    auto gen = gen_solow_panels(spec);
    OdeTask task;
    task.targets = {"k"};
    task.inputs = {"k", "y", "s", "n"};
    PanelSet ps = build_ode_panels(gen.series, task);
    UnitSpec units({"USD", "capita"});
    units.set("k", {1, -1}).set("y", {1, -1}).set("s", {0, 0}).set("n", {0, 0});
    ps.units = units;
    const std::map<std::string, std::vector<double>> table{{"k", {1, -1}}, {"y", {1, -1}}, {"s", {0, 0}}, {"n", {0, 0}}};
    const auto lib = BasisLibrary::from_string("+ - * / x+c x*c x^2 x^c log exp sin cos", 3, ps.input_names);
    TrainConfig cfg;
    cfg.epochs = 100;
    cfg.sigma = 0.5;
    cfg.top_q = 5;
    cfg.equalization = 1;
    cfg.record_samples = true;
    const auto r = train(ps, lib, cfg);
    const ProbNetwork net(lib, cfg.temperature, cfg.equalization);
    std::size_t inconsistent = 0, violations = 0, disagreements = 0;
    for (const auto& s : r.samples) {
        const Expression e = net.build(s.provenance);
        const Dim d = dim_of(e, e.roots()[0], table, 2);
        const bool ok = d.tag == 1 || (d.tag == 0 && d.e == std::vector<double>{1, -1});
        if (ok == (s.status == FitnessStatus::UnitRejected)) ++disagreements;
        if (ok) continue;
        ++inconsistent;
        if (s.status != FitnessStatus::UnitRejected || s.fitness != -cfg.w_units || s.data_evaluations != 0) ++violations;
    }
    auto accepted = [&](const char* text) { return unit_gate(parse_expression(text, ps.input_names), units, "k"); };
    const bool spots = !accepted("k + s") && accepted("s*y") && accepted("0.5*k");
    std::string d = std::to_string(inconsistent) + "/" + std::to_string(r.samples.size()) + " samples unit-inconsistent, " +
                    std::to_string(violations) + " not scored exactly -w_units with 0 evaluations, " + std::to_string(disagreements) +
                    " oracle disagreements; spot checks " + (spots ? "ok" : "wrong");
    return {inconsistent > 0 && violations == 0 && disagreements == 0 && spots, d};
}

Outcome oracle_equivalence() {
    const std::vector<std::string> pool{"+", "-", "*", "/", "x+c", "x*c", "x^2", "sin"};
    std::mt19937_64 gen(7);
    std::size_t made = 0, agree = 0, attempts = 0;
    std::string misses;
    while (made < 20 && attempts < 10000) {
        ++attempts;
        const std::size_t nvars = 1 + gen() % 2;
        std::vector<std::string> vars{"x", "y"};
        vars.resize(nvars);
        std::vector<std::string> pick = pool;
        std::shuffle(pick.begin(), pick.end(), gen);
        pick.resize(1 + gen() % 3);
        std::string bases;
        for (const auto& b : pick) bases += b + " ";
        const int depth = 1 + static_cast<int>(gen() % 2);
        const auto lib = BasisLibrary::from_string(bases, depth, vars);
        const ProbNetwork net(lib, 1.0, 0.0);
        std::vector<Connections> sets;
        try {
            sets = net.enumerate(5000);
        } catch (const ValidationError&) {
            continue;
        }
        std::set<std::string> keys;
        for (const auto& c : sets) keys.insert(net.build(c).structure_key());
        if (keys.size() > 200 || keys.size() < 3) continue;

        // noiseless target from a random structure with random constants
        const Expression truth = net.build(sets[gen() % sets.size()]);
        std::vector<double> c(truth.constants().size());
        for (auto& v : c) v = std::uniform_real_distribution<double>(0.5, 2.0)(gen);
        Panel p;
        p.inputs = Matrix(30, nvars);
        for (std::size_t i = 0; i < 30; ++i)
            for (std::size_t v = 0; v < nvars; ++v) p.inputs(i, v) = std::uniform_real_distribution<double>(0.5, 3.0)(gen);
        const Matrix y = evaluate(truth, p.inputs, c);
        if (std::any_of(y.data().begin(), y.data().end(), [](double v) { return !std::isfinite(v) || std::fabs(v) > 1e3; })) continue;
        p.targets = y;
        PanelSet ps;
        ps.input_names = vars;
        ps.target_names = {"t"};
        ps.panels.push_back(std::move(p));

        TrainConfig cfg;
        cfg.epochs = 200;
        cfg.w_alpha = 0.01;
        cfg.w_gamma = 0.01;
        cfg.seed = made;
        cfg.threads = 1;
        const auto fr = train(ps, lib, cfg);
        const auto best = enumerate_best(ps, lib, cfg);
        const bool hit = fr.found && std::fabs(fr.fitness - best.fitness) <= 1e-6;
        agree += hit;
        if (!hit) misses += " #" + std::to_string(made) + "(" + fmt(fr.fitness) + " vs " + fmt(best.fitness) + ")";
        ++made;
    }
    return {made == 20 && agree >= 18, std::to_string(agree) + "/" + std::to_string(made) + " match enumeration" + misses};
}

Outcome numdiff_order() {
    std::vector<double> err;
    for (std::size_t n : {21u, 41u, 81u, 161u}) {
        TimeSeries s;
        s.h = 2 * M_PI / static_cast<double>(n - 1);
        s.values = Matrix(n, 1);
        s.names = {"x"};
        for (std::size_t i = 0; i < n; ++i) s.values(i, 0) = std::sin(s.time(i));
        const auto d = central_difference(s);
        double e = 0.0;
        for (std::size_t i = 1; i + 1 < n; ++i) e = std::max(e, std::fabs(d.values(i, 0) - std::cos(s.time(i))));
        err.push_back(e);
    }
    bool ok = true;
    std::string d = "ratios";
    for (std::size_t k = 1; k < err.size(); ++k) {
        const double ratio = err[k - 1] / err[k];
        ok = ok && ratio >= 3.2 && ratio <= 4.8;
        d += " " + fmt(ratio, 4);
    }
    return {ok, d};
}

Outcome normalization() {
    const std::vector<std::pair<std::string, int>> nets{{"+ * sin", 2}, {"x*c x^2", 3}, {"+ - x+c", 2}, {"/ exp", 2}};
    double worst = 0.0;
    std::mt19937_64 gen(9);
    for (const auto& [bases, depth] : nets) {
        ProbNetwork net(BasisLibrary::from_string(bases, depth, {"x", "y"}), 1.0, 1.0);
        auto mass = [&] {
            double total = 0.0;
            for (const auto& c : net.enumerate()) total += std::exp(net.log_probability(c));
            return total;
        };
        worst = std::max(worst, std::fabs(mass() - 1.0));
        for (int step = 0; step < 100; ++step) {
            const auto batch = net.sample(50, gen(), static_cast<std::uint64_t>(step));
            std::vector<double> f(batch.size());
            for (auto& v : f) v = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
            net.update(batch, f, 5, 5.0);
        }
        worst = std::max(worst, std::fabs(mass() - 1.0));
    }
    return {worst <= 1e-6, "max |mass - 1| = " + fmt(worst, 3)};
}

double r2_line(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy * sxy / (sxx * syy);
}

Outcome scaling() {
    auto epoch_seconds = [](std::size_t samples, std::size_t rows) {
        std::mt19937_64 gen(11);
        Panel p;
        p.inputs = Matrix(rows, 2);
        p.targets = Matrix(rows, 1);
        for (std::size_t i = 0; i < rows; ++i) {
            const double a = std::uniform_real_distribution<double>(1, 5)(gen), b = std::uniform_real_distribution<double>(1, 5)(gen);
            p.inputs(i, 0) = a, p.inputs(i, 1) = b, p.targets(i, 0) = 0.3 * a - 0.1 * a * b;
        }
        PanelSet ps;
        ps.input_names = {"a", "b"};
        ps.target_names = {"t"};
        ps.panels.push_back(std::move(p));
        const auto lib = BasisLibrary::from_string("+ - * / x+c x*c", 3, ps.input_names);
        TrainConfig cfg;
        cfg.epochs = 4;
        cfg.samples = samples;
        cfg.cache = false;
        cfg.lr = 0.0;  // same sampled structures at every rung
        cfg.polish_iters = 0;
        cfg.threads = 1;
        std::vector<double> t;
        for (int rep = 0; rep < 3; ++rep) {
            double s = 0;
            for (const auto& e : train(ps, lib, cfg).history) s += e.seconds;
            t.push_back(s / cfg.epochs);
        }
        std::sort(t.begin(), t.end());
        return t[1];
    };
    std::vector<double> ladder{1, 2, 4, 8}, ts, tn;
    for (double m : ladder) ts.push_back(epoch_seconds(static_cast<std::size_t>(200 * m), 500));
    for (double m : ladder) tn.push_back(epoch_seconds(200, static_cast<std::size_t>(500 * m)));
    const double rs = r2_line(ladder, ts), rn = r2_line(ladder, tn);
    return {rs >= 0.95 && rn >= 0.95, "R^2 vs S " + fmt(rs, 4) + ", vs N " + fmt(rn, 4)};
}

// simulation.csv rows "series,t,<state...>" grouped by series label.
std::map<std::string, std::map<std::string, std::vector<double>>> parse_simulation(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    const auto header = split_csv_line(line);
    std::map<std::string, std::map<std::string, std::vector<double>>> out;
    while (std::getline(in, line)) {
        const auto f = split_csv_line(line);
        for (std::size_t k = 1; k < f.size(); ++k) out[f[0]][header[k]].push_back(std::stod(f[k]));
    }
    return out;
}

double r_squared(const std::vector<double>& obs, const std::vector<double>& pred) {
    double mean = 0.0;
    for (double v : obs) mean += v / static_cast<double>(obs.size());
    double res = 0.0, tot = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const double r = obs[i] - pred[i];
        res += std::isfinite(r) ? r * r : INFINITY;
        tot += (obs[i] - mean) * (obs[i] - mean);
    }
    return 1.0 - res / tot;
}

// Best trajectory of dx/dt = c from the first observation (c = 0 included).
double constant_model_r2(const std::vector<double>& t, const std::vector<double>& x) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double dt = t[i] - t[0];
        num += dt * (x[i] - x[0]);
        den += dt * dt;
    }
    const double c = num / den;
    std::vector<double> pred(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) pred[i] = x[0] + c * (t[i] - t[0]);
    return r_squared(x, pred);
}

// Sign of ∂²f/∂H∂L at ≥90% of the points, or 0 if there is no consistent interaction.
int interaction_sign(const FitResult& r, const std::vector<double>& h, const std::vector<double>& l) {
    const double d = 0.5;
    std::vector<std::map<std::string, double>> pts;
    for (std::size_t i = 0; i < h.size(); ++i)
        for (double sh : {d, -d})
            for (double sl : {d, -d}) pts.push_back({{"H", h[i] + sh}, {"L", l[i] + sl}});
    const auto f = eval_at(r, 0, pts);
    int pos = 0, neg = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double m = (f[4 * i] - f[4 * i + 1] - f[4 * i + 2] + f[4 * i + 3]) / (4 * d * d);
        if (m > 1e-6) ++pos;
        if (m < -1e-6) ++neg;
    }
    const auto need = static_cast<int>(std::ceil(0.9 * static_cast<double>(h.size())));
    return pos >= need ? 1 : neg >= need ? -1 : 0;
}

Outcome lynx_hare() {
    struct Seed {
        double wmse = INFINITY;
        double r2h = 0, r2l = 0, baseh = 0, basel = 0;
        bool interaction = false;
        std::string text;
    };
    std::vector<Seed> seeds;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto doc = preset("lynx_hare");
        doc["seed"] = seed;
        const auto out = run(config(doc));
        const auto fits = fits_of(out.result);
        const auto sim = parse_simulation(out.files.at("simulation.csv"));
        const auto& obs = sim.at("observed_0");
        const auto& pred = sim.at("simulated_0");
        const auto &t = obs.at("t"), &h = obs.at("H"), &l = obs.at("L");
        Seed s;
        s.wmse = fits.at("dH").loss.wmse + fits.at("dL").loss.wmse;
        s.r2h = r_squared(h, pred.at("H"));
        s.r2l = r_squared(l, pred.at("L"));
        s.baseh = constant_model_r2(t, h);
        s.basel = constant_model_r2(t, l);
        s.interaction = interaction_sign(fits.at("dH"), h, l) < 0 && interaction_sign(fits.at("dL"), h, l) > 0;
        s.text = "dH=" + fits.at("dH").text(4) + " dL=" + fits.at("dL").text(4);
        seeds.push_back(s);
    }
    const auto best = std::min_element(seeds.begin(), seeds.end(), [](const Seed& a, const Seed& b) { return a.wmse < b.wmse; });
    const auto with_hl = std::count_if(seeds.begin(), seeds.end(), [](const Seed& s) { return s.interaction; });
    const bool better = best->r2h > best->baseh && best->r2l > best->basel;
    std::string d = "best seed " + best->text + " R^2 (H " + fmt(best->r2h, 3) + " vs " + fmt(best->baseh, 3) + ", L " + fmt(best->r2l, 3) +
                    " vs " + fmt(best->basel, 3) + "); H*L terms in both equations in " + std::to_string(with_hl) + "/5 seeds";
    return {better && with_hl >= 1, d};
}

struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "synthetic Lotka-Volterra recovery", lotka_volterra},
    {2, "synthetic SIR recovery", sir},
    {3, "synthetic Solow ensemble", solow},
    {4, "Cobb-Douglas restricted-basis fit", cobb_restricted},
    {5, "Pareto sweep shape", pareto_shape},
    {6, "unit regularization", unit_regularization},
    {7, "oracle equivalence", oracle_equivalence},
    {8, "numerical-differentiation order", numdiff_order},
    {9, "probability normalization", normalization},
    {10, "scaling contract", scaling},
    {11, "real-data smoke (lynx-hare)", lynx_hare},
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"occam acceptance criteria"};
    std::vector<int> only, known;
    app.add_option("--only", only, "criteria to run (default all)")->delimiter(',');
    app.add_option("--known-failures", known, "criteria whose failure does not fail the run")->delimiter(',');
    app.add_flag("--full-grid", g_full_grid, "run the full sigma x top_q x E grid for every seed");
    CLI11_PARSE(app, argc, argv);

    int unexpected = 0;
    for (const auto& c : kCriteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool is_known = std::find(known.begin(), known.end(), c.id) != known.end();
        std::printf("%s %2d %s (%.1fs): %s%s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str(),
                    !o.pass && is_known ? " [known failure]" : "");
        std::fflush(stdout);
        if (!o.pass && !is_known) ++unexpected;
    }
    return unexpected ? 1 : 0;
}
