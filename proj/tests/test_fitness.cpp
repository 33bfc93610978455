#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "occam/data.hpp"
#include "occam/fitness.hpp"
#include "occam/grammar.hpp"
#include "occam/search.hpp"

using namespace occam;
using occam::testing::linspace;
using occam::testing::one_panel;

namespace {

PanelSet doubling() {
    const auto x = linspace(-2.0, 3.0, 25);
    std::vector<double> y;
    for (double v : x) y.push_back(2.0 * v);
    return one_panel({"x"}, {x}, y);
}

FitnessOutcome score(const std::string& text, const PanelSet& ps, const FitnessConfig& cfg) {
    auto e = parse_expression(text, ps.input_names);
    return regularized_fitness(e, ps, {e.constants()}, cfg);
}

} // namespace

TEST(GaussianFitness, Kernel) {
    std::vector<double> y(10, 1.5);
    EXPECT_DOUBLE_EQ(gaussian_fitness(y, y, 0.5), 10.0);
    std::vector<double> p = {1.0}, t = {1.0 + 0.7};
    EXPECT_NEAR(gaussian_fitness(p, t, 0.7), std::exp(-0.5), 1e-15);
    EXPECT_NEAR(gaussian_fitness(p, t, 0.7), 0.60653, 1e-5);
    std::vector<double> far = {1e300};
    EXPECT_EQ(gaussian_fitness(far, std::vector<double>{0.0}, 1.0), 0.0);
    std::vector<double> bad = {NAN, 2.0};
    EXPECT_DOUBLE_EQ(gaussian_fitness(bad, std::vector<double>{0.0, 2.0}, 1.0), 1.0);
    EXPECT_THROW(gaussian_fitness(std::vector<double>{}, std::vector<double>{}, 1.0), ValidationError);
    EXPECT_THROW(gaussian_fitness(p, t, 0.0), ValidationError);
}

// Shrinking every residual never lowers the kernel sum.
TEST(GaussianFitness, Monotone) {
    std::mt19937_64 gen(1);
    std::normal_distribution<double> nd(0.0, 3.0);
    std::uniform_real_distribution<double> shrink(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> t(12), a(12), b(12);
        for (std::size_t i = 0; i < t.size(); ++i) {
            t[i] = nd(gen);
            const double r = nd(gen);
            a[i] = t[i] + r;
            b[i] = t[i] + r * shrink(gen);
        }
        EXPECT_GE(gaussian_fitness(b, t, 2.0), gaussian_fitness(a, t, 2.0));
    }
}

TEST(RegularizedFitness, UnitRejectionIsExact) {
    FitnessConfig cfg;
    cfg.w_units = 100;
    auto ps = doubling();
    auto e = parse_expression("x + 1", {"x"});
    auto out = regularized_fitness(e, ps, {e.constants()}, cfg, false);
    EXPECT_EQ(out.fitness, -100.0);
    EXPECT_EQ(out.status, FitnessStatus::UnitRejected);
    EXPECT_LT(cfg.floor(), -100.0);
}

TEST(RegularizedFitness, NoPenaltyEqualsRaw) {
    FitnessConfig cfg;
    const auto out = score("1.9*x", doubling(), cfg);
    EXPECT_EQ(out.fitness, out.raw);
    std::vector<double> pred;
    for (double v : linspace(-2.0, 3.0, 25)) pred.push_back(1.9 * v);
    std::vector<double> tgt;
    for (double v : linspace(-2.0, 3.0, 25)) tgt.push_back(2.0 * v);
    EXPECT_NEAR(out.raw, gaussian_fitness(pred, tgt, cfg.sigma), 1e-12);
}

TEST(RegularizedFitness, PenaltyArithmetic) {
    FitnessConfig cfg;
    cfg.w_alpha = 0.1;
    const auto ps = doubling();
    const auto simple = score("2*x", ps, cfg);               // α=1, γ=1
    const auto padded = score("2*x + (x - x)*x", ps, cfg);  // α=4, γ=1
    ASSERT_EQ(simple.complexity.total(), 2);
    ASSERT_EQ(padded.complexity.total(), 5);
    EXPECT_NEAR(simple.fitness - padded.fitness, 0.3, 1e-12);
}

// An extra constant node with no effect costs exactly w_α + w_γ.
TEST(RegularizedFitness, PenaltyExactness) {
    FitnessConfig cfg;
    cfg.w_alpha = 0.07;
    cfg.w_gamma = 0.4;
    const auto ps = doubling();
    const auto a = score("2*x", ps, cfg);
    const auto b = score("2*x + 0", ps, cfg);
    ASSERT_EQ(b.complexity.activation_count, a.complexity.activation_count + 1);
    ASSERT_EQ(b.complexity.constant_count, a.complexity.constant_count + 1);
    EXPECT_NEAR(a.fitness - b.fitness, cfg.w_alpha + cfg.w_gamma, 1e-12);
}

TEST(RegularizedFitness, InvalidGetsFloor) {
    FitnessConfig cfg;
    const auto out = score("log(x - 10)", doubling(), cfg);
    EXPECT_EQ(out.status, FitnessStatus::Invalid);
    EXPECT_EQ(out.fitness, cfg.floor());
}

TEST(PanelLoss, WeightedMean) {
    PanelSet ps;
    ps.input_names = {"x"};
    ps.target_names = {"y"};
    // panel 1: SSE 2 over 2 rows; panel 2: SSE 30 over 10 rows
    ps.panels.push_back(occam::testing::make_panel({{0.0, 1.0}}, {1.0, 2.0}));
    std::vector<double> x(10), y(10);
    for (std::size_t i = 0; i < 10; ++i) x[i] = static_cast<double>(i), y[i] = x[i] + std::sqrt(3.0);
    ps.panels.push_back(occam::testing::make_panel({x}, y));
    auto e = parse_expression("x", {"x"});
    const auto rep = panel_loss(e, ps, {{}, {}});
    EXPECT_NEAR(rep.wmse, 2.0, 1e-12);
    EXPECT_NEAR(rep.mse, 32.0 / 12.0, 1e-12);
    EXPECT_NEAR(rep.median, 2.0, 1e-12);
    ASSERT_EQ(rep.per_panel_errors.size(), 2u);
    EXPECT_NEAR(rep.per_panel_errors[0], 1.0, 1e-12);
    EXPECT_NEAR(rep.per_panel_errors[1], 3.0, 1e-12);
}

TEST(PanelLoss, IdenticalAndPerfect) {
    auto one = doubling();
    auto two = one;
    two.panels.push_back(two.panels[0]);
    auto e = parse_expression("1.5*x", {"x"});
    const auto a = panel_loss(e, one, {e.constants()});
    const auto b = panel_loss(e, two, {e.constants(), e.constants()});
    EXPECT_NEAR(a.wmse, b.wmse, 1e-15);
    EXPECT_NEAR(a.mse, a.wmse, 1e-15);
    auto exact = parse_expression("2*x", {"x"});
    EXPECT_EQ(panel_loss(exact, two, {exact.constants(), exact.constants()}).wmse, 0.0);
    EXPECT_THROW(panel_loss(e, two, {e.constants()}), ValidationError);
}

TEST(FitConstants, ScaleRecovered) {
    const auto ps = doubling();
    auto e = parse_expression("x*c0", {"x"});
    for (auto method : {ConstantMethod::LevenbergMarquardt, ConstantMethod::GradientDescent}) {
        ConstantFitOptions opt;
        opt.method = method;
        opt.iters = method == ConstantMethod::GradientDescent ? 500 : 50;
        const auto fit = fit_constants(e, ps.panels[0].inputs, ps.panels[0].targets.col(0), opt);
        ASSERT_EQ(fit.constants.size(), 1u);
        EXPECT_NEAR(fit.constants[0], 2.0, 1e-3);
        EXPECT_FALSE(fit.diverged);
    }
}

TEST(FitConstants, ConstantFree) {
    const auto ps = doubling();
    auto e = parse_expression("x + x", {"x"});
    const auto fit = fit_constants(e, ps.panels[0].inputs, ps.panels[0].targets.col(0));
    EXPECT_TRUE(fit.constants.empty());
    EXPECT_EQ(fit.mse, 0.0);
    EXPECT_EQ(fit.evaluations, 1u);
}

TEST(FitConstants, DivergenceKeepsBestFinite) {
    const auto ps = doubling();
    auto e = parse_expression("exp(x*c0)", {"x"});
    ConstantFitOptions opt;
    opt.method = ConstantMethod::GradientDescent;
    opt.const_lr = 1e6;
    opt.iters = 20;
    const auto fit = fit_constants(e, ps.panels[0].inputs, ps.panels[0].targets.col(0), opt);
    EXPECT_TRUE(fit.diverged);
    EXPECT_TRUE(std::isfinite(fit.mse));
    EXPECT_TRUE(std::isfinite(fit.constants[0]));
}

TEST(FitConstants, CobbDouglasRestricted) {
    const auto ps = load_csv(OCCAM_SOURCE_DIR "/data/cobb_douglas_1899_1922.csv", {{"K", "L"}, {"Y"}, {}, {}});
    ASSERT_EQ(ps.panels[0].rows(), 24u);
    auto e = parse_expression("K^c0*L^c1", {"K", "L"});
    ConstantFitOptions opt;
    opt.init = std::vector<double>{0.5, 0.5};
    opt.iters = 200;
    const auto fit = fit_constants(e, ps.panels[0].inputs, ps.panels[0].targets.col(0), opt);
    EXPECT_NEAR(fit.constants[0], 0.249, 0.05);
    EXPECT_NEAR(fit.constants[1], 0.754, 0.05);
}

// Central-difference gradients agree with a Richardson extrapolation.
TEST(FitConstants, GradientCheck) {
    const auto x = linspace(0.1, 2.0, 40);
    std::vector<double> y;
    for (double v : x) y.push_back(std::sin(1.3 * v) + 0.4 * v * v);
    const auto ps = one_panel({"x"}, {x}, y);
    auto e = parse_expression("sin(x*c0) + c1*x^2", {"x"});
    detail::Objective obj(e, ps.panels[0].inputs, ps.panels[0].targets.col(0), 0);
    std::vector<double> c = {0.9, 0.1};
    for (std::size_t j = 0; j < c.size(); ++j) {
        auto diff = [&](double h) {
            auto up = c, down = c;
            up[j] += h;
            down[j] -= h;
            return (obj.sse(up) - obj.sse(down)) / (2 * h);
        };
        const double h = detail::fd_step(c[j], 1e-6);
        const double d1 = diff(h), d2 = diff(2 * h);
        const double rich = (4 * d1 - d2) / 3;
        EXPECT_NEAR(d1, rich, 1e-4 * std::fabs(rich)) << "constant " << j;
    }
}

// Every unit-rejected sample in a run carries −w_units and touched no data.
TEST(RegularizedFitness, UnitFloorFromRunLog) {
    SolowSpec spec;
    spec.panels = 3;
    const auto gen = gen_solow_panels(spec);
    OdeTask task;
    task.targets = {"k"};
    auto ps = build_ode_panels(gen.series, task);
    UnitSpec u({"usd", "capita"});
    u.set("k", {1, -1}).set("y", {1, -1}).set("s", {0, 0}).set("n", {0, 0});
    ps.units = u;
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.samples = 60;
    cfg.record_samples = true;
    cfg.threads = 1;
    const auto lib = BasisLibrary::from_string("+ - * / x+c x*c", 2, ps.input_names);
    const auto r = train(ps, lib, cfg);
    std::size_t rejected = 0;
    for (const auto& s : r.samples) {
        if (s.status != FitnessStatus::UnitRejected) continue;
        ++rejected;
        EXPECT_EQ(s.fitness, -cfg.w_units);
        EXPECT_EQ(s.data_evaluations, 0u);
    }
    EXPECT_GT(rejected, 0u);
}
