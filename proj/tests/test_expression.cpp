#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "occam/grammar.hpp"
#include "occam/network.hpp"
#include "occam/units.hpp"

using namespace occam;

namespace {

double eval1(const Expression& e, std::vector<double> row) {
    Matrix m(1, row.size());
    for (std::size_t c = 0; c < row.size(); ++c) m(0, c) = row[c];
    return evaluate(e, m)(0, 0);
}

} // namespace

TEST(Evaluate, Identity) {
    auto e = parse_expression("x", {"x"});
    EXPECT_DOUBLE_EQ(eval1(e, {3.5}), 3.5);
}

TEST(Evaluate, LotkaVolterraPreyRate) {
    auto e = parse_expression("0.03*H - 0.001*H*L", {"H", "L"});
    const double H = 20, L = 20;
    EXPECT_NEAR(eval1(e, {H, L}), 0.03 * H - 0.001 * H * L, 1e-15);
    EXPECT_NEAR(eval1(e, {H, L}), 0.2, 1e-12);
}

TEST(Evaluate, CobbDouglasAtUnitInputs) {
    auto e = parse_expression("K^0.25*L^0.75", {"K", "L"});
    EXPECT_DOUBLE_EQ(eval1(e, {1, 1}), 1.0);
}

TEST(Evaluate, RowsAreIndependent) {
    auto e = parse_expression("x*x + sin(x)", {"x"});
    Matrix m(5, 1);
    for (std::size_t i = 0; i < 5; ++i) m(i, 0) = 0.3 * static_cast<double>(i) - 0.5;
    const Matrix all = evaluate(e, m);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(all(i, 0), eval1(e, {m(i, 0)}));
}

TEST(Evaluate, DomainViolationsAreNonFiniteNotFatal) {
    auto e = parse_expression("log(x)", {"x"});
    Matrix m(3, 1);
    m(0, 0) = -1;
    m(1, 0) = 1;
    m(2, 0) = std::exp(1.0);
    const Matrix out = evaluate(e, m);
    EXPECT_FALSE(std::isfinite(out(0, 0)));
    EXPECT_EQ(out(1, 0), 0.0);
    EXPECT_NEAR(out(2, 0), 1.0, 1e-15);
    EXPECT_FALSE(mostly_non_finite(out.col(0)));
    auto d = parse_expression("1/(x-x)", {"x"});
    EXPECT_TRUE(mostly_non_finite(evaluate(d, m).col(0)));
}

TEST(Evaluate, WrongInputWidthThrows) {
    auto e = parse_expression("x+y", {"x", "y"});
    EXPECT_THROW(evaluate(e, Matrix(2, 3)), ValidationError);
}

TEST(Complexity, Counts) {
    EXPECT_EQ(complexity(parse_expression("x+y", {"x", "y"})), (ComplexityReport{1, 0}));
    auto xc = parse_expression("x*c0", {"x"});
    EXPECT_EQ(complexity(xc).activation_count, 1);
    EXPECT_EQ(complexity(xc).constant_count, 1);
    EXPECT_EQ(complexity(xc).total(), 2);
    // hand count: two products, one shift, one difference
    auto solow = parse_expression("s*y - k*(n+c0)", {"k", "y", "s", "n"});
    const auto r = complexity(solow);
    EXPECT_EQ(r.activation_count, 4);
    EXPECT_EQ(r.constant_count, 1);
    EXPECT_EQ(r.total(), 5);
}

TEST(Render, Examples) {
    auto lv = parse_expression("0.0301*H - 0.001*H*L", {"H", "L"});
    EXPECT_EQ(to_canonical_string(lv, 3), "0.0301*H - 0.001*H*L");

    Expression two(std::vector<std::string>{"x"});
    two.add_root(two.add_constant(2.0));
    EXPECT_EQ(to_canonical_string(two), "2");

    Expression s(std::vector<std::string>{"x"});
    const auto& cat = BasisCatalog::builtin();
    const std::int32_t x = s.add_variable(0);
    const double half[] = {0.5};
    const std::int32_t shifted = s.add_basis(cat.at("x+c"), std::span(&x, 1), half);
    s.add_root(s.add_basis(cat.at("sin"), std::span(&shifted, 1)));
    EXPECT_EQ(to_canonical_string(s), "sin(x + 0.5)");
}

TEST(Render, StructurallyIdenticalRenderIdentically) {
    auto a = parse_expression("x*y + 1.5", {"x", "y"});
    auto b = parse_expression("x*y + 1.5", {"x", "y"});
    EXPECT_EQ(a.structure_key(), b.structure_key());
    EXPECT_EQ(to_canonical_string(a), to_canonical_string(b));
}

TEST(Parse, Errors) {
    EXPECT_THROW(parse_expression("", {"x"}), ParseError);
    EXPECT_THROW(parse_expression("sy - k(n+c)", {"s", "y", "k", "n"}), ParseError);
    EXPECT_THROW(parse_expression("x +", {"x"}), ParseError);
    EXPECT_THROW(parse_expression("z", {"x"}), ParseError);
    EXPECT_THROW(parse_expression("frob(x)", {"x"}), ParseError);
}

TEST(Parse, LibraryRestriction) {
    auto lib = BasisLibrary::from_string("* x*c x^c", 2, {"K", "L"});
    EXPECT_NO_THROW(parse_expression("0.5*K^0.25*L", lib));
    EXPECT_THROW(parse_expression("K + L", lib), ParseError);
}

// Random expressions drawn from a wide network, given random constants,
// rendered at full precision and parsed back must evaluate identically.
TEST(Parse, RoundTripRandomExpressions) {
    auto lib = BasisLibrary::from_string("+ - * / x+c x*c x^2 x^3 sqrt x^c poly2 log exp sin cos", 3, {"x", "y"});
    ProbNetwork net(lib);
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> cdist(-3.0, 3.0), xdist(0.2, 2.0);
    Matrix pts(8, 2);
    for (std::size_t i = 0; i < 8; ++i) pts(i, 0) = xdist(gen), pts(i, 1) = xdist(gen);
    const auto batch = net.sample(1000, 11, 0);
    std::size_t compared = 0;
    for (const auto& proto : batch.expressions) {
        Expression e = proto;
        for (auto& c : e.mutable_constants()) c = cdist(gen);
        const std::string text = to_canonical_string(e, 17);
        Expression back = parse_expression(text, {"x", "y"});
        ASSERT_EQ(to_canonical_string(back, 17), text);
        const Matrix a = evaluate(e, pts), b = evaluate(back, pts);
        for (std::size_t i = 0; i < 8; ++i) {
            if (!std::isfinite(a(i, 0))) {
                EXPECT_FALSE(std::isfinite(b(i, 0))) << text;
                continue;
            }
            EXPECT_NEAR(b(i, 0), a(i, 0), 1e-9 * std::max(1.0, std::fabs(a(i, 0)))) << text;
            ++compared;
        }
    }
    EXPECT_GT(compared, 4000u);
}

// ---------------------------------------------------------------------------
// units

namespace {

UnitSpec solow_units() {
    UnitSpec u({"usd", "capita"});
    u.set("k", {1, -1}).set("y", {1, -1}).set("s", {0, 0}).set("n", {0, 0});
    return u;
}

UnitVector root_unit(const std::string& text, const UnitSpec& spec) {
    return propagate_units(parse_expression(text, {"k", "y", "s", "n"}), spec).at(0);
}

UnitVector vec(std::initializer_list<std::int64_t> e) {
    std::vector<Rational> r;
    for (auto v : e) r.emplace_back(v);
    return UnitVector::concrete(r);
}

} // namespace

TEST(Units, BasisRules) {
    UnitSpec u({"a", "b"});
    u.set("p", {1, -1}).set("q", {1, -1}).set("a", {1, 0}).set("b", {0, 1}).set("z", {0, 0});
    auto unit = [&](const std::string& t) { return propagate_units(parse_expression(t, {"p", "q", "a", "b", "z"}), u).at(0); };
    EXPECT_EQ(unit("sin(z)"), vec({0, 0}));
    EXPECT_EQ(unit("p + q"), vec({1, -1}));
    EXPECT_TRUE(unit("a + b").is_mismatch());
    EXPECT_TRUE(unit("p*c0").is_wildcard());
    EXPECT_EQ(unit("sin(p*c0)"), vec({0, 0}));
    EXPECT_TRUE(unit("sin(a)").is_mismatch());
    EXPECT_EQ(unit("a*b"), vec({1, 1}));
    EXPECT_EQ(unit("a/b"), vec({1, -1}));
    EXPECT_EQ(unit("a^2"), vec({2, 0}));
    EXPECT_EQ(unit("sqrt(a)"), UnitVector::concrete({Rational(1, 2), Rational(0)}));
    EXPECT_TRUE(unit("a^c0").is_wildcard());
    EXPECT_EQ(unit("a + c0"), vec({1, 0}));
}

TEST(Units, Consistency) {
    const auto u = solow_units();
    const auto target = vec({1, -1});
    EXPECT_TRUE(units_consistent(UnitVector::wildcard(), target));
    EXPECT_TRUE(units_consistent(vec({1, -1}), target));
    EXPECT_FALSE(units_consistent(UnitVector::mismatch(), target));
    EXPECT_FALSE(units_consistent(vec({1, 0}), target));
    EXPECT_FALSE(units_consistent(parse_expression("k + s", {"k", "y", "s", "n"}), u, "k"));
    EXPECT_TRUE(units_consistent(parse_expression("s*y", {"k", "y", "s", "n"}), u, "k"));
    EXPECT_TRUE(units_consistent(parse_expression("s*y - k*(n + c0)", {"k", "y", "s", "n"}), u, "k"));
    EXPECT_TRUE(units_consistent(parse_expression("0.5*k", {"k", "y", "s", "n"}), u, "k"));
}

TEST(Units, MismatchAbsorbs) {
    const auto u = solow_units();
    for (const char* t : {"(k + s)*y", "sin(k + s)", "exp(k + s) + k", "(k + s)*c0", "(k + s)^c0", "sqrt(k + s)/y"})
        EXPECT_TRUE(root_unit(t, u).is_mismatch()) << t;
}

// Replacing any Concrete input by Wildcard never breaks a consistent expression.
TEST(Units, MonotoneWildcarding) {
    auto lib = BasisLibrary::from_string("+ - * / x+c x*c x^2 sqrt log sin", 2, {"k", "y", "s", "n"});
    ProbNetwork net(lib);
    const auto batch = net.sample(2000, 3, 0);
    const auto base = solow_units();
    const auto target = vec({1, -1});
    std::size_t consistent = 0;
    for (const auto& e : batch.expressions) {
        if (!units_consistent(e, base, target)) continue;
        ++consistent;
        for (const char* v : {"k", "y", "s", "n"}) {
            UnitSpec w = base;
            w.variables[v] = UnitVector::wildcard();
            EXPECT_TRUE(units_consistent(e, w, target)) << to_canonical_string(e) << " with " << v << " wildcarded";
        }
    }
    EXPECT_GT(consistent, 100u);
}

TEST(Units, IndependentOfConstants) {
    const auto u = solow_units();
    auto e = parse_expression("k^c0 + y*c1", {"k", "y", "s", "n"});
    const auto before = propagate_units(e, u);
    e.set_constants({-4.0, 1e9});
    EXPECT_EQ(propagate_units(e, u), before);
}

TEST(Units, BadDeclarations) {
    UnitSpec u({"usd", "capita"});
    EXPECT_THROW(u.set("k", {1}), ValidationError);
    EXPECT_THROW(u.unit_of("missing"), ValidationError);
}
