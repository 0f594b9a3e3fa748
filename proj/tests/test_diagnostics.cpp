#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fdrm/claim.hpp"
#include "fdrm/diagnostics.hpp"
#include "fdrm/driver.hpp"
#include "fdrm/mc.hpp"
#include "fdrm/time_grid.hpp"
#include "fdrm/tree.hpp"

using namespace fdrm;

namespace {

DriverSpec abs_driver(double c, const std::string& label) {
    DriverSpec::CustomOptions options;
    options.lipschitz = c;
    options.label = label;
    return DriverSpec::custom(
        [c](double, double, double, std::span<const double> z) { return c * std::abs(z[0]); },
        options);
}

DriverSpec volterra_abs_driver(double base, double slope, const std::string& label) {
    DriverSpec::CustomOptions options;
    options.volterra = true;
    options.lipschitz = std::abs(base) + std::abs(slope);
    options.label = label;
    return DriverSpec::custom(
        [base, slope](double t, double, double, std::span<const double> z) {
            return (base + slope * t) * std::abs(z[0]);
        },
        options);
}

std::vector<ClaimSpec> corpus(double u) {
    std::vector<ClaimSpec> claims;
    claims.push_back(ClaimSpec::call(0.1, u));
    claims.push_back(ClaimSpec::terminal([](double x) { return std::tanh(x); }, u, "tanh"));
    claims.push_back(ClaimSpec::constant(0.4, u));
    claims.push_back(ClaimSpec::terminal_brownian({0.8}, u));
    return claims;
}

}  // namespace

TEST_CASE("property names round-trip") {
    const Property all[] = {Property::strong_tc,     Property::weak_tc,
                            Property::order_tc,      Property::sub_tc,
                            Property::restriction,   Property::normalization,
                            Property::h_longevity,   Property::horizon_comparison,
                            Property::cocycle,       Property::weak_cocycle,
                            Property::sub_penalty,   Property::acceptance_inclusion};
    for (Property p : all) {
        const auto back = property_from_name(property_name(p));
        REQUIRE(back.has_value());
        CHECK(*back == p);
    }
    CHECK_FALSE(property_from_name("bogus").has_value());
}

TEST_CASE("single drivers are time consistent in every sense") {
    const TreeModel tree(TimeGrid::uniform(1.0, 8));
    const auto driver = DriverSpec::entropic(1.0, [](double s) { return 0.1 * s; });
    const auto claims = corpus(0.75);
    const std::vector<Triple> triples{{0.0, 0.25, 0.75}, {0.0, 0.5, 1.0}, {0.25, 0.5, 0.75}};
    for (Property kind : {Property::strong_tc, Property::weak_tc, Property::order_tc,
                          Property::sub_tc}) {
        const auto report = check_time_consistency(kind, tree, driver, claims, triples, 1e-10);
        CHECK(report.verdict);
        CHECK(report.worst_violation <= 1e-10);
        CHECK(report.property == kind);
        CHECK(report.triples.size() == 3);
        CHECK(report.backend == "tree");
    }
}

TEST_CASE("horizon families keep the weak notions and split the strong ones") {
    const TreeModel tree(TimeGrid::uniform(1.0, 8));
    const auto claims = corpus(1.0);
    const std::vector<Triple> triples{{0.0, 0.5, 1.0}};

    std::map<double, DriverSpec> inc;
    inc.emplace(0.5, abs_driver(0.5, "abs-0.5"));
    inc.emplace(1.0, abs_driver(1.0, "abs-1.0"));
    const auto increasing = DriverSpec::family(std::move(inc));

    std::map<double, DriverSpec> dec;
    dec.emplace(0.5, abs_driver(1.0, "abs-1.0"));
    dec.emplace(1.0, abs_driver(0.5, "abs-0.5"));
    const auto decreasing = DriverSpec::family(std::move(dec));

    for (const auto* family : {&increasing, &decreasing}) {
        for (Property kind : {Property::weak_tc, Property::order_tc}) {
            const auto report =
                check_time_consistency(kind, tree, *family, claims, triples, 1e-10);
            CHECK(report.verdict);
        }
        CHECK_FALSE(check_time_consistency(Property::strong_tc, tree, *family, claims,
                                           triples, 1e-10)
                        .verdict);
    }

    const auto sub_inc =
        check_time_consistency(Property::sub_tc, tree, increasing, claims, triples, 1e-10);
    CHECK(sub_inc.verdict);
    const auto sub_dec =
        check_time_consistency(Property::sub_tc, tree, decreasing, claims, triples, 1e-10);
    CHECK_FALSE(sub_dec.verdict);
    CHECK(sub_dec.worst_violation > 1e-6);
    CHECK_FALSE(sub_dec.detail.empty());
}

TEST_CASE("volterra drivers decreasing in the frozen argument stay sub-consistent") {
    const TreeModel tree(TimeGrid::uniform(1.0, 8));
    const auto claims = corpus(1.0);
    const std::vector<Triple> triples{{0.0, 0.5, 1.0}};
    const auto decreasing = volterra_abs_driver(1.5, -1.0, "volterra-decreasing");
    const auto increasing = volterra_abs_driver(0.5, 1.0, "volterra-increasing");
    const auto pass =
        check_time_consistency(Property::sub_tc, tree, decreasing, claims, triples, 1e-10);
    CHECK(pass.verdict);
    const auto fail =
        check_time_consistency(Property::sub_tc, tree, increasing, claims, triples, 1e-10);
    CHECK_FALSE(fail.verdict);
    CHECK(fail.worst_violation > 1e-6);
}

TEST_CASE("monte carlo consistency smoke check") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 16);
    McConfig config;
    config.paths = 4000;
    config.seed = 13;
    config.bootstrap = 50;
    const PathEnsemble ens = PathEnsemble::simulate(grid, 1, config);
    const auto driver = DriverSpec::linear({0.3}, 0.1);
    const std::vector<ClaimSpec> claims{ClaimSpec::terminal_brownian({1.0}, 1.0),
                                        ClaimSpec::call(0.1, 1.0)};
    const auto report = check_time_consistency_mc(Property::strong_tc, ens, driver, claims,
                                                  {0.0, 0.5, 1.0}, config, 3.0);
    CHECK(report.backend == "mc");
    CHECK(report.verdict);
}

TEST_CASE("structure checks mirror the zero-section predicate") {
    const TreeModel tree(TimeGrid::uniform(1.0, 8));
    const std::vector<std::pair<double, double>> pairs{{0.25, 0.75}, {0.5, 1.0}};
    const std::vector<ClaimSpec> claims{ClaimSpec::call(0.1, 0.25),
                                        ClaimSpec::constant(0.3, 0.25)};

    SUBCASE("normalized drivers pass both properties") {
        const auto driver = DriverSpec::entropic(1.5, [](double) { return 0.0; });
        for (Property kind : {Property::normalization, Property::restriction}) {
            const auto report = check_structure(kind, tree, driver, claims, 0.0, pairs, 1e-10);
            CHECK(report.verdict);
            CHECK(report.worst_violation <= 1e-12);
            CHECK(report.triples.size() == 2);
        }
    }

    SUBCASE("a constant zero-section breaks both by (u - t) a") {
        const auto driver = DriverSpec::constant(0.15);
        for (Property kind : {Property::normalization, Property::restriction}) {
            const auto report = check_structure(kind, tree, driver, claims, 0.0, pairs, 1e-10);
            CHECK_FALSE(report.verdict);
            CHECK(report.worst_violation == doctest::Approx(0.15 * 0.5).epsilon(1e-10));
        }
    }

    SUBCASE("families with distinct members stay normalized but lose restriction") {
        std::map<double, DriverSpec> members;
        members.emplace(0.75, DriverSpec::entropic(1.0, [](double) { return 0.0; }));
        members.emplace(1.0, DriverSpec::entropic(2.0, [](double) { return 0.0; }));
        const auto family = DriverSpec::family(std::move(members));
        const std::vector<std::pair<double, double>> fam_pairs{{0.75, 1.0}};
        const std::vector<ClaimSpec> fam_claims{ClaimSpec::call(0.1, 0.75)};
        CHECK(check_structure(Property::normalization, tree, family, fam_claims, 0.0,
                              fam_pairs, 1e-10)
                  .verdict);
        const auto restriction = check_structure(Property::restriction, tree, family,
                                                 fam_claims, 0.0, fam_pairs, 1e-10);
        CHECK_FALSE(restriction.verdict);
        CHECK(restriction.worst_violation > 1e-6);
    }
}

TEST_CASE("h-longevity margins are exact for constant drivers") {
    const TreeModel tree(TimeGrid::uniform(1.0, 8));
    const std::vector<ClaimSpec> claims{ClaimSpec::call(0.1, 0.5),
                                        ClaimSpec::constant(0.3, 0.5)};
    const std::vector<Triple> triples{{0.0, 0.5, 1.0}};
    const auto pass =
        check_h_longevity(tree, DriverSpec::constant(0.2), claims, triples, 1e-10);
    CHECK(pass.verdict);
    CHECK(pass.worst_violation == doctest::Approx(-0.1).epsilon(1e-12));
    const auto fail =
        check_h_longevity(tree, DriverSpec::constant(-0.2), claims, triples, 1e-10);
    CHECK_FALSE(fail.verdict);
    CHECK(fail.worst_violation == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("gamma surfaces on the lattice") {
    const TreeModel tree(TimeGrid::uniform(1.0, 8));
    const std::vector<double> u_grid{0.5, 0.75, 1.0};

    SUBCASE("constant drivers give the affine surface exactly") {
        const auto report = gamma_surface(tree, DriverSpec::constant(0.25),
                                          ClaimSpec::call(0.1, 0.5), 0.0, 0.5, u_grid);
        REQUIRE(report.points.size() == 3);
        for (const GammaPoint& point : report.points) {
            const double expect = 0.25 * (point.u - 0.5);
            CHECK(std::abs(point.value_min - expect) <= 1e-12);
            CHECK(point.value_max == doctest::Approx(point.value_min).epsilon(1e-13));
            REQUIRE(point.closed_form.has_value());
            CHECK(*point.closed_form == doctest::Approx(expect).epsilon(1e-10));
        }
        CHECK(report.min_value == doctest::Approx(0.0));
        CHECK(report.s == 0.0);
        CHECK(report.t == 0.5);
        CHECK(report.backend == "tree");
    }

    SUBCASE("exponential zero-sections integrate to the longevity premium") {
        const auto driver = DriverSpec::entropic(1.0, [](double v) { return std::exp(-v); });
        const auto report =
            gamma_surface(tree, driver, ClaimSpec::call(0.1, 0.5), 0.0, 0.5, u_grid);
        for (const GammaPoint& point : report.points) {
            const double exact = std::exp(-0.5) - std::exp(-point.u);
            REQUIRE(point.closed_form.has_value());
            CHECK(*point.closed_form == doctest::Approx(exact).epsilon(1e-10));
            CHECK(point.value_max == doctest::Approx(point.value_min).epsilon(1e-12));
            CHECK(std::abs(point.value_min - exact) <= 2e-2);  // left endpoint discretization
        }
    }

    SUBCASE("gamma is invariant under cash translation of the claim") {
        const auto driver = DriverSpec::entropic(1.0, [](double v) { return 0.3 * v; });
        const auto base =
            gamma_surface(tree, driver, ClaimSpec::call(0.1, 0.5), 0.0, 0.5, u_grid);
        const auto shifted = gamma_surface(
            tree, driver,
            ClaimSpec::terminal([](double x) { return std::max(x - 0.1, 0.0) + 2.0; }, 0.5,
                                "call+2"),
            0.0, 0.5, u_grid);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(base.points[i].value_min ==
                  doctest::Approx(shifted.points[i].value_min).epsilon(1e-12));
            CHECK(base.points[i].value_max ==
                  doctest::Approx(shifted.points[i].value_max).epsilon(1e-12));
        }
    }

    SUBCASE("families carry no closed form") {
        std::map<double, DriverSpec> members;
        members.emplace(0.5, DriverSpec::entropic(1.0, [](double) { return 0.1; }));
        members.emplace(0.75, DriverSpec::entropic(1.5, [](double) { return 0.2; }));
        members.emplace(1.0, DriverSpec::entropic(2.0, [](double) { return 0.3; }));
        const auto family = DriverSpec::family(std::move(members));
        const auto report =
            gamma_surface(tree, family, ClaimSpec::call(0.1, 0.5), 0.0, 0.5, u_grid);
        for (const GammaPoint& point : report.points)
            CHECK_FALSE(point.closed_form.has_value());
    }
}

TEST_CASE("gamma surfaces by common-random-number monte carlo") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 20);
    McConfig config;
    config.paths = 4000;
    config.seed = 19;
    config.bootstrap = 50;
    const PathEnsemble ens = PathEnsemble::simulate(grid, 1, config);
    const std::vector<double> u_grid{0.75, 1.0};
    const auto report = gamma_surface_mc(ens, DriverSpec::constant(0.25),
                                         ClaimSpec::call(0.1, 0.5), 0.0, 0.5, u_grid, config);
    CHECK(report.backend == "mc");
    REQUIRE(report.points.size() == 2);
    for (const GammaPoint& point : report.points) {
        REQUIRE(point.mc.has_value());
        // common random numbers cancel the noise in the difference itself;
        // the reported error combines the two one-sided estimates
        CHECK(std::abs(point.mc->value - 0.25 * (point.u - 0.5)) <= 1e-9);
        CHECK(point.mc->std_error < 1e-2);
    }
}

TEST_CASE("horizon comparison orders solutions across horizons") {
    const TreeModel tree(TimeGrid::uniform(1.0, 8));
    const auto g1 = DriverSpec::linear({0.3}, 0.1);
    const auto g2 = DriverSpec::linear({0.3}, 0.25);
    // claims enter as the terminal data xi_i, so ordered data means
    // payoff2 >= payoff1 pathwise
    const auto x1 = ClaimSpec::terminal([](double b) { return std::tanh(b) - 0.1; }, 0.5,
                                        "tanh-0.1");
    const auto x2 = ClaimSpec::terminal([](double b) { return 2.0 + std::tanh(b); }, 1.0,
                                        "2+tanh");
    const auto pass = check_horizon_comparison(tree, g1, 0.5, x1, g2, 1.0, x2, 1e-10);
    CHECK(pass.verdict);
    CHECK(pass.worst_violation <= 1e-10);
    REQUIRE(pass.triples.size() == 1);
    CHECK(pass.triples.front().u == 1.0);
    CHECK_FALSE(pass.detail.empty());

    // inverted data order: the tail conclusion Y^2 >= xi_1 must fail
    const auto y1 = ClaimSpec::terminal([](double b) { return 2.0 + std::tanh(b); }, 0.5,
                                        "2+tanh");
    const auto y2 = ClaimSpec::terminal([](double b) { return std::tanh(b) - 0.1; }, 1.0,
                                        "tanh-0.1");
    const auto fail = check_horizon_comparison(tree, g1, 0.5, y1, g2, 1.0, y2, 1e-10);
    CHECK_FALSE(fail.verdict);
    CHECK(fail.worst_violation > 1e-3);
}

TEST_CASE("driver recovery from short-window evaluations") {
    const std::vector<double> s_grid{0.0, 0.25, 0.5};
    const std::vector<double> z_grid{-1.0, -0.3, 0.0, 0.7, 1.2};

    SUBCASE("linear and entropic drivers are exact on the lattice") {
        for (const auto& driver :
             {DriverSpec::linear({0.3}, 0.1),
              DriverSpec::entropic(2.0, [](double) { return 0.1; })}) {
            const auto report =
                recover_driver_tree(driver, 1.0 / 64.0, 2, s_grid, z_grid, false);
            CHECK(report.max_error <= 1e-10);
            CHECK(report.backend == "tree");
            CHECK(report.epsilon == doctest::Approx(2.0 / 64.0));
            REQUIRE(report.points.size() == 15);
            for (const RecoveryPoint& point : report.points) {
                CHECK(std::abs(point.estimate - point.exact) <= 1e-10);
                CHECK(point.std_error == 0.0);
            }
        }
    }

    SUBCASE("richardson extrapolation beats the plain window") {
        const auto driver = DriverSpec::entropic(1.0, [](double s) { return 0.1 * s; });
        const auto plain = recover_driver_tree(driver, 1.0 / 64.0, 4, s_grid, z_grid, false);
        const auto rich = recover_driver_tree(driver, 1.0 / 64.0, 4, s_grid, z_grid, true);
        CHECK(rich.richardson);
        CHECK(plain.max_error > 1e-4);
        CHECK(rich.max_error < plain.max_error);
    }

    SUBCASE("ordered drivers recover in order") {
        const auto lo = recover_driver_tree(DriverSpec::entropic(0.5, [](double) { return 0.0; }),
                                            1.0 / 64.0, 2, s_grid, z_grid, false);
        const auto hi = recover_driver_tree(DriverSpec::entropic(1.0, [](double) { return 0.0; }),
                                            1.0 / 64.0, 2, s_grid, z_grid, false);
        for (std::size_t i = 0; i < lo.points.size(); ++i)
            CHECK(hi.points[i].estimate >= lo.points[i].estimate - 1e-12);
    }

    SUBCASE("monte carlo recovery lands within the coarse tolerance") {
        McConfig config;
        config.paths = 20000;
        config.seed = 3;
        config.degree = 2;
        config.bootstrap = 50;
        const std::vector<double> s_small{0.0, 0.5};
        const std::vector<double> z_small{-0.5, 0.8};
        const auto report = recover_driver_mc(DriverSpec::linear({0.3}, 0.1), 1.0 / 32.0, 2,
                                              s_small, z_small, false, config);
        CHECK(report.backend == "mc");
        CHECK(report.max_error <= 0.05);
        for (const RecoveryPoint& point : report.points) CHECK(point.std_error > 0.0);
    }
}

TEST_CASE("penalty relations across pastings") {
    const TreeModel tree(TimeGrid::uniform(1.0, 6));
    const std::vector<Triple> triples{{0.0, 0.5, 1.0}};
    std::vector<double> q_grid;
    for (int i = -20; i <= 20; ++i) q_grid.push_back(static_cast<double>(i) / 10.0);

    SUBCASE("single entropic drivers satisfy the cocycle identity") {
        const auto driver = DriverSpec::entropic(1.5, [](double) { return 0.2; });
        const auto report = check_penalty_relations(Property::cocycle, tree, driver, triples,
                                                    16, 4, {}, 1e-9);
        CHECK(report.verdict);
        CHECK(report.worst_violation <= 1e-9);
        const auto weak = check_penalty_relations(Property::weak_cocycle, tree, driver,
                                                  triples, 8, 4, q_grid, 1e-9);
        CHECK(weak.verdict);
    }

    SUBCASE("sub-penalty verdicts match sub-consistency verdicts") {
        std::map<double, DriverSpec> inc;
        inc.emplace(0.5, DriverSpec::entropic(1.0, [](double) { return 0.0; }));
        inc.emplace(1.0, DriverSpec::entropic(2.0, [](double) { return 0.0; }));
        const auto increasing = DriverSpec::family(std::move(inc));
        std::map<double, DriverSpec> dec;
        dec.emplace(0.5, DriverSpec::entropic(2.0, [](double) { return 0.0; }));
        dec.emplace(1.0, DriverSpec::entropic(1.0, [](double) { return 0.0; }));
        const auto decreasing = DriverSpec::family(std::move(dec));
        const auto claims = corpus(1.0);

        for (const auto* family : {&increasing, &decreasing}) {
            const bool sub_tc =
                check_time_consistency(Property::sub_tc, tree, *family, claims, triples, 1e-9)
                    .verdict;
            const auto penalty = check_penalty_relations(Property::sub_penalty, tree, *family,
                                                         triples, 24, 4, {}, 1e-9);
            CHECK(penalty.verdict == sub_tc);
        }
    }
}

TEST_CASE("acceptance inclusion agrees with h-longevity") {
    const TreeModel tree(TimeGrid::uniform(1.0, 8));
    const std::vector<ClaimSpec> claims{ClaimSpec::call(0.1, 0.5),
                                        ClaimSpec::constant(0.1, 0.5)};
    const std::vector<Triple> triples{{0.0, 0.5, 1.0}};
    for (double a : {0.2, -0.2}) {
        const auto driver = DriverSpec::constant(a);
        const bool longevity =
            check_h_longevity(tree, driver, claims, triples, 1e-10).verdict;
        const auto inclusion = check_acceptance_inclusion(tree, driver, claims, triples, 1e-10);
        CHECK(inclusion.verdict == longevity);
        CHECK(inclusion.property == Property::acceptance_inclusion);
    }
}

TEST_CASE("implication diagram arrows") {
    DiagramVerdicts ok;
    ok.strong_tc = ok.weak_tc = ok.order_tc = ok.sub_tc = ok.h_longevity = true;
    ok.rho_tu_zero = 0.0;
    CHECK(implication_violations(ok, 1e-9).empty());

    DiagramVerdicts strong_only = ok;
    strong_only.weak_tc = false;
    CHECK_FALSE(implication_violations(strong_only, 1e-9).empty());

    DiagramVerdicts split = ok;
    split.order_tc = false;
    CHECK_FALSE(implication_violations(split, 1e-9).empty());

    DiagramVerdicts sub_missing;
    sub_missing.weak_tc = sub_missing.order_tc = sub_missing.h_longevity = true;
    sub_missing.sub_tc = false;
    sub_missing.rho_tu_zero = -0.1;  // normalized-from-below: weak + longevity => sub
    CHECK_FALSE(implication_violations(sub_missing, 1e-9).empty());

    DiagramVerdicts longevity_missing;
    longevity_missing.weak_tc = longevity_missing.order_tc = true;
    longevity_missing.sub_tc = true;
    longevity_missing.h_longevity = false;
    longevity_missing.rho_tu_zero = 0.1;  // sub + rho_tu(0) >= 0 => longevity
    CHECK_FALSE(implication_violations(longevity_missing, 1e-9).empty());

    // a failed strong arrow alone is consistent: nothing is implied
    DiagramVerdicts weak_world = ok;
    weak_world.strong_tc = false;
    CHECK(implication_violations(weak_world, 1e-9).empty());
}

TEST_CASE("fuzz corpora are deterministic and measurable at u") {
    const auto a = make_fuzz_claims(0.5, 20, 99);
    const auto b = make_fuzz_claims(0.5, 20, 99);
    REQUIRE(a.size() == 20);
    REQUIRE(b.size() == 20);
    const TreeModel tree(TimeGrid::uniform(1.0, 8));
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK(a[i].u() == 0.5);
        CHECK(a[i].label() == b[i].label());
        const auto la = tree_claim_layer(tree, a[i]);
        const auto lb = tree_claim_layer(tree, b[i]);
        REQUIRE(la.size() == lb.size());
        for (std::size_t j = 0; j < la.size(); ++j) CHECK(la[j] == lb[j]);
    }
    const auto c = make_fuzz_claims(0.5, 20, 100);
    bool differs = false;
    for (std::size_t i = 0; i < 20 && !differs; ++i) {
        const auto la = tree_claim_layer(tree, a[i]);
        const auto lc = tree_claim_layer(tree, c[i]);
        for (std::size_t j = 0; j < la.size() && !differs; ++j) differs = la[j] != lc[j];
    }
    CHECK(differs);
}
