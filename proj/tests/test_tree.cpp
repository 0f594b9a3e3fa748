#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "fdrm/claim.hpp"
#include "fdrm/driver.hpp"
#include "fdrm/errors.hpp"
#include "fdrm/measure.hpp"
#include "fdrm/premium.hpp"
#include "fdrm/time_grid.hpp"
#include "fdrm/tree.hpp"
#include "fdrm/tree_dual.hpp"
#include "fdrm/tree_measure.hpp"

using namespace fdrm;

namespace {

/// E_Q[f(path)] by brute-force enumeration of all 2^N up/down paths,
/// with the cumulative density built from the one-step factors 1 + q dB.
/// Independent oracle for every lattice expectation in this suite.
double enumerate_expectation(const TreeModel& tree, const TreeMeasure* measure,
                             const std::vector<double>& terminal) {
    const std::size_t n = tree.grid().steps();
    const double sq = tree.sqrt_dt();
    double acc = 0.0;
    for (std::size_t bits = 0; bits < (std::size_t{1} << n); ++bits) {
        double density = 1.0;
        std::size_t node = 0;
        for (std::size_t k = 0; k < n; ++k) {
            const bool up = (bits >> k) & 1;
            if (measure && k >= measure->s_level() && k < measure->t_level()) {
                const double q = measure->q(k, node);
                density *= 1.0 + q * (up ? sq : -sq);
            }
            node += up ? 1 : 0;
        }
        acc += density * terminal[node];
    }
    return acc / static_cast<double>(std::size_t{1} << n);
}

}  // namespace

TEST_CASE("lattice geometry") {
    const TreeModel tree(TimeGrid::uniform(1.0, 4));
    CHECK(tree.levels() == 5);
    CHECK(tree.nodes(3) == 4);
    CHECK(tree.dt() == doctest::Approx(0.25));
    CHECK(tree.brownian(2, 0) == doctest::Approx(-2.0 * tree.sqrt_dt()));
    CHECK(tree.brownian(2, 2) == doctest::Approx(2.0 * tree.sqrt_dt()));
    CHECK(tree.brownian(2, 1) == doctest::Approx(0.0));
    CHECK_THROWS_AS(TreeModel(TimeGrid(std::vector<double>{0.0, 0.1, 0.4})),
                    std::invalid_argument);
}

TEST_CASE("claim layers on the lattice") {
    const TreeModel tree(TimeGrid::uniform(1.0, 4));
    const auto layer = tree_claim_layer(tree, ClaimSpec::terminal_brownian({2.0}, 1.0));
    REQUIRE(layer.size() == 5);
    for (std::size_t j = 0; j < 5; ++j)
        CHECK(layer[j] == doctest::Approx(2.0 * tree.brownian(4, j)));
    const auto calls = tree_claim_layer(tree, ClaimSpec::call(0.0, 0.5));
    REQUIRE(calls.size() == 3);
    CHECK(calls[0] == doctest::Approx(0.0));
    CHECK(calls[2] == doctest::Approx(2.0 * tree.sqrt_dt()));
}

TEST_CASE("zero driver gives the negated martingale") {
    const TreeModel tree(TimeGrid::uniform(1.0, 8));
    const auto sol = tree_solve(tree, DriverSpec::constant(0.0),
                                ClaimSpec::terminal_brownian({1.0}, 1.0), 1.0);
    for (std::size_t k = 0; k <= 8; ++k)
        for (std::size_t j = 0; j <= k; ++j)
            CHECK(sol.y[k][j] == doctest::Approx(-tree.brownian(k, j)).epsilon(1e-13));
}

TEST_CASE("backward recursion identity holds to roundoff") {
    const TreeModel tree(TimeGrid::uniform(1.0, 8));
    const std::vector<DriverSpec> drivers{
        DriverSpec::constant(0.2), DriverSpec::linear({0.4}, -0.1),
        DriverSpec::entropic(1.5, [](double s) { return 0.1 * s; })};
    const std::vector<ClaimSpec> claims{
        ClaimSpec::terminal_brownian({1.0}, 1.0), ClaimSpec::call(0.1, 1.0),
        ClaimSpec::terminal([](double x) { return std::tanh(x); }, 1.0, "tanh")};
    for (const auto& driver : drivers) {
        for (const auto& claim : claims) {
            const auto sol = tree_solve(tree, driver, claim, 1.0);
            for (std::size_t k = 0; k < 8; ++k) {
                for (std::size_t j = 0; j <= k; ++j) {
                    const double z = sol.z[k][j];
                    const double za[] = {z};
                    const double expect =
                        0.5 * (sol.y[k + 1][j + 1] + sol.y[k + 1][j]) +
                        driver(tree.grid().time(k), tree.grid().time(k), 0.0, za) * tree.dt();
                    CHECK(std::abs(sol.y[k][j] - expect) <= 1e-12);
                    CHECK(std::abs(z - (sol.y[k + 1][j + 1] - sol.y[k + 1][j]) /
                                           (2.0 * tree.sqrt_dt())) <= 1e-12);
                }
            }
        }
    }
}

TEST_CASE("linear driver matches its closed form exactly") {
    const TreeModel tree(TimeGrid::uniform(1.0, 16));
    const auto sol = tree_solve(tree, DriverSpec::linear({0.3}, 0.1),
                                ClaimSpec::terminal_brownian({1.0}, 1.0), 1.0);
    CHECK(std::abs(sol.root() - (-0.2)) <= 1e-12);
}

TEST_CASE("constant-coefficient volterra solve equals the plain solve") {
    const TreeModel tree(TimeGrid::uniform(1.0, 10));
    const auto plain = DriverSpec::linear({0.2}, 0.1);
    const auto volterra = DriverSpec::volterra_linear(
        [](double, double) { return std::vector<double>{0.2}; },
        [](double, double) { return 0.1; });
    const auto claim = ClaimSpec::call(0.0, 1.0);
    const auto a = tree_solve(tree, plain, claim, 1.0);
    const auto b = tree_solve(tree, volterra, claim, 1.0);
    for (std::size_t k = 0; k <= 10; ++k)
        for (std::size_t j = 0; j <= k; ++j)
            CHECK(std::abs(a.y[k][j] - b.y[k][j]) <= 1e-12);
}

TEST_CASE("volterra diagonal against direct coefficient summation") {
    const TreeModel tree(TimeGrid::uniform(1.0, 8));
    const auto b = [](double t, double s) { return 0.3 + 0.5 * t + 0.2 * s; };
    const auto driver = DriverSpec::volterra_linear(
        [](double, double) { return std::vector<double>{0.0}; }, b);
    const auto sol = tree_solve(tree, driver, ClaimSpec::constant(0.0, 1.0), 1.0);
    // rho_{t_k, 1}(0) = sum_{m >= k} b(t_k, t_m) dt, frozen first argument
    for (std::size_t k = 0; k <= 8; ++k) {
        double direct = 0.0;
        for (std::size_t m = k; m < 8; ++m)
            direct += b(tree.grid().time(k), tree.grid().time(m)) * tree.dt();
        for (std::size_t j = 0; j <= k; ++j)
            CHECK(std::abs(sol.y[k][j] - direct) <= 1e-12);
    }
}

TEST_CASE("zero-z flow accumulates the zero-section") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 8);
    const auto driver = DriverSpec::entropic(1.0, [](double s) { return s; });
    // y + sum_{m in [2, 6)} a(t_m) dt
    double expect = 0.7;
    for (std::size_t m = 2; m < 6; ++m) expect += grid.time(m) * grid.dt(m);
    CHECK(zero_z_flow(driver, grid, 6, 2, {}, 0.7) == doctest::Approx(expect).epsilon(1e-13));
    // frozen first argument reaches volterra drivers
    const auto volterra = DriverSpec::volterra_linear(
        [](double, double) { return std::vector<double>{0.0}; },
        [](double t, double) { return t; });
    CHECK(zero_z_flow(volterra, grid, 6, 2, 0.25, 0.0) ==
          doctest::Approx(0.25 * 4.0 * grid.dt(0)).epsilon(1e-13));
}

TEST_CASE("claims before the horizon collapse exactly") {
    const TreeModel tree(TimeGrid::uniform(1.0, 8));
    const auto driver = DriverSpec::constant(0.2);
    const auto claim = ClaimSpec::call(0.0, 0.5);
    const auto off = tree_solve(tree, driver, claim, 1.0);
    const auto at = tree_solve(tree, driver, claim, 0.5);
    CHECK(off.claim_level == 4);
    CHECK(off.horizon_level == 8);
    // rho_{0,1}(X) = rho_{0,1/2}(X) + c/2 for a constant driver
    CHECK(std::abs(off.root() - (at.root() + 0.1)) <= 1e-13);
    CHECK(off.z_at(6, 1) == 0.0);
}

TEST_CASE("driver comparison orders solutions nodewise") {
    const TreeModel tree(TimeGrid::uniform(1.0, 8));
    const auto lo = tree_solve(tree, DriverSpec::constant(0.1), ClaimSpec::call(0.0, 1.0), 1.0);
    const auto hi = tree_solve(tree, DriverSpec::constant(0.2), ClaimSpec::call(0.0, 1.0), 1.0);
    for (std::size_t k = 0; k <= 8; ++k)
        for (std::size_t j = 0; j <= k; ++j) CHECK(hi.y[k][j] >= lo.y[k][j] - 1e-14);
}

TEST_CASE("tree measures carry unit mass") {
    const TreeModel tree(TimeGrid::uniform(0.6, 6));
    std::mt19937_64 rng(31);
    const TreeMeasure q = TreeMeasure::random(tree, 0, 6, rng, 0.45);
    const std::vector<double> ones(7, 1.0);
    CHECK(std::abs(tree_expectation(tree, &q, ones, 6, 0).front() - 1.0) <= 1e-12);
    CHECK(std::abs(enumerate_expectation(tree, &q, ones) - 1.0) <= 1e-12);
}

TEST_CASE("lattice expectations match brute-force path enumeration") {
    const TreeModel tree(TimeGrid::uniform(0.6, 6));
    std::mt19937_64 rng(77);
    const TreeMeasure q = TreeMeasure::random(tree, 0, 6, rng, 0.45);
    std::vector<double> terminal(7);
    for (std::size_t j = 0; j < 7; ++j) terminal[j] = std::tanh(tree.brownian(6, j)) + 0.3;
    const double viaTree = tree_expectation(tree, &q, terminal, 6, 0).front();
    const double viaPaths = enumerate_expectation(tree, &q, terminal);
    CHECK(std::abs(viaTree - viaPaths) <= 1e-12);
    // and under P itself
    CHECK(std::abs(tree_expectation(tree, nullptr, terminal, 6, 0).front() -
                   enumerate_expectation(tree, nullptr, terminal)) <= 1e-12);
}

TEST_CASE("pasted measures splice kernels and keep unit mass") {
    const TreeModel tree(TimeGrid::uniform(0.6, 6));
    std::mt19937_64 rng(5);
    const TreeMeasure head = TreeMeasure::random(tree, 0, 3, rng, 0.4);
    const TreeMeasure tail = TreeMeasure::random(tree, 3, 6, rng, 0.4);
    const TreeMeasure pasted = TreeMeasure::paste(tree, head, tail);
    CHECK(pasted.s_level() == 0);
    CHECK(pasted.t_level() == 6);
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t j = 0; j <= k; ++j) CHECK(pasted.q(k, j) == head.q(k, j));
    for (std::size_t k = 3; k < 6; ++k)
        for (std::size_t j = 0; j <= k; ++j) CHECK(pasted.q(k, j) == tail.q(k, j));
    const std::vector<double> ones(7, 1.0);
    CHECK(std::abs(enumerate_expectation(tree, &pasted, ones) - 1.0) <= 1e-12);

    const TreeMeasure back = pasted.restrict(tree, 3, 6);
    for (std::size_t k = 3; k < 6; ++k)
        for (std::size_t j = 0; j <= k; ++j) CHECK(back.q(k, j) == tail.q(k, j));
}

TEST_CASE("one-step densities and positivity") {
    const TreeModel tree(TimeGrid::uniform(0.6, 6));
    const TreeMeasure q = TreeMeasure::constant(tree, 0, 6, 0.5);
    CHECK(q.up_prob(tree, 2, 1) == doctest::Approx(0.5 * (1.0 + 0.5 * tree.sqrt_dt())));
    const auto density = tree_one_step_density(tree, q, 2, 1);
    CHECK(density.up == doctest::Approx(1.0 + 0.5 * tree.sqrt_dt()));
    CHECK(density.down == doctest::Approx(1.0 - 0.5 * tree.sqrt_dt()));
    // |q| sqrt(dt) >= 1 breaks equivalence and is rejected
    CHECK_THROWS(TreeMeasure::constant(tree, 0, 6, 1.0 / tree.sqrt_dt()));
}

TEST_CASE("penalties against the conjugate summation oracle") {
    const TreeModel tree(TimeGrid::uniform(1.0, 8));
    const auto driver = DriverSpec::entropic(2.0, [](double) { return 0.0; });

    SUBCASE("constant kernel is deterministic") {
        const TreeMeasure q = TreeMeasure::constant(tree, 2, 6, 0.4);
        const auto alpha = tree_penalty(tree, driver, q, 0.25, 0.75);
        // q^2/(2b) (t - s)
        for (double v : alpha) CHECK(std::abs(v - 0.16 / 4.0 * 0.5) <= 1e-13);
    }

    SUBCASE("random kernel matches path enumeration") {
        std::mt19937_64 rng(11);
        const TreeMeasure q = TreeMeasure::random(tree, 0, 8, rng, 0.4);
        // terminal functional sum_k g*(t_k, q_k) dt accumulated path by path
        const std::size_t n = 8;
        double acc = 0.0;
        for (std::size_t bits = 0; bits < (std::size_t{1} << n); ++bits) {
            double density = 1.0, cost = 0.0;
            std::size_t node = 0;
            for (std::size_t k = 0; k < n; ++k) {
                const bool up = (bits >> k) & 1;
                const double qv = q.q(k, node);
                const double qa[] = {qv};
                cost += driver.conjugate(tree.grid().time(k), tree.grid().time(k), qa).value *
                        tree.dt();
                density *= 1.0 + qv * (up ? tree.sqrt_dt() : -tree.sqrt_dt());
                node += up ? 1 : 0;
            }
            acc += density * cost;
        }
        acc /= static_cast<double>(std::size_t{1} << n);
        CHECK(std::abs(tree_penalty(tree, driver, q, 0.0, 1.0).front() - acc) <= 1e-12);
    }

    SUBCASE("out-of-domain kernels absorb to infinity") {
        const auto linear = DriverSpec::linear({0.3}, 0.1);
        const TreeMeasure on = TreeMeasure::constant(tree, 0, 8, 0.3);
        const TreeMeasure off = TreeMeasure::constant(tree, 0, 8, 0.2);
        CHECK(tree_penalty(tree, linear, on, 0.0, 1.0).front() ==
              doctest::Approx(-0.1).epsilon(1e-12));
        CHECK(std::isinf(tree_penalty(tree, linear, off, 0.0, 1.0).front()));
    }

    SUBCASE("volterra penalties freeze the first argument at s") {
        const auto volterra = DriverSpec::volterra_quadratic(
            [](double t) { return 1.0 + t; }, [](double, double) { return 0.0; });
        const TreeMeasure q = TreeMeasure::constant(tree, 2, 6, 0.4);
        // q^2 / (2 b(s)) (t - s) with s = 0.25
        CHECK(tree_penalty(tree, volterra, q, 0.25, 0.75).front() ==
              doctest::Approx(0.16 / (2.0 * 1.25) * 0.5).epsilon(1e-12));
    }
}

TEST_CASE("measure specs discretize onto the lattice") {
    const TreeModel tree(TimeGrid::uniform(1.0, 8));
    const MeasureSpec spec = MeasureSpec::deterministic(
        0.25, 0.75, 1, [](double v) { return std::vector<double>{0.5 * v}; });
    const TreeMeasure q = to_tree_measure(tree, spec);
    CHECK(q.s_level() == 2);
    CHECK(q.t_level() == 6);
    CHECK(q.q(3, 1) == doctest::Approx(0.5 * tree.grid().time(3)));
    const MeasureSpec flat = MeasureSpec::constant_kernel(0.0, 1.0, {0.7});
    CHECK(to_tree_measure(tree, flat).q(5, 2) == doctest::Approx(0.7));
}

TEST_CASE("dual representation on the lattice") {
    const TreeModel tree(TimeGrid::uniform(1.0, 8));
    std::vector<double> q_grid(41);
    for (std::size_t i = 0; i < q_grid.size(); ++i)
        q_grid[i] = -2.0 + 0.1 * static_cast<double>(i);

    SUBCASE("linear drivers attain the primal on the grid") {
        const auto driver = DriverSpec::linear({0.3}, 0.1);
        const auto claim = ClaimSpec::call(0.0, 1.0);
        const double primal = tree_solve(tree, driver, claim, 1.0).root();
        const auto dual = tree_dual_sup(tree, driver, claim, 0.0, 1.0, q_grid);
        CHECK(std::abs(dual.value.front() - primal) <= 1e-10);
        for (std::size_t k = 0; k < 8; ++k)
            for (std::size_t j = 0; j <= k; ++j)
                CHECK(dual.argmax.q(k, j) == doctest::Approx(0.3));
    }

    SUBCASE("entropic duality gap closes with newton refinement") {
        const auto driver = DriverSpec::entropic(1.0, [](double) { return 0.1; });
        const auto claim = ClaimSpec::terminal([](double x) { return std::tanh(x); }, 1.0,
                                               "tanh");
        const double primal = tree_solve(tree, driver, claim, 1.0).root();
        const auto refined = tree_dual_sup(tree, driver, claim, 0.0, 1.0, q_grid);
        CHECK(std::abs(refined.value.front() - primal) <= 1e-9);
        TreeDualOptions coarse;
        coarse.newton_refine = false;
        const auto grid_only = tree_dual_sup(tree, driver, claim, 0.0, 1.0, q_grid, coarse);
        CHECK(primal - grid_only.value.front() >= -1e-12);  // weak duality
        CHECK(primal - grid_only.value.front() <= 2e-2);
        CHECK(refined.value.front() >= grid_only.value.front() - 1e-12);
    }

    SUBCASE("every sampled measure satisfies weak duality") {
        const auto driver = DriverSpec::entropic(1.0, [](double) { return 0.1; });
        const auto claim = ClaimSpec::call(0.2, 1.0);
        const double primal = tree_solve(tree, driver, claim, 1.0).root();
        auto layer = tree_claim_layer(tree, claim);
        for (double& v : layer) v = -v;
        std::mt19937_64 rng(9);
        for (int rep = 0; rep < 40; ++rep) {
            const TreeMeasure q = TreeMeasure::random(tree, 0, 8, rng, 0.45);
            const double gain = tree_expectation(tree, &q, layer, 8, 0).front() -
                                tree_penalty(tree, driver, q, 0.0, 1.0).front();
            CHECK(gain <= primal + 1e-12);
        }
    }
}

TEST_CASE("strong composition is the backward recursion restarted") {
    const TreeModel tree(TimeGrid::uniform(1.0, 8));
    const auto driver = DriverSpec::entropic(1.2, [](double s) { return 0.1 * s; });
    const auto claim = ClaimSpec::terminal([](double x) { return std::tanh(x); }, 1.0, "tanh");
    const auto full = tree_solve(tree, driver, claim, 1.0);
    std::vector<double> intermediate = full.y[4];       // rho_{1/2, 1}(X) nodewise
    for (double& v : intermediate) v = -v;              // X' = -rho_{1/2, 1}(X)
    const auto outer = tree_solve_values(tree, driver, intermediate, 4, 4);
    CHECK(std::abs(outer.root() - full.root()) <= 1e-12);
}

TEST_CASE("premium kernels reprice the horizon gap") {
    const TreeModel tree(TimeGrid::uniform(1.0, 8));
    const auto claim = ClaimSpec::call(0.0, 0.5);

    SUBCASE("plain drivers collapse to the reference measure") {
        // One driver for both horizons: the two Z profiles coincide, the
        // kernel vanishes, and the gap is the deterministic zero-section sum.
        const auto driver = DriverSpec::entropic(1.0, [](double s) { return 0.2 * (1.0 - s); });
        const auto sol_long = tree_solve(tree, driver, claim, 1.0);
        const auto sol_short = tree_solve(tree, driver, claim, 0.5);
        const TreeMeasure q =
            build_premium_measure(tree, driver, sol_long, sol_short, 0.0, 0.5, 1.0);
        CHECK(q.s_level() == 0);
        CHECK(q.t_level() == 8);
        for (std::size_t k = 0; k < 8; ++k)
            for (std::size_t j = 0; j <= k; ++j) CHECK(q.q(k, j) == 0.0);
        double gap = 0.0;
        for (std::size_t m = 4; m < 8; ++m)
            gap += driver.zero_section(tree.grid().time(m), tree.grid().time(m)) * tree.dt();
        CHECK(std::abs((sol_long.root() - sol_short.root()) - gap) <= 1e-12);
    }

    SUBCASE("horizon families produce a pricing kernel") {
        std::map<double, DriverSpec> members;
        members.emplace(0.5, DriverSpec::entropic(1.0, [](double) { return 0.1; }));
        members.emplace(1.0, DriverSpec::entropic(2.0, [](double s) { return 0.2 * s; }));
        const auto family = DriverSpec::family(std::move(members));
        const auto& g_short = family.member(0.5);
        const auto& g_long = family.member(1.0);
        const auto sol_long = tree_solve(tree, family, claim, 1.0);
        const auto sol_short = tree_solve(tree, family, claim, 0.5);
        const TreeMeasure q =
            build_premium_measure(tree, family, sol_long, sol_short, 0.0, 0.5, 1.0);

        // difference quotient of the horizon-u member: (b/2)(z_long + z_short)
        const double zl = sol_long.z_at(2, 1), zs = sol_short.z_at(2, 1);
        REQUIRE(std::abs(zl - zs) > 1e-9);
        CHECK(q.q(2, 1) == doctest::Approx(zl + zs).epsilon(1e-10));

        // gamma = E_Q[ sum_{[s,t)} (g_u - g_t)(v, z_short) dt
        //              + sum_{[t,u)} g_u(v, 0) dt ], checked by enumeration
        const double gamma = sol_long.root() - sol_short.root();
        const std::size_t n = 8;
        double acc = 0.0;
        for (std::size_t bits = 0; bits < (std::size_t{1} << n); ++bits) {
            double density = 1.0, cost = 0.0;
            std::size_t node = 0;
            for (std::size_t k = 0; k < n; ++k) {
                const bool up = (bits >> k) & 1;
                const double v = tree.grid().time(k);
                if (k < 4) {
                    const double z[] = {sol_short.z_at(k, node)};
                    cost += (g_long(v, v, 0.0, z) - g_short(v, v, 0.0, z)) * tree.dt();
                } else {
                    cost += g_long.zero_section(v, v) * tree.dt();
                }
                density *= 1.0 + q.q(k, node) * (up ? tree.sqrt_dt() : -tree.sqrt_dt());
                node += up ? 1 : 0;
            }
            acc += density * cost;
        }
        acc /= static_cast<double>(std::size_t{1} << n);
        CHECK(std::abs(gamma - acc) <= 1e-10);
    }

    SUBCASE("y-dependent drivers are rejected") {
        const auto driver = DriverSpec::constant(0.1);
        const auto sol_long = tree_solve(tree, driver, claim, 1.0);
        const auto sol_short = tree_solve(tree, driver, claim, 0.5);
        DriverSpec::CustomOptions options;
        options.supports_y = true;
        const auto with_y = DriverSpec::custom(
            [](double, double, double y, std::span<const double>) { return 0.1 * y; },
            options);
        CHECK_THROWS_AS(
            build_premium_measure(tree, with_y, sol_long, sol_short, 0.0, 0.5, 1.0),
            std::invalid_argument);
    }
}
