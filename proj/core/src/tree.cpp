#include "fdrm/tree.hpp"

#include <cmath>
#include <stdexcept>

#include "fdrm/errors.hpp"

namespace fdrm {

namespace {

// One frozen-argument backward pass from horizon_level down to stop_level.
// Levels in (claim_level, horizon_level] collapse pointwise in the
// claim-layer node: the conditional expectation of an F_{t_c}-measurable
// value is itself, so Z vanishes there and only the zero-section
// accumulates. y[k - stop], z[k - stop] index the result.
struct Pass {
    std::vector<std::vector<double>> y;
    std::vector<std::vector<double>> z;
};

Pass backward_pass(const TreeModel& tree, const DriverSpec& driver,
                   std::optional<double> frozen, const std::vector<double>& claim_values,
                   std::size_t claim_level, std::size_t horizon_level, std::size_t stop_level) {
    const TimeGrid& grid = tree.grid();
    const double dt = tree.dt();
    const double sq = tree.sqrt_dt();

    std::vector<double> w(claim_values.size());
    for (std::size_t j = 0; j < w.size(); ++j)
        w[j] = zero_z_flow(driver, grid, horizon_level, claim_level, frozen, -claim_values[j]);

    Pass out;
    out.y.resize(claim_level - stop_level + 1);
    out.z.resize(claim_level - stop_level);
    out.y[claim_level - stop_level] = std::move(w);
    for (std::size_t k = claim_level; k-- > stop_level;) {
        const std::vector<double>& next = out.y[k + 1 - stop_level];
        std::vector<double>& cur = out.y[k - stop_level];
        std::vector<double>& zk = out.z[k - stop_level];
        cur.resize(k + 1);
        zk.resize(k + 1);
        const double tk = grid.time(k);
        const double tf = frozen.value_or(tk);
        for (std::size_t j = 0; j <= k; ++j) {
            const double up = next[j + 1];
            const double dn = next[j];
            const double zval = (up - dn) / (2.0 * sq);
            const double yhat = 0.5 * (up + dn);
            const double zz[1] = {zval};
            cur[j] = yhat + driver(tf, tk, yhat, std::span<const double>(zz, 1)) * dt;
            zk[j] = zval;
        }
    }
    return out;
}

}  // namespace

double zero_z_flow(const DriverSpec& driver, const TimeGrid& grid, std::size_t from_level,
                   std::size_t to_level, std::optional<double> frozen, double y) {
    if (to_level > from_level)
        throw std::invalid_argument("zero_z_flow: requires to_level <= from_level");
    const double zero[1] = {0.0};
    const std::span<const double> zero_span(zero, 1);
    for (std::size_t m = from_level; m-- > to_level;) {
        const double tm = grid.time(m);
        y += driver(frozen.value_or(tm), tm, y, zero_span) * grid.dt(m);
    }
    return y;
}

TreeModel::TreeModel(TimeGrid grid) : grid_(std::move(grid)) {
    if (!grid_.is_uniform())
        throw std::invalid_argument("TreeModel: binomial lattice requires a uniform grid");
    dt_ = grid_.dt(0);
    sqrt_dt_ = std::sqrt(dt_);
}

std::vector<double> tree_claim_layer(const TreeModel& tree, const ClaimSpec& claim) {
    const TimeGrid& grid = tree.grid();
    const std::size_t k = grid.index_of(claim.u());
    const double sq = tree.sqrt_dt();
    std::span<const double> times(grid.times().data(), k + 1);

    std::vector<double> values(k + 1);
    std::vector<double> ups_first(k + 1);
    std::vector<double> downs_first(k + 1);
    for (std::size_t j = 0; j <= k; ++j) {
        for (std::size_t i = 0; i <= k; ++i) {
            const double di = static_cast<double>(i);
            ups_first[i] = (i <= j ? di : 2.0 * static_cast<double>(j) - di) * sq;
            const std::size_t downs = k - j;
            downs_first[i] = (i <= downs ? -di : di - 2.0 * static_cast<double>(downs)) * sq;
        }
        const double v1 = claim.evaluate(PathView(times, ups_first, 1));
        const double v2 = claim.evaluate(PathView(times, downs_first, 1));
        if (std::abs(v1 - v2) > 1e-10 * (1.0 + std::abs(v1)))
            throw std::invalid_argument(
                "tree_claim_layer: payoff depends on the order of increments; "
                "path-dependent claims belong to the MC backend");
        values[j] = v1;
    }
    return values;
}

TreeSolution tree_solve_values(const TreeModel& tree, const DriverSpec& driver,
                               std::vector<double> claim_values, std::size_t claim_level,
                               std::size_t horizon_level) {
    if (horizon_level >= tree.levels())
        throw std::invalid_argument("tree_solve: horizon beyond the grid");
    if (claim_level > horizon_level)
        throw std::invalid_argument("tree_solve: claim measurable after the horizon");
    if (claim_values.size() != claim_level + 1)
        throw std::invalid_argument("tree_solve: claim layer has wrong size");
    const DriverSpec& d = driver.resolve(tree.grid().time(horizon_level));
    if (d.dim() != 1)
        throw std::invalid_argument("tree_solve: the binomial lattice is one-dimensional");

    TreeSolution sol;
    sol.claim_level = claim_level;
    sol.horizon_level = horizon_level;
    sol.terminal.resize(claim_values.size());
    for (std::size_t j = 0; j < claim_values.size(); ++j) sol.terminal[j] = -claim_values[j];

    if (!d.is_volterra()) {
        Pass pass = backward_pass(tree, d, std::nullopt, claim_values, claim_level,
                                  horizon_level, 0);
        sol.y = std::move(pass.y);
        sol.z = std::move(pass.z);
        return sol;
    }

    // Volterra: one frozen pass per evaluation level; keep the diagonal.
    sol.y.resize(claim_level + 1);
    sol.z.resize(claim_level);
    for (std::size_t i = 0; i <= claim_level; ++i) {
        Pass pass = backward_pass(tree, d, tree.grid().time(i), claim_values, claim_level,
                                  horizon_level, i);
        sol.y[i] = std::move(pass.y.front());
        if (i < claim_level) sol.z[i] = std::move(pass.z.front());
    }
    return sol;
}

TreeSolution tree_solve(const TreeModel& tree, const DriverSpec& driver, const ClaimSpec& claim,
                        double horizon) {
    const std::size_t claim_level = tree.grid().index_of(claim.u());
    const std::size_t horizon_level = tree.grid().index_of(horizon);
    return tree_solve_values(tree, driver, tree_claim_layer(tree, claim), claim_level,
                             horizon_level);
}

TreeSolution tree_solve_frozen(const TreeModel& tree, const DriverSpec& driver,
                               std::vector<double> claim_values, std::size_t claim_level,
                               std::size_t horizon_level, std::size_t eval_level) {
    if (eval_level > claim_level)
        throw std::invalid_argument("tree_solve_frozen: eval level beyond the claim level");
    const DriverSpec& d = driver.resolve(tree.grid().time(horizon_level));
    TreeSolution sol;
    sol.claim_level = claim_level;
    sol.horizon_level = horizon_level;
    sol.terminal.resize(claim_values.size());
    for (std::size_t j = 0; j < claim_values.size(); ++j) sol.terminal[j] = -claim_values[j];
    Pass pass = backward_pass(tree, d, tree.grid().time(eval_level), claim_values, claim_level,
                              horizon_level, eval_level);
    // Levels below eval_level are not part of the frozen pass; pad so that
    // y[k] keeps its level indexing.
    sol.y.assign(eval_level, {});
    sol.z.assign(eval_level, {});
    for (auto& row : pass.y) sol.y.push_back(std::move(row));
    for (auto& row : pass.z) sol.z.push_back(std::move(row));
    return sol;
}

}  // namespace fdrm
