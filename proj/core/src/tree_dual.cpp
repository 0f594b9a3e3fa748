#include "fdrm/tree_dual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fdrm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPositivityMargin = 1e-9;

struct Candidate {
    double q = 0.0;
    double objective = -kInf;
    bool refined = false;
};

// phi(q) = q * drift - g*(t, s, q) * dt, maximized over the feasible grid;
// ties keep the lowest index. A single Newton step from the best grid point
// (grid-spacing central differences, exact for quadratic conjugates) is
// attempted for smooth conjugates.
Candidate maximize(const DriverSpec& d, double frozen_t, double running_t, double drift,
                   double dt, const std::vector<double>& q_grid, double q_bound,
                   bool newton) {
    const auto phi = [&](double q) {
        const double qq[1] = {q};
        const ConjugateValue conj = d.conjugate(frozen_t, running_t, std::span<const double>(qq, 1));
        if (!conj.in_domain) return -kInf;
        return q * drift - conj.value * dt;
    };

    Candidate best;
    std::size_t best_index = q_grid.size();
    for (std::size_t i = 0; i < q_grid.size(); ++i) {
        const double q = q_grid[i];
        if (std::abs(q) > q_bound) continue;
        const double value = phi(q);
        if (best_index == q_grid.size() || value > best.objective) {
            best = {q, value, false};
            best_index = i;
        }
    }
    if (best_index == q_grid.size())
        throw std::invalid_argument("tree_dual_sup: no feasible q-grid point (positivity)");

    if (newton && d.has_smooth_conjugate() && std::isfinite(best.objective)) {
        double h = q_grid.size() > 1 ? std::abs(q_grid[1] - q_grid[0]) : 0.1;
        h = std::min(h, 0.5 * q_bound);
        if (h > 0.0) {
            const double fp = phi(best.q + h);
            const double fm = phi(best.q - h);
            if (std::isfinite(fp) && std::isfinite(fm)) {
                const double d1 = (fp - fm) / (2.0 * h);
                const double d2 = (fp - 2.0 * best.objective + fm) / (h * h);
                if (d2 < -1e-300) {
                    double q_new = best.q - d1 / d2;
                    q_new = std::clamp(q_new, -q_bound, q_bound);
                    const double value = phi(q_new);
                    if (value > best.objective) best = {q_new, value, true};
                }
            }
        }
    }
    return best;
}

}  // namespace

TreeDualResult tree_dual_sup_values(const TreeModel& tree, const DriverSpec& driver,
                                    const std::vector<double>& claim_values,
                                    std::size_t claim_level, std::size_t s_level,
                                    std::size_t t_level, const std::vector<double>& q_grid,
                                    TreeDualOptions options) {
    if (s_level > claim_level || claim_level > t_level)
        throw std::invalid_argument("tree_dual_sup: requires s <= claim.u <= t on the grid");
    if (claim_values.size() != tree.nodes(claim_level))
        throw std::invalid_argument("tree_dual_sup: claim layer has wrong size");
    if (q_grid.empty()) throw std::invalid_argument("tree_dual_sup: empty q-grid");
    const TimeGrid& grid = tree.grid();
    const DriverSpec& d = driver.resolve(grid.time(t_level));
    if (d.dim() != 1) throw std::invalid_argument("tree_dual_sup: lattice is one-dimensional");
    const double dt = tree.dt();
    const double sq = tree.sqrt_dt();
    const double q_bound = (1.0 - kPositivityMargin) / sq;
    const double s_time = grid.time(s_level);

    std::vector<std::vector<double>> kernel(t_level - s_level);
    std::size_t refined = 0;

    std::vector<double> value(claim_values.size());
    for (std::size_t j = 0; j < value.size(); ++j) value[j] = -claim_values[j];

    // Collapsed tail [claim_level, t): the value function is measurable, so
    // the per-node choice reduces to max_q(-g*) independent of the node.
    for (std::size_t m = t_level; m-- > claim_level;) {
        const double tm = grid.time(m);
        const Candidate c = maximize(d, d.is_volterra() ? s_time : tm, tm, 0.0, dt, q_grid,
                                     q_bound, options.newton_refine);
        for (double& v : value)
            v = std::isfinite(v) && std::isfinite(c.objective) ? v + c.objective : -kInf;
        if (m >= s_level) {
            kernel[m - s_level].assign(tree.nodes(m), c.q);
            if (c.refined) refined += tree.nodes(m);
        }
    }

    for (std::size_t k = claim_level; k-- > s_level;) {
        const double tk = grid.time(k);
        const double frozen = d.is_volterra() ? s_time : tk;
        std::vector<double> next(tree.nodes(k));
        kernel[k - s_level].resize(tree.nodes(k));
        for (std::size_t j = 0; j <= k; ++j) {
            const double up = value[j + 1];
            const double dn = value[j];
            if (!std::isfinite(up) || !std::isfinite(dn)) {
                next[j] = -kInf;
                kernel[k - s_level][j] = 0.0;
                continue;
            }
            const double mean = 0.5 * (up + dn);
            const double drift = 0.5 * (up - dn) * sq;  // phi(q) = mean + q*drift - g* dt
            const Candidate c =
                maximize(d, frozen, tk, drift, dt, q_grid, q_bound, options.newton_refine);
            next[j] = std::isfinite(c.objective) ? mean + c.objective : -kInf;
            kernel[k - s_level][j] = c.q;
            if (c.refined) ++refined;
        }
        value = std::move(next);
    }

    return {std::move(value), TreeMeasure(tree, s_level, t_level, std::move(kernel)), refined};
}

TreeDualResult tree_dual_sup(const TreeModel& tree, const DriverSpec& driver,
                             const ClaimSpec& claim, double s, double t,
                             const std::vector<double>& q_grid, TreeDualOptions options) {
    const std::size_t claim_level = tree.grid().index_of(claim.u());
    return tree_dual_sup_values(tree, driver, tree_claim_layer(tree, claim), claim_level,
                                tree.grid().index_of(s), tree.grid().index_of(t), q_grid,
                                options);
}

}  // namespace fdrm
