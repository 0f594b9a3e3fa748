#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "fdrm/claim.hpp"
#include "fdrm/driver.hpp"
#include "fdrm/time_grid.hpp"

namespace fdrm {

/// Recombining binomial lattice for a one-dimensional Brownian motion:
/// each step moves by +-sqrt(dt) with probability 1/2, so level k holds
/// k+1 nodes and node (k, j) carries B = (2j - k) sqrt(dt).
///
/// Requires a uniform grid (a lattice recombines only for constant dt).
class TreeModel {
public:
    explicit TreeModel(TimeGrid grid);

    const TimeGrid& grid() const { return grid_; }
    std::size_t levels() const { return grid_.steps() + 1; }
    std::size_t nodes(std::size_t level) const { return level + 1; }
    double dt() const { return dt_; }
    double sqrt_dt() const { return sqrt_dt_; }
    double brownian(std::size_t level, std::size_t node) const {
        return (2.0 * static_cast<double>(node) - static_cast<double>(level)) * sqrt_dt_;
    }

private:
    TimeGrid grid_;
    double dt_;
    double sqrt_dt_;
};

/// Backward solution of the explicit scheme
///   Y(k) = E_P[Y(k+1) | node] + g(t_k, Z(k)) dt,
///   Z(k, j) = (Y(k+1, j+1) - Y(k+1, j)) / (2 sqrt(dt)),
/// with terminal layer -X. y[k][j] = rho_{t_k, horizon}(X) at node (k, j).
///
/// When the claim is measurable strictly before the horizon the levels in
/// between collapse exactly (Z = 0 there because driver zero-sections are
/// deterministic), so node values are stored only up to claim_level; z is
/// identically zero on [claim_level, horizon_level).
struct TreeSolution {
    std::size_t claim_level = 0;
    std::size_t horizon_level = 0;
    std::vector<std::vector<double>> y;  // y[k], k <= claim_level
    std::vector<std::vector<double>> z;  // z[k], k <  claim_level
    std::vector<double> terminal;        // -X at claim_level, before the tail collapse

    double root() const { return y.front().front(); }
    double z_at(std::size_t level, std::size_t node) const {
        return level < claim_level ? z[level][node] : 0.0;
    }
};

/// Claim values X(node) at level index(claim.u). Each node is evaluated on
/// a representative path; payoffs that depend on the order of increments
/// (not just the terminal node value) are rejected.
std::vector<double> tree_claim_layer(const TreeModel& tree, const ClaimSpec& claim);

/// Backward flow y <- y + g(frozen | t_m, t_m, y, 0) dt over the levels
/// m in [to_level, from_level), applied from the top down. This is the
/// exact solution across levels where Z vanishes, which is the case
/// whenever the value is measurable at to_level already (the drivers'
/// zero-sections are deterministic).
double zero_z_flow(const DriverSpec& driver, const TimeGrid& grid, std::size_t from_level,
                   std::size_t to_level, std::optional<double> frozen, double y);

/// rho_{., horizon}(X) for every evaluation level. Families resolve the
/// member governing `horizon`; Volterra drivers run one frozen-argument
/// backward pass per evaluation level and assemble the diagonal.
TreeSolution tree_solve(const TreeModel& tree, const DriverSpec& driver, const ClaimSpec& claim,
                        double horizon);

/// As tree_solve but the claim is given as node values X at claim_level.
TreeSolution tree_solve_values(const TreeModel& tree, const DriverSpec& driver,
                               std::vector<double> claim_values, std::size_t claim_level,
                               std::size_t horizon_level);

/// Single backward pass with the Volterra first argument frozen at
/// t_{eval_level}: the parameterized BSDE eta(.; t_eval) whose value at
/// eval_level is rho_{t_eval, horizon}(X).
TreeSolution tree_solve_frozen(const TreeModel& tree, const DriverSpec& driver,
                               std::vector<double> claim_values, std::size_t claim_level,
                               std::size_t horizon_level, std::size_t eval_level);

}  // namespace fdrm
