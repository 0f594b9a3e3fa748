#pragma once

#include <cstddef>
#include <vector>

#include "fdrm/claim.hpp"
#include "fdrm/driver.hpp"
#include "fdrm/tree.hpp"
#include "fdrm/tree_measure.hpp"

namespace fdrm {

struct TreeDualOptions {
    /// One Newton step per node off the best grid point, for conjugates
    /// that are smooth in q. Uses grid-spacing finite differences, which
    /// are exact for quadratic conjugates. The refined point is kept only
    /// when it improves the objective and stays inside the positivity
    /// bound, so the result remains a valid lower bound.
    bool newton_refine = true;
};

struct TreeDualResult {
    std::vector<double> value;    // sup_Q { E_Q[-X | F_s] - alpha_st(Q) } at level-s nodes
    TreeMeasure argmax;           // maximizing kernel, window [s, t)
    std::size_t refined_nodes;    // nodes where the Newton step improved on the grid
};

/// Dynamic-programming evaluation of the dual representation restricted to
/// kernels taking values in q_grid: a guaranteed lower bound for the primal
/// tree solution, with equality whenever the grid contains the nodewise
/// maximizer (always, for singleton-domain conjugates whose atom is in the
/// grid). Ties select the lowest grid index.
TreeDualResult tree_dual_sup(const TreeModel& tree, const DriverSpec& driver,
                             const ClaimSpec& claim, double s, double t,
                             const std::vector<double>& q_grid, TreeDualOptions options = {});

TreeDualResult tree_dual_sup_values(const TreeModel& tree, const DriverSpec& driver,
                                    const std::vector<double>& claim_values,
                                    std::size_t claim_level, std::size_t s_level,
                                    std::size_t t_level, const std::vector<double>& q_grid,
                                    TreeDualOptions options = {});

}  // namespace fdrm
