#pragma once

#include <cstddef>
#include <vector>

#include "fdrm/driver.hpp"
#include "fdrm/tree.hpp"
#include "fdrm/tree_measure.hpp"

namespace fdrm {

/// Kernel of the premium measure attached to the horizon gap
/// gamma(s,t,u,X) = rho_{su}(X) - rho_{st}(X) for X measurable at t:
/// the sequential difference quotient of the driver between the Z profile
/// of the horizon-u solution and the Z profile of the horizon-t solution
/// extended by zero on (t, u]. Coordinates whose Z difference is below
/// 1e-12 contribute kernel 0. Under this measure
/// gamma = E_Q[ sum g(v, 0) dt | F_s ].
///
/// Requires a driver without y-dependence; Volterra drivers freeze the
/// first argument at s. Throws numerical_error if the resulting kernel
/// violates the one-step positivity bound.
TreeMeasure build_premium_measure(const TreeModel& tree, const DriverSpec& driver,
                                  const TreeSolution& sol_long, const TreeSolution& sol_short,
                                  double s, double t, double u);

}  // namespace fdrm
