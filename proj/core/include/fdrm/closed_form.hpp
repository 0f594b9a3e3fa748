#pragma once

#include <optional>

#include "fdrm/claim.hpp"
#include "fdrm/driver.hpp"

namespace fdrm {

/// Exact time-0 value rho_{0,horizon}(X) for the catalog of solvable pairs:
/// {constant, linear, entropic, volterra_linear, volterra_quadratic}
/// drivers against claims of the form X = c0 + w.B_u (u <= horizon).
/// Families resolve the member governing the horizon. Returns nullopt for
/// pairs outside the catalog. Time integrals of the coefficient functions
/// use Simpson quadrature (exact for constants, ~1e-13 relative for smooth
/// coefficients).
///
/// Formulas (evaluated at s = 0, where B_0 = 0):
///   constant a:              -c0 + a (t - 0)
///   linear (b, a):           -c0 - sum_i w_i b_i u + a t    (E_Q[B^i_u] = b_i u)
///   entropic (b, a):         -c0 + (b/2)|w|^2 u + int_0^t a(v) dv
///   volterra_linear (a, b):  -c0 - sum_i w_i int_0^u a_i(0,v) dv + int_0^t b(0,v) dv
///   volterra_quadratic:      -c0 + (b(0)/2)|w|^2 u + int_0^t a(0,v) dv
std::optional<double> closed_form_value(const DriverSpec& driver, const ClaimSpec& claim,
                                        double s, double horizon);

}  // namespace fdrm
