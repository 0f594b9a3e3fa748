#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fdrm/claim.hpp"
#include "fdrm/driver.hpp"
#include "fdrm/mc.hpp"
#include "fdrm/tree.hpp"

namespace fdrm {

/// Checkable properties of a fully-dynamic risk measure rho_{st}.
enum class Property {
    strong_tc,             // rho_st(-rho_tu(X)) = rho_su(X)
    weak_tc,               // rho_su(rho_tu(0) - rho_tu(X)) = rho_su(X)
    order_tc,              // equal tu-risks give equal su-risks (canonical witness)
    sub_tc,                // rho_st(-rho_tu(X)) <= rho_su(X)
    restriction,           // rho_st(X) = rho_su(X) for X measurable at t
    normalization,         // rho_tu(0) = 0
    h_longevity,           // rho_st(X) <= rho_su(X) for X measurable at t
    horizon_comparison,    // ordered data give ordered solutions across horizons
    cocycle,               // alpha_su(Q) = alpha_st(Q) + E_Q[alpha_tu(Q)|F_s]
    weak_cocycle,          // pasted-penalty inequality with the ess-inf correction
    sub_penalty,           // alpha_su(Q) <= alpha_st(Q) + E_Q[alpha_tu(Q)|F_s]
    acceptance_inclusion,  // A_su claims measurable at t lie in A_st
};

const char* property_name(Property property);
std::optional<Property> property_from_name(std::string_view name);

struct Triple {
    double s = 0.0;
    double t = 0.0;
    double u = 0.0;
};

/// Outcome of one property check over a set of triples/claims/measures.
/// verdict == (worst_violation <= tolerance); violations are signed, so a
/// negative worst violation is a margin. Equality properties use absolute
/// residuals, one-sided properties the signed excess of the forbidden side
/// (sub-TC clips the excess at zero).
struct ConsistencyReport {
    Property property = Property::strong_tc;
    std::vector<Triple> triples;
    double worst_violation = -std::numeric_limits<double>::infinity();
    double tolerance = 0.0;
    bool verdict = true;
    std::string backend = "tree";
    std::string detail;  // worst-case witness and any sampled-hypothesis margins
};

/// gamma(s, t, u, X) = rho_su(X) - rho_st(X) for X measurable at t: the
/// price attached to extending the horizon from t to u.
struct GammaPoint {
    double u = 0.0;
    double value_min = 0.0;  // nodewise range at the evaluation level;
    double value_max = 0.0;  // the two coincide when gamma is deterministic
    std::optional<double> closed_form;  // integral of the zero-section over [t, u]
    std::optional<McValue> mc;
};

struct GammaReport {
    double s = 0.0;
    double t = 0.0;
    std::string claim_label;
    std::string backend = "tree";
    std::vector<GammaPoint> points;
    double min_value = 0.0;  // smallest nodewise gamma: the h-longevity margin
};

/// Driver value recovered from short-window risk evaluations,
/// g_hat(s, z) = rho_{s, s+eps}(-z (B_{s+eps} - B_s)) / eps.
struct RecoveryPoint {
    double s = 0.0;
    double z = 0.0;
    double estimate = 0.0;
    double std_error = 0.0;  // 0 on the tree backend
    double exact = 0.0;      // g(s, s, 0, z)
};

struct RecoveryReport {
    std::string backend = "tree";
    double epsilon = 0.0;
    bool richardson = false;
    std::vector<RecoveryPoint> points;
    double max_error = 0.0;
};

/// Time-consistency checks on the lattice. The composition
/// rho_st(-rho_tu(X)) feeds the level-t node values of the inner solve to
/// the outer solve; family drivers resolve the member governing each
/// sub-window's horizon. weak/order use the canonical witness
/// Y = rho_tu(0) - rho_tu(X), which has the same tu-risk as X.
ConsistencyReport check_time_consistency(Property kind, const TreeModel& tree,
                                         const DriverSpec& driver,
                                         const std::vector<ClaimSpec>& claims,
                                         std::span<const Triple> triples, double tolerance);

/// Smoke-check variant on the Monte Carlo backend: the outer claim is the
/// fitted value function of the inner pass, and violations are reported net
/// of se_multiplier times the combined standard error (tolerance 0).
ConsistencyReport check_time_consistency_mc(Property kind, const PathEnsemble& ensemble,
                                            const DriverSpec& driver,
                                            const std::vector<ClaimSpec>& claims, Triple triple,
                                            const McConfig& config, double se_multiplier);

/// restriction: |rho_st(X) - rho_su(X)| over claims measurable at t;
/// normalization: |rho_tu(0)| per pair (claims ignored).
ConsistencyReport check_structure(Property kind, const TreeModel& tree,
                                  const DriverSpec& driver,
                                  const std::vector<ClaimSpec>& claims, double s,
                                  std::span<const std::pair<double, double>> pairs,
                                  double tolerance);

/// rho_st(X) <= rho_su(X) nodewise for claims measurable at t.
ConsistencyReport check_h_longevity(const TreeModel& tree, const DriverSpec& driver,
                                    const std::vector<ClaimSpec>& claims,
                                    std::span<const Triple> triples, double tolerance);

/// gamma over a grid of horizons u >= t at fixed (s, t), claim measurable
/// at t. The closed-form column integrates the zero-section over [t, u]
/// (exact for non-family drivers).
GammaReport gamma_surface(const TreeModel& tree, const DriverSpec& driver,
                          const ClaimSpec& claim, double s, double t,
                          std::span<const double> u_grid);

/// Monte Carlo gamma with common random numbers: both horizons reuse the
/// ensemble, so the difference is estimated far tighter than either value.
GammaReport gamma_surface_mc(const PathEnsemble& ensemble, const DriverSpec& driver,
                             const ClaimSpec& claim, double s, double t,
                             std::span<const double> u_grid, const McConfig& config);

/// Comparison across horizons T1 <= T2 of the backward solutions Y^i with
/// terminal data xi_i at T_i (claims measurable exactly at their horizon).
/// Hypotheses (g2 >= g1 on [0,T1], g2 >= 0 on [T1,T2], xi2 >= xi1 pathwise)
/// are sampled on the lattice and reported in the detail string; the
/// verdict covers the two conclusions Y^2 >= Y^1 on [0,T1] and Y^2 >= xi1
/// on [T1,T2].
ConsistencyReport check_horizon_comparison(const TreeModel& tree, const DriverSpec& driver1,
                                           double horizon1, const ClaimSpec& xi1,
                                           const DriverSpec& driver2, double horizon2,
                                           const ClaimSpec& xi2, double tolerance);

/// Driver recovery from short-window solves on a standalone lattice of
/// step dt: eps = eps_steps * dt. Richardson extrapolates 2 g(eps) - g(2 eps).
/// Families resolve the member governing s + eps.
RecoveryReport recover_driver_tree(const DriverSpec& driver, double dt, std::size_t eps_steps,
                                   std::span<const double> s_grid,
                                   std::span<const double> z_grid, bool richardson);

/// Monte Carlo recovery on fresh per-window ensembles (the window state is
/// the re-based increment, which a full-horizon ensemble cannot regress on).
RecoveryReport recover_driver_mc(const DriverSpec& driver, double dt, std::size_t eps_steps,
                                 std::span<const double> s_grid, std::span<const double> z_grid,
                                 bool richardson, const McConfig& config);

/// Penalty relations over random kernels. Sample 0 is always the reference
/// measure (q = 0); the rest draw nodewise uniform kernels within the
/// positivity bound.
///   cocycle:      |alpha_su(Q) - alpha_st(Q) - E_Q[alpha_tu(Q)|F_s]|
///   sub_penalty:  alpha_su(Q) - alpha_st(Q) - E_Q[alpha_tu(Q)|F_s]  (signed)
///   weak_cocycle: alpha_su(S) - alpha_su(Q) - E_Q[alpha_tu(R) + rho_tu(0)|F_s]
///                 for pastings S of Q on [s,t) and R on [t,u) (signed), plus
///                 the equality |residual| at the dual-argmax scenarios on
///                 q_grid. The ess-inf of alpha_tu equals -rho_tu(0) and is
///                 evaluated exactly from the zero-claim solve; the q-grid
///                 approximation is reported alongside in the detail string.
ConsistencyReport check_penalty_relations(Property kind, const TreeModel& tree,
                                          const DriverSpec& driver,
                                          std::span<const Triple> triples, std::size_t samples,
                                          std::uint64_t seed,
                                          const std::vector<double>& q_grid, double tolerance);

/// Sampled acceptance-set inclusion: claims measurable at t that satisfy
/// rho_su(X) <= 0 nodewise must satisfy rho_st(X) <= 0 nodewise. Each claim
/// is augmented with its boundary shift X + max rho_su(X), which sits on
/// the A_su boundary, so the check is never vacuous.
ConsistencyReport check_acceptance_inclusion(const TreeModel& tree, const DriverSpec& driver,
                                             const std::vector<ClaimSpec>& claims,
                                             std::span<const Triple> triples, double tolerance);

/// Seeded fuzz corpus measurable at u, cycling constants, linear-in-B,
/// calls, and bounded node functions of B_u.
std::vector<ClaimSpec> make_fuzz_claims(double u, std::size_t count, std::uint64_t seed);

/// Verdicts for one fixture, fed to the implication-diagram meta-check.
struct DiagramVerdicts {
    bool strong_tc = false;
    bool weak_tc = false;
    bool order_tc = false;
    bool sub_tc = false;
    bool h_longevity = false;
    double rho_tu_zero = 0.0;  // rho_{tu}(0) (deterministic for the catalog)
};

/// Violated arrows of the implication diagram:
///   strong => weak, strong => order, weak <=> order,
///   weak + h-longevity + rho_tu(0) <= 0 => sub,
///   sub + rho_tu(0) >= 0 => h-longevity.
/// Returns human-readable descriptions; empty means consistent.
std::vector<std::string> implication_violations(const DiagramVerdicts& verdicts,
                                                double tolerance);

}  // namespace fdrm
