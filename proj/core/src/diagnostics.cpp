#include "fdrm/diagnostics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <memory>
#include <random>
#include <stdexcept>

#include "fdrm/errors.hpp"
#include "fdrm/quadrature.hpp"
#include "fdrm/tree_dual.hpp"
#include "fdrm/tree_measure.hpp"

namespace fdrm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

std::string triple_str(const Triple& tr) {
    return "(s,t,u)=(" + fmt(tr.s) + "," + fmt(tr.t) + "," + fmt(tr.u) + ")";
}

struct Levels {
    std::size_t s, t, u;
};

Levels levels_of(const TimeGrid& grid, const Triple& tr) {
    Levels lv{grid.index_of(tr.s), grid.index_of(tr.t), grid.index_of(tr.u)};
    if (lv.s > lv.t || lv.t > lv.u)
        throw std::invalid_argument("diagnostics: triple must satisfy s <= t <= u");
    return lv;
}

/// rho_{t_eval, t_horizon}(X) as node values at level min(eval_level,
/// claim_level). Above the claim level the position is measurable already
/// and the exact zero-Z flow applies; below it a backward solve runs, with
/// the Volterra first argument frozen at the evaluation time.
std::vector<double> rho_layer(const TreeModel& tree, const DriverSpec& driver,
                              std::vector<double> claim_values, std::size_t claim_level,
                              std::size_t eval_level, std::size_t horizon_level) {
    const DriverSpec& member = driver.resolve(tree.grid().time(horizon_level));
    if (eval_level >= claim_level) {
        std::optional<double> frozen;
        if (member.is_volterra()) frozen = tree.grid().time(eval_level);
        for (double& v : claim_values)
            v = zero_z_flow(member, tree.grid(), horizon_level, eval_level, frozen, -v);
        return claim_values;
    }
    TreeSolution sol = member.is_volterra()
                           ? tree_solve_frozen(tree, member, std::move(claim_values),
                                               claim_level, horizon_level, eval_level)
                           : tree_solve_values(tree, member, std::move(claim_values),
                                               claim_level, horizon_level);
    return std::move(sol.y[eval_level]);
}

/// rho_{t,u}(0): deterministic because driver zero-sections are.
double rho_zero(const TreeModel& tree, const DriverSpec& driver, std::size_t t_level,
                std::size_t u_level) {
    return rho_layer(tree, driver, {0.0}, 0, t_level, u_level).front();
}

bool is_tc_property(Property kind) {
    return kind == Property::strong_tc || kind == Property::weak_tc ||
           kind == Property::order_tc || kind == Property::sub_tc;
}

/// The driver to run over a window [s, horizon] of a recovery experiment,
/// in window coordinates v' = v - s. The Volterra first argument is baked
/// in as the window's evaluation time s, so the window solve itself is a
/// plain BSDE.
DriverSpec shifted_window_driver(const DriverSpec& member, double s) {
    DriverSpec::CustomOptions options;
    options.dim = member.dim();
    options.supports_y = member.supports_y();
    options.volterra = false;
    options.lipschitz = member.lipschitz_in_z();
    options.label = member.label() + "|window@" + fmt(s);
    const bool volterra = member.is_volterra();
    DriverSpec base = member;
    return DriverSpec::custom(
        [base, s, volterra](double, double v, double y, std::span<const double> z) {
            return base(volterra ? s : s + v, s + v, y, z);
        },
        std::move(options));
}

/// Signed nodewise residuals at level s of
///   alpha_su(S) - alpha_su(Q) - E_Q[alpha_tu(R) + rho_tu(0) | F_s]
/// for the pasting S of Q on [s,t) and R on [t,u). Infinite penalties are
/// absorbing: both sides infinite counts as residual 0 (and is tallied),
/// an infinite left side alone is +infinity, an infinite right side alone
/// is -infinity (the inequality holds with infinite margin).
std::vector<double> weak_cocycle_residuals(const TreeModel& tree, const DriverSpec& driver,
                                           const Triple& tr, const Levels& lv,
                                           const TreeMeasure& q_full, const TreeMeasure& r_tail,
                                           double rho_tu_zero, std::size_t& absorbing) {
    TreeMeasure pasted =
        TreeMeasure::paste(tree, q_full.restrict(tree, lv.s, lv.t), r_tail);
    std::vector<double> lhs = tree_penalty(tree, driver, pasted, tr.s, tr.u);
    std::vector<double> a_q = tree_penalty(tree, driver, q_full, tr.s, tr.u);
    std::vector<double> a_r = tree_penalty(tree, driver, r_tail, tr.t, tr.u);
    for (double& v : a_r) v += rho_tu_zero;
    std::vector<double> tail = tree_expectation(tree, &q_full, std::move(a_r), lv.t, lv.s);
    std::vector<double> res(lhs.size());
    for (std::size_t j = 0; j < lhs.size(); ++j) {
        const double rhs = a_q[j] + tail[j];
        if (std::isinf(lhs[j]) && std::isinf(rhs)) {
            ++absorbing;
            res[j] = 0.0;
        } else if (std::isinf(lhs[j])) {
            res[j] = kInf;
        } else if (std::isinf(rhs)) {
            res[j] = -kInf;
        } else {
            res[j] = lhs[j] - rhs;
        }
    }
    return res;
}

}  // namespace

const char* property_name(Property property) {
    switch (property) {
        case Property::strong_tc: return "strong_tc";
        case Property::weak_tc: return "weak_tc";
        case Property::order_tc: return "order_tc";
        case Property::sub_tc: return "sub_tc";
        case Property::restriction: return "restriction";
        case Property::normalization: return "normalization";
        case Property::h_longevity: return "h_longevity";
        case Property::horizon_comparison: return "horizon_comparison";
        case Property::cocycle: return "cocycle";
        case Property::weak_cocycle: return "weak_cocycle";
        case Property::sub_penalty: return "sub_penalty";
        case Property::acceptance_inclusion: return "acceptance_inclusion";
    }
    throw std::invalid_argument("unknown property");
}

std::optional<Property> property_from_name(std::string_view name) {
    static constexpr Property all[] = {
        Property::strong_tc,  Property::weak_tc,      Property::order_tc,
        Property::sub_tc,     Property::restriction,  Property::normalization,
        Property::h_longevity, Property::horizon_comparison, Property::cocycle,
        Property::weak_cocycle, Property::sub_penalty, Property::acceptance_inclusion,
    };
    for (Property p : all)
        if (name == property_name(p)) return p;
    return std::nullopt;
}

ConsistencyReport check_time_consistency(Property kind, const TreeModel& tree,
                                         const DriverSpec& driver,
                                         const std::vector<ClaimSpec>& claims,
                                         std::span<const Triple> triples, double tolerance) {
    if (!is_tc_property(kind))
        throw std::invalid_argument("check_time_consistency: not a time-consistency property");
    if (claims.empty()) throw std::invalid_argument("check_time_consistency: no claims");
    if (triples.empty()) throw std::invalid_argument("check_time_consistency: no triples");

    ConsistencyReport report;
    report.property = kind;
    report.tolerance = tolerance;
    report.triples.assign(triples.begin(), triples.end());

    std::string worst_witness;
    for (const Triple& tr : triples) {
        const Levels lv = levels_of(tree.grid(), tr);
        for (const ClaimSpec& claim : claims) {
            const std::size_t cl = tree.grid().index_of(claim.u());
            if (cl > lv.u)
                throw std::invalid_argument("check_time_consistency: claim measurable after u");
            std::vector<double> values = tree_claim_layer(tree, claim);
            std::vector<double> direct = rho_layer(tree, driver, values, cl, lv.s, lv.u);
            std::vector<double> inner =
                rho_layer(tree, driver, std::move(values), cl, lv.t, lv.u);
            const std::size_t inner_level = std::min(lv.t, cl);

            std::vector<double> composed;
            if (kind == Property::strong_tc || kind == Property::sub_tc) {
                for (double& v : inner) v = -v;
                composed = rho_layer(tree, driver, std::move(inner), inner_level, lv.s, lv.t);
            } else {
                const double r0 = rho_zero(tree, driver, lv.t, lv.u);
                for (double& v : inner) v = r0 - v;
                composed = rho_layer(tree, driver, std::move(inner), inner_level, lv.s, lv.u);
            }

            double local = -kInf;
            for (std::size_t j = 0; j < direct.size(); ++j) {
                const double res = kind == Property::sub_tc
                                       ? composed[j] - direct[j]
                                       : std::fabs(composed[j] - direct[j]);
                local = std::max(local, res);
            }
            if (local > report.worst_violation) {
                report.worst_violation = local;
                worst_witness = "worst: " + claim.label() + " at " + triple_str(tr);
            }
        }
    }
    if (kind == Property::sub_tc)
        report.worst_violation = std::max(report.worst_violation, 0.0);
    report.verdict = report.worst_violation <= tolerance;
    report.detail = worst_witness;
    if (kind == Property::order_tc)
        report.detail += "; checked through the canonical witness rho_tu(0) - rho_tu(X)";
    return report;
}

ConsistencyReport check_time_consistency_mc(Property kind, const PathEnsemble& ensemble,
                                            const DriverSpec& driver,
                                            const std::vector<ClaimSpec>& claims, Triple triple,
                                            const McConfig& config, double se_multiplier) {
    if (!is_tc_property(kind))
        throw std::invalid_argument("check_time_consistency_mc: not a time-consistency property");
    if (claims.empty()) throw std::invalid_argument("check_time_consistency_mc: no claims");

    const TimeGrid& grid = ensemble.grid();
    const Levels lv = levels_of(grid, triple);
    const DriverSpec member_u = driver.resolve(triple.u);
    std::optional<double> frozen_t;
    if (member_u.is_volterra()) frozen_t = triple.t;

    ConsistencyReport report;
    report.property = kind;
    report.tolerance = 0.0;
    report.triples = {triple};
    report.backend = "mc";

    std::string worst_witness;
    for (const ClaimSpec& claim : claims) {
        const std::size_t cl = grid.index_of(claim.u());
        if (cl > lv.u)
            throw std::invalid_argument("check_time_consistency_mc: claim measurable after u");
        const McValue direct = mc_solve_bsvie(ensemble, driver, claim, triple.s, triple.u, config);

        // rho_{t,u}(X) as a payoff measurable at t: exact zero-Z flow when X
        // is measurable at t already, otherwise the fitted value function of
        // a backward pass over [t, u].
        PayoffFn inner_payoff;
        if (cl <= lv.t) {
            inner_payoff = [member_u, grid, lv, frozen_t, claim](const PathView& path) {
                return zero_z_flow(member_u, grid, lv.u, lv.t, frozen_t,
                                   -claim.evaluate(path));
            };
        } else {
            auto pass = std::make_shared<const McBackward>(
                mc_backward(ensemble, driver, claim, triple.t, triple.u, config));
            const std::size_t dim = ensemble.dim();
            const double t = triple.t;
            const std::size_t k_t = lv.t;
            inner_payoff = [pass, dim, t, k_t](const PathView& path) {
                std::vector<double> state(dim);
                const std::size_t i = path.index_of(t);
                for (std::size_t c = 0; c < dim; ++c) state[c] = path.value(i, c);
                return pass->value_fn(k_t, state);
            };
        }

        McValue composed;
        if (kind == Property::strong_tc || kind == Property::sub_tc) {
            ClaimSpec outer([inner_payoff](const PathView& path) { return -inner_payoff(path); },
                            triple.t, claim.label() + "|composed");
            composed = mc_solve_bsvie(ensemble, driver, outer, triple.s, triple.t, config);
        } else {
            const double r0 = zero_z_flow(member_u, grid, lv.u, lv.t, frozen_t, 0.0);
            ClaimSpec witness(
                [inner_payoff, r0](const PathView& path) { return r0 - inner_payoff(path); },
                triple.t, claim.label() + "|witness");
            composed = mc_solve_bsvie(ensemble, driver, witness, triple.s, triple.u, config);
        }

        const double se =
            std::sqrt(direct.std_error * direct.std_error +
                      composed.std_error * composed.std_error);
        const double res = kind == Property::sub_tc
                               ? composed.value - direct.value
                               : std::fabs(composed.value - direct.value);
        const double net = res - se_multiplier * se;
        if (net > report.worst_violation) {
            report.worst_violation = net;
            worst_witness = "worst: " + claim.label() + " (residual " + fmt(res) + ", se " +
                            fmt(se) + ")";
        }
    }
    if (kind == Property::sub_tc)
        report.worst_violation = std::max(report.worst_violation, 0.0);
    report.verdict = report.worst_violation <= report.tolerance;
    report.detail =
        worst_witness + "; residuals net of " + fmt(se_multiplier) + " standard errors";
    return report;
}

ConsistencyReport check_structure(Property kind, const TreeModel& tree,
                                  const DriverSpec& driver,
                                  const std::vector<ClaimSpec>& claims, double s,
                                  std::span<const std::pair<double, double>> pairs,
                                  double tolerance) {
    if (kind != Property::restriction && kind != Property::normalization)
        throw std::invalid_argument("check_structure: property must be restriction or "
                                    "normalization");
    if (pairs.empty()) throw std::invalid_argument("check_structure: no (t, u) pairs");
    if (kind == Property::restriction && claims.empty())
        throw std::invalid_argument("check_structure: restriction needs claims");

    const TimeGrid& grid = tree.grid();
    const std::size_t k_s = grid.index_of(s);

    ConsistencyReport report;
    report.property = kind;
    report.tolerance = tolerance;

    std::string worst_witness;
    for (const auto& [t, u] : pairs) {
        const std::size_t k_t = grid.index_of(t);
        const std::size_t k_u = grid.index_of(u);
        if (k_s > k_t || k_t > k_u)
            throw std::invalid_argument("check_structure: pair must satisfy s <= t <= u");
        report.triples.push_back({s, t, u});

        if (kind == Property::normalization) {
            const double r0 = rho_zero(tree, driver, k_t, k_u);
            if (std::fabs(r0) > report.worst_violation) {
                report.worst_violation = std::fabs(r0);
                worst_witness = "worst: rho(0) = " + fmt(r0) + " at (t,u)=(" + fmt(t) + "," +
                                fmt(u) + ")";
            }
            continue;
        }
        for (const ClaimSpec& claim : claims) {
            const std::size_t cl = grid.index_of(claim.u());
            if (cl > k_t)
                throw std::invalid_argument(
                    "check_structure: restriction claims must be measurable at t");
            std::vector<double> values = tree_claim_layer(tree, claim);
            std::vector<double> shorter = rho_layer(tree, driver, values, cl, k_s, k_t);
            std::vector<double> longer =
                rho_layer(tree, driver, std::move(values), cl, k_s, k_u);
            double local = -kInf;
            for (std::size_t j = 0; j < shorter.size(); ++j)
                local = std::max(local, std::fabs(longer[j] - shorter[j]));
            if (local > report.worst_violation) {
                report.worst_violation = local;
                worst_witness = "worst: " + claim.label() + " at (t,u)=(" + fmt(t) + "," +
                                fmt(u) + ")";
            }
        }
    }
    report.verdict = report.worst_violation <= tolerance;
    report.detail = worst_witness;
    return report;
}

ConsistencyReport check_h_longevity(const TreeModel& tree, const DriverSpec& driver,
                                    const std::vector<ClaimSpec>& claims,
                                    std::span<const Triple> triples, double tolerance) {
    if (claims.empty()) throw std::invalid_argument("check_h_longevity: no claims");
    if (triples.empty()) throw std::invalid_argument("check_h_longevity: no triples");

    ConsistencyReport report;
    report.property = Property::h_longevity;
    report.tolerance = tolerance;
    report.triples.assign(triples.begin(), triples.end());

    std::string worst_witness;
    for (const Triple& tr : triples) {
        const Levels lv = levels_of(tree.grid(), tr);
        for (const ClaimSpec& claim : claims) {
            const std::size_t cl = tree.grid().index_of(claim.u());
            if (cl > lv.t)
                throw std::invalid_argument(
                    "check_h_longevity: claims must be measurable at t");
            std::vector<double> values = tree_claim_layer(tree, claim);
            std::vector<double> shorter = rho_layer(tree, driver, values, cl, lv.s, lv.t);
            std::vector<double> longer =
                rho_layer(tree, driver, std::move(values), cl, lv.s, lv.u);
            double local = -kInf;
            for (std::size_t j = 0; j < shorter.size(); ++j)
                local = std::max(local, shorter[j] - longer[j]);
            if (local > report.worst_violation) {
                report.worst_violation = local;
                worst_witness = "worst: " + claim.label() + " at " + triple_str(tr);
            }
        }
    }
    report.verdict = report.worst_violation <= tolerance;
    report.detail = worst_witness;
    return report;
}

GammaReport gamma_surface(const TreeModel& tree, const DriverSpec& driver,
                          const ClaimSpec& claim, double s, double t,
                          std::span<const double> u_grid) {
    if (u_grid.empty()) throw std::invalid_argument("gamma_surface: empty horizon grid");
    const TimeGrid& grid = tree.grid();
    const std::size_t k_s = grid.index_of(s);
    const std::size_t k_t = grid.index_of(t);
    if (k_s > k_t) throw std::invalid_argument("gamma_surface: requires s <= t");
    const std::size_t cl = grid.index_of(claim.u());
    if (cl > k_t)
        throw std::invalid_argument("gamma_surface: claim must be measurable at t");

    GammaReport report;
    report.s = s;
    report.t = t;
    report.claim_label = claim.label();
    report.backend = "tree";
    report.min_value = kInf;

    const std::vector<double> values = tree_claim_layer(tree, claim);
    const std::vector<double> base = rho_layer(tree, driver, values, cl, k_s, k_t);
    const bool has_closed_form = !driver.is_family() && !driver.supports_y();
    for (double u : u_grid) {
        const std::size_t k_u = grid.index_of(u);
        if (k_u < k_t) throw std::invalid_argument("gamma_surface: requires u >= t");
        const std::vector<double> longer = rho_layer(tree, driver, values, cl, k_s, k_u);
        GammaPoint point;
        point.u = u;
        point.value_min = kInf;
        point.value_max = -kInf;
        for (std::size_t j = 0; j < base.size(); ++j) {
            const double g = longer[j] - base[j];
            point.value_min = std::min(point.value_min, g);
            point.value_max = std::max(point.value_max, g);
        }
        if (has_closed_form)
            point.closed_form = integrate(
                [&](double v) { return driver.zero_section(driver.is_volterra() ? s : v, v); },
                t, u);
        report.min_value = std::min(report.min_value, point.value_min);
        report.points.push_back(std::move(point));
    }
    return report;
}

GammaReport gamma_surface_mc(const PathEnsemble& ensemble, const DriverSpec& driver,
                             const ClaimSpec& claim, double s, double t,
                             std::span<const double> u_grid, const McConfig& config) {
    if (u_grid.empty()) throw std::invalid_argument("gamma_surface_mc: empty horizon grid");
    const TimeGrid& grid = ensemble.grid();
    const std::size_t k_s = grid.index_of(s);
    const std::size_t k_t = grid.index_of(t);
    if (k_s > k_t) throw std::invalid_argument("gamma_surface_mc: requires s <= t");
    if (grid.index_of(claim.u()) > k_t)
        throw std::invalid_argument("gamma_surface_mc: claim must be measurable at t");

    GammaReport report;
    report.s = s;
    report.t = t;
    report.claim_label = claim.label();
    report.backend = "mc";
    report.min_value = kInf;

    // Common random numbers: both horizons reuse the same ensemble, so the
    // deterministic part of the difference cancels pathwise.
    const McValue shorter = mc_solve_bsvie(ensemble, driver, claim, s, t, config);
    const bool has_closed_form = !driver.is_family() && !driver.supports_y();
    for (double u : u_grid) {
        if (grid.index_of(u) < k_t)
            throw std::invalid_argument("gamma_surface_mc: requires u >= t");
        const McValue longer = mc_solve_bsvie(ensemble, driver, claim, s, u, config);
        GammaPoint point;
        point.u = u;
        point.value_min = point.value_max = longer.value - shorter.value;
        point.mc = McValue{longer.value - shorter.value,
                           std::sqrt(longer.std_error * longer.std_error +
                                     shorter.std_error * shorter.std_error)};
        if (has_closed_form)
            point.closed_form = integrate(
                [&](double v) { return driver.zero_section(driver.is_volterra() ? s : v, v); },
                t, u);
        report.min_value = std::min(report.min_value, point.value_min);
        report.points.push_back(std::move(point));
    }
    return report;
}

ConsistencyReport check_horizon_comparison(const TreeModel& tree, const DriverSpec& driver1,
                                           double horizon1, const ClaimSpec& xi1,
                                           const DriverSpec& driver2, double horizon2,
                                           const ClaimSpec& xi2, double tolerance) {
    const TimeGrid& grid = tree.grid();
    const std::size_t k1 = grid.index_of(horizon1);
    const std::size_t k2 = grid.index_of(horizon2);
    if (k1 > k2)
        throw std::invalid_argument("check_horizon_comparison: requires horizon1 <= horizon2");
    if (grid.index_of(xi1.u()) != k1 || grid.index_of(xi2.u()) != k2)
        throw std::invalid_argument(
            "check_horizon_comparison: terminal data must be measurable exactly at their "
            "horizons");

    const DriverSpec& m1 = driver1.resolve(horizon1);
    const DriverSpec& m2 = driver2.resolve(horizon2);
    const std::vector<double> xi1_values = tree_claim_layer(tree, xi1);
    const std::vector<double> xi2_values = tree_claim_layer(tree, xi2);
    auto negated = [](std::vector<double> v) {
        for (double& x : v) x = -x;
        return v;
    };
    // Solutions with terminal data xi_i (the solver's terminal layer is the
    // negated claim).
    const TreeSolution y1 = tree_solve_values(tree, m1, negated(xi1_values), k1, k1);
    const TreeSolution y2 = tree_solve_values(tree, m2, negated(xi2_values), k2, k2);

    // Hypothesis margins, sampled along the solutions' (y, z) arguments.
    double margin_dominance = kInf;   // g2 - g1 on [0, T1]
    double margin_positive = kInf;    // g2 on [T1, T2]
    double margin_terminal = kInf;    // xi2 - xi1 over feasible ancestors
    for (std::size_t k = 0; k < k1; ++k) {
        const double tk = grid.time(k);
        for (std::size_t j = 0; j < tree.nodes(k); ++j) {
            const std::array<double, 1> z{y1.z_at(k, j)};
            const double y = y1.y[k][j];
            margin_dominance =
                std::min(margin_dominance, m2(tk, tk, y, z) - m1(tk, tk, y, z));
        }
    }
    for (std::size_t k = k1; k < k2; ++k) {
        const double tk = grid.time(k);
        for (std::size_t j = 0; j < tree.nodes(k); ++j) {
            const std::array<double, 1> z{y2.z_at(k, j)};
            margin_positive = std::min(margin_positive, m2(tk, tk, y2.y[k][j], z));
        }
    }
    // Ancestors of node (k, j) at level k1 are the nodes l reachable with
    // j - l up-moves out of k - k1 steps.
    auto ancestor_max = [&](std::size_t k, std::size_t j) {
        const std::size_t lo = j > k - k1 ? j - (k - k1) : 0;
        const std::size_t hi = std::min(k1, j);
        double best = -kInf;
        for (std::size_t l = lo; l <= hi; ++l) best = std::max(best, xi1_values[l]);
        return best;
    };
    for (std::size_t j = 0; j < tree.nodes(k2); ++j)
        margin_terminal = std::min(margin_terminal, xi2_values[j] - ancestor_max(k2, j));

    ConsistencyReport report;
    report.property = Property::horizon_comparison;
    report.tolerance = tolerance;
    report.triples = {{0.0, horizon1, horizon2}};

    std::string worst_witness;
    for (std::size_t k = 0; k <= k1; ++k) {
        for (std::size_t j = 0; j < tree.nodes(k); ++j) {
            const double res = y1.y[k][j] - y2.y[k][j];
            if (res > report.worst_violation) {
                report.worst_violation = res;
                worst_witness = "worst: Y1 - Y2 at level " + std::to_string(k);
            }
        }
    }
    for (std::size_t k = k1; k <= k2; ++k) {
        for (std::size_t j = 0; j < tree.nodes(k); ++j) {
            const double res = ancestor_max(k, j) - y2.y[k][j];
            if (res > report.worst_violation) {
                report.worst_violation = res;
                worst_witness = "worst: xi1 - Y2 on the tail at level " + std::to_string(k);
            }
        }
    }
    report.verdict = report.worst_violation <= tolerance;
    report.detail = "hypothesis margins: min(g2-g1)=" + fmt(margin_dominance) +
                    ", min g2 on tail=" + fmt(margin_positive) +
                    ", min(xi2-xi1)=" + fmt(margin_terminal) + "; " + worst_witness;
    if (std::min({margin_dominance, margin_positive, margin_terminal}) < -tolerance)
        report.detail += " (a hypothesis fails; the conclusions are not implied)";
    return report;
}

RecoveryReport recover_driver_tree(const DriverSpec& driver, double dt, std::size_t eps_steps,
                                   std::span<const double> s_grid,
                                   std::span<const double> z_grid, bool richardson) {
    if (eps_steps == 0)
        throw std::invalid_argument("recover_driver: eps_steps must be positive");
    if (!(dt > 0.0)) throw std::invalid_argument("recover_driver: dt must be positive");
    if (driver.dim() != 1)
        throw std::invalid_argument("recover_driver: scalar drivers only");
    if (s_grid.empty() || z_grid.empty())
        throw std::invalid_argument("recover_driver: empty evaluation grid");

    const double eps = static_cast<double>(eps_steps) * dt;
    RecoveryReport report;
    report.backend = "tree";
    report.epsilon = eps;
    report.richardson = richardson;

    auto window_estimate = [dt](const DriverSpec& member, double s, double z,
                                std::size_t steps) {
        const double horizon = static_cast<double>(steps) * dt;
        const TreeModel window{TimeGrid::uniform(horizon, steps)};
        const DriverSpec shifted = shifted_window_driver(member, s);
        const ClaimSpec claim = ClaimSpec::terminal_brownian({-z}, horizon);
        return tree_solve(window, shifted, claim, horizon).root() / horizon;
    };

    for (double s : s_grid) {
        for (double z : z_grid) {
            const DriverSpec& member = driver.resolve(s + eps);
            double estimate = window_estimate(member, s, z, eps_steps);
            if (richardson)
                estimate = 2.0 * estimate -
                           window_estimate(driver.resolve(s + 2.0 * eps), s, z, 2 * eps_steps);
            const std::array<double, 1> zz{z};
            const double exact = member(s, s, 0.0, zz);
            report.points.push_back({s, z, estimate, 0.0, exact});
            report.max_error = std::max(report.max_error, std::fabs(estimate - exact));
        }
    }
    return report;
}

RecoveryReport recover_driver_mc(const DriverSpec& driver, double dt, std::size_t eps_steps,
                                 std::span<const double> s_grid, std::span<const double> z_grid,
                                 bool richardson, const McConfig& config) {
    if (eps_steps == 0)
        throw std::invalid_argument("recover_driver: eps_steps must be positive");
    if (!(dt > 0.0)) throw std::invalid_argument("recover_driver: dt must be positive");
    if (driver.dim() != 1)
        throw std::invalid_argument("recover_driver: scalar drivers only");
    if (s_grid.empty() || z_grid.empty())
        throw std::invalid_argument("recover_driver: empty evaluation grid");

    const double eps = static_cast<double>(eps_steps) * dt;
    RecoveryReport report;
    report.backend = "mc";
    report.epsilon = eps;
    report.richardson = richardson;

    // One ensemble per window length, shared by every (s, z) point: common
    // random numbers keep the recovered surface coherent across points.
    const PathEnsemble window = PathEnsemble::simulate(TimeGrid::uniform(eps, eps_steps), 1,
                                                       config);
    McConfig config2 = config;
    config2.seed = config.seed + 1;
    std::optional<PathEnsemble> window2;
    if (richardson)
        window2.emplace(
            PathEnsemble::simulate(TimeGrid::uniform(2.0 * eps, 2 * eps_steps), 1, config2));

    for (double s : s_grid) {
        for (double z : z_grid) {
            const DriverSpec& member = driver.resolve(s + eps);
            const DriverSpec shifted = shifted_window_driver(member, s);
            const ClaimSpec claim = ClaimSpec::terminal_brownian({-z}, eps);
            const McValue value = mc_solve_bsvie(window, shifted, claim, 0.0, eps, config);
            double estimate = value.value / eps;
            double std_error = value.std_error / eps;
            if (richardson) {
                const DriverSpec shifted2 =
                    shifted_window_driver(driver.resolve(s + 2.0 * eps), s);
                const ClaimSpec claim2 = ClaimSpec::terminal_brownian({-z}, 2.0 * eps);
                const McValue value2 =
                    mc_solve_bsvie(*window2, shifted2, claim2, 0.0, 2.0 * eps, config2);
                estimate = 2.0 * estimate - value2.value / (2.0 * eps);
                const double se2 = value2.std_error / (2.0 * eps);
                std_error = std::sqrt(4.0 * std_error * std_error + se2 * se2);
            }
            const std::array<double, 1> zz{z};
            const double exact = member(s, s, 0.0, zz);
            report.points.push_back({s, z, estimate, std_error, exact});
            report.max_error = std::max(report.max_error, std::fabs(estimate - exact));
        }
    }
    return report;
}

ConsistencyReport check_penalty_relations(Property kind, const TreeModel& tree,
                                          const DriverSpec& driver,
                                          std::span<const Triple> triples, std::size_t samples,
                                          std::uint64_t seed,
                                          const std::vector<double>& q_grid, double tolerance) {
    if (kind != Property::cocycle && kind != Property::sub_penalty &&
        kind != Property::weak_cocycle)
        throw std::invalid_argument("check_penalty_relations: not a penalty property");
    if (triples.empty()) throw std::invalid_argument("check_penalty_relations: no triples");
    if (samples == 0) throw std::invalid_argument("check_penalty_relations: no samples");
    if (kind == Property::weak_cocycle && q_grid.empty())
        throw std::invalid_argument(
            "check_penalty_relations: weak_cocycle needs a q grid for the dual equality leg");

    ConsistencyReport report;
    report.property = kind;
    report.tolerance = tolerance;
    report.triples.assign(triples.begin(), triples.end());

    const TimeGrid& grid = tree.grid();
    std::mt19937_64 rng(seed);
    std::size_t absorbing = 0;
    std::string worst_witness;
    std::string essinf_note;

    auto track = [&](double res, const std::string& witness) {
        if (res > report.worst_violation) {
            report.worst_violation = res;
            worst_witness = witness;
        }
    };

    for (const Triple& tr : triples) {
        const Levels lv = levels_of(grid, tr);
        const double r0 = rho_zero(tree, driver, lv.t, lv.u);

        for (std::size_t i = 0; i < samples; ++i) {
            const TreeMeasure q_full = i == 0
                                           ? TreeMeasure::constant(tree, lv.s, lv.u, 0.0)
                                           : TreeMeasure::random(tree, lv.s, lv.u, rng, 0.45);
            const std::string which =
                (i == 0 ? std::string("reference measure") : "sample " + std::to_string(i)) +
                " at " + triple_str(tr);

            if (kind == Property::weak_cocycle) {
                const TreeMeasure r_tail =
                    i == 0 ? TreeMeasure::constant(tree, lv.t, lv.u, 0.0)
                           : TreeMeasure::random(tree, lv.t, lv.u, rng, 0.45);
                const std::vector<double> res = weak_cocycle_residuals(
                    tree, driver, tr, lv, q_full, r_tail, r0, absorbing);
                for (double v : res) track(v, "inequality, " + which);
                continue;
            }

            const std::vector<double> a_su = tree_penalty(tree, driver, q_full, tr.s, tr.u);
            const std::vector<double> a_st =
                tree_penalty(tree, driver, q_full.restrict(tree, lv.s, lv.t), tr.s, tr.t);
            std::vector<double> a_tu =
                tree_penalty(tree, driver, q_full.restrict(tree, lv.t, lv.u), tr.t, tr.u);
            const std::vector<double> tail =
                tree_expectation(tree, &q_full, std::move(a_tu), lv.t, lv.s);
            for (std::size_t j = 0; j < a_su.size(); ++j) {
                const double lhs = a_su[j];
                const double rhs = a_st[j] + tail[j];
                double res;
                if (std::isinf(lhs) && std::isinf(rhs)) {
                    ++absorbing;
                    res = 0.0;
                } else if (std::isinf(lhs)) {
                    res = kInf;
                } else if (std::isinf(rhs)) {
                    res = kind == Property::cocycle ? kInf : -kInf;
                } else {
                    res = kind == Property::cocycle ? std::fabs(lhs - rhs) : lhs - rhs;
                }
                track(res, which);
            }
        }

        if (kind == Property::weak_cocycle) {
            // Equality leg: at scenarios selected by the dual representation
            // of a claim measurable at t, the inequality is tight.
            const ClaimSpec probe =
                ClaimSpec::terminal([](double b) { return std::tanh(b); }, tr.t, "tanh probe");
            const TreeDualResult dual_su =
                tree_dual_sup(tree, driver, probe, tr.s, tr.u, q_grid);
            const TreeDualResult dual_tu =
                tree_dual_sup(tree, driver, probe, tr.t, tr.u, q_grid);
            const std::vector<double> res = weak_cocycle_residuals(
                tree, driver, tr, lv, dual_su.argmax, dual_tu.argmax, r0, absorbing);
            for (double v : res)
                track(std::fabs(v), "equality at the dual argmax, " + triple_str(tr));

            // ess inf of alpha_tu: exact from the zero-claim solve, and the
            // best the q grid can do, for reference.
            const DriverSpec& member = driver.resolve(tr.u);
            double grid_essinf = 0.0;
            for (std::size_t k = lv.t; k < lv.u && !std::isinf(grid_essinf); ++k) {
                double best = kInf;
                for (double q : q_grid) {
                    const std::array<double, 1> qq{q};
                    const ConjugateValue c = member.conjugate(
                        member.is_volterra() ? tr.t : grid.time(k), grid.time(k), qq);
                    if (c.in_domain) best = std::min(best, c.value);
                }
                grid_essinf = best == kInf ? kInf : grid_essinf + best * grid.dt(k);
            }
            essinf_note = "; ess inf alpha_tu = " + fmt(-r0) + " (exact), " +
                          fmt(grid_essinf) + " (q-grid)";
        }
    }

    report.verdict = report.worst_violation <= tolerance;
    report.detail = "worst: " + worst_witness + essinf_note;
    if (absorbing > 0)
        report.detail += "; " + std::to_string(absorbing) +
                         " node samples had infinite penalty on both sides";
    return report;
}

ConsistencyReport check_acceptance_inclusion(const TreeModel& tree, const DriverSpec& driver,
                                             const std::vector<ClaimSpec>& claims,
                                             std::span<const Triple> triples,
                                             double tolerance) {
    if (claims.empty()) throw std::invalid_argument("check_acceptance_inclusion: no claims");
    if (triples.empty()) throw std::invalid_argument("check_acceptance_inclusion: no triples");

    ConsistencyReport report;
    report.property = Property::acceptance_inclusion;
    report.tolerance = tolerance;
    report.triples.assign(triples.begin(), triples.end());

    std::size_t natural = 0;
    std::string worst_witness;
    auto track = [&](double res, const std::string& witness) {
        if (res > report.worst_violation) {
            report.worst_violation = res;
            worst_witness = witness;
        }
    };

    for (const Triple& tr : triples) {
        const Levels lv = levels_of(tree.grid(), tr);
        for (const ClaimSpec& claim : claims) {
            const std::size_t cl = tree.grid().index_of(claim.u());
            if (cl > lv.t)
                throw std::invalid_argument(
                    "check_acceptance_inclusion: claims must be measurable at t");
            std::vector<double> values = tree_claim_layer(tree, claim);
            const std::vector<double> su = rho_layer(tree, driver, values, cl, lv.s, lv.u);
            const std::vector<double> st =
                rho_layer(tree, driver, std::move(values), cl, lv.s, lv.t);
            const double max_su = *std::max_element(su.begin(), su.end());
            const double max_st = *std::max_element(st.begin(), st.end());
            // X + max rho_su(X) sits on the boundary of the u-horizon
            // acceptance set (translation invariance), so membership is
            // never vacuous.
            track(max_st - max_su,
                  claim.label() + " shifted to the boundary, " + triple_str(tr));
            if (max_su <= tolerance) {
                ++natural;
                track(max_st, claim.label() + " at " + triple_str(tr));
            }
        }
    }
    report.verdict = report.worst_violation <= tolerance;
    report.detail = "worst: " + worst_witness + "; " + std::to_string(natural) + " of " +
                    std::to_string(claims.size() * triples.size()) +
                    " claim instances were members outright";
    return report;
}

std::vector<ClaimSpec> make_fuzz_claims(double u, std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> weight(-1.5, 1.5);
    std::uniform_real_distribution<double> strike(-0.5, 0.5);
    std::uniform_real_distribution<double> slope(0.5, 2.0);

    std::vector<ClaimSpec> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        switch (k % 4) {
            case 0:
                out.push_back(ClaimSpec::constant(unit(rng), u));
                break;
            case 1:
                out.push_back(ClaimSpec::terminal_brownian({weight(rng)}, u));
                break;
            case 2:
                out.push_back(ClaimSpec::call(strike(rng), u));
                break;
            default: {
                const double a = unit(rng);
                const double b = slope(rng);
                const double c = unit(rng);
                out.push_back(ClaimSpec::terminal(
                    [a, b, c](double x) { return a * std::tanh(b * x) + c * std::cos(x); }, u,
                    "fuzz" + std::to_string(k)));
                break;
            }
        }
    }
    return out;
}

std::vector<std::string> implication_violations(const DiagramVerdicts& verdicts,
                                                double tolerance) {
    std::vector<std::string> out;
    if (verdicts.strong_tc && !verdicts.weak_tc)
        out.push_back("strong TC holds but weak TC fails");
    if (verdicts.strong_tc && !verdicts.order_tc)
        out.push_back("strong TC holds but order TC fails");
    if (verdicts.weak_tc != verdicts.order_tc)
        out.push_back("weak TC and order TC verdicts differ");
    if (verdicts.weak_tc && verdicts.h_longevity && verdicts.rho_tu_zero <= tolerance &&
        !verdicts.sub_tc)
        out.push_back("weak TC with h-longevity and rho(0) <= 0 must imply sub TC");
    if (verdicts.sub_tc && verdicts.rho_tu_zero >= -tolerance && !verdicts.h_longevity)
        out.push_back("sub TC with rho(0) >= 0 must imply h-longevity");
    return out;
}

}  // namespace fdrm
