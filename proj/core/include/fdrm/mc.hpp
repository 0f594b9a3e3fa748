#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "fdrm/claim.hpp"
#include "fdrm/driver.hpp"
#include "fdrm/measure.hpp"
#include "fdrm/time_grid.hpp"

namespace fdrm {

struct McConfig {
    std::size_t paths = 100000;
    unsigned degree = 3;       // total degree of the polynomial state basis
    double z_clip = 10.0;      // |Z| cap per coordinate before the driver sees it
    std::uint64_t seed = 0;
    bool antithetic = false;   // odd paths mirror the preceding even path
    std::size_t bootstrap = 100;
};

/// Brownian paths sampled at the grid times. Each path draws from its own
/// seeded substream, so the ensemble is reproducible bit-for-bit and
/// independent of any scheduling. Values are path-major.
class PathEnsemble {
public:
    static PathEnsemble simulate(const TimeGrid& grid, std::size_t dim, const McConfig& config);

    const TimeGrid& grid() const { return grid_; }
    std::size_t paths() const { return paths_; }
    std::size_t dim() const { return dim_; }
    std::uint64_t seed() const { return seed_; }
    bool antithetic() const { return antithetic_; }

    double value(std::size_t path, std::size_t point, std::size_t coord = 0) const {
        return values_[(path * points_ + point) * dim_ + coord];
    }
    double increment(std::size_t path, std::size_t step, std::size_t coord = 0) const {
        return value(path, step + 1, coord) - value(path, step, coord);
    }
    PathView view(std::size_t path) const;

private:
    PathEnsemble(TimeGrid grid, std::size_t dim, std::size_t paths, std::uint64_t seed,
                 bool antithetic);

    TimeGrid grid_;
    std::size_t dim_;
    std::size_t paths_;
    std::size_t points_;
    std::uint64_t seed_;
    bool antithetic_;
    std::vector<double> values_;
};

struct McValue {
    double value;
    double std_error;
};

/// Artifacts of one least-squares backward pass over [s_level, horizon]:
/// the per-path values at the stop level and the fitted value/Z functions
/// (needed to build premium kernels and composed claims). Regressions use
/// monomials of the standardized Brownian state up to the configured total
/// degree.
///
/// Levels in [collapse_level, horizon) carry no regression: the position is
/// already measurable there, so the exact zero-Z flow is applied per path
/// and Z is identically zero.
class McBackward {
public:
    std::size_t s_level() const { return s_level_; }
    std::size_t horizon_level() const { return horizon_level_; }
    std::size_t collapse_level() const { return collapse_level_; }
    const std::vector<double>& y() const { return y_; }

    /// Fitted, clipped Z at a level in [s_level, horizon_level) as a
    /// function of the Brownian state; zero on [collapse_level, horizon).
    double z(std::size_t level, std::span<const double> state, std::size_t coord) const;

    /// Fitted value rho_{t_level, horizon}(X) as a function of the Brownian
    /// state, for levels in [s_level, collapse_level). This is exactly the
    /// function the backward pass evaluated on each path.
    double value_fn(std::size_t level, std::span<const double> state) const;

private:
    friend McBackward mc_backward_stopped(const PathEnsemble&, const DriverSpec&,
                                          const ClaimSpec&, double, double, std::size_t,
                                          const McConfig&);
    struct LevelFit {
        std::vector<std::vector<unsigned>> powers;  // monomial multi-indices
        std::vector<double> mean, sd;               // state standardization (sd=0: degenerate)
        std::vector<double> y_coef;                 // basis coefficients of E[Y_{k+1} | state]
        std::vector<std::vector<double>> z_coef;    // per coord, basis coefficients
    };
    std::size_t s_level_ = 0;
    std::size_t horizon_level_ = 0;
    std::size_t collapse_level_ = 0;
    double z_clip_ = 10.0;
    std::optional<DriverSpec> driver_;  // resolved member used by the pass
    std::optional<double> frozen_;      // Volterra first argument, when frozen
    std::vector<double> time_;          // grid time per level offset
    std::vector<double> dt_;            // dt per level offset
    std::vector<double> y_;
    std::vector<LevelFit> fits_;        // fits_[level - s_level]; empty above collapse_level
};

/// Full backward pass for rho_{s, horizon}(X). Families resolve the member
/// governing the horizon; Volterra drivers freeze the first argument at s.
McBackward mc_backward(const PathEnsemble& ensemble, const DriverSpec& driver,
                       const ClaimSpec& claim, double s, double horizon,
                       const McConfig& config);

/// As mc_backward but halting the regression at stop_level >= index(s);
/// the Volterra first argument stays frozen at s. Used by the time-0
/// estimators, which replace the last regression by plain means.
McBackward mc_backward_stopped(const PathEnsemble& ensemble, const DriverSpec& driver,
                               const ClaimSpec& claim, double s, double horizon,
                               std::size_t stop_level, const McConfig& config);

/// rho_{0, horizon}(X) for a (non-Volterra) BSDE driver: time-0 value and a
/// bootstrap standard error of the final aggregation step (regression
/// functions held fixed; antithetic pairs resampled jointly).
McValue mc_solve_bsde(const PathEnsemble& ensemble, const DriverSpec& driver,
                      const ClaimSpec& claim, double horizon, const McConfig& config);

/// rho_{s, horizon}(X) for a Volterra (or plain) driver: the frozen-s pass.
/// For s = 0 this is the scalar time-0 value; for s > 0 the sample mean of
/// the level-s regression estimate, with a bootstrap standard error.
McValue mc_solve_bsvie(const PathEnsemble& ensemble, const DriverSpec& driver,
                       const ClaimSpec& claim, double s, double horizon,
                       const McConfig& config);

/// Per-path density dQ/dP over the measure's window,
/// prod_k exp(q.dB - |q|^2 dt / 2).
std::vector<double> mc_density(const PathEnsemble& ensemble, const MeasureSpec& measure);

struct McPenalty {
    double value;
    double std_error;
    std::size_t out_of_domain;  // sampled kernel values outside the conjugate domain
};

/// alpha_{st}(Q) = E_Q[ sum_k g*(., t_k, q_k) dt ] estimated by reweighting
/// with the sampled density. Any out-of-domain sample makes the estimate
/// +infinity and is counted.
McPenalty penalty_mc(const PathEnsemble& ensemble, const DriverSpec& driver,
                     const MeasureSpec& measure, double s, double t);

/// Premium kernel from two backward passes (horizon u and horizon t <= u),
/// as a state-dependent MeasureSpec on [s, u]; the short pass's Z extends
/// by zero beyond its horizon.
MeasureSpec build_premium_measure_mc(const DriverSpec& driver, const TimeGrid& grid,
                                     std::shared_ptr<const McBackward> long_pass,
                                     std::shared_ptr<const McBackward> short_pass, double s,
                                     double t, double u);

}  // namespace fdrm
