#include "fdrm/mc.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "fdrm/errors.hpp"
#include "fdrm/tree.hpp"

namespace fdrm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t substream(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream));
}

// Multi-indices of total degree <= degree over the active coordinates,
// graded order, constant first.
std::vector<std::vector<unsigned>> monomials(std::size_t dim, unsigned degree,
                                             const std::vector<bool>& active) {
    std::vector<std::vector<unsigned>> out;
    std::vector<unsigned> idx(dim, 0);
    const auto total = [&]() {
        unsigned s = 0;
        for (unsigned e : idx) s += e;
        return s;
    };
    while (true) {
        out.push_back(idx);
        // Odometer increment subject to the degree bound and active mask.
        std::size_t c = 0;
        for (; c < dim; ++c) {
            if (!active[c]) continue;
            ++idx[c];
            if (total() <= degree) break;
            idx[c] = 0;
        }
        if (c == dim) break;
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        unsigned sa = 0, sb = 0;
        for (unsigned e : a) sa += e;
        for (unsigned e : b) sb += e;
        return sa != sb ? sa < sb : a < b;
    });
    return out;
}

double monomial_value(const std::vector<unsigned>& powers, std::span<const double> x) {
    double v = 1.0;
    for (std::size_t c = 0; c < powers.size(); ++c) {
        for (unsigned e = 0; e < powers[c]; ++e) v *= x[c];
    }
    return v;
}

// Resampling units: antithetic ensembles are resampled by mirrored pairs.
std::size_t unit_count(const PathEnsemble& ens) {
    return ens.antithetic() ? ens.paths() / 2 : ens.paths();
}

double unit_mean(const PathEnsemble& ens, const std::vector<double>& per_path,
                 std::size_t unit) {
    if (!ens.antithetic()) return per_path[unit];
    return 0.5 * (per_path[2 * unit] + per_path[2 * unit + 1]);
}

McValue bootstrap_mean(const PathEnsemble& ens, const std::vector<double>& per_path,
                       const McConfig& cfg) {
    const std::size_t units = unit_count(ens);
    double mean = 0.0;
    for (std::size_t i = 0; i < units; ++i) mean += unit_mean(ens, per_path, i);
    mean /= static_cast<double>(units);
    std::mt19937_64 rng(substream(cfg.seed, 0x626F6F74ULL));
    std::uniform_int_distribution<std::size_t> pick(0, units - 1);
    double acc = 0.0, acc2 = 0.0;
    for (std::size_t b = 0; b < cfg.bootstrap; ++b) {
        double m = 0.0;
        for (std::size_t i = 0; i < units; ++i) m += unit_mean(ens, per_path, pick(rng));
        m /= static_cast<double>(units);
        acc += m;
        acc2 += m * m;
    }
    const double bm = acc / static_cast<double>(cfg.bootstrap);
    const double var = std::max(0.0, acc2 / static_cast<double>(cfg.bootstrap) - bm * bm);
    return {mean, std::sqrt(var)};
}

}  // namespace

PathEnsemble::PathEnsemble(TimeGrid grid, std::size_t dim, std::size_t paths,
                           std::uint64_t seed, bool antithetic)
    : grid_(std::move(grid)),
      dim_(dim),
      paths_(paths),
      points_(grid_.steps() + 1),
      seed_(seed),
      antithetic_(antithetic) {}

PathEnsemble PathEnsemble::simulate(const TimeGrid& grid, std::size_t dim,
                                    const McConfig& config) {
    if (dim == 0) throw std::invalid_argument("PathEnsemble: dim must be positive");
    if (config.paths == 0) throw std::invalid_argument("PathEnsemble: need at least one path");
    if (config.antithetic && config.paths % 2 != 0)
        throw std::invalid_argument("PathEnsemble: antithetic sampling needs an even path count");
    PathEnsemble ens(grid, dim, config.paths, config.seed, config.antithetic);
    const std::size_t points = ens.points_;
    ens.values_.assign(config.paths * points * dim, 0.0);
    for (std::size_t p = 0; p < config.paths; ++p) {
        double* path = ens.values_.data() + p * points * dim;
        if (config.antithetic && p % 2 == 1) {
            const double* prev = ens.values_.data() + (p - 1) * points * dim;
            for (std::size_t i = 0; i < points * dim; ++i) path[i] = -prev[i];
            continue;
        }
        std::mt19937_64 rng(substream(config.seed, p));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t k = 0; k + 1 < points; ++k) {
            const double sq = std::sqrt(grid.dt(k));
            for (std::size_t c = 0; c < dim; ++c)
                path[(k + 1) * dim + c] = path[k * dim + c] + sq * normal(rng);
        }
    }
    return ens;
}

PathView PathEnsemble::view(std::size_t path) const {
    return PathView(grid_.times(),
                    std::span<const double>(values_.data() + path * points_ * dim_,
                                            points_ * dim_),
                    dim_);
}

double McBackward::z(std::size_t level, std::span<const double> state,
                     std::size_t coord) const {
    if (level < s_level_ || level >= horizon_level_)
        throw std::invalid_argument("McBackward::z: level outside the window");
    if (level >= collapse_level_) return 0.0;
    const LevelFit& fit = fits_[level - s_level_];
    std::vector<double> x(state.size());
    for (std::size_t c = 0; c < state.size(); ++c)
        x[c] = fit.sd[c] > 0.0 ? (state[c] - fit.mean[c]) / fit.sd[c] : 0.0;
    double v = 0.0;
    for (std::size_t m = 0; m < fit.powers.size(); ++m)
        v += fit.z_coef[coord][m] * monomial_value(fit.powers[m], x);
    return std::clamp(v, -z_clip_, z_clip_);
}

double McBackward::value_fn(std::size_t level, std::span<const double> state) const {
    if (level < s_level_ || level >= collapse_level_)
        throw std::invalid_argument(
            "McBackward::value_fn: level outside the regression window");
    const LevelFit& fit = fits_[level - s_level_];
    std::vector<double> x(state.size());
    for (std::size_t c = 0; c < state.size(); ++c)
        x[c] = fit.sd[c] > 0.0 ? (state[c] - fit.mean[c]) / fit.sd[c] : 0.0;
    double ce = 0.0;
    std::vector<double> zv(state.size());
    for (std::size_t m = 0; m < fit.powers.size(); ++m) {
        const double mono = monomial_value(fit.powers[m], x);
        ce += fit.y_coef[m] * mono;
        for (std::size_t c = 0; c < state.size(); ++c) zv[c] += fit.z_coef[c][m] * mono;
    }
    for (double& v : zv) v = std::clamp(v, -z_clip_, z_clip_);
    const double tk = time_[level - s_level_];
    return ce + (*driver_)(frozen_.value_or(tk), tk, ce, zv) * dt_[level - s_level_];
}

McBackward mc_backward(const PathEnsemble& ensemble, const DriverSpec& driver,
                       const ClaimSpec& claim, double s, double horizon,
                       const McConfig& config) {
    return mc_backward_stopped(ensemble, driver, claim, s, horizon,
                               ensemble.grid().index_of(s), config);
}

McBackward mc_backward_stopped(const PathEnsemble& ensemble, const DriverSpec& driver,
                               const ClaimSpec& claim, double s, double horizon,
                               std::size_t stop_level, const McConfig& config) {
    const TimeGrid& grid = ensemble.grid();
    const std::size_t k_s = stop_level;
    const std::size_t k_h = grid.index_of(horizon);
    if (grid.index_of(s) > k_s)
        throw std::invalid_argument("mc_backward: stop level before the evaluation time");
    if (k_s > k_h) throw std::invalid_argument("mc_backward: requires s <= horizon");
    if (claim.u() > horizon + 1e-12)
        throw std::invalid_argument("mc_backward: claim measurable after the horizon");
    const DriverSpec& d = driver.resolve(horizon);
    const std::size_t dim = ensemble.dim();
    if (d.dim() != dim) throw std::invalid_argument("mc_backward: driver/ensemble dim mismatch");
    const std::size_t M = ensemble.paths();
    const bool frozen = d.is_volterra();
    // Above the claim's measurability level the position is already known,
    // so Z vanishes and the zero-Z flow is exact per path; regressions run
    // only below it.
    const std::size_t collapse_to = std::max(k_s, grid.index_of(claim.u()));

    McBackward out;
    out.s_level_ = k_s;
    out.horizon_level_ = k_h;
    out.collapse_level_ = collapse_to;
    out.z_clip_ = config.z_clip;
    out.driver_ = d;
    if (frozen) out.frozen_ = s;
    out.fits_.resize(k_h - k_s);
    out.time_.resize(k_h - k_s);
    out.dt_.resize(k_h - k_s);
    for (std::size_t k = k_s; k < k_h; ++k) {
        out.time_[k - k_s] = grid.time(k);
        out.dt_[k - k_s] = grid.dt(k);
    }
    out.y_.resize(M);
    const std::optional<double> frozen_t = frozen ? std::optional<double>(s) : std::nullopt;
    for (std::size_t p = 0; p < M; ++p)
        out.y_[p] =
            zero_z_flow(d, grid, k_h, collapse_to, frozen_t, -claim.evaluate(ensemble.view(p)));
    if (k_s == collapse_to) return out;

    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(out.y_.data(), M);
    Eigen::MatrixXd design;
    std::vector<double> state(dim), zval(dim);

    for (std::size_t k = collapse_to; k-- > k_s;) {
        const double dt = grid.dt(k);
        const double tk = grid.time(k);
        const double tf = frozen ? s : tk;

        McBackward::LevelFit& fit = out.fits_[k - k_s];
        fit.mean.assign(dim, 0.0);
        fit.sd.assign(dim, 0.0);
        for (std::size_t c = 0; c < dim; ++c) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t p = 0; p < M; ++p) {
                const double v = ensemble.value(p, k, c);
                m1 += v;
                m2 += v * v;
            }
            m1 /= static_cast<double>(M);
            m2 = std::max(0.0, m2 / static_cast<double>(M) - m1 * m1);
            fit.mean[c] = m1;
            fit.sd[c] = std::sqrt(m2);
        }
        std::vector<bool> active(dim);
        bool any_active = false;
        for (std::size_t c = 0; c < dim; ++c) {
            active[c] = fit.sd[c] > 1e-12 * (1.0 + std::abs(fit.mean[c]));
            any_active = any_active || active[c];
        }
        fit.powers = monomials(dim, any_active ? config.degree : 0, active);
        const std::size_t K = fit.powers.size();

        design.resize(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(K));
        for (std::size_t p = 0; p < M; ++p) {
            for (std::size_t c = 0; c < dim; ++c) {
                const double v = ensemble.value(p, k, c);
                state[c] = active[c] ? (v - fit.mean[c]) / fit.sd[c] : 0.0;
            }
            for (std::size_t m = 0; m < K; ++m)
                design(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(m)) =
                    monomial_value(fit.powers[m], state);
        }

        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
        if (static_cast<std::size_t>(qr.rank()) < K)
            throw numerical_error("mc_backward: singular regression at level " +
                                  std::to_string(k));

        const Eigen::VectorXd beta_y = qr.solve(y);
        fit.y_coef.assign(beta_y.data(), beta_y.data() + K);
        const Eigen::VectorXd ce = design * beta_y;
        fit.z_coef.resize(dim);
        Eigen::MatrixXd zfit(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(dim));
        for (std::size_t c = 0; c < dim; ++c) {
            Eigen::VectorXd target(static_cast<Eigen::Index>(M));
            for (std::size_t p = 0; p < M; ++p)
                target(static_cast<Eigen::Index>(p)) =
                    y(static_cast<Eigen::Index>(p)) * ensemble.increment(p, k, c) / dt;
            const Eigen::VectorXd beta_z = qr.solve(target);
            fit.z_coef[c].assign(beta_z.data(), beta_z.data() + K);
            zfit.col(static_cast<Eigen::Index>(c)) = design * beta_z;
        }

        for (std::size_t p = 0; p < M; ++p) {
            const double cep = ce(static_cast<Eigen::Index>(p));
            for (std::size_t c = 0; c < dim; ++c)
                zval[c] = std::clamp(zfit(static_cast<Eigen::Index>(p),
                                          static_cast<Eigen::Index>(c)),
                                     -config.z_clip, config.z_clip);
            y(static_cast<Eigen::Index>(p)) = cep + d(tf, tk, cep, zval) * dt;
        }
    }

    Eigen::Map<Eigen::VectorXd>(out.y_.data(), M) = y;
    return out;
}

namespace {

// Final aggregation at level 0 (the state is degenerate there): plain means
// for the conditional expectation and the Z projection, then one driver
// step. Shared by the estimator and its bootstrap replicates.
double aggregate_root(const PathEnsemble& ens, const DriverSpec& d, bool frozen, double s,
                      const std::vector<double>& y1, const McConfig& cfg,
                      const std::vector<std::size_t>* resample) {
    const TimeGrid& grid = ens.grid();
    const double dt = grid.dt(0);
    const std::size_t units = unit_count(ens);
    const std::size_t dim = ens.dim();
    double ce = 0.0;
    std::vector<double> znum(dim, 0.0);
    for (std::size_t i = 0; i < units; ++i) {
        const std::size_t unit = resample ? (*resample)[i] : i;
        if (ens.antithetic()) {
            const std::size_t p0 = 2 * unit, p1 = 2 * unit + 1;
            ce += 0.5 * (y1[p0] + y1[p1]);
            for (std::size_t c = 0; c < dim; ++c)
                znum[c] += 0.5 * (y1[p0] * ens.increment(p0, 0, c) +
                                  y1[p1] * ens.increment(p1, 0, c));
        } else {
            ce += y1[unit];
            for (std::size_t c = 0; c < dim; ++c) znum[c] += y1[unit] * ens.increment(unit, 0, c);
        }
    }
    ce /= static_cast<double>(units);
    std::vector<double> z(dim);
    for (std::size_t c = 0; c < dim; ++c)
        z[c] = std::clamp(znum[c] / static_cast<double>(units) / dt, -cfg.z_clip, cfg.z_clip);
    const double t0 = grid.time(0);
    return ce + d(frozen ? s : t0, t0, ce, z) * dt;
}

McValue solve_scalar(const PathEnsemble& ens, const DriverSpec& driver, const ClaimSpec& claim,
                     double s, double horizon, const McConfig& cfg) {
    const TimeGrid& grid = ens.grid();
    const std::size_t k_s = grid.index_of(s);
    const std::size_t k_h = grid.index_of(horizon);
    const DriverSpec& d = driver.resolve(horizon);

    if (k_s == k_h) {
        // rho_ss(X) = -X; at s = 0 this is deterministic.
        McBackward pass = mc_backward(ens, driver, claim, s, horizon, cfg);
        if (k_s == 0) return {pass.y().front(), 0.0};
        return bootstrap_mean(ens, pass.y(), cfg);
    }
    if (k_s > 0) {
        McBackward pass = mc_backward(ens, driver, claim, s, horizon, cfg);
        return bootstrap_mean(ens, pass.y(), cfg);
    }

    // s = 0: stop the regression pass one step short and aggregate with
    // plain means; bootstrap that aggregation.
    McBackward pass = mc_backward_stopped(ens, driver, claim, s, horizon, 1, cfg);
    const std::vector<double>& y1 = pass.y();
    const bool frozen = d.is_volterra();
    const double value = aggregate_root(ens, d, frozen, s, y1, cfg, nullptr);

    std::mt19937_64 rng(substream(cfg.seed, 0x626F6F74ULL));
    const std::size_t units = unit_count(ens);
    std::uniform_int_distribution<std::size_t> pick(0, units - 1);
    std::vector<std::size_t> resample(units);
    double acc = 0.0, acc2 = 0.0;
    for (std::size_t b = 0; b < cfg.bootstrap; ++b) {
        for (auto& r : resample) r = pick(rng);
        const double v = aggregate_root(ens, d, frozen, s, y1, cfg, &resample);
        acc += v;
        acc2 += v * v;
    }
    const double bm = acc / static_cast<double>(cfg.bootstrap);
    const double var = std::max(0.0, acc2 / static_cast<double>(cfg.bootstrap) - bm * bm);
    return {value, std::sqrt(var)};
}

}  // namespace

McValue mc_solve_bsde(const PathEnsemble& ensemble, const DriverSpec& driver,
                      const ClaimSpec& claim, double horizon, const McConfig& config) {
    if (driver.resolve(horizon).is_volterra())
        throw std::invalid_argument("mc_solve_bsde: Volterra drivers need mc_solve_bsvie");
    return solve_scalar(ensemble, driver, claim, 0.0, horizon, config);
}

McValue mc_solve_bsvie(const PathEnsemble& ensemble, const DriverSpec& driver,
                       const ClaimSpec& claim, double s, double horizon,
                       const McConfig& config) {
    return solve_scalar(ensemble, driver, claim, s, horizon, config);
}

std::vector<double> mc_density(const PathEnsemble& ensemble, const MeasureSpec& measure) {
    const TimeGrid& grid = ensemble.grid();
    const std::size_t k_s = grid.index_of(measure.s);
    const std::size_t k_t = grid.index_of(measure.t);
    if (k_s > k_t) throw std::invalid_argument("mc_density: requires s <= t");
    if (measure.dim != ensemble.dim())
        throw std::invalid_argument("mc_density: measure/ensemble dim mismatch");
    if (!measure.kernel) throw std::invalid_argument("mc_density: kernel must be callable");
    const std::size_t M = ensemble.paths();
    const std::size_t dim = ensemble.dim();
    std::vector<double> density(M, 1.0);
    std::vector<double> state(dim);
    for (std::size_t p = 0; p < M; ++p) {
        double log_density = 0.0;
        for (std::size_t k = k_s; k < k_t; ++k) {
            for (std::size_t c = 0; c < dim; ++c) state[c] = ensemble.value(p, k, c);
            const std::vector<double> q = measure.kernel(grid.time(k), state);
            if (q.size() != dim) throw std::invalid_argument("mc_density: kernel dim mismatch");
            double qdb = 0.0, qq = 0.0;
            for (std::size_t c = 0; c < dim; ++c) {
                qdb += q[c] * ensemble.increment(p, k, c);
                qq += q[c] * q[c];
            }
            log_density += qdb - 0.5 * qq * grid.dt(k);
        }
        density[p] = std::exp(log_density);
    }
    return density;
}

McPenalty penalty_mc(const PathEnsemble& ensemble, const DriverSpec& driver,
                     const MeasureSpec& measure, double s, double t) {
    const TimeGrid& grid = ensemble.grid();
    const std::size_t k_s = grid.index_of(s);
    const std::size_t k_t = grid.index_of(t);
    if (k_s > k_t) throw std::invalid_argument("penalty_mc: requires s <= t");
    const DriverSpec& d = driver.resolve(t);
    const std::size_t dim = ensemble.dim();
    if (d.dim() != dim) throw std::invalid_argument("penalty_mc: driver/ensemble dim mismatch");

    const std::vector<double> density = mc_density(ensemble, measure);
    const std::size_t M = ensemble.paths();
    std::vector<double> weighted(M, 0.0);
    std::vector<double> state(dim);
    std::size_t out_of_domain = 0;
    const bool frozen = d.is_volterra();
    for (std::size_t p = 0; p < M; ++p) {
        double sum = 0.0;
        for (std::size_t k = k_s; k < k_t; ++k) {
            for (std::size_t c = 0; c < dim; ++c) state[c] = ensemble.value(p, k, c);
            const std::vector<double> q = measure.kernel(grid.time(k), state);
            const ConjugateValue conj = d.conjugate(frozen ? s : grid.time(k), grid.time(k), q);
            if (!conj.in_domain) {
                ++out_of_domain;
                sum = kInf;
                break;
            }
            sum += conj.value * grid.dt(k);
        }
        weighted[p] = density[p] * sum;
    }
    if (out_of_domain > 0) return {kInf, kInf, out_of_domain};

    const std::size_t units = unit_count(ensemble);
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < units; ++i) {
        const double v = unit_mean(ensemble, weighted, i);
        m1 += v;
        m2 += v * v;
    }
    m1 /= static_cast<double>(units);
    m2 = std::max(0.0, m2 / static_cast<double>(units) - m1 * m1);
    return {m1, std::sqrt(m2 / static_cast<double>(units)), 0};
}

MeasureSpec build_premium_measure_mc(const DriverSpec& driver, const TimeGrid& grid,
                                     std::shared_ptr<const McBackward> long_pass,
                                     std::shared_ptr<const McBackward> short_pass, double s,
                                     double t, double u) {
    const std::size_t k_s = grid.index_of(s);
    const std::size_t k_t = grid.index_of(t);
    const std::size_t k_u = grid.index_of(u);
    if (!(k_s <= k_t && k_t <= k_u))
        throw std::invalid_argument("build_premium_measure_mc: requires s <= t <= u");
    if (long_pass->horizon_level() != k_u || short_pass->horizon_level() != k_t)
        throw std::invalid_argument("build_premium_measure_mc: passes do not match (t, u)");
    if (long_pass->s_level() > k_s || short_pass->s_level() > k_s)
        throw std::invalid_argument("build_premium_measure_mc: passes do not reach back to s");
    const DriverSpec d = driver.resolve(u);
    if (d.supports_y())
        throw std::invalid_argument(
            "build_premium_measure_mc: premium kernels need drivers without y-dependence");
    const std::size_t dim = d.dim();

    MeasureSpec m;
    m.s = s;
    m.t = u;
    m.dim = dim;
    m.label = "premium";
    m.kernel = [d, grid, long_pass, short_pass, s, k_t, k_u](
                   double time, std::span<const double> state) {
        const std::size_t k = grid.index_of(time);
        const std::size_t dim = d.dim();
        std::vector<double> z_long(dim), z_short(dim), q(dim, 0.0);
        for (std::size_t c = 0; c < dim; ++c) {
            z_long[c] = k < k_u ? long_pass->z(k, state, c) : 0.0;
            z_short[c] = k < k_t ? short_pass->z(k, state, c) : 0.0;
        }
        // Sequential telescoping: coordinate c moves from short to long
        // with earlier coordinates already switched.
        std::vector<double> hi(z_short);
        const double tf = d.is_volterra() ? s : time;
        for (std::size_t c = 0; c < dim; ++c) {
            std::vector<double> lo(hi);
            hi[c] = z_long[c];
            const double dz = hi[c] - lo[c];
            if (std::abs(dz) >= 1e-12) q[c] = (d(tf, time, 0.0, hi) - d(tf, time, 0.0, lo)) / dz;
        }
        return q;
    };
    return m;
}

}  // namespace fdrm
