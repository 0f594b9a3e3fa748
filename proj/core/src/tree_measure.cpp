#include "fdrm/tree_measure.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "fdrm/errors.hpp"

namespace fdrm {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPositivityMargin = 1e-9;  // |q| sqrt(dt) <= 1 - margin

void check_window(const TreeModel& tree, std::size_t s_level, std::size_t t_level) {
    if (s_level > t_level) throw std::invalid_argument("TreeMeasure: window must satisfy s <= t");
    if (t_level >= tree.levels())
        throw std::invalid_argument("TreeMeasure: window beyond the grid");
}
}  // namespace

TreeMeasure::TreeMeasure(const TreeModel& tree, std::size_t s_level, std::size_t t_level,
                         std::vector<std::vector<double>> q)
    : s_level_(s_level), t_level_(t_level), q_(std::move(q)) {
    check_window(tree, s_level, t_level);
    if (q_.size() != t_level_ - s_level_)
        throw std::invalid_argument("TreeMeasure: kernel row count must match the window");
    const double sq = tree.sqrt_dt();
    for (std::size_t k = s_level_; k < t_level_; ++k) {
        const auto& row = q_[k - s_level_];
        if (row.size() != tree.nodes(k))
            throw std::invalid_argument("TreeMeasure: kernel row has wrong node count");
        for (double qv : row) {
            if (!std::isfinite(qv) || std::abs(qv) * sq > 1.0 - kPositivityMargin)
                throw numerical_error(
                    "TreeMeasure: kernel violates one-step positivity |q| sqrt(dt) < 1");
        }
    }
}

TreeMeasure TreeMeasure::constant(const TreeModel& tree, std::size_t s_level,
                                  std::size_t t_level, double q) {
    check_window(tree, s_level, t_level);
    std::vector<std::vector<double>> rows(t_level - s_level);
    for (std::size_t k = s_level; k < t_level; ++k)
        rows[k - s_level].assign(tree.nodes(k), q);
    return TreeMeasure(tree, s_level, t_level, std::move(rows));
}

TreeMeasure TreeMeasure::from_kernel(const TreeModel& tree, std::size_t s_level,
                                     std::size_t t_level,
                                     const std::function<double(double, double)>& kernel) {
    check_window(tree, s_level, t_level);
    std::vector<std::vector<double>> rows(t_level - s_level);
    for (std::size_t k = s_level; k < t_level; ++k) {
        rows[k - s_level].resize(tree.nodes(k));
        for (std::size_t j = 0; j < tree.nodes(k); ++j)
            rows[k - s_level][j] = kernel(tree.grid().time(k), tree.brownian(k, j));
    }
    return TreeMeasure(tree, s_level, t_level, std::move(rows));
}

TreeMeasure TreeMeasure::random(const TreeModel& tree, std::size_t s_level, std::size_t t_level,
                                std::mt19937_64& rng, double fraction) {
    check_window(tree, s_level, t_level);
    if (!(fraction > 0.0) || fraction >= 1.0)
        throw std::invalid_argument("TreeMeasure::random: fraction must lie in (0, 1)");
    const double bound = fraction / tree.sqrt_dt();
    std::uniform_real_distribution<double> u(-bound, bound);
    std::vector<std::vector<double>> rows(t_level - s_level);
    for (std::size_t k = s_level; k < t_level; ++k) {
        rows[k - s_level].resize(tree.nodes(k));
        for (std::size_t j = 0; j < tree.nodes(k); ++j) rows[k - s_level][j] = u(rng);
    }
    return TreeMeasure(tree, s_level, t_level, std::move(rows));
}

TreeMeasure TreeMeasure::paste(const TreeModel& tree, const TreeMeasure& head,
                               const TreeMeasure& tail) {
    if (head.t_level_ != tail.s_level_)
        throw std::invalid_argument("TreeMeasure::paste: windows must be adjacent");
    std::vector<std::vector<double>> rows;
    rows.reserve(tail.t_level_ - head.s_level_);
    for (const auto& row : head.q_) rows.push_back(row);
    for (const auto& row : tail.q_) rows.push_back(row);
    return TreeMeasure(tree, head.s_level_, tail.t_level_, std::move(rows));
}

TreeMeasure TreeMeasure::restrict(const TreeModel& tree, std::size_t a_level,
                                  std::size_t b_level) const {
    if (a_level < s_level_ || b_level > t_level_ || a_level > b_level)
        throw std::invalid_argument("TreeMeasure::restrict: sub-window out of range");
    std::vector<std::vector<double>> rows(q_.begin() + (a_level - s_level_),
                                          q_.begin() + (b_level - s_level_));
    return TreeMeasure(tree, a_level, b_level, std::move(rows));
}

double TreeMeasure::up_prob(const TreeModel& tree, std::size_t level, std::size_t node) const {
    return 0.5 * (1.0 + q(level, node) * tree.sqrt_dt());
}

OneStepDensity tree_one_step_density(const TreeModel& tree, const TreeMeasure& measure,
                                     std::size_t level, std::size_t node) {
    const double qdb = measure.q(level, node) * tree.sqrt_dt();
    return {1.0 + qdb, 1.0 - qdb};
}

std::vector<double> tree_expectation(const TreeModel& tree, const TreeMeasure* measure,
                                     std::vector<double> values, std::size_t from_level,
                                     std::size_t to_level) {
    if (to_level > from_level)
        throw std::invalid_argument("tree_expectation: requires to_level <= from_level");
    if (values.size() != tree.nodes(from_level))
        throw std::invalid_argument("tree_expectation: values have wrong node count");
    if (measure != nullptr &&
        (measure->s_level() > to_level || measure->t_level() < from_level))
        throw std::invalid_argument("tree_expectation: measure window does not cover the span");
    for (std::size_t k = from_level; k-- > to_level;) {
        std::vector<double> next(tree.nodes(k));
        for (std::size_t j = 0; j <= k; ++j) {
            const double pu = measure ? measure->up_prob(tree, k, j) : 0.5;
            const double up = values[j + 1];
            const double dn = values[j];
            if (std::isinf(up) || std::isinf(dn))
                next[j] = kInf;  // absorbing, and avoids inf * 0 at extreme kernels
            else
                next[j] = pu * up + (1.0 - pu) * dn;
        }
        values = std::move(next);
    }
    return values;
}

std::vector<double> tree_penalty(const TreeModel& tree, const DriverSpec& driver,
                                 const TreeMeasure& measure, double s, double t) {
    const TimeGrid& grid = tree.grid();
    const std::size_t k_s = grid.index_of(s);
    const std::size_t k_t = grid.index_of(t);
    if (k_s > k_t) throw std::invalid_argument("tree_penalty: requires s <= t");
    if (measure.s_level() > k_s || measure.t_level() < k_t)
        throw std::invalid_argument("tree_penalty: measure window does not cover [s, t)");
    const DriverSpec& d = driver.resolve(t);
    if (d.dim() != 1) throw std::invalid_argument("tree_penalty: lattice is one-dimensional");
    const double dt = tree.dt();

    std::vector<double> acc(tree.nodes(k_t), 0.0);
    for (std::size_t k = k_t; k-- > k_s;) {
        std::vector<double> next(tree.nodes(k));
        for (std::size_t j = 0; j <= k; ++j) {
            const double qv[1] = {measure.q(k, j)};
            const ConjugateValue conj =
                d.conjugate(d.is_volterra() ? s : grid.time(k), grid.time(k),
                            std::span<const double>(qv, 1));
            if (!conj.in_domain) {
                next[j] = kInf;
                continue;
            }
            const double pu = measure.up_prob(tree, k, j);
            const double up = acc[j + 1];
            const double dn = acc[j];
            const double cond = (std::isinf(up) || std::isinf(dn))
                                    ? kInf
                                    : pu * up + (1.0 - pu) * dn;
            next[j] = std::isinf(cond) ? kInf : conj.value * dt + cond;
        }
        acc = std::move(next);
    }
    return acc;
}

}  // namespace fdrm
