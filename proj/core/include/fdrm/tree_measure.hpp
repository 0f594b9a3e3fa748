#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "fdrm/driver.hpp"
#include "fdrm/tree.hpp"

namespace fdrm {

/// Girsanov kernel q on the lattice over the window [s_level, t_level):
/// one-step density 1 + q dB, so the Q-probability of an up move at node
/// (k, j) is (1 + q(k,j) sqrt(dt))/2. Positivity requires |q| sqrt(dt) < 1
/// strictly; the measure then agrees with P on F_s and is equivalent on F_t.
class TreeMeasure {
public:
    TreeMeasure(const TreeModel& tree, std::size_t s_level, std::size_t t_level,
                std::vector<std::vector<double>> q);

    static TreeMeasure constant(const TreeModel& tree, std::size_t s_level, std::size_t t_level,
                                double q);
    /// q(k, j) = kernel(t_k, B(k, j)).
    static TreeMeasure from_kernel(const TreeModel& tree, std::size_t s_level,
                                   std::size_t t_level,
                                   const std::function<double(double, double)>& kernel);
    /// Nodewise uniform draws with |q| sqrt(dt) <= fraction < 1.
    static TreeMeasure random(const TreeModel& tree, std::size_t s_level, std::size_t t_level,
                              std::mt19937_64& rng, double fraction);

    /// m-stable pasting: the kernel of `head` on [s,t) followed by the
    /// kernel of `tail` on [t,u). Windows must be adjacent.
    static TreeMeasure paste(const TreeModel& tree, const TreeMeasure& head,
                             const TreeMeasure& tail);

    /// Restriction to the sub-window [a_level, b_level).
    TreeMeasure restrict(const TreeModel& tree, std::size_t a_level, std::size_t b_level) const;

    std::size_t s_level() const { return s_level_; }
    std::size_t t_level() const { return t_level_; }
    double q(std::size_t level, std::size_t node) const {
        return q_[level - s_level_][node];
    }
    double up_prob(const TreeModel& tree, std::size_t level, std::size_t node) const;

private:
    std::size_t s_level_;
    std::size_t t_level_;
    std::vector<std::vector<double>> q_;  // q_[k - s_level][node], k in [s_level, t_level)
};

/// E_Q[ values at from_level | F_{t at to_level} ] by backward induction.
/// Pass nullptr for Q to take expectations under P.
std::vector<double> tree_expectation(const TreeModel& tree, const TreeMeasure* measure,
                                     std::vector<double> values, std::size_t from_level,
                                     std::size_t to_level);

/// Minimal penalty alpha_{st}(Q) = E_Q[ sum_k g*(., t_k, q(k)) dt | level-s
/// node ] at the level-s nodes. Families resolve the member governing t;
/// Volterra drivers freeze the first argument at t_s. Out-of-domain kernel
/// values make the penalty +infinity (absorbing).
std::vector<double> tree_penalty(const TreeModel& tree, const DriverSpec& driver,
                                 const TreeMeasure& measure, double s, double t);

/// One-step density factors 1 + q dB out of node (k, j). The cumulative
/// density is a path functional, so only the one-step kernel is exact
/// nodewise; it is what every backward accumulation uses.
struct OneStepDensity {
    double up;
    double down;
};
OneStepDensity tree_one_step_density(const TreeModel& tree, const TreeMeasure& measure,
                                     std::size_t level, std::size_t node);

}  // namespace fdrm
