#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fdrm/tree.hpp"
#include "fdrm/tree_measure.hpp"

namespace fdrm {

/// Scenario measure given by a Girsanov kernel q(v, B_v) on a window [s, t]:
///   dQ/dP = exp( int_s^t q . dB - 1/2 int_s^t |q|^2 dv ),
/// so Q agrees with P on F_s and B - int q dv is a Q-Brownian motion.
struct MeasureSpec {
    double s = 0.0;
    double t = 0.0;
    std::size_t dim = 1;
    /// (time, state) -> q; state is the d-dimensional Brownian value.
    std::function<std::vector<double>(double, std::span<const double>)> kernel;
    std::string label = "measure";

    static MeasureSpec constant_kernel(double s, double t, std::vector<double> q);
    static MeasureSpec deterministic(double s, double t, std::size_t dim,
                                     std::function<std::vector<double>(double)> q_of_time);
};

/// Lattice version of the kernel (dim 1): q(k, j) = kernel(t_k, B(k, j)),
/// discretized with the one-step density 1 + q dB so that unit mass and the
/// F_s-consistency are exact on the tree.
TreeMeasure to_tree_measure(const TreeModel& tree, const MeasureSpec& measure);

}  // namespace fdrm
