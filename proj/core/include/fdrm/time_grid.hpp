#pragma once

#include <cstddef>
#include <vector>

namespace fdrm {

/// Partition 0 = t_0 < t_1 < ... < t_N = T of a finite horizon.
///
/// Every evaluation time (s, t, u) accepted by the solvers must be a grid
/// point; index_of performs the lookup and rejects off-grid times.
class TimeGrid {
public:
    static TimeGrid uniform(double horizon, std::size_t steps);

    /// Grid from explicit times. Requires times[0] == 0, strictly
    /// increasing, at least two points.
    explicit TimeGrid(std::vector<double> times);

    double horizon() const { return times_.back(); }
    std::size_t steps() const { return times_.size() - 1; }
    double time(std::size_t k) const { return times_[k]; }
    double dt(std::size_t k) const { return times_[k + 1] - times_[k]; }
    bool is_uniform() const { return uniform_; }
    const std::vector<double>& times() const { return times_; }

    /// Index of a grid time, matched to an absolute tolerance of
    /// 1e-12 * max(1, T). Throws std::invalid_argument otherwise.
    std::size_t index_of(double t) const;
    bool contains(double t) const;

private:
    std::vector<double> times_;
    bool uniform_ = false;
};

}  // namespace fdrm
