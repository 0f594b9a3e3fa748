#include "fdrm/time_grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fdrm {

namespace {
bool uniform_spacing(const std::vector<double>& times) {
    const double dt0 = times[1] - times[0];
    for (std::size_t k = 1; k + 1 < times.size(); ++k) {
        if (std::abs(times[k + 1] - times[k] - dt0) > 1e-12 * std::max(1.0, dt0)) return false;
    }
    return true;
}
}  // namespace

TimeGrid TimeGrid::uniform(double horizon, std::size_t steps) {
    if (!(horizon > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be positive");
    if (steps == 0) throw std::invalid_argument("TimeGrid: need at least one step");
    std::vector<double> times(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k)
        times[k] = horizon * static_cast<double>(k) / static_cast<double>(steps);
    return TimeGrid(std::move(times));
}

TimeGrid::TimeGrid(std::vector<double> times) : times_(std::move(times)) {
    if (times_.size() < 2) throw std::invalid_argument("TimeGrid: need at least two points");
    if (times_.front() != 0.0) throw std::invalid_argument("TimeGrid: first point must be 0");
    for (std::size_t k = 0; k + 1 < times_.size(); ++k) {
        if (!(times_[k] < times_[k + 1]))
            throw std::invalid_argument("TimeGrid: times must be strictly increasing");
    }
    uniform_ = uniform_spacing(times_);
}

std::size_t TimeGrid::index_of(double t) const {
    const double tol = 1e-12 * std::max(1.0, horizon());
    auto it = std::lower_bound(times_.begin(), times_.end(), t - tol);
    if (it != times_.end() && std::abs(*it - t) <= tol)
        return static_cast<std::size_t>(it - times_.begin());
    throw std::invalid_argument("TimeGrid: " + std::to_string(t) + " is not a grid point");
}

bool TimeGrid::contains(double t) const {
    const double tol = 1e-12 * std::max(1.0, horizon());
    auto it = std::lower_bound(times_.begin(), times_.end(), t - tol);
    return it != times_.end() && std::abs(*it - t) <= tol;
}

}  // namespace fdrm
