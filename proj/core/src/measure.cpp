#include "fdrm/measure.hpp"

#include <stdexcept>

namespace fdrm {

MeasureSpec MeasureSpec::constant_kernel(double s, double t, std::vector<double> q) {
    if (q.empty()) throw std::invalid_argument("MeasureSpec: q must be non-empty");
    MeasureSpec m;
    m.s = s;
    m.t = t;
    m.dim = q.size();
    m.kernel = [q = std::move(q)](double, std::span<const double>) { return q; };
    return m;
}

MeasureSpec MeasureSpec::deterministic(double s, double t, std::size_t dim,
                                       std::function<std::vector<double>(double)> q_of_time) {
    if (!q_of_time) throw std::invalid_argument("MeasureSpec: kernel must be callable");
    MeasureSpec m;
    m.s = s;
    m.t = t;
    m.dim = dim;
    m.kernel = [fn = std::move(q_of_time)](double v, std::span<const double>) { return fn(v); };
    return m;
}

TreeMeasure to_tree_measure(const TreeModel& tree, const MeasureSpec& measure) {
    if (measure.dim != 1)
        throw std::invalid_argument("to_tree_measure: lattice kernels are one-dimensional");
    if (!measure.kernel) throw std::invalid_argument("to_tree_measure: kernel must be callable");
    const std::size_t s_level = tree.grid().index_of(measure.s);
    const std::size_t t_level = tree.grid().index_of(measure.t);
    return TreeMeasure::from_kernel(tree, s_level, t_level, [&](double time, double b) {
        const double state[1] = {b};
        const std::vector<double> q = measure.kernel(time, std::span<const double>(state, 1));
        if (q.size() != 1) throw std::invalid_argument("to_tree_measure: kernel dim mismatch");
        return q[0];
    });
}

}  // namespace fdrm
