#include "fdrm/premium.hpp"

#include <cmath>
#include <stdexcept>

namespace fdrm {

TreeMeasure build_premium_measure(const TreeModel& tree, const DriverSpec& driver,
                                  const TreeSolution& sol_long, const TreeSolution& sol_short,
                                  double s, double t, double u) {
    const TimeGrid& grid = tree.grid();
    const std::size_t k_s = grid.index_of(s);
    const std::size_t k_t = grid.index_of(t);
    const std::size_t k_u = grid.index_of(u);
    if (!(k_s <= k_t && k_t <= k_u))
        throw std::invalid_argument("build_premium_measure: requires s <= t <= u");
    if (sol_long.horizon_level != k_u || sol_short.horizon_level != k_t)
        throw std::invalid_argument("build_premium_measure: solutions do not match (t, u)");
    const DriverSpec& d = driver.resolve(u);
    if (d.supports_y())
        throw std::invalid_argument(
            "build_premium_measure: premium kernels need drivers without y-dependence");
    if (d.dim() != 1)
        throw std::invalid_argument("build_premium_measure: lattice is one-dimensional");

    std::vector<std::vector<double>> rows(k_u - k_s);
    for (std::size_t k = k_s; k < k_u; ++k) {
        rows[k - k_s].resize(tree.nodes(k));
        const double tk = grid.time(k);
        const double frozen = d.is_volterra() ? s : tk;
        for (std::size_t j = 0; j <= k; ++j) {
            const double z_long = sol_long.z_at(k, j);
            const double z_short = k < k_t ? sol_short.z_at(k, j) : 0.0;
            const double dz = z_long - z_short;
            double q = 0.0;
            if (std::abs(dz) >= 1e-12) {
                const double zl[1] = {z_long};
                const double zs[1] = {z_short};
                q = (d(frozen, tk, 0.0, std::span<const double>(zl, 1)) -
                     d(frozen, tk, 0.0, std::span<const double>(zs, 1))) /
                    dz;
            }
            rows[k - k_s][j] = q;
        }
    }
    return TreeMeasure(tree, k_s, k_u, std::move(rows));  // validates positivity
}

}  // namespace fdrm
