#include "fdrm/closed_form.hpp"

#include <cmath>
#include <stdexcept>

#include "fdrm/quadrature.hpp"

namespace fdrm {

namespace {
double weighted_norm2(const std::vector<double>& w) {
    double r = 0.0;
    for (double x : w) r += x * x;
    return r;
}
}  // namespace

std::optional<double> closed_form_value(const DriverSpec& driver, const ClaimSpec& claim,
                                        double s, double horizon) {
    if (s != 0.0)
        throw std::invalid_argument("closed_form_value: formulas are evaluated at s = 0");
    if (claim.u() > horizon + 1e-12)
        throw std::invalid_argument("closed_form_value: claim measurable after the horizon");
    const auto& form = claim.affine_form();
    if (!form) return std::nullopt;
    const double c0 = form->c0;
    const std::vector<double>& w = form->w;
    const double u = claim.u();
    const DriverSpec& d = driver.resolve(horizon);
    if (!w.empty() && w.size() != d.dim())
        throw std::invalid_argument("closed_form_value: claim/driver dimension mismatch");

    switch (d.kind()) {
        case DriverKind::constant: {
            const double a = d.zero_section(0.0, 0.0);
            return -c0 + a * horizon;
        }
        case DriverKind::linear: {
            // Slope recovered from the driver itself: g(e_i) - g(0) = b_i.
            const double a = d.zero_section(0.0, 0.0);
            double drift = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) {
                std::vector<double> e(d.dim(), 0.0);
                e[i] = 1.0;
                drift += w[i] * (d(0.0, 0.0, 0.0, e) - a);
            }
            return -c0 - drift * u + a * horizon;
        }
        case DriverKind::entropic: {
            // g = (b/2)|z|^2 + a(s): b from g(e_1) - g(0) = b/2.
            const double a0 = d.zero_section(0.0, 0.0);
            std::vector<double> e(d.dim(), 0.0);
            e[0] = 1.0;
            const double b = 2.0 * (d(0.0, 0.0, 0.0, e) - a0);
            const double ia = integrate([&](double v) { return d.zero_section(v, v); }, 0.0,
                                        horizon);
            return -c0 + 0.5 * b * weighted_norm2(w) * u + ia;
        }
        case DriverKind::volterra_linear: {
            double drift = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) {
                drift += w[i] * integrate(
                                    [&](double v) {
                                        std::vector<double> e(d.dim(), 0.0);
                                        e[i] = 1.0;
                                        return d(0.0, v, 0.0, e) - d.zero_section(0.0, v);
                                    },
                                    0.0, u);
            }
            const double ib = integrate([&](double v) { return d.zero_section(0.0, v); }, 0.0,
                                        horizon);
            return -c0 - drift + ib;
        }
        case DriverKind::volterra_quadratic: {
            const double a00 = d.zero_section(0.0, 0.0);
            std::vector<double> e(d.dim(), 0.0);
            e[0] = 1.0;
            const double b0 = 2.0 * (d(0.0, 0.0, 0.0, e) - a00);
            const double ia = integrate([&](double v) { return d.zero_section(0.0, v); }, 0.0,
                                        horizon);
            return -c0 + 0.5 * b0 * weighted_norm2(w) * u + ia;
        }
        default:
            return std::nullopt;
    }
}

}  // namespace fdrm
