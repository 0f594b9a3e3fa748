#include "fdrm/quadrature.hpp"

#include <stdexcept>

namespace fdrm {

double integrate(const std::function<double(double)>& f, double a, double b) {
    if (b < a) throw std::invalid_argument("integrate: requires a <= b");
    if (a == b) return 0.0;
    constexpr int kPanels = 4096;  // even
    const double h = (b - a) / kPanels;
    double sum = f(a) + f(b);
    for (int i = 1; i < kPanels; ++i) sum += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

}  // namespace fdrm
