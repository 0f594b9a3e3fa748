#pragma once

#include <functional>

namespace fdrm {

/// Composite Simpson rule with 4096 panels; adequate for the smooth
/// deterministic coefficient functions used by the closed forms
/// (error O((b-a)^5 / n^4)).
double integrate(const std::function<double(double)>& f, double a, double b);

}  // namespace fdrm
