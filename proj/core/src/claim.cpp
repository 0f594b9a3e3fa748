#include "fdrm/claim.hpp"

#include <cmath>
#include <stdexcept>

#include "fdrm/errors.hpp"

namespace fdrm {

PathView::PathView(std::span<const double> times, std::span<const double> values, std::size_t dim)
    : times_(times), values_(values), dim_(dim) {
    if (dim_ == 0) throw std::invalid_argument("PathView: dim must be positive");
    if (values_.size() != times_.size() * dim_)
        throw std::invalid_argument("PathView: values/times size mismatch");
}

PathView PathView::prefix(std::size_t n) const {
    if (n > points()) throw std::invalid_argument("PathView: prefix longer than path");
    return PathView(times_.subspan(0, n), values_.subspan(0, n * dim_), dim_);
}

std::size_t PathView::index_of(double t) const {
    const double tol = 1e-12 * std::max(1.0, std::abs(t));
    for (std::size_t i = 0; i < points(); ++i) {
        if (std::abs(times_[i] - t) <= tol) return i;
    }
    throw std::invalid_argument("PathView: time not on the path");
}

ClaimSpec::ClaimSpec(PayoffFn payoff, double u, std::string label)
    : payoff_(std::move(payoff)), u_(u), label_(std::move(label)) {
    if (!payoff_) throw std::invalid_argument("ClaimSpec: payoff must be callable");
    if (u_ < 0.0) throw std::invalid_argument("ClaimSpec: u must be non-negative");
}

ClaimSpec ClaimSpec::constant(double c, double u) {
    ClaimSpec claim([c](const PathView&) { return c; }, u, "const(" + std::to_string(c) + ")");
    claim.affine_ = AffineForm{c, {}};
    return claim;
}

ClaimSpec ClaimSpec::terminal_brownian(std::vector<double> w, double u) {
    if (w.empty()) throw std::invalid_argument("ClaimSpec: w must be non-empty");
    ClaimSpec claim(
        [w](const PathView& path) {
            double r = 0.0;
            for (std::size_t c = 0; c < w.size(); ++c) r += w[c] * path.back(c);
            return r;
        },
        u, "w.B(" + std::to_string(u) + ")");
    claim.affine_ = AffineForm{0.0, std::move(w)};
    return claim;
}

ClaimSpec ClaimSpec::call(double strike, double u) {
    return ClaimSpec(
        [strike](const PathView& path) { return std::max(path.back() - strike, 0.0); }, u,
        "call(" + std::to_string(strike) + ")");
}

ClaimSpec ClaimSpec::terminal(std::function<double(double)> f, double u, std::string label) {
    if (!f) throw std::invalid_argument("ClaimSpec: f must be callable");
    return ClaimSpec([f = std::move(f)](const PathView& path) { return f(path.back()); }, u,
                     std::move(label));
}

double ClaimSpec::evaluate(const PathView& path) const {
    const std::size_t iu = path.index_of(u_);  // throws if the path stops short of u
    const double value = payoff_(path.prefix(iu + 1));
    if (!std::isfinite(value)) throw numerical_error("ClaimSpec: non-finite payoff");
    return value;
}

}  // namespace fdrm
