#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fdrm {

/// Read-only view of one path sampled at grid times. Values are laid out
/// time-major: value(i, c) = values[i*dim + c].
class PathView {
public:
    PathView(std::span<const double> times, std::span<const double> values, std::size_t dim);

    std::size_t points() const { return times_.size(); }
    std::size_t dim() const { return dim_; }
    double time(std::size_t i) const { return times_[i]; }
    double value(std::size_t i, std::size_t coord = 0) const { return values_[i * dim_ + coord]; }
    double back(std::size_t coord = 0) const { return value(points() - 1, coord); }

    /// View of the first n points.
    PathView prefix(std::size_t n) const;
    /// Index i with time(i) == t (tolerance 1e-12 * max(1,|t|)); throws
    /// std::invalid_argument if the path does not contain t.
    std::size_t index_of(double t) const;

private:
    std::span<const double> times_;
    std::span<const double> values_;
    std::size_t dim_;
};

using PayoffFn = std::function<double(const PathView&)>;

/// Financial position X in L^2(F_u). The payoff functional receives the
/// path truncated at u, so it cannot read values after the claim's
/// measurability time.
class ClaimSpec {
public:
    /// X = c0 + w . B_u when the claim has this structure; enables closed
    /// forms. An empty w means no Brownian term.
    struct AffineForm {
        double c0 = 0.0;
        std::vector<double> w;
    };

    ClaimSpec(PayoffFn payoff, double u, std::string label);

    static ClaimSpec constant(double c, double u);
    static ClaimSpec terminal_brownian(std::vector<double> w, double u);  // w . B_u
    static ClaimSpec call(double strike, double u);                      // (B_u - K)^+, dim 1
    /// f(B_u), dim 1.
    static ClaimSpec terminal(std::function<double(double)> f, double u, std::string label);

    double u() const { return u_; }
    const std::string& label() const { return label_; }
    const std::optional<AffineForm>& affine_form() const { return affine_; }

    /// Payoff on the path truncated at u. Requires the path to cover u.
    /// Throws numerical_error on a non-finite payoff.
    double evaluate(const PathView& path) const;

private:
    PayoffFn payoff_;
    double u_;
    std::string label_;
    std::optional<AffineForm> affine_;
};

}  // namespace fdrm
