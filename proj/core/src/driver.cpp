#include "fdrm/driver.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "fdrm/errors.hpp"

namespace fdrm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dot(std::span<const double> a, std::span<const double> b) {
    double r = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) r += a[i] * b[i];
    return r;
}

double norm2(std::span<const double> v) { return dot(v, v); }

// Effective-domain membership for conjugates whose domain is a single atom.
bool matches_atom(std::span<const double> q, std::span<const double> atom) {
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double tol = 1e-9 * (1.0 + std::abs(atom[i]));
        if (std::abs(q[i] - atom[i]) > tol) return false;
    }
    return true;
}

void require_time_order(double t, double s) {
    if (t > s + 1e-12) throw std::invalid_argument("DriverSpec: requires t <= s");
}

}  // namespace

const char* driver_kind_name(DriverKind kind) {
    switch (kind) {
        case DriverKind::constant: return "constant";
        case DriverKind::linear: return "linear";
        case DriverKind::entropic: return "entropic";
        case DriverKind::volterra_linear: return "volterra_linear";
        case DriverKind::volterra_quadratic: return "volterra_quadratic";
        case DriverKind::family: return "family";
        case DriverKind::custom: return "custom";
    }
    return "unknown";
}

DriverSpec DriverSpec::constant(double a) { return DriverSpec(Payload(Constant{a})); }

DriverSpec DriverSpec::linear(std::vector<double> b, double a) {
    if (b.empty()) throw std::invalid_argument("DriverSpec::linear: b must be non-empty");
    return DriverSpec(Payload(Linear{std::move(b), a}));
}

DriverSpec DriverSpec::entropic(double b, TimeFn a) {
    if (!(b > 0.0)) throw std::invalid_argument("DriverSpec::entropic: b must be positive");
    if (!a) throw std::invalid_argument("DriverSpec::entropic: a must be callable");
    return DriverSpec(Payload(Entropic{b, std::move(a)}));
}

DriverSpec DriverSpec::volterra_linear(VectorSurfaceFn a, SurfaceFn b, std::size_t dim) {
    if (!a || !b) throw std::invalid_argument("DriverSpec::volterra_linear: a, b must be callable");
    if (dim == 0) throw std::invalid_argument("DriverSpec::volterra_linear: dim must be positive");
    return DriverSpec(Payload(VolterraLinear{std::move(a), std::move(b), dim}));
}

DriverSpec DriverSpec::volterra_quadratic(TimeFn b, SurfaceFn a) {
    if (!a || !b) throw std::invalid_argument("DriverSpec::volterra_quadratic: a, b must be callable");
    return DriverSpec(Payload(VolterraQuadratic{std::move(b), std::move(a)}));
}

DriverSpec DriverSpec::family(std::map<double, DriverSpec> members) {
    if (members.empty()) throw std::invalid_argument("DriverSpec::family: members must be non-empty");
    std::size_t dim = members.begin()->second.dim();
    for (const auto& [u, d] : members) {
        if (d.is_family()) throw std::invalid_argument("DriverSpec::family: members cannot be families");
        if (d.dim() != dim) throw std::invalid_argument("DriverSpec::family: members must share dim");
    }
    return DriverSpec(Payload(Family{
        std::make_shared<const std::map<double, DriverSpec>>(std::move(members))}));
}

DriverSpec DriverSpec::custom(CustomFn g, CustomOptions options) {
    if (!g) throw std::invalid_argument("DriverSpec::custom: callback must be callable");
    if (options.dim == 0) throw std::invalid_argument("DriverSpec::custom: dim must be positive");
    return DriverSpec(Payload(Custom{std::move(g), std::move(options)}));
}

DriverKind DriverSpec::kind() const {
    return static_cast<DriverKind>(payload_.index());
}

std::size_t DriverSpec::dim() const {
    switch (kind()) {
        case DriverKind::linear: return std::get<Linear>(payload_).b.size();
        case DriverKind::volterra_linear: return std::get<VolterraLinear>(payload_).dim;
        case DriverKind::family: return members().begin()->second.dim();
        case DriverKind::custom: return std::get<Custom>(payload_).options.dim;
        default: return 1;
    }
}

bool DriverSpec::supports_y() const {
    if (kind() == DriverKind::custom) return std::get<Custom>(payload_).options.supports_y;
    if (kind() == DriverKind::family) {
        for (const auto& [u, d] : members())
            if (d.supports_y()) return true;
    }
    return false;
}

bool DriverSpec::is_volterra() const {
    switch (kind()) {
        case DriverKind::volterra_linear:
        case DriverKind::volterra_quadratic: return true;
        case DriverKind::custom: return std::get<Custom>(payload_).options.volterra;
        case DriverKind::family:
            for (const auto& [u, d] : members())
                if (d.is_volterra()) return true;
            return false;
        default: return false;
    }
}

std::optional<double> DriverSpec::lipschitz_in_z() const {
    switch (kind()) {
        case DriverKind::constant: return 0.0;
        case DriverKind::linear: {
            const auto& p = std::get<Linear>(payload_);
            return std::sqrt(norm2(p.b));
        }
        case DriverKind::custom: return std::get<Custom>(payload_).options.lipschitz;
        default: return std::nullopt;  // quadratic kinds are only locally Lipschitz
    }
}

std::string DriverSpec::label() const {
    if (kind() == DriverKind::custom) return std::get<Custom>(payload_).options.label;
    return driver_kind_name(kind());
}

double DriverSpec::operator()(double t, double s, double y, std::span<const double> z) const {
    require_time_order(t, s);
    if (z.size() != dim()) throw std::invalid_argument("DriverSpec: z has wrong dimension");
    double value = 0.0;
    switch (kind()) {
        case DriverKind::constant:
            value = std::get<Constant>(payload_).a;
            break;
        case DriverKind::linear: {
            const auto& p = std::get<Linear>(payload_);
            value = dot(p.b, z) + p.a;
            break;
        }
        case DriverKind::entropic: {
            const auto& p = std::get<Entropic>(payload_);
            value = 0.5 * p.b * norm2(z) + p.a(s);
            break;
        }
        case DriverKind::volterra_linear: {
            const auto& p = std::get<VolterraLinear>(payload_);
            const std::vector<double> a = p.a(t, s);
            if (a.size() != p.dim)
                throw std::invalid_argument("DriverSpec: a(t,s) has wrong dimension");
            value = dot(a, z) + p.b(t, s);
            break;
        }
        case DriverKind::volterra_quadratic: {
            const auto& p = std::get<VolterraQuadratic>(payload_);
            const double b = p.b(t);
            if (!(b > 0.0)) throw numerical_error("DriverSpec: b(t) must stay positive");
            value = 0.5 * b * norm2(z) + p.a(t, s);
            break;
        }
        case DriverKind::family:
            throw std::invalid_argument(
                "DriverSpec: select a family member by horizon before evaluation");
        case DriverKind::custom:
            value = std::get<Custom>(payload_).g(t, s, y, z);
            break;
    }
    if (!std::isfinite(value)) throw numerical_error("DriverSpec: non-finite driver value");
    return value;
}

double DriverSpec::zero_section(double t, double s) const {
    const std::vector<double> zeros(dim(), 0.0);
    return (*this)(t, s, 0.0, zeros);
}

ConjugateValue DriverSpec::conjugate(double t, double s, std::span<const double> q) const {
    require_time_order(t, s);
    if (q.size() != dim()) throw std::invalid_argument("DriverSpec: q has wrong dimension");
    switch (kind()) {
        case DriverKind::constant: {
            const std::vector<double> zero(q.size(), 0.0);
            if (matches_atom(q, zero)) return {-std::get<Constant>(payload_).a, true};
            return {kInf, false};
        }
        case DriverKind::linear: {
            const auto& p = std::get<Linear>(payload_);
            if (matches_atom(q, p.b)) return {-p.a, true};
            return {kInf, false};
        }
        case DriverKind::entropic: {
            const auto& p = std::get<Entropic>(payload_);
            return {0.5 * norm2(q) / p.b - p.a(s), true};
        }
        case DriverKind::volterra_linear: {
            const auto& p = std::get<VolterraLinear>(payload_);
            const std::vector<double> a = p.a(t, s);
            if (matches_atom(q, a)) return {-p.b(t, s), true};
            return {kInf, false};
        }
        case DriverKind::volterra_quadratic: {
            const auto& p = std::get<VolterraQuadratic>(payload_);
            const double b = p.b(t);
            if (!(b > 0.0)) throw numerical_error("DriverSpec: b(t) must stay positive");
            return {0.5 * norm2(q) / b - p.a(t, s), true};
        }
        case DriverKind::family:
            throw std::invalid_argument(
                "DriverSpec: select a family member by horizon before taking conjugates");
        case DriverKind::custom: {
            if (dim() != 1)
                throw std::invalid_argument(
                    "DriverSpec: numerical conjugate supports dim 1 custom drivers only");
            return conjugate_numerical(t, s, q[0]);
        }
    }
    return {kInf, false};
}

// sup_z { q z - g(t,s,0,z) } on [-R, R]: coarse grid, golden-section
// refinement (the objective is concave in z for convex drivers), and an
// unboundedness test comparing the inner and outer half maxima.
ConjugateValue DriverSpec::conjugate_numerical(double t, double s, double q) const {
    const auto& p = std::get<Custom>(payload_);
    const auto objective = [&](double z) {
        const double zz[1] = {z};
        return q * z - p.g(t, s, 0.0, std::span<const double>(zz, 1));
    };
    constexpr double kRange = 64.0;
    constexpr int kPoints = 513;
    double best = -kInf, best_z = 0.0, inner_best = -kInf;
    for (int i = 0; i < kPoints; ++i) {
        const double z = -kRange + 2.0 * kRange * i / (kPoints - 1);
        const double v = objective(z);
        if (v > best) { best = v; best_z = z; }
        if (std::abs(z) <= 0.5 * kRange && v > inner_best) inner_best = v;
    }
    if (best > inner_best + 1e-7 * (1.0 + std::abs(inner_best))) return {kInf, false};
    // Golden-section over the bracket around the best grid point.
    const double h = 2.0 * kRange / (kPoints - 1);
    double lo = best_z - h, hi = best_z + h;
    constexpr double kGolden = 0.6180339887498949;
    double x1 = hi - kGolden * (hi - lo), x2 = lo + kGolden * (hi - lo);
    double f1 = objective(x1), f2 = objective(x2);
    for (int iter = 0; iter < 80; ++iter) {
        if (f1 < f2) {
            lo = x1; x1 = x2; f1 = f2;
            x2 = lo + kGolden * (hi - lo); f2 = objective(x2);
        } else {
            hi = x2; x2 = x1; f2 = f1;
            x1 = hi - kGolden * (hi - lo); f1 = objective(x1);
        }
    }
    return {std::max({best, f1, f2}), true};
}

bool DriverSpec::has_smooth_conjugate() const {
    return kind() == DriverKind::entropic || kind() == DriverKind::volterra_quadratic;
}

const DriverSpec& DriverSpec::member(double horizon) const {
    const auto& m = members();
    for (const auto& [u, d] : m) {
        if (std::abs(u - horizon) <= 1e-12 * std::max(1.0, std::abs(u))) return d;
    }
    throw std::invalid_argument("DriverSpec: no family member for the requested horizon");
}

const std::map<double, DriverSpec>& DriverSpec::members() const {
    if (!is_family()) throw std::invalid_argument("DriverSpec: not a family");
    return *std::get<Family>(payload_).members;
}

const DriverSpec& DriverSpec::resolve(double horizon) const {
    return is_family() ? member(horizon) : *this;
}

}  // namespace fdrm
