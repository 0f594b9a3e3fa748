#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace fdrm {

enum class DriverKind {
    constant,            // g = a
    linear,              // g = b.z + a
    entropic,            // g = (b/2)|z|^2 + a(s), b > 0
    volterra_linear,     // g = a(t,s).z + b(t,s)
    volterra_quadratic,  // g = (b(t)/2)|z|^2 + a(t,s), b(t) > 0
    family,              // horizon u -> member driver
    custom,              // user callback
};

const char* driver_kind_name(DriverKind kind);

/// g*(t,s,q) = sup_z { q.z - g(t,s,z) }. value is +infinity when q lies
/// outside the effective domain.
struct ConjugateValue {
    double value;
    bool in_domain;
};

using TimeFn = std::function<double(double)>;                  // s -> real
using SurfaceFn = std::function<double(double, double)>;       // (t, s) -> real, t <= s
using VectorSurfaceFn = std::function<std::vector<double>(double, double)>;
using CustomFn = std::function<double(double, double, double, std::span<const double>)>;

/// Generator of a dynamic risk measure rho_{tu}(X) = Y_t where
///   Y_r = -X + int_r^u g(., v, Z_v) dv - int_r^u Z_v dB_v.
///
/// Volterra kinds carry an extra frozen first time argument (the evaluation
/// time of the risk measure); for the other kinds that argument is ignored.
/// All evaluations are deterministic functions of (t, s, y, z).
class DriverSpec {
public:
    struct CustomOptions {
        std::size_t dim = 1;
        bool supports_y = false;
        bool volterra = false;
        std::optional<double> lipschitz;
        std::string label = "custom";
    };

    static DriverSpec constant(double a);
    static DriverSpec linear(std::vector<double> b, double a);
    static DriverSpec entropic(double b, TimeFn a);
    static DriverSpec volterra_linear(VectorSurfaceFn a, SurfaceFn b, std::size_t dim = 1);
    static DriverSpec volterra_quadratic(TimeFn b, SurfaceFn a);
    static DriverSpec family(std::map<double, DriverSpec> members);
    static DriverSpec custom(CustomFn g, CustomOptions options);

    DriverKind kind() const;
    std::size_t dim() const;
    bool supports_y() const;
    /// True when the driver depends on the frozen first time argument, i.e.
    /// the risk measure is of Volterra type and must be solved per
    /// evaluation level.
    bool is_volterra() const;
    bool is_family() const { return kind() == DriverKind::family; }
    std::optional<double> lipschitz_in_z() const;
    std::string label() const;

    /// g(t, s, y, z). Requires t <= s and z.size() == dim(). Throws
    /// numerical_error if the value is not finite.
    double operator()(double t, double s, double y, std::span<const double> z) const;
    double zero_section(double t, double s) const;

    /// Closed form for the catalog kinds; numerical (grid plus
    /// golden-section, dim 1 only) for custom drivers.
    ConjugateValue conjugate(double t, double s, std::span<const double> q) const;
    bool has_smooth_conjugate() const;  // conjugate differentiable in q everywhere

    /// Family member governing horizon u. Throws std::invalid_argument if
    /// this is not a family or u matches no key (tolerance 1e-12).
    const DriverSpec& member(double horizon) const;
    const std::map<double, DriverSpec>& members() const;
    /// this for plain drivers, member(horizon) for families.
    const DriverSpec& resolve(double horizon) const;

private:
    struct Constant { double a; };
    struct Linear { std::vector<double> b; double a; };
    struct Entropic { double b; TimeFn a; };
    struct VolterraLinear { VectorSurfaceFn a; SurfaceFn b; std::size_t dim; };
    struct VolterraQuadratic { TimeFn b; SurfaceFn a; };
    struct Family { std::shared_ptr<const std::map<double, DriverSpec>> members; };
    struct Custom { CustomFn g; CustomOptions options; };

    using Payload = std::variant<Constant, Linear, Entropic, VolterraLinear,
                                 VolterraQuadratic, Family, Custom>;

    explicit DriverSpec(Payload payload) : payload_(std::move(payload)) {}

    ConjugateValue conjugate_numerical(double t, double s, double q) const;

    Payload payload_;
};

}  // namespace fdrm
