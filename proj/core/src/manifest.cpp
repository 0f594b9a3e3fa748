#include "fdrm/manifest.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "fdrm/time_grid.hpp"

namespace fdrm {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& pointer, const std::string& message) {
    throw ManifestError(pointer, message);
}

std::string idx(const std::string& pointer, std::size_t i) {
    return pointer + "/" + std::to_string(i);
}

const json* find_member(const json& obj, const std::string& pointer, const char* key) {
    if (!obj.is_object()) fail(pointer, "expected an object");
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

const json& require_member(const json& obj, const std::string& pointer, const char* key) {
    const json* j = find_member(obj, pointer, key);
    if (!j) fail(pointer + "/" + key, "missing required field");
    return *j;
}

void check_keys(const json& obj, const std::string& pointer,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) fail(pointer, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed)
            if (it.key() == key) {
                known = true;
                break;
            }
        if (!known) fail(pointer + "/" + it.key(), "unknown field");
    }
}

double as_number(const json& j, const std::string& pointer) {
    if (!j.is_number()) fail(pointer, "expected a number");
    return j.get<double>();
}

std::uint64_t as_uint(const json& j, const std::string& pointer) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer() && j.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(j.get<std::int64_t>());
    fail(pointer, "expected a non-negative integer");
}

std::string as_string(const json& j, const std::string& pointer) {
    if (!j.is_string()) fail(pointer, "expected a string");
    return j.get<std::string>();
}

bool as_bool(const json& j, const std::string& pointer) {
    if (!j.is_boolean()) fail(pointer, "expected a boolean");
    return j.get<bool>();
}

double number_field(const json& obj, const std::string& pointer, const char* key) {
    return as_number(require_member(obj, pointer, key), pointer + "/" + key);
}

double number_field_or(const json& obj, const std::string& pointer, const char* key,
                       double fallback) {
    const json* j = find_member(obj, pointer, key);
    return j ? as_number(*j, pointer + "/" + key) : fallback;
}

std::uint64_t uint_field(const json& obj, const std::string& pointer, const char* key) {
    return as_uint(require_member(obj, pointer, key), pointer + "/" + key);
}

std::uint64_t uint_field_or(const json& obj, const std::string& pointer, const char* key,
                            std::uint64_t fallback) {
    const json* j = find_member(obj, pointer, key);
    return j ? as_uint(*j, pointer + "/" + key) : fallback;
}

bool bool_field_or(const json& obj, const std::string& pointer, const char* key,
                   bool fallback) {
    const json* j = find_member(obj, pointer, key);
    return j ? as_bool(*j, pointer + "/" + key) : fallback;
}

std::string string_field(const json& obj, const std::string& pointer, const char* key) {
    return as_string(require_member(obj, pointer, key), pointer + "/" + key);
}

std::vector<double> as_numbers(const json& j, const std::string& pointer) {
    if (!j.is_array()) fail(pointer, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], idx(pointer, i)));
    return out;
}

/// A number or an array of numbers, as a vector.
std::vector<double> vector_field(const json& obj, const std::string& pointer, const char* key) {
    const json& j = require_member(obj, pointer, key);
    const std::string p = pointer + "/" + key;
    if (j.is_number()) return {j.get<double>()};
    std::vector<double> out = as_numbers(j, p);
    if (out.empty()) fail(p, "expected at least one entry");
    return out;
}

/// Deterministic time-function documents: a bare number, {"const": c},
/// {"poly": [c0, c1, ...]} (coefficients in the evaluation time), or
/// {"exp": {"scale": A, "rate": r}} for A e^{-r s}.
TimeFn parse_time_fn(const json& j, const std::string& pointer) {
    if (j.is_number()) {
        const double c = j.get<double>();
        return [c](double) { return c; };
    }
    check_keys(j, pointer, {"const", "poly", "exp"});
    if (j.size() != 1) fail(pointer, "function document needs exactly one of const/poly/exp");
    if (const json* c = find_member(j, pointer, "const")) {
        const double v = as_number(*c, pointer + "/const");
        return [v](double) { return v; };
    }
    if (const json* p = find_member(j, pointer, "poly")) {
        const std::vector<double> coefs = as_numbers(*p, pointer + "/poly");
        if (coefs.empty()) fail(pointer + "/poly", "expected at least one coefficient");
        return [coefs](double s) {
            double acc = 0.0, power = 1.0;
            for (double c : coefs) {
                acc += c * power;
                power *= s;
            }
            return acc;
        };
    }
    const json& e = require_member(j, pointer, "exp");
    const double scale = number_field(e, pointer + "/exp", "scale");
    const double rate = number_field(e, pointer + "/exp", "rate");
    return [scale, rate](double s) { return scale * std::exp(-rate * s); };
}

/// Surface documents add {"decay": {"scale": A, "rate": r}} for
/// A e^{-r (s - t)}, the only form with genuine first-argument dependence;
/// the time-function forms apply to the second argument.
SurfaceFn parse_surface_fn(const json& j, const std::string& pointer) {
    if (j.is_object()) {
        if (const json* d = find_member(j, pointer, "decay")) {
            if (j.size() != 1)
                fail(pointer, "function document needs exactly one of const/poly/exp/decay");
            const double scale = number_field(*d, pointer + "/decay", "scale");
            const double rate = number_field(*d, pointer + "/decay", "rate");
            return [scale, rate](double t, double s) {
                return scale * std::exp(-rate * (s - t));
            };
        }
    }
    TimeFn f = parse_time_fn(j, pointer);
    return [f](double, double s) { return f(s); };
}

DriverSpec parse_driver(const json& j, const std::string& pointer) {
    const std::string kind = string_field(j, pointer, "kind");
    if (kind == "constant") {
        check_keys(j, pointer, {"name", "kind", "a"});
        return DriverSpec::constant(number_field(j, pointer, "a"));
    }
    if (kind == "linear") {
        check_keys(j, pointer, {"name", "kind", "b", "a"});
        return DriverSpec::linear(vector_field(j, pointer, "b"), number_field(j, pointer, "a"));
    }
    if (kind == "entropic") {
        check_keys(j, pointer, {"name", "kind", "b", "a"});
        const double b = number_field(j, pointer, "b");
        if (!(b > 0.0)) fail(pointer + "/b", "entropic b must be positive");
        return DriverSpec::entropic(
            b, parse_time_fn(require_member(j, pointer, "a"), pointer + "/a"));
    }
    if (kind == "volterra_linear") {
        check_keys(j, pointer, {"name", "kind", "a", "b"});
        const json& a = require_member(j, pointer, "a");
        std::vector<SurfaceFn> coords;
        if (a.is_array()) {
            if (a.empty()) fail(pointer + "/a", "expected at least one coordinate function");
            for (std::size_t i = 0; i < a.size(); ++i)
                coords.push_back(parse_surface_fn(a[i], idx(pointer + "/a", i)));
        } else {
            coords.push_back(parse_surface_fn(a, pointer + "/a"));
        }
        SurfaceFn b = parse_surface_fn(require_member(j, pointer, "b"), pointer + "/b");
        const std::size_t dim = coords.size();
        VectorSurfaceFn a_vec = [coords](double t, double s) {
            std::vector<double> out;
            out.reserve(coords.size());
            for (const auto& f : coords) out.push_back(f(t, s));
            return out;
        };
        return DriverSpec::volterra_linear(std::move(a_vec), std::move(b), dim);
    }
    if (kind == "volterra_quadratic") {
        check_keys(j, pointer, {"name", "kind", "b", "a"});
        return DriverSpec::volterra_quadratic(
            parse_time_fn(require_member(j, pointer, "b"), pointer + "/b"),
            parse_surface_fn(require_member(j, pointer, "a"), pointer + "/a"));
    }
    if (kind == "family") {
        check_keys(j, pointer, {"name", "kind", "members"});
        const json& m = require_member(j, pointer, "members");
        if (!m.is_array() || m.empty())
            fail(pointer + "/members", "expected a non-empty array of members");
        std::map<double, DriverSpec> members;
        for (std::size_t i = 0; i < m.size(); ++i) {
            const std::string p = idx(pointer + "/members", i);
            check_keys(m[i], p, {"horizon", "driver"});
            const double horizon = number_field(m[i], p, "horizon");
            DriverSpec member = parse_driver(require_member(m[i], p, "driver"), p + "/driver");
            if (!members.emplace(horizon, std::move(member)).second)
                fail(p + "/horizon", "duplicate family horizon");
        }
        return DriverSpec::family(std::move(members));
    }
    fail(pointer + "/kind", "unknown driver kind '" + kind + "'");
}

ClaimSpec parse_claim(const json& j, const std::string& pointer) {
    const std::string kind = string_field(j, pointer, "kind");
    if (kind == "constant") {
        check_keys(j, pointer, {"name", "kind", "c", "u"});
        return ClaimSpec::constant(number_field(j, pointer, "c"),
                                   number_field(j, pointer, "u"));
    }
    if (kind == "terminal_brownian") {
        check_keys(j, pointer, {"name", "kind", "w", "u"});
        return ClaimSpec::terminal_brownian(vector_field(j, pointer, "w"),
                                            number_field(j, pointer, "u"));
    }
    if (kind == "call") {
        check_keys(j, pointer, {"name", "kind", "strike", "u"});
        return ClaimSpec::call(number_field(j, pointer, "strike"),
                               number_field(j, pointer, "u"));
    }
    fail(pointer + "/kind", "unknown claim kind '" + kind + "'");
}

std::string parse_name(const json& obj, const std::string& pointer, const char* prefix,
                       std::size_t index) {
    std::string name = prefix + std::to_string(index);
    if (const json* j = find_member(obj, pointer, "name"))
        name = as_string(*j, pointer + "/name");
    if (name.empty()) fail(pointer + "/name", "empty name");
    for (char c : name)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.')
            fail(pointer + "/name", "names may use letters, digits, '_', '-', '.' only");
    return name;
}

Backend parse_backend(const json& j, const std::string& pointer) {
    const std::string s = as_string(j, pointer);
    if (s == "tree") return Backend::tree;
    if (s == "mc") return Backend::mc;
    if (s == "both") return Backend::both;
    fail(pointer, "backend must be tree, mc, or both");
}

McConfig parse_mc(const json& j, const std::string& pointer) {
    check_keys(j, pointer,
               {"paths", "seed", "degree", "z_clip", "antithetic", "bootstrap"});
    McConfig cfg;
    cfg.paths = uint_field_or(j, pointer, "paths", cfg.paths);
    cfg.seed = uint_field(j, pointer, "seed");  // mandatory: reproducibility anchor
    cfg.degree = static_cast<unsigned>(uint_field_or(j, pointer, "degree", cfg.degree));
    cfg.z_clip = number_field_or(j, pointer, "z_clip", cfg.z_clip);
    cfg.antithetic = bool_field_or(j, pointer, "antithetic", cfg.antithetic);
    cfg.bootstrap = uint_field_or(j, pointer, "bootstrap", cfg.bootstrap);
    if (cfg.paths < 2) fail(pointer + "/paths", "need at least two paths");
    if (cfg.antithetic && cfg.paths % 2 != 0)
        fail(pointer + "/paths", "antithetic sampling needs an even path count");
    if (!(cfg.z_clip > 0.0)) fail(pointer + "/z_clip", "z_clip must be positive");
    return cfg;
}

OutputConfig parse_output(const json& j, const std::string& pointer) {
    check_keys(j, pointer, {"directory", "formats"});
    OutputConfig out;
    if (const json* d = find_member(j, pointer, "directory"))
        out.directory = as_string(*d, pointer + "/directory");
    if (const json* f = find_member(j, pointer, "formats")) {
        if (!f->is_array()) fail(pointer + "/formats", "expected an array");
        out.csv = out.json = false;
        for (std::size_t i = 0; i < f->size(); ++i) {
            const std::string fmt = as_string((*f)[i], idx(pointer + "/formats", i));
            if (fmt == "csv")
                out.csv = true;
            else if (fmt == "json")
                out.json = true;
            else
                fail(idx(pointer + "/formats", i), "unknown format '" + fmt + "'");
        }
    }
    return out;
}

void check_grid_time(const TimeGrid& grid, double value, const std::string& pointer) {
    if (!grid.contains(value))
        fail(pointer, "time " + std::to_string(value) + " is not on the configured grid");
}

std::vector<Triple> parse_triples(const json& j, const std::string& pointer,
                                  const TimeGrid& grid) {
    if (!j.is_array() || j.empty()) fail(pointer, "expected a non-empty array of [s,t,u]");
    std::vector<Triple> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string p = idx(pointer, i);
        const json& e = j[i];
        if (!e.is_array() || e.size() != 3) fail(p, "expected [s,t,u]");
        Triple tr{as_number(e[0], p + "/0"), as_number(e[1], p + "/1"),
                  as_number(e[2], p + "/2")};
        check_grid_time(grid, tr.s, p + "/0");
        check_grid_time(grid, tr.t, p + "/1");
        check_grid_time(grid, tr.u, p + "/2");
        if (!(tr.s <= tr.t && tr.t <= tr.u)) fail(p, "triple must satisfy s <= t <= u");
        out.push_back(tr);
    }
    return out;
}

std::vector<std::pair<double, double>> parse_pairs(const json& j, const std::string& pointer,
                                                   const TimeGrid& grid, double s) {
    if (!j.is_array() || j.empty()) fail(pointer, "expected a non-empty array of [t,u]");
    std::vector<std::pair<double, double>> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string p = idx(pointer, i);
        const json& e = j[i];
        if (!e.is_array() || e.size() != 2) fail(p, "expected [t,u]");
        const double t = as_number(e[0], p + "/0");
        const double u = as_number(e[1], p + "/1");
        check_grid_time(grid, t, p + "/0");
        check_grid_time(grid, u, p + "/1");
        if (!(s <= t && t <= u)) fail(p, "pair must satisfy s <= t <= u");
        out.emplace_back(t, u);
    }
    return out;
}

std::vector<double> parse_q_grid(const json& j, const std::string& pointer) {
    if (j.is_array()) {
        const std::vector<double> out = as_numbers(j, pointer);
        if (out.empty()) fail(pointer, "empty q grid");
        return out;
    }
    check_keys(j, pointer, {"min", "max", "points"});
    const double lo = number_field(j, pointer, "min");
    const double hi = number_field(j, pointer, "max");
    const std::size_t n = uint_field(j, pointer, "points");
    if (!(hi > lo) || n < 2) fail(pointer, "need min < max and points >= 2");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return out;
}

std::vector<double> parse_time_list(const json& obj, const std::string& pointer,
                                    const char* key, const TimeGrid& grid) {
    const json& j = require_member(obj, pointer, key);
    const std::string p = pointer + "/" + key;
    const std::vector<double> out = as_numbers(j, p);
    if (out.empty()) fail(p, "expected at least one time");
    for (std::size_t i = 0; i < out.size(); ++i) check_grid_time(grid, out[i], idx(p, i));
    return out;
}

class TaskParser {
public:
    TaskParser(const RunManifest& manifest, const TimeGrid& grid)
        : manifest_(manifest), grid_(grid) {}

    TaskSpec parse(const json& j, const std::string& ptr, std::size_t index) const {
        TaskSpec task;
        task.name = parse_name(j, ptr, "task", index);
        task.type = string_field(j, ptr, "type");

        if (task.type.rfind("check:", 0) == 0) {
            const std::string prop = task.type.substr(6);
            task.check = property_from_name(prop);
            if (!task.check) fail(ptr + "/type", "unknown property '" + prop + "'");
        }
        const bool tree_only = task.check.has_value() || task.type == "dual";
        if (tree_only && manifest_.backend == Backend::mc)
            fail(ptr + "/type", "task '" + task.type + "' requires the tree backend");
        const bool uses_tree = tree_only || manifest_.backend != Backend::mc;

        if (task.check) {
            parse_check(j, ptr, task);
        } else if (task.type == "solve") {
            parse_solve(j, ptr, task);
        } else if (task.type == "surface") {
            parse_surface(j, ptr, task);
        } else if (task.type == "gamma") {
            parse_gamma(j, ptr, task);
        } else if (task.type == "dual") {
            parse_dual(j, ptr, task);
        } else if (task.type == "recover-driver") {
            parse_recover(j, ptr, task);
        } else if (task.type == "penalty") {
            parse_penalty(j, ptr, task);
        } else {
            fail(ptr + "/type", "unknown task type '" + task.type + "'");
        }

        if (uses_tree) {
            if (driver_of(task.driver).dim() != 1)
                fail(ptr + "/driver", "the tree backend supports scalar drivers only");
            if (!task.driver2.empty() && driver_of(task.driver2).dim() != 1)
                fail(ptr + "/driver2", "the tree backend supports scalar drivers only");
        }
        return task;
    }

private:
    const DriverSpec& driver_of(const std::string& name) const {
        for (const auto& [n, d] : manifest_.drivers)
            if (n == name) return d;
        throw std::out_of_range("driver lookup");
    }

    std::string driver_ref(const json& j, const std::string& ptr, const char* key) const {
        const std::string name = string_field(j, ptr, key);
        for (const auto& entry : manifest_.drivers)
            if (entry.first == name) return name;
        fail(ptr + "/" + key, "unknown driver '" + name + "'");
    }

    const ClaimSpec& claim_ref(const json& j, const std::string& ptr, const char* key,
                               std::string& out) const {
        const std::string name = string_field(j, ptr, key);
        for (const auto& entry : manifest_.claims)
            if (entry.first == name) {
                out = name;
                return entry.second;
            }
        fail(ptr + "/" + key, "unknown claim '" + name + "'");
    }

    std::size_t level(double time) const { return grid_.index_of(time); }

    void require_zero_s(const json& j, const std::string& ptr, TaskSpec& task) const {
        task.s = number_field_or(j, ptr, "s", 0.0);
        if (task.s != 0.0)
            fail(ptr + "/s", "this task reports a scalar and requires s = 0");
    }

    /// Claim corpus of a check task: named references plus an optional fuzz
    /// block; at least one source. `bound` is the latest admissible
    /// measurability time and `what` names the constraint in errors.
    void parse_corpus(const json& j, const std::string& ptr, TaskSpec& task, double bound,
                      const char* what) const {
        if (const json* c = find_member(j, ptr, "claims")) {
            if (!c->is_array()) fail(ptr + "/claims", "expected an array of claim names");
            for (std::size_t i = 0; i < c->size(); ++i) {
                const std::string p = idx(ptr + "/claims", i);
                const std::string name = as_string((*c)[i], p);
                const ClaimSpec* found = nullptr;
                for (const auto& [n, cl] : manifest_.claims)
                    if (n == name) found = &cl;
                if (!found) fail(p, "unknown claim '" + name + "'");
                if (level(found->u()) > level(bound))
                    fail(p, std::string("claim must be measurable at ") + what);
                task.claims.push_back(name);
            }
        }
        if (const json* f = find_member(j, ptr, "fuzz")) {
            check_keys(*f, ptr + "/fuzz", {"count", "seed", "u"});
            FuzzConfig fuzz;
            fuzz.count = uint_field(*f, ptr + "/fuzz", "count");
            if (fuzz.count == 0) fail(ptr + "/fuzz/count", "need at least one claim");
            fuzz.seed = uint_field_or(*f, ptr + "/fuzz", "seed", 0);
            fuzz.u = number_field(*f, ptr + "/fuzz", "u");
            check_grid_time(grid_, fuzz.u, ptr + "/fuzz/u");
            if (level(fuzz.u) > level(bound))
                fail(ptr + "/fuzz/u",
                     std::string("fuzz claims must be measurable at ") + what);
            task.fuzz = fuzz;
        }
        if (task.claims.empty() && !task.fuzz)
            fail(ptr, "check task needs claims and/or a fuzz block");
    }

    void parse_solve(const json& j, const std::string& ptr, TaskSpec& task) const {
        check_keys(j, ptr, {"name", "type", "driver", "claim", "s", "horizon"});
        task.driver = driver_ref(j, ptr, "driver");
        const ClaimSpec& claim = claim_ref(j, ptr, "claim", task.claim);
        require_zero_s(j, ptr, task);
        task.horizon = number_field_or(j, ptr, "horizon", grid_.horizon());
        check_grid_time(grid_, task.horizon, ptr + "/horizon");
        if (level(claim.u()) > level(task.horizon))
            fail(ptr + "/claim", "claim measurable after the solve horizon");
    }

    void parse_surface(const json& j, const std::string& ptr, TaskSpec& task) const {
        check_keys(j, ptr, {"name", "type", "driver", "claim", "s_grid", "u_grid"});
        task.driver = driver_ref(j, ptr, "driver");
        const ClaimSpec& claim = claim_ref(j, ptr, "claim", task.claim);
        task.s_grid = parse_time_list(j, ptr, "s_grid", grid_);
        task.u_grid = parse_time_list(j, ptr, "u_grid", grid_);
        for (double u : task.u_grid)
            if (level(claim.u()) > level(u))
                fail(ptr + "/u_grid", "claim measurable after a surface horizon");
    }

    void parse_gamma(const json& j, const std::string& ptr, TaskSpec& task) const {
        check_keys(j, ptr, {"name", "type", "driver", "claim", "s", "t", "u_grid"});
        task.driver = driver_ref(j, ptr, "driver");
        const ClaimSpec& claim = claim_ref(j, ptr, "claim", task.claim);
        require_zero_s(j, ptr, task);
        task.t = number_field(j, ptr, "t");
        check_grid_time(grid_, task.t, ptr + "/t");
        task.u_grid = parse_time_list(j, ptr, "u_grid", grid_);
        for (double u : task.u_grid)
            if (level(u) < level(task.t))
                fail(ptr + "/u_grid", "gamma horizons must satisfy u >= t");
        if (level(claim.u()) > level(task.t))
            fail(ptr + "/claim", "gamma claims must be measurable at t");
    }

    void parse_dual(const json& j, const std::string& ptr, TaskSpec& task) const {
        check_keys(j, ptr, {"name", "type", "driver", "claim", "s", "horizon", "q_grid"});
        task.driver = driver_ref(j, ptr, "driver");
        const ClaimSpec& claim = claim_ref(j, ptr, "claim", task.claim);
        require_zero_s(j, ptr, task);
        task.horizon = number_field_or(j, ptr, "horizon", grid_.horizon());
        check_grid_time(grid_, task.horizon, ptr + "/horizon");
        if (level(claim.u()) > level(task.horizon))
            fail(ptr + "/claim", "claim measurable after the dual horizon");
        task.q_grid = parse_q_grid(require_member(j, ptr, "q_grid"), ptr + "/q_grid");
    }

    void parse_recover(const json& j, const std::string& ptr, TaskSpec& task) const {
        check_keys(j, ptr, {"name", "type", "driver", "dt", "eps_steps", "s_grid", "z_grid",
                            "richardson"});
        task.driver = driver_ref(j, ptr, "driver");
        task.dt = number_field(j, ptr, "dt");
        if (!(task.dt > 0.0)) fail(ptr + "/dt", "dt must be positive");
        task.eps_steps = uint_field(j, ptr, "eps_steps");
        if (task.eps_steps == 0) fail(ptr + "/eps_steps", "eps_steps must be positive");
        task.s_grid = as_numbers(require_member(j, ptr, "s_grid"), ptr + "/s_grid");
        task.z_grid = as_numbers(require_member(j, ptr, "z_grid"), ptr + "/z_grid");
        if (task.s_grid.empty()) fail(ptr + "/s_grid", "expected at least one s value");
        if (task.z_grid.empty()) fail(ptr + "/z_grid", "expected at least one z value");
        for (std::size_t i = 0; i < task.s_grid.size(); ++i)
            if (task.s_grid[i] < 0.0) fail(idx(ptr + "/s_grid", i), "s must be non-negative");
        task.richardson = bool_field_or(j, ptr, "richardson", false);
        if (driver_of(task.driver).dim() != 1)
            fail(ptr + "/driver", "driver recovery supports scalar drivers only");
    }

    void parse_penalty(const json& j, const std::string& ptr, TaskSpec& task) const {
        check_keys(j, ptr, {"name", "type", "driver", "s", "t", "measure"});
        task.driver = driver_ref(j, ptr, "driver");
        require_zero_s(j, ptr, task);
        task.t = number_field(j, ptr, "t");
        check_grid_time(grid_, task.t, ptr + "/t");

        const json& m = require_member(j, ptr, "measure");
        const std::string mp = ptr + "/measure";
        check_keys(m, mp, {"q", "q_fn"});
        if (m.size() != 1) fail(mp, "measure needs exactly one of q, q_fn");
        const std::size_t dim = driver_of(task.driver).dim();
        if (const json* q = find_member(m, mp, "q")) {
            std::vector<double> qv = q->is_number() ? std::vector<double>{q->get<double>()}
                                                    : as_numbers(*q, mp + "/q");
            if (qv.size() != dim)
                fail(mp + "/q", "kernel dimension differs from the driver");
            task.measure = MeasureSpec::constant_kernel(task.s, task.t, std::move(qv));
        } else {
            const json& qf = require_member(m, mp, "q_fn");
            std::vector<TimeFn> fns;
            if (qf.is_array()) {
                for (std::size_t i = 0; i < qf.size(); ++i)
                    fns.push_back(parse_time_fn(qf[i], idx(mp + "/q_fn", i)));
            } else {
                fns.push_back(parse_time_fn(qf, mp + "/q_fn"));
            }
            if (fns.size() != dim)
                fail(mp + "/q_fn", "kernel dimension differs from the driver");
            task.measure = MeasureSpec::deterministic(
                task.s, task.t, dim, [fns](double v) {
                    std::vector<double> out;
                    out.reserve(fns.size());
                    for (const auto& f : fns) out.push_back(f(v));
                    return out;
                });
        }
    }

    void parse_check(const json& j, const std::string& ptr, TaskSpec& task) const {
        task.tolerance = number_field_or(j, ptr, "tolerance", task.tolerance);
        if (task.tolerance < 0.0) fail(ptr + "/tolerance", "tolerance must be non-negative");

        switch (*task.check) {
            case Property::strong_tc:
            case Property::weak_tc:
            case Property::order_tc:
            case Property::sub_tc:
            case Property::h_longevity:
            case Property::acceptance_inclusion: {
                check_keys(j, ptr, {"name", "type", "driver", "claims", "fuzz", "triples",
                                    "tolerance"});
                task.driver = driver_ref(j, ptr, "driver");
                task.triples =
                    parse_triples(require_member(j, ptr, "triples"), ptr + "/triples", grid_);
                const bool at_t = *task.check == Property::h_longevity ||
                                  *task.check == Property::acceptance_inclusion;
                double bound = grid_.horizon();
                for (const Triple& tr : task.triples)
                    bound = std::min(bound, at_t ? tr.t : tr.u);
                parse_corpus(j, ptr, task, bound, at_t ? "every triple's t" : "every triple's u");
                break;
            }
            case Property::restriction:
            case Property::normalization: {
                check_keys(j, ptr,
                           {"name", "type", "driver", "s", "pairs", "claims", "fuzz",
                            "tolerance"});
                task.driver = driver_ref(j, ptr, "driver");
                task.s = number_field_or(j, ptr, "s", 0.0);
                check_grid_time(grid_, task.s, ptr + "/s");
                task.pairs = parse_pairs(require_member(j, ptr, "pairs"), ptr + "/pairs",
                                         grid_, task.s);
                if (*task.check == Property::restriction) {
                    double bound = grid_.horizon();
                    for (const auto& [t, u] : task.pairs) bound = std::min(bound, t);
                    parse_corpus(j, ptr, task, bound, "every pair's t");
                }
                break;
            }
            case Property::horizon_comparison: {
                check_keys(j, ptr, {"name", "type", "driver", "driver2", "claim", "claim2",
                                    "horizon1", "horizon2", "tolerance"});
                task.driver = driver_ref(j, ptr, "driver");
                task.driver2 = driver_ref(j, ptr, "driver2");
                task.horizon = number_field(j, ptr, "horizon1");
                task.horizon2 = number_field(j, ptr, "horizon2");
                check_grid_time(grid_, task.horizon, ptr + "/horizon1");
                check_grid_time(grid_, task.horizon2, ptr + "/horizon2");
                if (level(task.horizon) > level(task.horizon2))
                    fail(ptr + "/horizon1", "requires horizon1 <= horizon2");
                const ClaimSpec& c1 = claim_ref(j, ptr, "claim", task.claim);
                const ClaimSpec& c2 = claim_ref(j, ptr, "claim2", task.claim2);
                if (level(c1.u()) != level(task.horizon))
                    fail(ptr + "/claim", "terminal data must be measurable exactly at horizon1");
                if (level(c2.u()) != level(task.horizon2))
                    fail(ptr + "/claim2",
                         "terminal data must be measurable exactly at horizon2");
                break;
            }
            case Property::cocycle:
            case Property::sub_penalty:
            case Property::weak_cocycle: {
                check_keys(j, ptr, {"name", "type", "driver", "triples", "samples", "seed",
                                    "q_grid", "tolerance"});
                task.driver = driver_ref(j, ptr, "driver");
                task.triples =
                    parse_triples(require_member(j, ptr, "triples"), ptr + "/triples", grid_);
                task.samples = uint_field_or(j, ptr, "samples", task.samples);
                if (task.samples == 0) fail(ptr + "/samples", "need at least one sample");
                task.seed = uint_field_or(j, ptr, "seed", 0);
                if (const json* q = find_member(j, ptr, "q_grid"))
                    task.q_grid = parse_q_grid(*q, ptr + "/q_grid");
                if (*task.check == Property::weak_cocycle && task.q_grid.empty())
                    fail(ptr + "/q_grid", "weak_cocycle needs a q grid");
                break;
            }
            default:
                fail(ptr + "/type", "property has no check task form");
        }
    }

    const RunManifest& manifest_;
    const TimeGrid& grid_;
};

}  // namespace

const char* backend_name(Backend backend) {
    switch (backend) {
        case Backend::tree: return "tree";
        case Backend::mc: return "mc";
        case Backend::both: return "both";
    }
    throw std::invalid_argument("unknown backend");
}

const DriverSpec& RunManifest::driver(const std::string& name) const {
    for (const auto& [n, d] : drivers)
        if (n == name) return d;
    throw std::out_of_range("unknown driver: " + name);
}

const ClaimSpec& RunManifest::claim(const std::string& name) const {
    for (const auto& [n, c] : claims)
        if (n == name) return c;
    throw std::out_of_range("unknown claim: " + name);
}

ManifestError::ManifestError(std::string pointer, const std::string& message)
    : std::runtime_error(pointer.empty() ? message : pointer + ": " + message),
      pointer_(std::move(pointer)) {}

RunManifest parse_manifest(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ManifestError("", std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) fail("", "manifest must be a JSON object");
    check_keys(doc, "", {"backend", "grid", "mc", "output", "drivers", "claims", "tasks"});

    RunManifest manifest;
    manifest.backend = parse_backend(require_member(doc, "", "backend"), "/backend");

    const json& g = require_member(doc, "", "grid");
    check_keys(g, "/grid", {"horizon", "steps"});
    manifest.grid.horizon = number_field(g, "/grid", "horizon");
    if (!(manifest.grid.horizon > 0.0)) fail("/grid/horizon", "horizon must be positive");
    manifest.grid.steps = uint_field(g, "/grid", "steps");
    if (manifest.grid.steps == 0) fail("/grid/steps", "steps must be positive");
    const TimeGrid grid = TimeGrid::uniform(manifest.grid.horizon, manifest.grid.steps);

    if (const json* m = find_member(doc, "", "mc"))
        manifest.mc = parse_mc(*m, "/mc");
    else if (manifest.backend != Backend::tree)
        fail("/mc", "mc section is required when the backend includes mc");

    if (const json* o = find_member(doc, "", "output"))
        manifest.output = parse_output(*o, "/output");

    const json& drivers = require_member(doc, "", "drivers");
    if (!drivers.is_array()) fail("/drivers", "expected an array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < drivers.size(); ++i) {
        const std::string ptr = idx("/drivers", i);
        const std::string name = parse_name(drivers[i], ptr, "driver", i);
        if (!names.insert(name).second) fail(ptr + "/name", "duplicate driver name");
        manifest.drivers.emplace_back(name, parse_driver(drivers[i], ptr));
    }

    const json& claims = require_member(doc, "", "claims");
    if (!claims.is_array()) fail("/claims", "expected an array");
    names.clear();
    for (std::size_t i = 0; i < claims.size(); ++i) {
        const std::string ptr = idx("/claims", i);
        const std::string name = parse_name(claims[i], ptr, "claim", i);
        if (!names.insert(name).second) fail(ptr + "/name", "duplicate claim name");
        ClaimSpec claim = parse_claim(claims[i], ptr);
        check_grid_time(grid, claim.u(), ptr + "/u");
        manifest.claims.emplace_back(name, std::move(claim));
    }

    const json& tasks = require_member(doc, "", "tasks");
    if (!tasks.is_array()) fail("/tasks", "expected an array");
    const TaskParser parser(manifest, grid);
    names.clear();
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const std::string ptr = idx("/tasks", i);
        TaskSpec task = parser.parse(tasks[i], ptr, i);
        if (!names.insert(task.name).second) fail(ptr + "/name", "duplicate task name");
        manifest.tasks.push_back(std::move(task));
    }
    return manifest;
}

RunManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ManifestError("", "cannot read manifest: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_manifest(buffer.str());
}

}  // namespace fdrm
