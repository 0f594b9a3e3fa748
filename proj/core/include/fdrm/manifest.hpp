#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fdrm/claim.hpp"
#include "fdrm/diagnostics.hpp"
#include "fdrm/driver.hpp"
#include "fdrm/mc.hpp"
#include "fdrm/measure.hpp"

namespace fdrm {

enum class Backend { tree, mc, both };
const char* backend_name(Backend backend);

struct GridConfig {
    double horizon = 1.0;
    std::size_t steps = 1;
};

/// Seeded fuzz corpus appended to a check task's claim list.
struct FuzzConfig {
    std::size_t count = 0;
    std::uint64_t seed = 0;
    double u = 0.0;
};

/// One experiment from the manifest's task list. `type` is one of solve,
/// surface, gamma, dual, recover-driver, penalty, or check:<property>;
/// only the fields relevant to the type are populated (the parser
/// validates presence and grid membership per type).
struct TaskSpec {
    std::string name;
    std::string type;
    std::optional<Property> check;      // engaged for check:* types
    std::string driver;
    std::string driver2;                // horizon comparison
    std::string claim;
    std::string claim2;                 // horizon comparison
    std::vector<std::string> claims;    // check-task corpus
    std::optional<FuzzConfig> fuzz;
    double s = 0.0;
    double t = 0.0;
    double horizon = 0.0;
    double horizon2 = 0.0;
    std::vector<Triple> triples;
    std::vector<std::pair<double, double>> pairs;  // (t, u) for structure checks
    std::vector<double> s_grid;
    std::vector<double> z_grid;
    std::vector<double> u_grid;
    std::vector<double> q_grid;
    std::optional<MeasureSpec> measure;  // penalty task scenario
    std::size_t samples = 32;
    std::uint64_t seed = 0;
    double dt = 0.0;                     // recover-driver window step
    std::size_t eps_steps = 0;
    bool richardson = false;
    double tolerance = 1e-9;
};

struct OutputConfig {
    std::string directory = ".";
    bool csv = true;
    bool json = true;
};

struct RunManifest {
    Backend backend = Backend::tree;
    GridConfig grid;
    McConfig mc;
    std::vector<std::pair<std::string, DriverSpec>> drivers;
    std::vector<std::pair<std::string, ClaimSpec>> claims;
    std::vector<TaskSpec> tasks;
    OutputConfig output;

    const DriverSpec& driver(const std::string& name) const;
    const ClaimSpec& claim(const std::string& name) const;
};

/// Configuration failure (schema, reference, or off-grid time). `pointer`
/// is the JSON pointer of the offending field; runs exit with code 2.
class ManifestError : public std::runtime_error {
public:
    ManifestError(std::string pointer, const std::string& message);
    const std::string& pointer() const { return pointer_; }

private:
    std::string pointer_;
};

/// Parse and validate a manifest JSON document. Validation covers the full
/// configuration contract: unique names, resolvable references, every
/// referenced evaluation time on the grid, claim measurability compatible
/// with each task's windows, the mc section (with mandatory seed) whenever
/// the backend includes mc, and tree-only tasks (check:*, dual) not paired
/// with a pure-mc backend.
RunManifest parse_manifest(const std::string& text);

/// Read a manifest file and parse it.
RunManifest load_manifest(const std::string& path);

}  // namespace fdrm
