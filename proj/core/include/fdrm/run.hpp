#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>

#include "fdrm/manifest.hpp"

namespace fdrm {

struct RunOptions {
    std::string output_dir;            // overrides the manifest when non-empty
    std::size_t workers = 0;           // 0 = hardware concurrency
    std::optional<double> tolerance;   // overrides every check task's tolerance
};

/// exit_code: 0 all tasks ok, 1 failed verdicts or task errors, 2 manifest
/// rejected (run_manifest_file only; nothing executed).
struct RunResult {
    int exit_code = 0;
    std::string summary_path;  // empty when the json format is disabled
};

/// Executes every task on a worker pool and writes one CSV per task plus a
/// summary.json, all atomically. Results are a deterministic function of
/// the manifest: worker count and scheduling never change any output.
RunResult run_manifest(const RunManifest& manifest, const RunOptions& options,
                       std::ostream& log);

/// Loads, validates, and runs. Manifest problems are reported on the log
/// with their JSON pointer and yield exit code 2.
RunResult run_manifest_file(const std::string& path, const RunOptions& options,
                            std::ostream& log);

}  // namespace fdrm
