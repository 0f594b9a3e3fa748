#include <cstddef>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fdrm/run.hpp"

int main(int argc, char** argv) {
    CLI::App app{"fdrm — dynamic risk measures from backward equations"};
    app.require_subcommand(1);

    std::string manifest_path;
    fdrm::RunOptions options;
    double tolerance = 0.0;

    CLI::App* run = app.add_subcommand(
        "run", "execute a JSON manifest of solves, reports, and property checks");
    run->add_option("manifest", manifest_path, "path to the run manifest (JSON)")
        ->required();
    run->add_option("--output-dir", options.output_dir,
                    "write reports here instead of the manifest's output directory");
    run->add_option("--workers", options.workers,
                    "concurrent task workers (0 = hardware concurrency)");
    CLI::Option* tol = run->add_option(
        "--tolerance", tolerance, "override the tolerance of every check task");

    CLI11_PARSE(app, argc, argv);

    if (tol->count() > 0) options.tolerance = tolerance;
    return fdrm::run_manifest_file(manifest_path, options, std::cout).exit_code;
}
