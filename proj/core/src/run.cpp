#include "fdrm/run.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fdrm/closed_form.hpp"
#include "fdrm/csv.hpp"
#include "fdrm/diagnostics.hpp"
#include "fdrm/mc.hpp"
#include "fdrm/measure.hpp"
#include "fdrm/tree.hpp"
#include "fdrm/tree_dual.hpp"
#include "fdrm/tree_measure.hpp"

namespace fdrm {

namespace {

using nlohmann::ordered_json;

struct TaskOutcome {
    std::string name;
    std::string type;
    std::string file;            // CSV file name, empty when not written
    std::string status = "ok";   // ok | failed | error
    std::string message;         // error text or failing-check detail
    std::optional<bool> verdict;
    std::optional<double> worst;
    std::optional<double> value;  // headline number for the summary
};

struct RunContext {
    const RunManifest& manifest;
    TreeModel tree;
    std::map<std::size_t, PathEnsemble> ensembles;  // by driver dimension
    std::filesystem::path out_dir;
    bool write_csv = true;
    std::optional<double> tolerance_override;
};

using Row = std::vector<std::string>;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

bool runs_mc(const RunManifest& manifest, const TaskSpec& task) {
    if (task.check || task.type == "dual") return false;
    return manifest.backend != Backend::tree;
}

bool runs_tree(const RunManifest& manifest, const TaskSpec& task) {
    if (task.check || task.type == "dual") return true;
    return manifest.backend != Backend::mc;
}

/// rho_{s,u}(X) on the lattice, as node values at level min(s, claim)
/// (the section is measurable there). Mirrors the backward solvers' tail
/// collapse when the evaluation time is past the claim.
std::vector<double> section_values(const TreeModel& tree, const DriverSpec& driver,
                                   const ClaimSpec& claim, std::size_t k_s, std::size_t k_u) {
    const std::size_t cl = tree.grid().index_of(claim.u());
    std::vector<double> values = tree_claim_layer(tree, claim);
    const DriverSpec& member = driver.resolve(tree.grid().time(k_u));
    if (k_s >= cl) {
        std::optional<double> frozen;
        if (member.is_volterra()) frozen = tree.grid().time(k_s);
        for (double& v : values)
            v = zero_z_flow(member, tree.grid(), k_u, k_s, frozen, -v);
        return values;
    }
    TreeSolution sol = member.is_volterra()
                           ? tree_solve_frozen(tree, member, std::move(values), cl, k_u, k_s)
                           : tree_solve_values(tree, member, std::move(values), cl, k_u);
    return std::move(sol.y[k_s]);
}

std::vector<ClaimSpec> claim_corpus(const RunContext& ctx, const TaskSpec& task) {
    std::vector<ClaimSpec> corpus;
    for (const std::string& name : task.claims) corpus.push_back(ctx.manifest.claim(name));
    if (task.fuzz) {
        std::vector<ClaimSpec> fuzz =
            make_fuzz_claims(task.fuzz->u, task.fuzz->count, task.fuzz->seed);
        corpus.insert(corpus.end(), std::make_move_iterator(fuzz.begin()),
                      std::make_move_iterator(fuzz.end()));
    }
    return corpus;
}

void run_solve(const RunContext& ctx, const TaskSpec& task, std::vector<std::string>& header,
               std::vector<Row>& rows, TaskOutcome& out) {
    const DriverSpec& driver = ctx.manifest.driver(task.driver);
    const ClaimSpec& claim = ctx.manifest.claim(task.claim);
    header = {"backend", "s", "horizon", "value", "std_error", "closed_form"};
    const std::optional<double> exact = closed_form_value(driver, claim, 0.0, task.horizon);
    if (runs_tree(ctx.manifest, task)) {
        const double value = tree_solve(ctx.tree, driver, claim, task.horizon).root();
        rows.push_back({"tree", csv_number(0.0), csv_number(task.horizon), csv_number(value),
                        "", csv_number(exact)});
        out.value = value;
    }
    if (runs_mc(ctx.manifest, task)) {
        const McValue mc = mc_solve_bsvie(ctx.ensembles.at(driver.dim()), driver, claim, 0.0,
                                          task.horizon, ctx.manifest.mc);
        rows.push_back({"mc", csv_number(0.0), csv_number(task.horizon), csv_number(mc.value),
                        csv_number(mc.std_error), csv_number(exact)});
        if (!out.value) out.value = mc.value;
    }
}

void run_surface(const RunContext& ctx, const TaskSpec& task,
                 std::vector<std::string>& header, std::vector<Row>& rows, TaskOutcome&) {
    const DriverSpec& driver = ctx.manifest.driver(task.driver);
    const ClaimSpec& claim = ctx.manifest.claim(task.claim);
    const TimeGrid& grid = ctx.tree.grid();
    header = {"backend", "s", "u", "mean", "min", "max", "std_error"};
    for (double s : task.s_grid) {
        for (double u : task.u_grid) {
            const std::size_t k_s = grid.index_of(s);
            const std::size_t k_u = grid.index_of(u);
            if (k_s > k_u) continue;
            if (runs_tree(ctx.manifest, task)) {
                std::vector<double> layer = section_values(ctx.tree, driver, claim, k_s, k_u);
                const double lo = *std::min_element(layer.begin(), layer.end());
                const double hi = *std::max_element(layer.begin(), layer.end());
                const std::size_t level = std::min(k_s, grid.index_of(claim.u()));
                const double mean =
                    tree_expectation(ctx.tree, nullptr, std::move(layer), level, 0).front();
                rows.push_back({"tree", csv_number(s), csv_number(u), csv_number(mean),
                                csv_number(lo), csv_number(hi), ""});
            }
            if (runs_mc(ctx.manifest, task)) {
                const McValue mc = mc_solve_bsvie(ctx.ensembles.at(driver.dim()), driver,
                                                  claim, s, u, ctx.manifest.mc);
                rows.push_back({"mc", csv_number(s), csv_number(u), csv_number(mc.value),
                                csv_number(mc.value), csv_number(mc.value),
                                csv_number(mc.std_error)});
            }
        }
    }
}

void run_gamma(const RunContext& ctx, const TaskSpec& task, std::vector<std::string>& header,
               std::vector<Row>& rows, TaskOutcome& out) {
    const DriverSpec& driver = ctx.manifest.driver(task.driver);
    const ClaimSpec& claim = ctx.manifest.claim(task.claim);
    header = {"s", "t", "u", "gamma", "closed_form", "std_error", "backend"};
    if (runs_tree(ctx.manifest, task)) {
        const GammaReport report =
            gamma_surface(ctx.tree, driver, claim, 0.0, task.t, task.u_grid);
        for (const GammaPoint& p : report.points)
            rows.push_back({csv_number(0.0), csv_number(task.t), csv_number(p.u),
                            csv_number(p.value_min), csv_number(p.closed_form), "", "tree"});
        out.value = report.min_value;
    }
    if (runs_mc(ctx.manifest, task)) {
        const GammaReport report =
            gamma_surface_mc(ctx.ensembles.at(driver.dim()), driver, claim, 0.0, task.t,
                             task.u_grid, ctx.manifest.mc);
        for (const GammaPoint& p : report.points)
            rows.push_back({csv_number(0.0), csv_number(task.t), csv_number(p.u),
                            csv_number(p.mc->value), csv_number(p.closed_form),
                            csv_number(p.mc->std_error), "mc"});
        if (!out.value) out.value = report.min_value;
    }
}

void run_dual(const RunContext& ctx, const TaskSpec& task, std::vector<std::string>& header,
              std::vector<Row>& rows, TaskOutcome& out) {
    const DriverSpec& driver = ctx.manifest.driver(task.driver);
    const ClaimSpec& claim = ctx.manifest.claim(task.claim);
    header = {"backend", "s", "horizon", "primal", "dual", "gap", "refined_nodes"};
    const double primal = tree_solve(ctx.tree, driver, claim, task.horizon).root();
    const TreeDualResult dual =
        tree_dual_sup(ctx.tree, driver, claim, 0.0, task.horizon, task.q_grid);
    const double gap = primal - dual.value.front();
    rows.push_back({"tree", csv_number(0.0), csv_number(task.horizon), csv_number(primal),
                    csv_number(dual.value.front()), csv_number(gap),
                    csv_field(dual.refined_nodes)});
    out.value = gap;
}

void append_recovery(const RecoveryReport& report, std::vector<Row>& rows) {
    for (const RecoveryPoint& p : report.points)
        rows.push_back({report.backend, csv_number(p.s), csv_number(p.z),
                        csv_number(p.estimate),
                        report.backend == "tree" ? "" : csv_number(p.std_error),
                        csv_number(p.exact), csv_number(std::abs(p.estimate - p.exact))});
}

void run_recover(const RunContext& ctx, const TaskSpec& task, std::vector<std::string>& header,
                 std::vector<Row>& rows, TaskOutcome& out) {
    const DriverSpec& driver = ctx.manifest.driver(task.driver);
    header = {"backend", "s", "z", "estimate", "std_error", "exact", "error"};
    double worst = 0.0;
    if (runs_tree(ctx.manifest, task)) {
        const RecoveryReport report = recover_driver_tree(driver, task.dt, task.eps_steps,
                                                          task.s_grid, task.z_grid,
                                                          task.richardson);
        append_recovery(report, rows);
        worst = std::max(worst, report.max_error);
    }
    if (runs_mc(ctx.manifest, task)) {
        const RecoveryReport report =
            recover_driver_mc(driver, task.dt, task.eps_steps, task.s_grid, task.z_grid,
                              task.richardson, ctx.manifest.mc);
        append_recovery(report, rows);
        worst = std::max(worst, report.max_error);
    }
    out.value = worst;
}

void run_penalty(const RunContext& ctx, const TaskSpec& task,
                 std::vector<std::string>& header, std::vector<Row>& rows, TaskOutcome& out) {
    const DriverSpec& driver = ctx.manifest.driver(task.driver);
    header = {"backend", "s", "t", "value", "std_error", "out_of_domain"};
    if (runs_tree(ctx.manifest, task)) {
        const TreeMeasure measure = to_tree_measure(ctx.tree, *task.measure);
        const double value =
            tree_penalty(ctx.tree, driver, measure, 0.0, task.t).front();
        rows.push_back({"tree", csv_number(0.0), csv_number(task.t), csv_number(value), "",
                        ""});
        out.value = value;
    }
    if (runs_mc(ctx.manifest, task)) {
        const McPenalty penalty = penalty_mc(ctx.ensembles.at(driver.dim()), driver,
                                             *task.measure, 0.0, task.t);
        rows.push_back({"mc", csv_number(0.0), csv_number(task.t), csv_number(penalty.value),
                        csv_number(penalty.std_error), csv_field(penalty.out_of_domain)});
        if (!out.value) out.value = penalty.value;
    }
}

void run_check(const RunContext& ctx, const TaskSpec& task, std::vector<std::string>& header,
               std::vector<Row>& rows, TaskOutcome& out) {
    const DriverSpec& driver = ctx.manifest.driver(task.driver);
    const double tolerance = ctx.tolerance_override.value_or(task.tolerance);
    ConsistencyReport report;
    switch (*task.check) {
        case Property::strong_tc:
        case Property::weak_tc:
        case Property::order_tc:
        case Property::sub_tc:
            report = check_time_consistency(*task.check, ctx.tree, driver,
                                            claim_corpus(ctx, task), task.triples, tolerance);
            break;
        case Property::h_longevity:
            report = check_h_longevity(ctx.tree, driver, claim_corpus(ctx, task),
                                       task.triples, tolerance);
            break;
        case Property::restriction:
        case Property::normalization:
            report = check_structure(*task.check, ctx.tree, driver, claim_corpus(ctx, task),
                                     task.s, task.pairs, tolerance);
            break;
        case Property::horizon_comparison:
            report = check_horizon_comparison(ctx.tree, driver, task.horizon,
                                              ctx.manifest.claim(task.claim),
                                              ctx.manifest.driver(task.driver2),
                                              task.horizon2, ctx.manifest.claim(task.claim2),
                                              tolerance);
            break;
        case Property::cocycle:
        case Property::sub_penalty:
        case Property::weak_cocycle:
            report = check_penalty_relations(*task.check, ctx.tree, driver, task.triples,
                                             task.samples, task.seed, task.q_grid, tolerance);
            break;
        case Property::acceptance_inclusion:
            report = check_acceptance_inclusion(ctx.tree, driver, claim_corpus(ctx, task),
                                                task.triples, tolerance);
            break;
    }
    header = {"property", "s", "t", "u", "worst_violation", "tolerance", "verdict", "backend",
              "detail"};
    for (const Triple& tr : report.triples)
        rows.push_back({property_name(report.property), csv_number(tr.s), csv_number(tr.t),
                        csv_number(tr.u), csv_number(report.worst_violation),
                        csv_number(report.tolerance), csv_field(report.verdict),
                        report.backend, report.detail});
    out.verdict = report.verdict;
    out.worst = report.worst_violation;
    if (!report.verdict) {
        out.status = "failed";
        out.message = report.detail;
    }
}

TaskOutcome run_task(const RunContext& ctx, const TaskSpec& task) {
    TaskOutcome out;
    out.name = task.name;
    out.type = task.type;
    try {
        std::vector<std::string> header;
        std::vector<Row> rows;
        if (task.check)
            run_check(ctx, task, header, rows, out);
        else if (task.type == "solve")
            run_solve(ctx, task, header, rows, out);
        else if (task.type == "surface")
            run_surface(ctx, task, header, rows, out);
        else if (task.type == "gamma")
            run_gamma(ctx, task, header, rows, out);
        else if (task.type == "dual")
            run_dual(ctx, task, header, rows, out);
        else if (task.type == "recover-driver")
            run_recover(ctx, task, header, rows, out);
        else if (task.type == "penalty")
            run_penalty(ctx, task, header, rows, out);
        else
            throw std::logic_error("unhandled task type: " + task.type);
        if (ctx.write_csv) {
            const std::string file = task.name + ".csv";
            write_text_atomic((ctx.out_dir / file).string(), csv_document(header, rows));
            out.file = file;
        }
    } catch (const std::exception& e) {
        out.status = "error";
        out.message = e.what();
        out.file.clear();
    }
    return out;
}

}  // namespace

RunResult run_manifest(const RunManifest& manifest, const RunOptions& options,
                       std::ostream& log) {
    RunContext ctx{manifest,
                   TreeModel(TimeGrid::uniform(manifest.grid.horizon, manifest.grid.steps)),
                   {},
                   options.output_dir.empty() ? manifest.output.directory
                                              : options.output_dir,
                   manifest.output.csv,
                   options.tolerance};
    std::filesystem::create_directories(ctx.out_dir);

    // Shared path ensembles, one per driver dimension, built before the
    // pool so the workers touch only immutable state.
    for (const TaskSpec& task : manifest.tasks) {
        if (!runs_mc(manifest, task) || task.type == "recover-driver") continue;
        const std::size_t dim = manifest.driver(task.driver).dim();
        if (!ctx.ensembles.count(dim))
            ctx.ensembles.emplace(dim, PathEnsemble::simulate(ctx.tree.grid(), dim,
                                                              manifest.mc));
    }

    std::vector<TaskOutcome> outcomes(manifest.tasks.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= manifest.tasks.size()) return;
            outcomes[i] = run_task(ctx, manifest.tasks[i]);
            const TaskOutcome& out = outcomes[i];
            const std::scoped_lock guard(log_mutex);
            log << "[" << out.status << "] " << out.name << " (" << out.type << ")";
            if (out.worst) log << " worst=" << fmt(*out.worst);
            else if (out.value) log << " value=" << fmt(*out.value);
            if (out.status == "error") log << ": " << out.message;
            log << "\n";
        }
    };
    std::size_t workers = options.workers ? options.workers
                                          : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, manifest.tasks.size());
    if (workers > 1) {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(work);
        for (std::thread& thread : pool) thread.join();
    } else if (workers == 1) {
        work();
    }

    std::size_t ok = 0, failed = 0, errors = 0;
    for (const TaskOutcome& out : outcomes) {
        if (out.status == "ok") ++ok;
        else if (out.status == "failed") ++failed;
        else ++errors;
    }
    RunResult result;
    result.exit_code = (failed || errors) ? 1 : 0;

    if (manifest.output.json) {
        ordered_json summary;
        summary["backend"] = backend_name(manifest.backend);
        summary["grid"] = {{"horizon", manifest.grid.horizon},
                           {"steps", manifest.grid.steps}};
        if (manifest.backend != Backend::tree)
            summary["mc"] = {{"paths", manifest.mc.paths}, {"seed", manifest.mc.seed}};
        summary["tasks"] = ordered_json::array();
        for (const TaskOutcome& out : outcomes) {
            ordered_json entry;
            entry["name"] = out.name;
            entry["type"] = out.type;
            entry["status"] = out.status;
            if (!out.file.empty()) entry["file"] = out.file;
            if (out.verdict) entry["verdict"] = *out.verdict ? "pass" : "fail";
            if (out.worst) entry["worst_violation"] = *out.worst;
            if (out.value) entry["value"] = *out.value;
            if (!out.message.empty()) entry["message"] = out.message;
            summary["tasks"].push_back(std::move(entry));
        }
        summary["counts"] = {{"ok", ok}, {"failed", failed}, {"error", errors}};
        summary["exit_code"] = result.exit_code;
        const std::filesystem::path path = ctx.out_dir / "summary.json";
        write_text_atomic(path.string(), summary.dump(2) + "\n");
        result.summary_path = path.string();
    }
    log << "tasks: " << ok << " ok, " << failed << " failed, " << errors << " errors\n";
    if (!result.summary_path.empty()) log << "summary: " << result.summary_path << "\n";
    return result;
}

RunResult run_manifest_file(const std::string& path, const RunOptions& options,
                            std::ostream& log) {
    try {
        const RunManifest manifest = load_manifest(path);
        return run_manifest(manifest, options, log);
    } catch (const ManifestError& e) {
        log << "manifest error: " << e.what() << "\n";
        return {2, ""};
    }
}

}  // namespace fdrm
