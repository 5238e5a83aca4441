// Command-line front end: simulate, fit, train, predict, evaluate, export and
// the end-to-end pipeline. Exit codes: 0 success, 1 validation error,
// 2 missing artifact, 3 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mcvd/analysis.hpp"
#include "mcvd/errors.hpp"
#include "mcvd/io.hpp"
#include "mcvd/pipeline.hpp"
#include "mcvd/rng.hpp"

namespace fs = std::filesystem;
using namespace mcvd;

namespace {

struct Globals {
    std::uint64_t seed = 1;
    std::string out = "mcvd_out";
    std::int64_t replications = 50;
    std::int64_t molecules = 3000;
    double dt = 1e-3;
    double t_end = 1.0;
    std::int64_t substeps = 1;
    std::string model = "enhanced";
    int threads = 0;
    bool full_table = false;
};

struct CaseArgs {
    std::optional<double> d;
    std::optional<double> r_tx;
    std::optional<double> r_rx;
    std::optional<double> diff;

    bool given() const { return d || r_tx || r_rx || diff; }
    SystemParams params() const {
        if (!d || !r_tx || !r_rx || !diff) throw ValidationError("a case needs all of --d, --rtx, --rrx and --D");
        SystemParams p{*d, *r_tx, *r_rx, *diff};
        p.validate();
        return p;
    }
};

void add_case_options(CLI::App* cmd, CaseArgs& c) {
    cmd->add_option("--d", c.d, "distance between transmitter and receiver surfaces (um)");
    cmd->add_option("--rtx", c.r_tx, "transmitter radius (um)");
    cmd->add_option("--rrx", c.r_rx, "receiver radius (um)");
    cmd->add_option("--D", c.diff, "diffusion coefficient (um^2/s)");
}

sim::SimConfig make_config(const Globals& g) {
    sim::SimConfig cfg;
    cfg.n_molecules = g.molecules;
    cfg.n_replications = g.full_table ? pipeline::table1_sim_config().n_replications : g.replications;
    cfg.grid = TimeGrid(g.dt, g.t_end);
    cfg.seed = g.seed;
    cfg.substep_factor = g.substeps;
    cfg.validate();
    return cfg;
}

std::string describe(const ModelParams& m) {
    std::string s(to_string(m.kind()));
    for (double b : m.coefficients()) s += " " + io::format_double(b);
    return s;
}

// The simulation settings and validation grid recorded in a workspace.
struct WorkspaceContext {
    sim::SimConfig cfg;
    pipeline::ParameterGrid vds;
};

WorkspaceContext load_context(const pipeline::Workspace& ws) {
    const auto& m = ws.manifest();
    if (!m.contains("sim_config") || !m["grids"].contains("VDS"))
        throw MissingArtifact("workspace " + ws.root().string() + " has no validation-set run in its manifest");
    return {pipeline::sim_config_from_json(m["sim_config"]), pipeline::grid_from_json(m["grids"]["VDS"], nn::Provenance::VDS)};
}

std::vector<nn::CaseRecord> read_optional_records(const pipeline::Workspace& ws, const std::string& rel) {
    if (!ws.exists(rel)) return {};
    return io::read_records_csv(ws.path(rel), nn::Provenance::VDS);
}

struct VdsArtifacts {
    std::vector<analysis::SimulatedCase> sims;
    std::vector<nn::CaseRecord> fits;
    std::vector<nn::CaseRecord> anns;
    std::vector<analysis::Method> methods{analysis::Method::PointFormula};
};

VdsArtifacts load_vds(const pipeline::Workspace& ws, const WorkspaceContext& ctx,
                      const std::vector<SystemParams>& cases) {
    VdsArtifacts a;
    for (const SystemParams& p : cases)
        a.sims.push_back({p, io::read_signal_csv(ws.path(pipeline::signal_artifact(ctx.vds, p, ctx.cfg)))});
    for (ModelKind kind : {ModelKind::Primitive, ModelKind::Enhanced}) {
        auto fits = read_optional_records(ws, pipeline::records_artifact(nn::Provenance::VDS, kind));
        auto anns = read_optional_records(ws, pipeline::predictions_artifact(kind));
        if (!fits.empty())
            a.methods.push_back(kind == ModelKind::Primitive ? analysis::Method::PrimitiveFit : analysis::Method::EnhancedFit);
        if (!anns.empty())
            a.methods.push_back(kind == ModelKind::Primitive ? analysis::Method::PrimitiveAnn : analysis::Method::EnhancedAnn);
        a.fits.insert(a.fits.end(), fits.begin(), fits.end());
        a.anns.insert(a.anns.end(), anns.begin(), anns.end());
    }
    return a;
}

void print_trends(const analysis::Evaluation& eval) {
    for (analysis::Method m : eval.methods) {
        std::cout << "distance trend " << analysis::to_string(m) << ":";
        for (const analysis::Trend& t : analysis::distance_trend(eval.groups, m))
            std::cout << " r_rx=" << io::format_double(t.r_rx) << " rho=" << io::format_double(t.rho);
        std::cout << "\n";
    }
}

analysis::Evaluation run_evaluate(pipeline::Workspace& ws) {
    const WorkspaceContext ctx = load_context(ws);
    const VdsArtifacts a = load_vds(ws, ctx, ctx.vds.cases());
    const analysis::Evaluation eval = analysis::evaluate_vds(a.sims, a.fits, a.anns, ctx.cfg, a.methods);
    io::write_file_atomic(ws.path("rmse_groups.csv"), analysis::groups_csv(eval));
    io::write_file_atomic(ws.path("rmse_cases.csv"), analysis::cases_csv(eval));
    std::vector<std::string> inputs;
    for (const auto& [path, entry] : ws.manifest()["artifacts"].items())
        if (path.rfind("records_vds_", 0) == 0 || path.rfind("predictions_", 0) == 0) inputs.push_back(path);
    ws.record_artifact("rmse_groups.csv", "evaluate", inputs);
    ws.record_artifact("rmse_cases.csv", "evaluate", inputs);
    ws.save();
    std::cout << "wrote " << ws.path("rmse_groups.csv").string() << " (" << eval.groups.size() << " groups)\n";
    print_trends(eval);
    return eval;
}

std::string case_dir(const SystemParams& p) {
    return "export/d" + io::format_double(p.d) + "_rtx" + io::format_double(p.r_tx) + "_rrx" +
           io::format_double(p.r_rx) + "_D" + io::format_double(p.diff_coeff);
}

void run_export(pipeline::Workspace& ws, const std::vector<SystemParams>& cases) {
    const WorkspaceContext ctx = load_context(ws);
    const VdsArtifacts a = load_vds(ws, ctx, cases);
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const SystemParams& p = cases[i];
        std::vector<analysis::Curve> curves;
        for (analysis::Method m : a.methods) {
            std::optional<ModelParams> model;
            if (const auto kind = analysis::method_kind(m)) {
                for (const nn::CaseRecord& r : analysis::is_ann(m) ? a.anns : a.fits)
                    if (r.input == p && r.output.kind() == *kind) model = r.output;
            }
            curves.push_back(analysis::method_curve(m, p, a.sims[i].signal.grid(), model));
        }
        const std::string dir = case_dir(p);
        const auto files = analysis::export_curves(p, a.sims[i].signal, curves, ws.path(dir));
        for (const fs::path& f : files)
            ws.record_artifact(fs::relative(f, ws.root()).generic_string(), "export",
                               {pipeline::signal_artifact(ctx.vds, p, ctx.cfg)});
        std::cout << "exported " << files.size() << " files to " << ws.path(dir).string() << "\n";
    }
    ws.save();
}

// The received-signal figure cases: d in {5, 7, 9}, r_tx = 4, r_rx = 8, D = 80.
std::vector<SystemParams> figure_cases(const pipeline::ParameterGrid& vds) {
    std::vector<SystemParams> out;
    for (const SystemParams& p : vds.cases())
        if (p.r_tx == 4 && p.r_rx == 8 && p.diff_coeff == 80 && (p.d == 5 || p.d == 7 || p.d == 9)) out.push_back(p);
    return out;
}

int run(int argc, char** argv) {
    CLI::App app{"Molecular communication via diffusion: simulation, model fitting and ANN estimation"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "master seed")->capture_default_str();
    app.add_option("--out", g.out, "output directory (the workspace for evaluate, export and pipeline)")
        ->capture_default_str();
    app.add_option("--replications", g.replications, "replications per case")->capture_default_str();
    app.add_option("--molecules", g.molecules, "molecules emitted per replication")->capture_default_str();
    app.add_option("--dt", g.dt, "bin width in seconds")->capture_default_str();
    app.add_option("--t-end", g.t_end, "simulated duration in seconds")->capture_default_str();
    app.add_option("--substeps", g.substeps, "Brownian steps per bin")->capture_default_str();
    app.add_option("--model", g.model, "channel model")
        ->check(CLI::IsMember({"primitive", "enhanced"}))
        ->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads (0 = OpenMP default)")->capture_default_str();
    app.add_flag("--full-table", g.full_table, "use the reference 500 replications per case");

    CaseArgs case_args;
    std::string signal_file;
    std::string records_file;
    std::string network_file;
    std::string grid_name = "vds";
    std::string grids_name = "table1";
    std::size_t hidden = pipeline::kDefaultHidden;

    auto* simulate = app.add_subcommand("simulate", "simulate one case and write its received signal");
    add_case_options(simulate, case_args);

    auto* fit_cmd = app.add_subcommand("fit", "fit a channel model to a signal CSV");
    add_case_options(fit_cmd, case_args);
    fit_cmd->add_option("--signal", signal_file, "signal CSV")->required();

    auto* train = app.add_subcommand("train", "train a network on a records CSV");
    train->add_option("--records", records_file, "training records CSV")->required();
    train->add_option("--hidden", hidden, "hidden units")->capture_default_str();

    auto* predict = app.add_subcommand("predict", "predict model parameters with a trained network");
    predict->add_option("--network", network_file, "network file")->required();
    predict->add_option("--grid", grid_name, "input grid when no case is given")
        ->check(CLI::IsMember({"tds", "vds", "reduced-tds", "reduced-vds"}))
        ->capture_default_str();
    add_case_options(predict, case_args);

    auto* evaluate = app.add_subcommand("evaluate", "grouped RMSE over the validation set of a workspace");

    auto* export_cmd = app.add_subcommand("export", "curve CSVs and SVG charts for validation cases");
    add_case_options(export_cmd, case_args);

    auto* pipeline_cmd = app.add_subcommand("pipeline", "both phases, validation predictions, evaluation and export");
    pipeline_cmd->add_option("--grids", grids_name, "case grids")
        ->check(CLI::IsMember({"table1", "reduced"}))
        ->capture_default_str();
    pipeline_cmd->add_option("--hidden", hidden, "hidden units")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    const ModelKind kind = parse_model_kind(g.model);
    const fs::path out(g.out);

    if (simulate->parsed()) {
        const SystemParams p = case_args.params();
        sim::SimConfig cfg = make_config(g);
        cfg.seed = rng::case_seed(g.seed, p);
        const ReceivedSignal sig = sim::simulate_case(p, cfg, g.threads);
        io::write_signal_csv(out / "signal.csv", sig);
        std::cout << "wrote " << (out / "signal.csv").string() << " final_fraction=" << io::format_double(sig.final_value())
                  << " standard_error=" << io::format_double(sim::final_fraction_standard_error(sig, cfg)) << "\n";
    } else if (fit_cmd->parsed()) {
        const SystemParams p = case_args.params();
        const ReceivedSignal sig = io::read_signal_csv(signal_file);
        const fit::FitResult r = fit::fit(fit::default_problem(p, sig, kind));
        const fs::path file = out / ("fit_" + std::string(to_string(kind)) + ".csv");
        io::write_file_atomic(file, io::fit_result_csv(r));
        std::cout << "wrote " << file.string() << " " << describe(r.model) << " rss=" << io::format_double(r.rss)
                  << " iterations=" << r.n_iterations << (r.converged ? "" : " (not converged)") << "\n";
    } else if (train->parsed()) {
        const auto records = io::read_records_csv(records_file, nn::Provenance::TDS);
        pipeline::Workspace ws(out);
        const auto r = pipeline::run_phase2(ws, records, records_file, hidden, g.seed);
        std::cout << "wrote " << ws.path(r.network_file).string() << " epochs=" << r.report.epochs
                  << " e_d=" << io::format_double(r.report.e_d) << " gamma=" << io::format_double(r.report.gamma)
                  << " stop=" << r.report.stop_reason << "\n";
        for (const std::string& w : r.report.warnings) std::cerr << "warning: " << w << "\n";
    } else if (predict->parsed()) {
        const nn::Network net = io::read_network(network_file);
        std::vector<SystemParams> inputs;
        if (case_args.given()) {
            inputs.push_back(case_args.params());
        } else {
            const auto [tds, vds] = pipeline::table1_grids();
            const auto [rtds, rvds] = pipeline::reduced_grids();
            const pipeline::ParameterGrid& grid =
                grid_name == "tds" ? tds : grid_name == "vds" ? vds : grid_name == "reduced-tds" ? rtds : rvds;
            inputs = grid.cases();
        }
        std::vector<std::size_t> extrapolated;
        const auto records = pipeline::predict_vds(net, inputs, &extrapolated);
        const fs::path file = out / pipeline::predictions_artifact(net.kind());
        io::write_records_csv(file, records);
        std::cout << "wrote " << file.string() << " (" << records.size() << " predictions)\n";
        if (records.size() == 1) std::cout << describe(records[0].output) << "\n";
        if (!extrapolated.empty())
            std::cerr << "note: " << extrapolated.size() << " of " << inputs.size()
                      << " inputs lie outside the training range\n";
    } else if (evaluate->parsed()) {
        pipeline::Workspace ws(out);
        run_evaluate(ws);
    } else if (export_cmd->parsed()) {
        pipeline::Workspace ws(out);
        const std::vector<SystemParams> cases =
            case_args.given() ? std::vector<SystemParams>{case_args.params()} : figure_cases(load_context(ws).vds);
        if (cases.empty()) throw ValidationError("no case given and the workspace grid has no figure cases");
        run_export(ws, cases);
    } else if (pipeline_cmd->parsed()) {
        pipeline::RunOptions opts{};
        std::tie(opts.tds, opts.vds) = grids_name == "reduced" ? pipeline::reduced_grids() : pipeline::table1_grids();
        opts.sim = make_config(g);
        opts.hidden = hidden;
        opts.threads = g.threads;
        pipeline::Workspace ws(out);
        const pipeline::RunOutputs result = pipeline::run_full(ws, opts);
        std::size_t failures = 0;
        for (const auto& k : result.per_kind) {
            std::cout << to_string(k.kind) << ": " << k.tds.records.size() << " training records ("
                      << k.tds.simulated << " simulated, " << k.tds.signals_reused << " reused), "
                      << k.vds.records.size() << " validation fits, " << k.predictions.size()
                      << " predictions, network epochs=" << k.phase2->report.epochs << "\n";
            if (!k.extrapolated.empty())
                std::cerr << "note: " << k.extrapolated.size() << " validation inputs lie outside the training range\n";
            for (const auto* phase : {&k.tds, &k.vds}) {
                for (const pipeline::CaseFailure& f : phase->failures) {
                    std::cerr << "failed " << f.stage << " d=" << f.params.d << " r_tx=" << f.params.r_tx
                              << " r_rx=" << f.params.r_rx << " D=" << f.params.diff_coeff << ": " << f.message << "\n";
                    ++failures;
                }
            }
        }
        if (failures == 0) {
            run_evaluate(ws);
            const auto fig = figure_cases(opts.vds);
            if (!fig.empty()) run_export(ws, fig);
        } else {
            std::cerr << failures << " case failures; evaluation skipped\n";
            return 3;
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const MissingArtifact& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
