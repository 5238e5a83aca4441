// Acceptance suite. Prints one PASS/FAIL line per criterion (indented detail
// lines in between) and exits nonzero when any criterion fails.
//
//   acceptance --workdir DIR [--only N]... [--full-table] [--threads N]

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../erfc_oracle.hpp"
#include "mcvd/analysis.hpp"
#include "mcvd/diffusion_sim.hpp"
#include "mcvd/fitter.hpp"
#include "mcvd/io.hpp"
#include "mcvd/neuralnet.hpp"
#include "mcvd/pipeline.hpp"

namespace fs = std::filesystem;
using namespace mcvd;

namespace {

struct Outcome {
    bool pass = false;
    std::string summary;
};

std::string fmt(double v, const char* spec = "%.4g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

void detail(const std::string& line) { std::cout << "  " << line << "\n" << std::flush; }

sim::SimConfig desk_config(std::int64_t replications, std::uint64_t seed) {
    sim::SimConfig cfg;
    cfg.n_molecules = 3000;
    cfg.n_replications = replications;
    cfg.grid = TimeGrid(1e-3, 1.0);
    cfg.seed = seed;
    cfg.substep_factor = 1;
    return cfg;
}

// ---------------------------------------------------------------------------

Outcome ac1() {
    // Point transmitter, 3000 x 50 trajectories, 0.1 ms Brownian steps.
    const SystemParams p{4, 0, 5, 100};
    sim::SimConfig cfg = desk_config(50, 1);
    cfg.substep_factor = 10;
    const ReceivedSignal simulated = sim::simulate_case(p, cfg);
    const ReceivedSignal analytic = sample_point_formula(p, cfg.grid);
    double worst = 0.0;
    std::size_t at = 0;
    for (std::size_t k = 0; k < cfg.grid.n_bins(); ++k) {
        const double dev = std::abs(simulated.values()[k] - analytic.values()[k]);
        if (dev > worst) {
            worst = dev;
            at = k;
        }
    }
    detail("final fraction: simulated " + fmt(simulated.final_value(), "%.5f") + ", analytic " +
           fmt(analytic.final_value(), "%.5f"));
    return {worst <= 0.015, "analytic oracle agreement: max |sim - point formula| = " + fmt(worst, "%.5f") +
                                " at t=" + fmt(cfg.grid.bin_end(at), "%.3f") + " s (bound 0.015)"};
}

Outcome ac2() {
    // 150 000 trajectories per transmitter type.
    const sim::SimConfig cfg = desk_config(50, 2);
    const SystemParams sphere{5, 4, 8, 80};
    const SystemParams point{5, 0, 8, 80};
    const ReceivedSignal a = sim::simulate_case(sphere, cfg);
    const ReceivedSignal b = sim::simulate_case(point, cfg);
    const double se = std::hypot(sim::final_fraction_standard_error(a, cfg), sim::final_fraction_standard_error(b, cfg));
    const double uplift = a.final_value() - b.final_value();
    detail("trajectories per case: " + std::to_string(cfg.trajectories()));
    detail("final fraction: spherical " + fmt(a.final_value(), "%.5f") + ", point " + fmt(b.final_value(), "%.5f"));
    return {uplift > 3.0 * se, "spherical-transmitter uplift: " + fmt(uplift, "%.5f") + " = " + fmt(uplift / se, "%.1f") +
                                   " combined standard errors (need > 3)"};
}

// Trials: system parameters drawn from the training grid, coefficients drawn
// uniformly from the fitter bounds, kept only when the curve is a valid
// signal reaching at least 0.1 by t_end.
struct RecoveryTrial {
    SystemParams params;
    std::array<double, 3> truth;
    Eigen::VectorXd curve;
};

std::vector<RecoveryTrial> recovery_trials(std::size_t n, std::uint64_t seed, const TimeGrid& grid) {
    const auto tds = pipeline::table1_grids().first.cases();
    const auto bounds = fit::default_bounds(ModelKind::Enhanced);
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<std::size_t> pick(0, tds.size() - 1);
    std::vector<RecoveryTrial> out;
    while (out.size() < n) {
        RecoveryTrial t;
        t.params = tds[pick(gen)];
        for (std::size_t j = 0; j < 3; ++j)
            t.truth[j] = std::uniform_real_distribution<double>(bounds[j].lo, bounds[j].hi)(gen);
        t.curve = fit::model_curve(t.params, ModelKind::Enhanced, t.truth, grid);
        if (t.curve.maxCoeff() <= 1.0 && t.curve[t.curve.size() - 1] >= 0.1) out.push_back(t);
    }
    return out;
}

double max_relative_error(const ModelParams& fitted, const std::array<double, 3>& truth) {
    double worst = 0.0;
    for (std::size_t j = 0; j < 3; ++j)
        worst = std::max(worst, std::abs(fitted.coefficients()[j] - truth[j]) / std::abs(truth[j]));
    return worst;
}

Outcome ac3() {
    const TimeGrid grid(1e-3, 1.0);
    const auto trials = recovery_trials(50, 3, grid);
    std::mt19937_64 noise_gen(33);
    std::normal_distribution<double> noise(0.0, 0.003);
    int clean_ok = 0;
    int noisy_ok = 0;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const RecoveryTrial& t = trials[i];
        std::vector<double> clean(t.curve.data(), t.curve.data() + t.curve.size());
        const fit::FitResult rc = fit::fit(fit::default_problem(t.params, grid, clean, ModelKind::Enhanced));
        const double ec = max_relative_error(rc.model, t.truth);
        if (ec <= 1e-4) ++clean_ok;
        else detail("noiseless trial " + std::to_string(i) + " missed: max relative error " + fmt(ec));

        std::vector<double> noisy = clean;
        for (double& v : noisy) v += noise(noise_gen);
        const fit::FitProblem problem = fit::default_problem(t.params, grid, noisy, ModelKind::Enhanced);
        const fit::FitResult rn = fit::fit(problem);
        const double en = max_relative_error(rn.model, t.truth);
        if (en <= 5e-2) {
            ++noisy_ok;
        } else {
            detail("noisy trial " + std::to_string(i) + " b=(" + fmt(t.truth[0]) + ", " + fmt(t.truth[1]) + ", " +
                   fmt(t.truth[2]) + ") fitted (" + fmt(rn.model.b1()) + ", " + fmt(rn.model.b2()) + ", " +
                   fmt(rn.model.b3()) + ") rel err " + fmt(en) + "; RSS fitted " + fmt(rn.rss) + " vs at truth " +
                   fmt(fit::residual_sum_of_squares(problem, t.truth)));
        }
    }
    return {clean_ok == 50 && noisy_ok >= 45, "fitter recovery: noiseless " + std::to_string(clean_ok) +
                                                  "/50 within 1e-4 (need 50), noisy sigma=0.003 " +
                                                  std::to_string(noisy_ok) + "/50 within 5e-2 (need 45)"};
}

std::vector<analysis::SimulatedCase> load_sims(const pipeline::Workspace& ws, const pipeline::Phase1Result& r) {
    std::vector<analysis::SimulatedCase> out;
    for (std::size_t i = 0; i < r.cases.size(); ++i)
        out.push_back({r.cases[i], io::read_signal_csv(ws.path(r.signal_files[i]))});
    return out;
}

Outcome ac4(const fs::path& workdir, int threads) {
    // 2 d x 2 r_tx x 1 D x 2 r_rx from the training values, 20 replications.
    const pipeline::ParameterGrid grid{{4, 8}, {5, 10}, {75}, {5, 10}, nn::Provenance::TDS};
    const sim::SimConfig cfg = desk_config(20, 4);
    pipeline::Workspace ws(workdir / "ac4");
    const auto prim = pipeline::run_phase1(ws, grid, cfg, ModelKind::Primitive, threads);
    const auto enh = pipeline::run_phase1(ws, grid, cfg, ModelKind::Enhanced, threads);
    if (!prim.failures.empty() || !enh.failures.empty()) return {false, "model ordering: phase 1 had case failures"};
    std::vector<nn::CaseRecord> fits = prim.records;
    fits.insert(fits.end(), enh.records.begin(), enh.records.end());
    const std::vector<analysis::Method> methods{analysis::Method::PrimitiveFit, analysis::Method::EnhancedFit};
    const auto eval = analysis::evaluate_vds(load_sims(ws, prim), fits, {}, cfg, methods);
    int better = 0;
    for (const analysis::CaseRmse& c : eval.cases) {
        const double p = c.rmse[static_cast<std::size_t>(analysis::Method::PrimitiveFit)];
        const double e = c.rmse[static_cast<std::size_t>(analysis::Method::EnhancedFit)];
        if (e < p) ++better;
        detail("d=" + fmt(c.params.d) + " r_tx=" + fmt(c.params.r_tx) + " r_rx=" + fmt(c.params.r_rx) +
               ": RMSE primitive " + fmt(p) + ", enhanced " + fmt(e) + " molecules");
    }
    return {better == 8, "model ordering: enhanced-fit RMSE < primitive-fit RMSE in " + std::to_string(better) +
                             "/8 cases (need 8/8)"};
}

// AC5 and AC6 share one run: all 135 training cases, the 12-case validation
// subset, 50 replications, enhanced model, H = 10.
struct GeneralizationRun {
    analysis::Evaluation eval;
    bool ok = false;
    std::string error;
};

GeneralizationRun generalization_run(const fs::path& workdir, int threads) {
    GeneralizationRun out;
    pipeline::RunOptions opts{};
    opts.tds = pipeline::table1_grids().first;
    opts.vds = pipeline::reduced_grids().second;
    opts.sim = desk_config(50, 5);
    opts.kinds = {ModelKind::Enhanced};
    opts.threads = threads;
    pipeline::Workspace ws(workdir / "ac5");
    const auto t0 = std::chrono::steady_clock::now();
    const pipeline::RunOutputs run = pipeline::run_full(ws, opts);
    const auto& k = run.per_kind.front();
    detail("training records " + std::to_string(k.tds.records.size()) + ", validation cases " +
           std::to_string(k.vds.records.size()) + ", network epochs " + std::to_string(k.phase2->report.epochs) +
           ", gamma " + fmt(k.phase2->report.gamma) + ", " +
           fmt(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), "%.0f") + " s");
    if (!k.tds.failures.empty() || !k.vds.failures.empty()) {
        out.error = "phase 1 had case failures";
        return out;
    }
    const std::vector<analysis::Method> methods{analysis::Method::EnhancedFit, analysis::Method::EnhancedAnn};
    out.eval = analysis::evaluate_vds(load_sims(ws, k.vds), k.vds.records, k.predictions, opts.sim, methods);
    out.ok = true;
    return out;
}

Outcome ac5(const GeneralizationRun& run) {
    if (!run.ok) return {false, "ANN generalization: " + run.error};
    int within = 0;
    for (const analysis::CaseRmse& c : run.eval.cases) {
        const double f = c.rmse[static_cast<std::size_t>(analysis::Method::EnhancedFit)];
        const double a = c.rmse[static_cast<std::size_t>(analysis::Method::EnhancedAnn)];
        if (a <= 2.0 * f) ++within;
        detail("d=" + fmt(c.params.d) + " r_tx=" + fmt(c.params.r_tx) + " r_rx=" + fmt(c.params.r_rx) +
               ": RMSE fit " + fmt(f) + ", ANN " + fmt(a) + " molecules, ratio " + fmt(a / f, "%.2f"));
    }
    const std::size_t n = run.eval.cases.size();
    return {within * 5 >= static_cast<int>(n) * 4,
            "ANN generalization: enhanced-ANN RMSE <= 2x enhanced-fit RMSE on " + std::to_string(within) + "/" +
                std::to_string(n) + " validation cases (need >= 80%)"};
}

Outcome ac6(const GeneralizationRun& run) {
    if (!run.ok) return {false, "distance trend: " + run.error};
    bool all_negative = true;
    std::string rhos;
    for (const analysis::Trend& t : analysis::distance_trend(run.eval.groups, analysis::Method::EnhancedAnn)) {
        all_negative = all_negative && t.rho < 0.0;
        rhos += " r_rx=" + fmt(t.r_rx) + ":" + fmt(t.rho, "%.3f");
    }
    for (const analysis::RmseGroup& g : run.eval.groups)
        detail("group d=" + fmt(g.d) + " r_rx=" + fmt(g.r_rx) + " (" + std::to_string(g.members) +
               " cases): enhanced-ANN mean RMSE " + fmt(g.mean(analysis::Method::EnhancedAnn)));
    return {all_negative, "distance trend: Spearman(d, enhanced-ANN group RMSE) per r_rx stratum" + rhos +
                              " (need all < 0)"};
}

// Every regular file under `root` except the manifest, keyed by relative path.
std::map<std::string, std::string> tree_contents(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        const std::string rel = fs::relative(e.path(), root).generic_string();
        if (rel != "manifest.json") out[rel] = io::read_file(e.path());
    }
    return out;
}

Outcome ac7(const fs::path& workdir) {
    bool ok = true;

    double grad = 0.0;
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> w(-1.5, 1.5);
    const auto tds = pipeline::table1_grids().first.cases();
    for (ModelKind kind : {ModelKind::Primitive, ModelKind::Enhanced}) {
        const std::size_t out_dim = coefficient_count(kind);
        std::vector<double> weights(nn::Network::weight_count(10, out_dim));
        for (int rep = 0; rep < 5; ++rep) {
            for (double& x : weights) x = w(gen);
            const nn::Network net(kind, 10, {{2, 5, 5, 50}, {10, 10, 10, 100}},
                                  kind == ModelKind::Primitive ? nn::MinMaxScaling{{0.5}, {2}}
                                                               : nn::MinMaxScaling{{0.5, 0.3, 0.3}, {2, 0.7, 0.7}},
                                  weights);
            for (std::size_t c = 0; c < tds.size(); c += 17) {
                const ModelParams target = kind == ModelKind::Primitive ? ModelParams::primitive(1.0)
                                                                        : ModelParams::enhanced(1.0, 0.5, 0.5);
                grad = std::max(grad, nn::gradient_check(net, {tds[c], target, nn::Provenance::TDS}));
            }
        }
    }
    detail("network gradient check: max relative error " + fmt(grad));
    ok = ok && grad <= 1e-6;

    double jac = 0.0;
    const TimeGrid grid(1e-3, 1.0);
    for (std::size_t c = 0; c < tds.size(); c += 9) {
        jac = std::max(jac, fit::jacobian_check(tds[c], ModelKind::Primitive, std::vector<double>{1.1}, grid));
        jac = std::max(jac, fit::jacobian_check(tds[c], ModelKind::Enhanced, std::vector<double>{1.1, 0.55, 0.45}, grid));
    }
    detail("fitter Jacobian check: max deviation " + fmt(jac));
    ok = ok && jac <= 1e-6;

    double erfc_dev = 0.0;
    for (const auto& s : oracle::kErfcTable) erfc_dev = std::max(erfc_dev, std::abs(mcvd::erfc(s.x) - s.value));
    detail("erfc vs 40-digit reference: max absolute deviation " + fmt(erfc_dev));
    ok = ok && erfc_dev <= 1e-12;

    // Two complete pipeline runs on small grids, 1 and 8 threads, same seed.
    pipeline::RunOptions opts{};
    opts.tds = pipeline::ParameterGrid{{2, 6, 10}, {5, 10}, {50, 100}, {5, 10}, nn::Provenance::TDS};
    opts.vds = pipeline::ParameterGrid{{5, 9}, {4}, {80}, {6, 8}, nn::Provenance::VDS};
    opts.sim = desk_config(3, 7);
    std::vector<std::map<std::string, std::string>> trees;
    std::vector<nlohmann::json> artifacts;
    for (int threads : {1, 8}) {
        const fs::path dir = workdir / ("ac7_threads" + std::to_string(threads));
        fs::remove_all(dir);
        pipeline::Workspace ws(dir);
        opts.threads = threads;
        (void)pipeline::run_full(ws, opts);
        trees.push_back(tree_contents(dir));
        artifacts.push_back(ws.manifest()["artifacts"]);
    }
    const bool same = trees[0] == trees[1] && artifacts[0] == artifacts[1];
    detail("pipeline 1 vs 8 threads: " + std::to_string(trees[0].size()) + " artifacts, " +
           (same ? "byte-identical" : "DIFFERENT"));
    ok = ok && same;
    return {ok, "numerical hygiene: gradient " + fmt(grad) + " <= 1e-6, Jacobian " + fmt(jac) + " <= 1e-6, erfc " +
                    fmt(erfc_dev) + " <= 1e-12, pipeline 1 vs 8 threads " + (same ? "identical" : "differs")};
}

Outcome ac8(const fs::path& workdir, bool run_full_table, int threads) {
    const auto [tds, vds] = pipeline::table1_grids();
    const sim::SimConfig cfg = pipeline::table1_sim_config();
    std::set<std::tuple<double, double, double, double>> distinct;
    for (const auto* g : {&tds, &vds})
        for (const SystemParams& p : g->cases()) distinct.insert({p.d, p.r_tx, p.r_rx, p.diff_coeff});
    const bool shape = distinct.size() == 270 && cfg.n_molecules == 3000 && cfg.n_replications == 500 &&
                       cfg.grid.n_bins() == 1000;
    if (!run_full_table) {
        return {shape, "full reference reproduction: " + std::to_string(distinct.size()) + " distinct cases, " +
                           std::to_string(cfg.n_molecules) + " molecules x " + std::to_string(cfg.n_replications) +
                           " replications configured (run with --full-table; not part of CI)"};
    }
    pipeline::RunOptions opts{};
    opts.tds = tds;
    opts.vds = vds;
    opts.sim = cfg;
    opts.threads = threads;
    pipeline::Workspace ws(workdir / "ac8_full_table");
    const auto run = pipeline::run_full(ws, opts);
    std::size_t records = 0;
    for (const auto& k : run.per_kind) records += k.tds.records.size() + k.vds.records.size();
    return {shape && records == 540, "full reference reproduction ran: " + std::to_string(records) +
                                         " fitted records over both model kinds (need 540)"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string workdir = "acceptance_run";
    std::vector<int> only;
    bool full_table = false;
    int threads = 0;
    app.add_option("--workdir", workdir, "scratch directory for workspaces");
    app.add_option("--only", only, "run only these criteria (1-8)");
    app.add_flag("--full-table", full_table, "also run the full reference reproduction (270 cases, 500 replications) for criterion 8");
    app.add_option("--threads", threads, "worker threads (0 = OpenMP default)");
    CLI11_PARSE(app, argc, argv);

    const fs::path dir(workdir);
    fs::create_directories(dir);
    const auto wanted = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };

    int failed = 0;
    const auto report = [&](int n, const std::function<Outcome()>& fn) {
        if (!wanted(n)) return;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << " AC" << n << " " << o.summary << " [" << fmt(secs, "%.1f")
                  << " s]\n"
                  << std::flush;
    };

    report(1, [] { return ac1(); });
    report(2, [] { return ac2(); });
    report(3, [] { return ac3(); });
    report(4, [&] { return ac4(dir, threads); });
    if (wanted(5) || wanted(6)) {
        GeneralizationRun run;
        try {
            run = generalization_run(dir, threads);
        } catch (const std::exception& e) {
            run.error = std::string("threw: ") + e.what();
        }
        report(5, [&] { return ac5(run); });
        report(6, [&] { return ac6(run); });
    }
    report(7, [&] { return ac7(dir); });
    report(8, [&] { return ac8(dir, full_table, threads); });
    return failed == 0 ? 0 : 1;
}
