#include "mcvd/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cinttypes>
#include <cstdio>
#include <ctime>
#include <exception>
#include <set>

#include "mcvd/errors.hpp"
#include "mcvd/io.hpp"
#include "mcvd/parallel.hpp"
#include "mcvd/rng.hpp"

namespace mcvd::pipeline {

using nlohmann::json;

namespace {

std::uint64_t bits(double v) { return std::bit_cast<std::uint64_t>(v); }

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::uint64_t sim_hash(const SystemParams& p, const sim::SimConfig& cfg) {
    return rng::mix(rng::case_key(p),
                    {static_cast<std::uint64_t>(cfg.n_molecules), static_cast<std::uint64_t>(cfg.n_replications),
                     bits(cfg.grid.dt()), static_cast<std::uint64_t>(cfg.grid.n_bins()), cfg.seed,
                     static_cast<std::uint64_t>(cfg.substep_factor)});
}

std::string fit_artifact(ModelKind kind, std::uint64_t signal_hash) {
    const std::uint64_t h = rng::mix(signal_hash, {kind == ModelKind::Primitive ? 1ULL : 2ULL});
    return "fits/" + std::string(to_string(kind)) + "/" + hex64(h) + ".csv";
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

void check_values(const std::vector<double>& values, const char* name) {
    if (values.empty()) throw ValidationError(std::string("parameter grid: no values for ") + name);
    const std::set<double> unique(values.begin(), values.end());
    if (unique.size() != values.size()) throw ValidationError(std::string("parameter grid: repeated ") + name);
}

}  // namespace

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

std::vector<SystemParams> ParameterGrid::cases() const {
    std::vector<SystemParams> out;
    out.reserve(size());
    for (double d : distances)
        for (double rtx : tx_radii)
            for (double D : diff_coeffs)
                for (double rrx : rx_radii) out.push_back(SystemParams{d, rtx, rrx, D});
    return out;
}

std::uint64_t ParameterGrid::hash() const {
    std::uint64_t h = rng::mix(label == nn::Provenance::TDS ? 0x544453ULL : 0x564453ULL, {});
    for (const auto* list : {&distances, &tx_radii, &diff_coeffs, &rx_radii}) {
        h = rng::mix(h, {0xffULL, list->size()});
        for (double v : *list) h = rng::mix(h, {bits(v)});
    }
    return h;
}

void ParameterGrid::validate() const {
    check_values(distances, "distances");
    check_values(tx_radii, "tx_radii");
    check_values(diff_coeffs, "diff_coeffs");
    check_values(rx_radii, "rx_radii");
    for (const SystemParams& p : cases()) p.validate();
}

std::pair<ParameterGrid, ParameterGrid> table1_grids() {
    ParameterGrid tds{{2, 4, 6, 8, 10}, {5, 7.5, 10}, {50, 75, 100}, {5, 7.5, 10}, nn::Provenance::TDS};
    ParameterGrid vds{{3, 5, 7, 9, 11}, {4, 6, 8}, {60, 70, 80}, {4, 6, 8}, nn::Provenance::VDS};
    return {tds, vds};
}

std::pair<ParameterGrid, ParameterGrid> reduced_grids() {
    ParameterGrid tds{{2, 4, 6, 8, 10}, {5, 10}, {50, 100}, {5, 7.5, 10}, nn::Provenance::TDS};
    ParameterGrid vds{{5, 7, 9}, {4, 8}, {80}, {6, 8}, nn::Provenance::VDS};
    return {tds, vds};
}

ParameterGrid grid_from_json(const json& entry, nn::Provenance label) {
    try {
        return ParameterGrid{entry.at("distances_um").get<std::vector<double>>(),
                             entry.at("tx_radii_um").get<std::vector<double>>(),
                             entry.at("diff_coeffs_um2s").get<std::vector<double>>(),
                             entry.at("rx_radii_um").get<std::vector<double>>(), label};
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed grid entry in manifest: ") + e.what());
    }
}

sim::SimConfig sim_config_from_json(const json& j) {
    try {
        sim::SimConfig cfg;
        cfg.n_molecules = j.at("n_molecules").get<std::int64_t>();
        cfg.n_replications = j.at("n_replications").get<std::int64_t>();
        cfg.grid = TimeGrid(io::parse_double(j.at("dt_s").get<std::string>()),
                            io::parse_double(j.at("t_end_s").get<std::string>()));
        cfg.substep_factor = j.at("substep_factor").get<std::int64_t>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
        cfg.validate();
        return cfg;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed simulation settings in manifest: ") + e.what());
    }
}

sim::SimConfig table1_sim_config() {
    sim::SimConfig cfg;
    cfg.n_molecules = 3000;
    cfg.n_replications = 500;
    return cfg;
}

std::string records_artifact(nn::Provenance label, ModelKind kind) {
    return "records_" + lower(nn::to_string(label)) + "_" + std::string(to_string(kind)) + ".csv";
}
std::string network_artifact(ModelKind kind) { return "network_" + std::string(to_string(kind)) + ".txt"; }
std::string predictions_artifact(ModelKind kind) {
    return "predictions_" + std::string(to_string(kind)) + ".csv";
}

std::string signal_artifact(const ParameterGrid& grid, const SystemParams& p, const sim::SimConfig& cfg) {
    return "signals/" + lower(nn::to_string(grid.label)) + "/" + hex64(sim_hash(p, cfg)) + ".csv";
}

json sim_config_json(const sim::SimConfig& cfg) {
    return json{{"n_molecules", cfg.n_molecules},   {"n_replications", cfg.n_replications},
                {"dt_s", io::format_double(cfg.grid.dt())}, {"t_end_s", io::format_double(cfg.grid.t_end())},
                {"n_bins", cfg.grid.n_bins()},       {"substep_factor", cfg.substep_factor},
                {"seed", cfg.seed}};
}

json train_report_json(const nn::TrainReport& r) {
    json trace = json::array();
    for (const nn::EpochTrace& e : r.trace)
        trace.push_back({{"objective_before", io::format_double(e.objective_before)},
                         {"objective_after", io::format_double(e.objective_after)},
                         {"alpha", io::format_double(e.alpha)},
                         {"beta", io::format_double(e.beta)},
                         {"gamma", io::format_double(e.gamma)},
                         {"mu", io::format_double(e.mu)}});
    return json{{"epochs", r.epochs},
                {"e_d", io::format_double(r.e_d)},
                {"e_w", io::format_double(r.e_w)},
                {"alpha", io::format_double(r.alpha)},
                {"beta", io::format_double(r.beta)},
                {"gamma", io::format_double(r.gamma)},
                {"n_targets", r.n_targets},
                {"stop_reason", r.stop_reason},
                {"warnings", r.warnings},
                {"trace", trace}};
}

// ---------------------------------------------------------------------------
// Workspace

Workspace::Workspace(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_);
    const fs::path file = root_ / "manifest.json";
    if (fs::exists(file)) {
        try {
            manifest_ = json::parse(io::read_file(file));
        } catch (const json::exception& e) {
            throw ValidationError("corrupt manifest " + file.string() + ": " + e.what());
        }
    } else {
        manifest_ = json{{"format", "mcvd-manifest"}, {"version", 1}, {"stages", json::array()},
                         {"artifacts", json::object()}, {"grids", json::object()}};
    }
}

void Workspace::record_artifact(const std::string& relative, const std::string& stage,
                                const std::vector<std::string>& inputs) {
    manifest_["artifacts"][relative] = json{{"stage", stage}, {"depends_on", inputs}};
}

void Workspace::record_stage(const json& stage) { manifest_["stages"].push_back(stage); }

void Workspace::set_config(const json& config) {
    for (const auto& [key, value] : config.items()) manifest_[key] = value;
}

void Workspace::record_grid(const ParameterGrid& grid) {
    manifest_["grids"][std::string(nn::to_string(grid.label))] =
        json{{"hash", hex64(grid.hash())}, {"cases", grid.size()},       {"distances_um", grid.distances},
             {"tx_radii_um", grid.tx_radii}, {"diff_coeffs_um2s", grid.diff_coeffs}, {"rx_radii_um", grid.rx_radii}};
}

void Workspace::save() const { io::write_file_atomic(root_ / "manifest.json", manifest_.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Phase 1

Phase1Result run_phase1(Workspace& ws, const ParameterGrid& grid, const sim::SimConfig& cfg, ModelKind kind,
                        int threads) {
    grid.validate();
    cfg.validate();
    const std::string stage = "phase1_" + lower(nn::to_string(grid.label)) + "_" + std::string(to_string(kind));
    const std::string started = utc_now();
    ws.set_config({{"seed", cfg.seed}, {"sim_config", sim_config_json(cfg)}});
    ws.record_grid(grid);

    const std::vector<SystemParams> cases = grid.cases();
    const std::size_t n = cases.size();
    Phase1Result out;

    // Simulate (or reload) every case. Replications run in parallel inside a case.
    std::vector<std::optional<ReceivedSignal>> signals(n);
    std::vector<std::string> signal_files(n);
    std::vector<std::optional<CaseFailure>> failed(n);
    for (std::size_t i = 0; i < n; ++i) {
        const SystemParams& p = cases[i];
        signal_files[i] = signal_artifact(grid, p, cfg);
        try {
            if (ws.exists(signal_files[i])) {
                signals[i] = io::read_signal_csv(ws.path(signal_files[i]));
                ++out.signals_reused;
            } else {
                sim::SimConfig case_cfg = cfg;
                case_cfg.seed = rng::case_seed(cfg.seed, p);
                signals[i] = sim::simulate_case(p, case_cfg, threads);
                io::write_signal_csv(ws.path(signal_files[i]), *signals[i]);
                ++out.simulated;
            }
            ws.record_artifact(signal_files[i], "simulate", {});
        } catch (const std::exception& e) {
            failed[i] = CaseFailure{p, "simulate", e.what()};
        }
    }

    // Fit (or reload) every simulated case. Fits run in parallel; files are
    // written afterwards by this thread only.
    std::vector<std::string> fit_files(n);
    std::vector<std::optional<fit::FitResult>> fits(n);
    std::vector<char> fresh(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!signals[i]) continue;
        fit_files[i] = fit_artifact(kind, sim_hash(cases[i], cfg));
        if (ws.exists(fit_files[i])) {
            try {
                fits[i] = io::parse_fit_result_csv(io::read_file(ws.path(fit_files[i])));
                ++out.fits_reused;
            } catch (const std::exception&) {
                fits[i].reset();
            }
        }
    }
    const long long nn_cases = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic) num_threads(parallel::resolve_threads(threads))
    for (long long ii = 0; ii < nn_cases; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        if (!signals[i] || fits[i]) continue;
        try {
            fits[i] = fit::fit(fit::default_problem(cases[i], *signals[i], kind));
            fresh[i] = 1;
        } catch (const std::exception& e) {
            failed[i] = CaseFailure{cases[i], "fit", e.what()};
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (failed[i]) {
            out.failures.push_back(*failed[i]);
            continue;
        }
        if (fresh[i]) {
            io::write_file_atomic(ws.path(fit_files[i]), io::fit_result_csv(*fits[i]));
            ++out.fitted;
        }
        ws.record_artifact(fit_files[i], "fit", {signal_files[i]});
        out.records.push_back(nn::CaseRecord{cases[i], fits[i]->model, grid.label});
        out.cases.push_back(cases[i]);
        out.signal_files.push_back(signal_files[i]);
        out.fits.push_back(*fits[i]);
    }

    out.records_file = records_artifact(grid.label, kind);
    io::write_records_csv(ws.path(out.records_file), out.records);
    std::vector<std::string> deps;
    for (std::size_t i = 0; i < n; ++i)
        if (!failed[i]) deps.push_back(fit_files[i]);
    ws.record_artifact(out.records_file, stage, deps);

    json failures = json::array();
    for (const CaseFailure& f : out.failures)
        failures.push_back({{"d_um", f.params.d}, {"rtx_um", f.params.r_tx}, {"rrx_um", f.params.r_rx},
                            {"D_um2s", f.params.diff_coeff}, {"stage", f.stage}, {"message", f.message}});
    ws.record_stage({{"name", stage},
                     {"started", started},
                     {"finished", utc_now()},
                     {"grid_hash", hex64(grid.hash())},
                     {"cases", n},
                     {"records", out.records.size()},
                     {"simulated", out.simulated},
                     {"signals_reused", out.signals_reused},
                     {"fitted", out.fitted},
                     {"fits_reused", out.fits_reused},
                     {"failures", failures}});
    ws.save();
    return out;
}

// ---------------------------------------------------------------------------
// Phase 2

Phase2Result run_phase2(Workspace& ws, std::span<const nn::CaseRecord> tds, const std::string& records_file,
                        std::size_t hidden, std::uint64_t seed) {
    if (tds.empty()) throw ValidationError("phase 2: empty training dataset");
    const ModelKind kind = tds.front().output.kind();
    const std::string stage = "phase2_" + std::string(to_string(kind));
    const std::string started = utc_now();
    try {
        auto [net, report] = nn::train(tds, hidden, seed);
        Phase2Result out{net, report, network_artifact(kind),
                         "train_report_" + std::string(to_string(kind)) + ".json"};
        io::write_network(ws.path(out.network_file), net);
        io::write_file_atomic(ws.path(out.report_file), train_report_json(report).dump(2) + "\n");
        ws.record_artifact(out.network_file, stage, {records_file});
        ws.record_artifact(out.report_file, stage, {records_file});
        ws.record_stage({{"name", stage},
                         {"started", started},
                         {"finished", utc_now()},
                         {"seed", seed},
                         {"hidden", hidden},
                         {"epochs", report.epochs},
                         {"stop_reason", report.stop_reason},
                         {"warnings", report.warnings}});
        ws.save();
        return out;
    } catch (const std::exception& e) {
        ws.record_stage({{"name", stage}, {"started", started}, {"finished", utc_now()}, {"error", e.what()}});
        ws.save();
        throw;
    }
}

std::vector<nn::CaseRecord> predict_vds(const nn::Network& net, std::span<const SystemParams> vds_inputs,
                                        std::vector<std::size_t>* extrapolated) {
    std::vector<nn::CaseRecord> out;
    out.reserve(vds_inputs.size());
    for (std::size_t i = 0; i < vds_inputs.size(); ++i) {
        if (extrapolated && net.extrapolates(vds_inputs[i])) extrapolated->push_back(i);
        out.push_back(nn::CaseRecord{vds_inputs[i], nn::forward(net, vds_inputs[i]), nn::Provenance::VDS});
    }
    return out;
}

RunOutputs run_full(Workspace& ws, const RunOptions& opts) {
    RunOutputs out;
    for (ModelKind kind : opts.kinds) {
        KindOutputs k;
        k.kind = kind;
        k.tds = run_phase1(ws, opts.tds, opts.sim, kind, opts.threads);
        const std::uint64_t net_seed = rng::mix(opts.sim.seed, {0x6e6574ULL, kind == ModelKind::Primitive ? 1ULL : 2ULL});
        k.phase2 = run_phase2(ws, k.tds.records, k.tds.records_file, opts.hidden, net_seed);
        k.vds = run_phase1(ws, opts.vds, opts.sim, kind, opts.threads);
        const std::vector<SystemParams> vds_inputs = opts.vds.cases();
        k.predictions = predict_vds(k.phase2->network, vds_inputs, &k.extrapolated);
        k.predictions_file = predictions_artifact(kind);
        io::write_records_csv(ws.path(k.predictions_file), k.predictions);
        ws.record_artifact(k.predictions_file, "predict_" + std::string(to_string(kind)), {k.phase2->network_file});
        ws.record_stage({{"name", "predict_" + std::string(to_string(kind))},
                         {"finished", utc_now()},
                         {"cases", vds_inputs.size()},
                         {"extrapolated", k.extrapolated.size()}});
        ws.save();
        out.per_kind.push_back(std::move(k));
    }
    return out;
}

}  // namespace mcvd::pipeline
