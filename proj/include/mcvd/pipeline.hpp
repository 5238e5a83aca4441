#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mcvd/channel.hpp"
#include "mcvd/diffusion_sim.hpp"
#include "mcvd/fitter.hpp"
#include "mcvd/neuralnet.hpp"

namespace mcvd::pipeline {

namespace fs = std::filesystem;

/// Cartesian product of parameter values. Cases are enumerated with d
/// outermost, then r_tx, D and r_rx.
struct ParameterGrid {
    std::vector<double> distances;
    std::vector<double> tx_radii;
    std::vector<double> diff_coeffs;
    std::vector<double> rx_radii;
    nn::Provenance label = nn::Provenance::TDS;

    std::size_t size() const {
        return distances.size() * tx_radii.size() * diff_coeffs.size() * rx_radii.size();
    }
    std::vector<SystemParams> cases() const;
    std::uint64_t hash() const;
    /// Throws ValidationError for an empty or repeated value, or an invalid case.
    void validate() const;
};

/// The training and validation grids of the reference experiment (135 cases each).
std::pair<ParameterGrid, ParameterGrid> table1_grids();

/// Reads a grid back from its manifest entry.
ParameterGrid grid_from_json(const nlohmann::json& entry, nn::Provenance label);
/// Reads the simulation settings stored by run_phase1.
sim::SimConfig sim_config_from_json(const nlohmann::json& j);

/// Desk-scale subsets of the reference grid values: 60 training cases
/// (d{2,4,6,8,10} x r_tx{5,10} x D{50,100} x r_rx{5,7.5,10}) and 12 validation
/// cases (d{5,7,9} x r_tx{4,8} x D{80} x r_rx{6,8}).
std::pair<ParameterGrid, ParameterGrid> reduced_grids();

/// Simulation settings of the reference experiment: 3000 molecules, 500
/// replications, 1 ms bins over 1 s.
sim::SimConfig table1_sim_config();

std::string hex64(std::uint64_t v);

/// One run directory and its manifest (manifest.json). Every artifact path
/// recorded in the manifest is relative to the directory.
class Workspace {
public:
    /// Opens `root`, loading an existing manifest or starting an empty one.
    explicit Workspace(fs::path root);

    const fs::path& root() const { return root_; }
    fs::path path(const std::string& relative) const { return root_ / relative; }
    bool exists(const std::string& relative) const { return fs::exists(path(relative)); }

    /// Registers `relative` as produced by `stage` from `inputs`.
    void record_artifact(const std::string& relative, const std::string& stage,
                         const std::vector<std::string>& inputs);
    void record_stage(const nlohmann::json& stage);
    void set_config(const nlohmann::json& config);
    /// Stores the grid's hash and values under its label.
    void record_grid(const ParameterGrid& grid);
    const nlohmann::json& manifest() const { return manifest_; }
    /// Atomically rewrites manifest.json.
    void save() const;

private:
    fs::path root_;
    nlohmann::json manifest_;
};

struct CaseFailure {
    SystemParams params;
    std::string stage;  ///< "simulate" or "fit"
    std::string message;
};

struct Phase1Result {
    std::vector<nn::CaseRecord> records;
    std::vector<SystemParams> cases;             ///< succeeded cases, same order as records
    std::vector<std::string> signal_files;       ///< relative paths, same order as records
    std::vector<fit::FitResult> fits;            ///< same order as records
    std::vector<CaseFailure> failures;
    std::string records_file;
    std::size_t simulated = 0;
    std::size_t signals_reused = 0;
    std::size_t fitted = 0;
    std::size_t fits_reused = 0;
};

/// Relative path of the persisted simulation of one case; the file name is a
/// content hash of (case, simulation settings).
std::string signal_artifact(const ParameterGrid& grid, const SystemParams& p, const sim::SimConfig& cfg);

/// Simulate and fit every case of `grid`. Already persisted signals and fits
/// are reused. Per-case failures are collected, not thrown.
Phase1Result run_phase1(Workspace& ws, const ParameterGrid& grid, const sim::SimConfig& cfg, ModelKind kind,
                        int threads = 0);

struct Phase2Result {
    nn::Network network;
    nn::TrainReport report;
    std::string network_file;
    std::string report_file;
};

inline constexpr std::size_t kDefaultHidden = 10;

/// Train on Phase-1 records and persist the network and its training report.
/// The network's manifest edge points at `records_file` only.
Phase2Result run_phase2(Workspace& ws, std::span<const nn::CaseRecord> tds, const std::string& records_file,
                        std::size_t hidden, std::uint64_t seed);

/// Predictions for validation inputs, tagged VDS. Takes no simulation data.
/// Indices of inputs outside the training range are appended to
/// `extrapolated` when it is given.
std::vector<nn::CaseRecord> predict_vds(const nn::Network& net, std::span<const SystemParams> vds_inputs,
                                        std::vector<std::size_t>* extrapolated = nullptr);

struct RunOptions {
    ParameterGrid tds;
    ParameterGrid vds;
    sim::SimConfig sim;
    std::vector<ModelKind> kinds{ModelKind::Primitive, ModelKind::Enhanced};
    std::size_t hidden = kDefaultHidden;
    int threads = 0;
};

struct KindOutputs {
    ModelKind kind = ModelKind::Primitive;
    Phase1Result tds;
    Phase1Result vds;
    std::optional<Phase2Result> phase2;
    std::vector<nn::CaseRecord> predictions;
    std::string predictions_file;
    std::vector<std::size_t> extrapolated;
};

struct RunOutputs {
    std::vector<KindOutputs> per_kind;
};

/// Both phases for every requested kind, followed by validation-set
/// simulations, fits and network predictions. Seeds derive from opts.sim.seed.
RunOutputs run_full(Workspace& ws, const RunOptions& opts);

nlohmann::json train_report_json(const nn::TrainReport& report);
nlohmann::json sim_config_json(const sim::SimConfig& cfg);

std::string records_artifact(nn::Provenance label, ModelKind kind);
std::string network_artifact(ModelKind kind);
std::string predictions_artifact(ModelKind kind);

}  // namespace mcvd::pipeline
