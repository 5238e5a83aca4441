#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcvd/channel.hpp"
#include "mcvd/diffusion_sim.hpp"
#include "mcvd/neuralnet.hpp"

namespace mcvd::analysis {

namespace fs = std::filesystem;

enum class Method { PointFormula, PrimitiveFit, EnhancedFit, PrimitiveAnn, EnhancedAnn };
inline constexpr std::size_t kMethodCount = 5;
inline constexpr std::array<Method, kMethodCount> kAllMethods{Method::PointFormula, Method::PrimitiveFit,
                                                              Method::EnhancedFit, Method::PrimitiveAnn,
                                                              Method::EnhancedAnn};

std::string_view to_string(Method m);
Method parse_method(std::string_view text);
/// Model kind a method evaluates; PointFormula has none.
std::optional<ModelKind> method_kind(Method m);
bool is_ann(Method m);

/// Root mean square difference in molecules: sqrt(mean_k (n * (a_k - b_k))^2).
/// Throws ValidationError when the grids differ.
double rmse(const ReceivedSignal& a, const ReceivedSignal& b, double n_emitted);

/// One validation case and its simulated signal.
struct SimulatedCase {
    SystemParams params;
    ReceivedSignal signal;
};

struct CaseRmse {
    SystemParams params;
    std::array<double, kMethodCount> rmse{};  ///< NaN for methods not evaluated
};

/// Mean RMSE over the cases sharing (d, r_rx).
struct RmseGroup {
    double d = 0.0;
    double r_rx = 0.0;
    std::size_t members = 0;
    std::array<double, kMethodCount> mean_rmse{};  ///< NaN for methods not evaluated

    double mean(Method m) const { return mean_rmse[static_cast<std::size_t>(m)]; }
};

struct Evaluation {
    std::vector<CaseRmse> cases;
    std::vector<RmseGroup> groups;  ///< sorted by d, then r_rx
    std::vector<Method> methods;
};

/// Compares each requested method's curve with the simulation of every case.
/// `fit_records` and `ann_records` may mix model kinds; they are matched to
/// cases by input. Throws MissingArtifact listing every (case, method) pair
/// without a record. RMSE is in molecules per emission of cfg.n_molecules.
Evaluation evaluate_vds(std::span<const SimulatedCase> vds_sims, std::span<const nn::CaseRecord> fit_records,
                        std::span<const nn::CaseRecord> ann_records, const sim::SimConfig& cfg,
                        std::span<const Method> methods = kAllMethods);

/// Spearman rank correlation with average ranks for ties. NaN when either
/// input is constant.
double spearman(std::span<const double> x, std::span<const double> y);

struct Trend {
    double r_rx = 0.0;
    double rho = 0.0;
    std::size_t n_groups = 0;
};

/// Spearman correlation between d and a method's group-mean RMSE, per r_rx.
std::vector<Trend> distance_trend(std::span<const RmseGroup> groups, Method m);

std::string groups_csv(const Evaluation& eval);
std::string cases_csv(const Evaluation& eval);

/// A labeled curve for export.
struct Curve {
    Method method;
    ReceivedSignal signal;
};

/// Curve of a method on `grid`. Fit and ANN methods need the matching model.
Curve method_curve(Method m, const SystemParams& p, const TimeGrid& grid, const std::optional<ModelParams>& model);

/// Writes, into `out_dir`:
///   signal_simulation.csv and signal_<method>.csv (signal CSV schema),
///   sir_simulation.csv and sir_<method>.csv with columns
///     time_s,sir_own_end,sir_simulation_end,
///   received_signal.svg and sir_db.svg.
/// Returns the written paths in that order.
std::vector<fs::path> export_curves(const SystemParams& p, const ReceivedSignal& simulation,
                                    std::span<const Curve> curves, const fs::path& out_dir);

}  // namespace mcvd::analysis
