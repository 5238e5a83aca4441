#include "mcvd/diffusion_sim.hpp"

#include <cmath>
#include <string>

#include "mcvd/errors.hpp"
#include "mcvd/parallel.hpp"

namespace mcvd::sim {

void SimConfig::validate() const {
    if (n_molecules < 1) throw ValidationError("n_molecules must be >= 1");
    if (n_replications < 1) throw ValidationError("n_replications must be >= 1");
    if (substep_factor < 1) throw ValidationError("substep_factor must be >= 1");
}

Geometry build_geometry(const SystemParams& p) {
    p.validate();
    Geometry g;
    g.rx_center = {0.0, 0.0, 0.0};
    g.rx_radius = p.r_rx;
    g.emission_point = {p.r_rx + p.d, 0.0, 0.0};
    g.tx_radius = p.r_tx;
    g.tx_center = {p.r_rx + p.d + p.r_tx, 0.0, 0.0};
    return g;
}

namespace {

[[maybe_unused]] bool outside_bodies(const Vec3& pos, const Geometry& geom) {
    constexpr double slack = 1.0 - 1e-12;
    if (distance_squared(pos, geom.rx_center) <= geom.rx_radius * geom.rx_radius) return false;
    if (geom.has_transmitter() &&
        distance_squared(pos, geom.tx_center) < geom.tx_radius * geom.tx_radius * slack) {
        return false;
    }
    return true;
}

ReceivedSignal to_signal(std::span<const std::uint64_t> hits, const SimConfig& cfg) {
    const double emitted = static_cast<double>(cfg.trajectories());
    std::vector<double> values(hits.size());
    std::uint64_t running = 0;
    for (std::size_t k = 0; k < hits.size(); ++k) {
        running += hits[k];
        values[k] = static_cast<double>(running) / emitted;
    }
    return ReceivedSignal(cfg.grid, std::move(values), SignalSource::Simulation);
}

}  // namespace

std::vector<std::uint64_t> simulate_replication(const Geometry& geom, const SystemParams& p,
                                                const SimConfig& cfg, std::uint64_t replication) {
    const std::size_t n_bins = cfg.grid.n_bins();
    const auto substeps = static_cast<std::uint64_t>(cfg.substep_factor);
    const std::uint64_t n_steps = n_bins * substeps;
    const double sigma = std::sqrt(2.0 * p.diff_coeff * cfg.substep_dt());

    std::vector<std::uint64_t> hits(n_bins, 0);
    rng::GaussianStream gaussian(rng::replication_seed(cfg.seed, replication));
    for (std::int64_t m = 0; m < cfg.n_molecules; ++m) {
        Vec3 pos = geom.emission_point;
        for (std::uint64_t s = 0; s < n_steps; ++s) {
            const StepOutcome out = step_molecule(pos, geom, sigma, gaussian);
            if (out.absorbed) {
                // Hit time is the end of substep s, which falls in bin s / substeps.
                ++hits[s / substeps];
                break;
            }
            pos = out.position;
            assert(outside_bodies(pos, geom));
        }
    }
    return hits;
}

ReceivedSignal simulate_case_serial(const SystemParams& p, const SimConfig& cfg) {
    cfg.validate();
    const Geometry geom = build_geometry(p);
    std::vector<std::uint64_t> total(cfg.grid.n_bins(), 0);
    for (std::int64_t r = 0; r < cfg.n_replications; ++r) {
        const auto hits = simulate_replication(geom, p, cfg, static_cast<std::uint64_t>(r));
        for (std::size_t k = 0; k < total.size(); ++k) total[k] += hits[k];
    }
    return to_signal(total, cfg);
}

ReceivedSignal simulate_case(const SystemParams& p, const SimConfig& cfg, int threads) {
    cfg.validate();
    const Geometry geom = build_geometry(p);
    const std::size_t n_bins = cfg.grid.n_bins();
    std::vector<std::uint64_t> total(n_bins, 0);
    const std::int64_t n_reps = cfg.n_replications;

    // Integer counts make the merge order irrelevant.
#pragma omp parallel num_threads(parallel::resolve_threads(threads))
    {
        std::vector<std::uint64_t> local(n_bins, 0);
#pragma omp for schedule(dynamic, 1)
        for (std::int64_t r = 0; r < n_reps; ++r) {
            const auto hits = simulate_replication(geom, p, cfg, static_cast<std::uint64_t>(r));
            for (std::size_t k = 0; k < n_bins; ++k) local[k] += hits[k];
        }
#pragma omp critical(mcvd_sim_merge)
        for (std::size_t k = 0; k < n_bins; ++k) total[k] += local[k];
    }
    return to_signal(total, cfg);
}

std::vector<ReceivedSignal> simulate_batch(std::span<const SystemParams> cases, const SimConfig& cfg,
                                           int threads) {
    cfg.validate();
    std::string failures;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        try {
            cases[i].validate();
        } catch (const ValidationError& e) {
            failures += "\n  case " + std::to_string(i) + ": " + e.what();
        }
    }
    if (!failures.empty()) throw ValidationError("batch rejected:" + failures);

    std::vector<ReceivedSignal> out;
    out.reserve(cases.size());
    for (const SystemParams& p : cases) {
        SimConfig case_cfg = cfg;
        case_cfg.seed = rng::case_seed(cfg.seed, p);
        out.push_back(simulate_case(p, case_cfg, threads));
    }
    return out;
}

double final_fraction_standard_error(const ReceivedSignal& sig, const SimConfig& cfg) {
    const double f = sig.final_value();
    return std::sqrt(f * (1.0 - f) / static_cast<double>(cfg.trajectories()));
}

}  // namespace mcvd::sim
