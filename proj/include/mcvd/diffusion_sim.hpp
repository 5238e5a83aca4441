#pragma once

#include <cassert>
#include <cstdint>
#include <span>
#include <vector>

#include "mcvd/channel.hpp"
#include "mcvd/rng.hpp"

namespace mcvd::sim {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double distance_squared(const Vec3& a, const Vec3& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = a.z - b.z;
    return dx * dx + dy * dy + dz * dz;
}

struct SimConfig {
    std::int64_t n_molecules = 3000;
    std::int64_t n_replications = 50;
    TimeGrid grid{1e-3, 1.0};
    std::uint64_t seed = 1;
    std::int64_t substep_factor = 1;

    void validate() const;
    double substep_dt() const { return grid.dt() / static_cast<double>(substep_factor); }
    std::int64_t trajectories() const { return n_molecules * n_replications; }
};

/// Receiver at the origin; transmitter (if any) on the +x axis with the
/// emission point on its surface facing the receiver.
struct Geometry {
    Vec3 rx_center;
    double rx_radius = 0.0;
    Vec3 tx_center;
    double tx_radius = 0.0;  ///< 0 for a point transmitter
    Vec3 emission_point;

    bool has_transmitter() const { return tx_radius > 0.0; }
};

Geometry build_geometry(const SystemParams& p);

struct StepOutcome {
    bool absorbed = false;
    Vec3 position;  ///< unchanged input position when the move was rejected
};

/// One Brownian move with per-axis standard deviation `sigma`. Absorption is
/// checked before reflection; a move ending inside the transmitter is rolled
/// back.
template <typename Stream>
inline StepOutcome step_molecule(const Vec3& pos, const Geometry& geom, double sigma, Stream& gaussian) {
    const double gx = gaussian();
    const double gy = gaussian();
    const double gz = gaussian();
    const Vec3 candidate{pos.x + gx * sigma, pos.y + gy * sigma, pos.z + gz * sigma};
    if (distance_squared(candidate, geom.rx_center) <= geom.rx_radius * geom.rx_radius) {
        return {true, candidate};
    }
    if (geom.tx_radius > 0.0 &&
        distance_squared(candidate, geom.tx_center) <= geom.tx_radius * geom.tx_radius) {
        return {false, pos};
    }
    return {false, candidate};
}

/// First-hitting counts of one replication, one entry per output bin.
std::vector<std::uint64_t> simulate_replication(const Geometry& geom, const SystemParams& p,
                                                const SimConfig& cfg, std::uint64_t replication);

/// Mean cumulative hitting fraction over all replications. Replications run
/// in parallel (`threads` <= 0 uses the OpenMP default); the result is
/// bitwise independent of the thread count.
ReceivedSignal simulate_case(const SystemParams& p, const SimConfig& cfg, int threads = 0);

/// Single-threaded reference of simulate_case; must agree bit for bit.
ReceivedSignal simulate_case_serial(const SystemParams& p, const SimConfig& cfg);

/// Runs every case with seed rng::case_seed(cfg.seed, case). Output order
/// follows input order. Invalid cases are collected and reported together.
std::vector<ReceivedSignal> simulate_batch(std::span<const SystemParams> cases, const SimConfig& cfg,
                                           int threads = 0);

/// Binomial standard error of the final hitting fraction of a simulated signal.
double final_fraction_standard_error(const ReceivedSignal& sig, const SimConfig& cfg);

}  // namespace mcvd::sim
