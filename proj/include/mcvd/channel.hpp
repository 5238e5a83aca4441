#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

namespace mcvd {

/// Physical inputs identifying one channel case. Lengths in micrometers,
/// diffusion coefficient in micrometers^2 / second.
struct SystemParams {
    double d = 0.0;           ///< gap from the emission point to the receiver surface
    double r_tx = 0.0;        ///< transmitter radius; 0 means a point transmitter
    double r_rx = 0.0;        ///< receiver radius
    double diff_coeff = 0.0;  ///< D

    /// Throws ValidationError unless d, r_rx, D > 0 and r_tx >= 0 (all finite).
    void validate() const;

    friend bool operator==(const SystemParams&, const SystemParams&) = default;
};

enum class ModelKind { Primitive, Enhanced };

std::string_view to_string(ModelKind kind);
/// Accepts "primitive" / "enhanced" (case-insensitive).
ModelKind parse_model_kind(std::string_view text);
/// Number of coefficients carried by a model of this kind (1 or 3).
std::size_t coefficient_count(ModelKind kind);

/// Fitted coefficients of the primitive (b1) or enhanced (b1, b2, b3) model.
class ModelParams {
public:
    static ModelParams primitive(double b1);
    static ModelParams enhanced(double b1, double b2, double b3);
    /// Builds from a coefficient vector whose length must match `kind`.
    static ModelParams from_coefficients(ModelKind kind, std::span<const double> coefficients);

    ModelKind kind() const { return kind_; }
    double b1() const { return coeffs_[0]; }
    /// Enhanced only; throws ValidationError for a primitive model.
    double b2() const;
    double b3() const;
    /// The active coefficients (length 1 or 3).
    std::span<const double> coefficients() const { return {coeffs_.data(), coefficient_count(kind_)}; }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;

private:
    ModelParams(ModelKind kind, std::array<double, 3> coeffs);
    void validate() const;

    ModelKind kind_ = ModelKind::Primitive;
    std::array<double, 3> coeffs_{1.0, 0.0, 0.0};
};

/// Uniform binning of [0, t_end] into bins of width dt. Bin k (0-based) ends
/// at time (k + 1) * dt.
class TimeGrid {
public:
    TimeGrid(double dt, double t_end);

    double dt() const { return dt_; }
    double t_end() const { return t_end_; }
    std::size_t n_bins() const { return n_bins_; }
    double bin_end(std::size_t k) const { return static_cast<double>(k + 1) * dt_; }

    /// Grids are equal when they produce the same bins; t_end is only the
    /// requested duration.
    friend bool operator==(const TimeGrid& a, const TimeGrid& b) {
        return a.dt_ == b.dt_ && a.n_bins_ == b.n_bins_;
    }

private:
    double dt_;
    double t_end_;
    std::size_t n_bins_;
};

enum class SignalSource { Simulation, PointFormula, PrimitiveModel, EnhancedModel, AnnPrediction };

std::string_view to_string(SignalSource source);

/// Cumulative fraction of emitted molecules absorbed by the end of each bin.
/// Values are non-decreasing and lie in [0, 1].
class ReceivedSignal {
public:
    /// Throws ValidationError when the values violate the invariants or the
    /// length differs from grid.n_bins().
    ReceivedSignal(TimeGrid grid, std::vector<double> cumulative_fraction, SignalSource source);

    const TimeGrid& grid() const { return grid_; }
    std::span<const double> values() const { return values_; }
    SignalSource source() const { return source_; }
    double final_value() const { return values_.back(); }

    friend bool operator==(const ReceivedSignal&, const ReceivedSignal&) = default;

private:
    TimeGrid grid_;
    std::vector<double> values_;
    SignalSource source_;
};

/// Complementary error function, accurate to 1e-12 absolute (and far better
/// in practice) for non-negative arguments. Negative arguments use
/// erfc(-x) = 2 - erfc(x).
double erfc(double x);

/// Fraction of molecules from a point source absorbed by time t:
/// r_rx / (d + r_rx) * erfc(d / sqrt(4 D t)). Zero at t = 0.
double point_hit_fraction(const SystemParams& p, double t);

/// Primitive: b1 * point_hit_fraction. Enhanced: the erfc argument becomes
/// d / ((4D)^b2 * t^b3). Zero at t = 0.
double model_hit_fraction(const SystemParams& p, const ModelParams& m, double t);

/// Evaluates the model at every bin end of `grid`.
ReceivedSignal sample_model(const SystemParams& p, const ModelParams& m, const TimeGrid& grid);

/// Samples the point-transmitter formula at every bin end.
ReceivedSignal sample_point_formula(const SystemParams& p, const TimeGrid& grid);

/// Value emitted by sir_curve where F(t) == F(t_end).
inline constexpr double kSirInfinity = std::numeric_limits<double>::infinity();

/// Per-bin SIR(t) = F(t) / (F(t_end) - F(t)) using the signal's own final value.
std::vector<double> sir_curve(const ReceivedSignal& sig);

/// Same ratio with an explicit reference end value (e.g. the simulation's
/// F(t_end) when comparing a model curve against it). Bins where the
/// denominator is <= 0 get kSirInfinity.
std::vector<double> sir_curve(const ReceivedSignal& sig, double reference_final);

}  // namespace mcvd
