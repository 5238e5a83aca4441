#include "mcvd/channel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "mcvd/errors.hpp"

namespace mcvd {

void SystemParams::validate() const {
    const bool finite = std::isfinite(d) && std::isfinite(r_tx) && std::isfinite(r_rx) &&
                        std::isfinite(diff_coeff);
    if (!finite || !(d > 0.0) || !(r_rx > 0.0) || !(diff_coeff > 0.0) || !(r_tx >= 0.0)) {
        throw ValidationError("invalid system parameters: d=" + std::to_string(d) +
                              " r_tx=" + std::to_string(r_tx) + " r_rx=" + std::to_string(r_rx) +
                              " D=" + std::to_string(diff_coeff));
    }
}

std::string_view to_string(ModelKind kind) {
    return kind == ModelKind::Primitive ? "primitive" : "enhanced";
}

ModelKind parse_model_kind(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "primitive") return ModelKind::Primitive;
    if (lower == "enhanced") return ModelKind::Enhanced;
    throw ValidationError("unknown model kind '" + std::string(text) + "'");
}

std::size_t coefficient_count(ModelKind kind) { return kind == ModelKind::Primitive ? 1 : 3; }

ModelParams::ModelParams(ModelKind kind, std::array<double, 3> coeffs) : kind_(kind), coeffs_(coeffs) {
    validate();
}

void ModelParams::validate() const {
    for (double c : coefficients()) {
        if (!std::isfinite(c) || !(c > 0.0)) {
            throw ValidationError("model coefficients must be finite and positive");
        }
    }
}

ModelParams ModelParams::primitive(double b1) { return ModelParams(ModelKind::Primitive, {b1, 0.0, 0.0}); }

ModelParams ModelParams::enhanced(double b1, double b2, double b3) {
    return ModelParams(ModelKind::Enhanced, {b1, b2, b3});
}

ModelParams ModelParams::from_coefficients(ModelKind kind, std::span<const double> coefficients) {
    if (coefficients.size() != coefficient_count(kind)) {
        throw ValidationError(std::string(to_string(kind)) + " model expects " +
                              std::to_string(coefficient_count(kind)) + " coefficients, got " +
                              std::to_string(coefficients.size()));
    }
    if (kind == ModelKind::Primitive) return primitive(coefficients[0]);
    return enhanced(coefficients[0], coefficients[1], coefficients[2]);
}

double ModelParams::b2() const {
    if (kind_ != ModelKind::Enhanced) throw ValidationError("b2 is only defined for the enhanced model");
    return coeffs_[1];
}

double ModelParams::b3() const {
    if (kind_ != ModelKind::Enhanced) throw ValidationError("b3 is only defined for the enhanced model");
    return coeffs_[2];
}

TimeGrid::TimeGrid(double dt, double t_end) : dt_(dt), t_end_(t_end), n_bins_(0) {
    if (!std::isfinite(dt) || !std::isfinite(t_end) || !(dt > 0.0) || !(t_end >= dt)) {
        throw ValidationError("invalid time grid: dt=" + std::to_string(dt) +
                              " t_end=" + std::to_string(t_end));
    }
    n_bins_ = static_cast<std::size_t>(std::llround(t_end / dt));
}

std::string_view to_string(SignalSource source) {
    switch (source) {
        case SignalSource::Simulation: return "simulation";
        case SignalSource::PointFormula: return "point_formula";
        case SignalSource::PrimitiveModel: return "primitive_model";
        case SignalSource::EnhancedModel: return "enhanced_model";
        case SignalSource::AnnPrediction: return "ann_prediction";
    }
    return "unknown";
}

ReceivedSignal::ReceivedSignal(TimeGrid grid, std::vector<double> cumulative_fraction, SignalSource source)
    : grid_(grid), values_(std::move(cumulative_fraction)), source_(source) {
    if (values_.size() != grid_.n_bins()) {
        throw ValidationError("signal has " + std::to_string(values_.size()) + " values but grid has " +
                              std::to_string(grid_.n_bins()) + " bins");
    }
    double prev = 0.0;
    for (std::size_t k = 0; k < values_.size(); ++k) {
        const double v = values_[k];
        if (!(v >= 0.0 && v <= 1.0)) {
            throw ValidationError("signal value out of [0,1] at bin " + std::to_string(k));
        }
        if (v < prev) throw ValidationError("signal decreases at bin " + std::to_string(k));
        prev = v;
    }
}

namespace {

double geometric_factor(const SystemParams& p) { return p.r_rx / (p.d + p.r_rx); }

void check_time(double t) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("time must be finite and non-negative");
}

}  // namespace

double point_hit_fraction(const SystemParams& p, double t) {
    p.validate();
    check_time(t);
    if (t == 0.0) return 0.0;
    return geometric_factor(p) * erfc(p.d / std::sqrt(4.0 * p.diff_coeff * t));
}

double model_hit_fraction(const SystemParams& p, const ModelParams& m, double t) {
    p.validate();
    check_time(t);
    if (t == 0.0) return 0.0;
    if (m.kind() == ModelKind::Primitive) {
        return m.b1() * geometric_factor(p) * erfc(p.d / std::sqrt(4.0 * p.diff_coeff * t));
    }
    // b2 = b3 = 1/2 reduces to the point formula; keep that case bit-identical.
    const double denom = (m.b2() == 0.5 && m.b3() == 0.5)
                             ? std::sqrt(4.0 * p.diff_coeff * t)
                             : std::pow(4.0 * p.diff_coeff, m.b2()) * std::pow(t, m.b3());
    return m.b1() * geometric_factor(p) * erfc(p.d / denom);
}

namespace {

SignalSource source_for(ModelKind kind) {
    return kind == ModelKind::Primitive ? SignalSource::PrimitiveModel : SignalSource::EnhancedModel;
}

}  // namespace

ReceivedSignal sample_model(const SystemParams& p, const ModelParams& m, const TimeGrid& grid) {
    std::vector<double> values(grid.n_bins());
    for (std::size_t k = 0; k < values.size(); ++k) values[k] = model_hit_fraction(p, m, grid.bin_end(k));
    return ReceivedSignal(grid, std::move(values), source_for(m.kind()));
}

ReceivedSignal sample_point_formula(const SystemParams& p, const TimeGrid& grid) {
    std::vector<double> values(grid.n_bins());
    for (std::size_t k = 0; k < values.size(); ++k) values[k] = point_hit_fraction(p, grid.bin_end(k));
    return ReceivedSignal(grid, std::move(values), SignalSource::PointFormula);
}

std::vector<double> sir_curve(const ReceivedSignal& sig) { return sir_curve(sig, sig.final_value()); }

std::vector<double> sir_curve(const ReceivedSignal& sig, double reference_final) {
    if (!(sig.final_value() > 0.0)) throw ValidationError("SIR undefined for an all-zero signal");
    if (!(reference_final > 0.0) || !std::isfinite(reference_final)) {
        throw ValidationError("SIR reference end value must be positive");
    }
    std::vector<double> out;
    out.reserve(sig.values().size());
    for (double f : sig.values()) {
        const double interference = reference_final - f;
        out.push_back(interference > 0.0 ? f / interference : kSirInfinity);
    }
    return out;
}

}  // namespace mcvd
