#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mcvd/channel.hpp"

namespace mcvd::nn {

enum class Provenance { TDS, VDS };

std::string_view to_string(Provenance provenance);
Provenance parse_provenance(std::string_view text);

/// One (system parameters -> model parameters) pair.
struct CaseRecord {
    SystemParams input;
    ModelParams output = ModelParams::primitive(1.0);
    Provenance provenance = Provenance::TDS;
};

inline constexpr std::size_t kInputDim = 4;

/// Input feature vector in the fixed order (d, r_tx, r_rx, D).
std::array<double, kInputDim> features(const SystemParams& p);

/// Per-feature affine map of [min, max] onto [-1, 1].
struct MinMaxScaling {
    std::vector<double> min;
    std::vector<double> max;

    double to_unit(std::size_t i, double x) const { return 2.0 * (x - min[i]) / (max[i] - min[i]) - 1.0; }
    double from_unit(std::size_t i, double u) const { return min[i] + (u + 1.0) * 0.5 * (max[i] - min[i]); }
    bool contains(std::size_t i, double x) const { return x >= min[i] && x <= max[i]; }
    std::size_t size() const { return min.size(); }

    friend bool operator==(const MinMaxScaling&, const MinMaxScaling&) = default;
};

/// Feedforward 4 -> H (tanh) -> out_dim (identity) network with the min/max
/// scaling of its training data. Weights are one flat vector laid out as
/// [W1 (H x 4, row-major) | b1 (H) | W2 (out x H, row-major) | b2 (out)].
class Network {
public:
    Network(ModelKind kind, std::size_t hidden, MinMaxScaling input_scaling, MinMaxScaling output_scaling,
            std::vector<double> weights);

    /// Zero-weight network; its output is the mid-range of every target.
    static Network zeros(ModelKind kind, std::size_t hidden, MinMaxScaling input_scaling,
                         MinMaxScaling output_scaling);

    static std::size_t weight_count(std::size_t hidden, std::size_t out_dim) {
        return hidden * (kInputDim + 1) + out_dim * (hidden + 1);
    }

    ModelKind kind() const { return kind_; }
    std::size_t hidden() const { return hidden_; }
    std::size_t out_dim() const { return coefficient_count(kind_); }
    std::size_t n_weights() const { return weights_.size(); }
    std::span<const double> weights() const { return weights_; }
    void set_weights(std::vector<double> weights);
    const MinMaxScaling& input_scaling() const { return input_scaling_; }
    const MinMaxScaling& output_scaling() const { return output_scaling_; }

    Eigen::VectorXd normalize_input(const SystemParams& p) const;
    /// Raw (normalized-space) outputs for a normalized input.
    Eigen::VectorXd raw_output(const Eigen::VectorXd& x) const;
    /// d raw_output / d weights, out_dim x n_weights, by backpropagation.
    Eigen::MatrixXd output_jacobian(const Eigen::VectorXd& x) const;

    /// True when any input feature lies outside the training range.
    bool extrapolates(const SystemParams& p) const;

    friend bool operator==(const Network&, const Network&) = default;

private:
    ModelKind kind_;
    std::size_t hidden_;
    MinMaxScaling input_scaling_;
    MinMaxScaling output_scaling_;
    std::vector<double> weights_;
};

/// Normalize, evaluate, denormalize, then clamp to the fitter's bounds.
ModelParams forward(const Network& net, const SystemParams& p);

struct EpochTrace {
    double objective_before = 0.0;  ///< F at the start of the epoch
    double objective_after = 0.0;   ///< F after the accepted step, same (alpha, beta)
    double alpha = 0.0;             ///< after re-estimation
    double beta = 0.0;
    double gamma = 0.0;
    double mu = 0.0;
};

struct TrainReport {
    int epochs = 0;
    double e_d = 0.0;    ///< sum of squared errors over normalized targets
    double e_w = 0.0;    ///< half the sum of squared weights
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;  ///< effective number of parameters
    std::size_t n_targets = 0;
    std::string stop_reason;
    std::vector<std::string> warnings;
    std::vector<EpochTrace> trace;
};

struct TrainSettings {
    int max_epochs = 300;
    double objective_rtol = 1e-9;
    double mu0 = 0.005;
    double mu_decrease = 0.1;
    double mu_increase = 10.0;
    double mu_max = 1e10;
    int threads = 0;  ///< Jacobian assembly threads; <= 0 uses the OpenMP default
};

/// Levenberg-Marquardt training of beta*E_D + alpha*E_W with evidence-based
/// re-estimation of alpha and beta after every accepted step.
std::pair<Network, TrainReport> train(std::span<const CaseRecord> dataset, std::size_t hidden,
                                      std::uint64_t seed, const TrainSettings& settings = {});

/// Error Jacobian over a normalized dataset: row (n * out_dim + j) holds
/// d output_j(x_n) / d weights. OpenMP across samples.
Eigen::MatrixXd assemble_jacobian(const Network& net, const Eigen::MatrixXd& inputs, int threads = 0);
/// Serial reference of assemble_jacobian.
Eigen::MatrixXd assemble_jacobian_serial(const Network& net, const Eigen::MatrixXd& inputs);

/// Max relative deviation between the backprop Jacobian and central
/// differences (step 1e-6) for the record's input. Relative error is
/// |a - n| / max(1, |a|, |n|).
double gradient_check(const Network& net, const CaseRecord& record);

/// Scaling spanning `values` per column; a constant column is widened to
/// [v - s, v + s] with s = 0.5 * max(1, |v|) and reported via `degenerate`.
MinMaxScaling fit_scaling(const std::vector<std::vector<double>>& columns, std::vector<bool>* degenerate);

}  // namespace mcvd::nn
