#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mcvd/channel.hpp"

namespace mcvd::fit {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double v) const { return v >= lo && v <= hi; }
    double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
};

/// Default coefficient bounds: b1 in [0.1, 5], b2 and b3 in [0.05, 1.5].
std::vector<Interval> default_bounds(ModelKind kind);

/// Least-squares problem: match the model curve to `observed` at the bin ends
/// of `grid`. `observed` is usually a simulated ReceivedSignal but may be any
/// finite series (e.g. a synthetic curve with additive noise).
struct FitProblem {
    SystemParams params;
    TimeGrid grid{1e-3, 1.0};
    std::vector<double> observed;
    ModelKind kind = ModelKind::Primitive;
    ModelParams initial_guess = ModelParams::primitive(1.0);
    std::vector<Interval> bounds;

    /// Throws ValidationError on shape mismatch, guess outside bounds, or
    /// fewer than 10 nonzero observations.
    void validate() const;
};

struct FitResult {
    ModelParams model = ModelParams::primitive(1.0);
    double rss = 0.0;
    double initial_rss = 0.0;
    int n_iterations = 0;
    bool converged = false;
    double final_lambda = 0.0;
};

/// Solver settings. Defaults are the fixed project settings.
struct LmSettings {
    double lambda0 = 1e-3;
    double lambda_factor = 10.0;
    double lambda_min = 1e-12;
    double lambda_max = 1e12;
    int max_iterations = 200;
    double rss_rtol = 1e-10;
    double gradient_tol = 1e-10;
};

FitProblem default_problem(const SystemParams& p, const ReceivedSignal& target, ModelKind kind);
FitProblem default_problem(const SystemParams& p, const TimeGrid& grid, std::vector<double> observed,
                           ModelKind kind);

/// Levenberg-Marquardt with Marquardt diagonal scaling. Coefficients are
/// projected onto the bounds after every trial step; a step is accepted only
/// if it lowers the residual sum of squares.
FitResult fit(const FitProblem& problem, const LmSettings& settings = {});

/// Fits independent problems, in parallel when OpenMP is enabled.
std::vector<FitResult> fit_batch(std::span<const FitProblem> problems, int threads = 0);

/// Model curve at the bin ends for raw coefficients (no validation).
Eigen::VectorXd model_curve(const SystemParams& p, ModelKind kind, std::span<const double> b,
                            const TimeGrid& grid);

/// d(model)/d(b) at every bin end, n_bins x m, from the closed-form derivatives.
Eigen::MatrixXd analytic_jacobian(const SystemParams& p, ModelKind kind, std::span<const double> b,
                                  const TimeGrid& grid);

/// Central differences with step 1e-6 * max(1, |b_i|).
Eigen::MatrixXd finite_difference_jacobian(const SystemParams& p, ModelKind kind,
                                           std::span<const double> b, const TimeGrid& grid);

/// Max over entries of |analytic - numeric| / max(|column|_inf, 1e-300):
/// the deviation relative to each coefficient's sensitivity scale.
double jacobian_check(const SystemParams& p, ModelKind kind, std::span<const double> b, const TimeGrid& grid);

double residual_sum_of_squares(const FitProblem& problem, std::span<const double> b);

}  // namespace mcvd::fit
