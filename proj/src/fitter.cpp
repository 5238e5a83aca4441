#include "mcvd/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mcvd/errors.hpp"
#include "mcvd/parallel.hpp"

namespace mcvd::fit {

std::vector<Interval> default_bounds(ModelKind kind) {
    if (kind == ModelKind::Primitive) return {{0.1, 5.0}};
    return {{0.1, 5.0}, {0.05, 1.5}, {0.05, 1.5}};
}

void FitProblem::validate() const {
    params.validate();
    if (observed.size() != grid.n_bins()) throw ValidationError("observation count does not match the grid");
    if (initial_guess.kind() != kind) throw ValidationError("initial guess kind does not match problem kind");
    if (bounds.size() != coefficient_count(kind)) throw ValidationError("bounds do not match coefficient count");
    const auto guess = initial_guess.coefficients();
    for (std::size_t i = 0; i < bounds.size(); ++i) {
        if (!(bounds[i].lo <= bounds[i].hi)) throw ValidationError("empty bound interval");
        if (!bounds[i].contains(guess[i])) throw ValidationError("initial guess outside bounds");
    }
    std::size_t nonzero = 0;
    for (double v : observed) {
        if (!std::isfinite(v)) throw ValidationError("non-finite observation");
        if (v != 0.0) ++nonzero;
    }
    if (nonzero == 0) throw ValidationError("degenerate target: all observations are zero");
    if (nonzero < 10) throw ValidationError("target has fewer than 10 nonzero bins");
}

FitProblem default_problem(const SystemParams& p, const TimeGrid& grid, std::vector<double> observed,
                           ModelKind kind) {
    FitProblem problem;
    problem.params = p;
    problem.grid = grid;
    problem.observed = std::move(observed);
    problem.kind = kind;
    problem.initial_guess =
        kind == ModelKind::Primitive ? ModelParams::primitive(1.0) : ModelParams::enhanced(1.0, 0.5, 0.5);
    problem.bounds = default_bounds(kind);
    return problem;
}

FitProblem default_problem(const SystemParams& p, const ReceivedSignal& target, ModelKind kind) {
    return default_problem(p, target.grid(), {target.values().begin(), target.values().end()}, kind);
}

namespace {

// erfc argument at time t: d / sqrt(4 D t) or d / ((4D)^b2 t^b3).
double erfc_argument(const SystemParams& p, ModelKind kind, std::span<const double> b, double t) {
    if (kind == ModelKind::Primitive) return p.d / std::sqrt(4.0 * p.diff_coeff * t);
    return p.d / (std::pow(4.0 * p.diff_coeff, b[1]) * std::pow(t, b[2]));
}

Eigen::VectorXd residuals(const FitProblem& problem, std::span<const double> b) {
    Eigen::VectorXd r = model_curve(problem.params, problem.kind, b, problem.grid);
    for (Eigen::Index k = 0; k < r.size(); ++k) r[k] -= problem.observed[static_cast<std::size_t>(k)];
    return r;
}

void project(std::vector<double>& b, const std::vector<Interval>& bounds) {
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = bounds[i].clamp(b[i]);
}

}  // namespace

Eigen::VectorXd model_curve(const SystemParams& p, ModelKind kind, std::span<const double> b,
                            const TimeGrid& grid) {
    const double scale = b[0] * p.r_rx / (p.d + p.r_rx);
    Eigen::VectorXd out(static_cast<Eigen::Index>(grid.n_bins()));
    for (std::size_t k = 0; k < grid.n_bins(); ++k) {
        out[static_cast<Eigen::Index>(k)] = scale * mcvd::erfc(erfc_argument(p, kind, b, grid.bin_end(k)));
    }
    return out;
}

Eigen::MatrixXd analytic_jacobian(const SystemParams& p, ModelKind kind, std::span<const double> b,
                                  const TimeGrid& grid) {
    const double geometric = p.r_rx / (p.d + p.r_rx);
    const auto n = static_cast<Eigen::Index>(grid.n_bins());
    Eigen::MatrixXd jac(n, static_cast<Eigen::Index>(coefficient_count(kind)));
    const double log_4d = std::log(4.0 * p.diff_coeff);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double t = grid.bin_end(static_cast<std::size_t>(k));
        const double u = erfc_argument(p, kind, b, t);
        jac(k, 0) = geometric * mcvd::erfc(u);
        if (kind == ModelKind::Enhanced) {
            // d erfc(u)/du = -2/sqrt(pi) exp(-u^2); du/db2 = -u ln(4D); du/db3 = -u ln t.
            const double common = b[0] * geometric * 2.0 * std::numbers::inv_sqrtpi * std::exp(-u * u) * u;
            jac(k, 1) = common * log_4d;
            jac(k, 2) = common * std::log(t);
        }
    }
    return jac;
}

Eigen::MatrixXd finite_difference_jacobian(const SystemParams& p, ModelKind kind,
                                           std::span<const double> b, const TimeGrid& grid) {
    const std::size_t m = coefficient_count(kind);
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(grid.n_bins()), static_cast<Eigen::Index>(m));
    std::vector<double> shifted(b.begin(), b.end());
    for (std::size_t i = 0; i < m; ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(b[i]));
        shifted[i] = b[i] + h;
        const Eigen::VectorXd plus = model_curve(p, kind, shifted, grid);
        shifted[i] = b[i] - h;
        const Eigen::VectorXd minus = model_curve(p, kind, shifted, grid);
        shifted[i] = b[i];
        jac.col(static_cast<Eigen::Index>(i)) = (plus - minus) / (2.0 * h);
    }
    return jac;
}

double jacobian_check(const SystemParams& p, ModelKind kind, std::span<const double> b, const TimeGrid& grid) {
    const Eigen::MatrixXd analytic = analytic_jacobian(p, kind, b, grid);
    const Eigen::MatrixXd numeric = finite_difference_jacobian(p, kind, b, grid);
    double worst = 0.0;
    for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
        const double scale = std::max(analytic.col(c).cwiseAbs().maxCoeff(), 1e-300);
        worst = std::max(worst, (analytic.col(c) - numeric.col(c)).cwiseAbs().maxCoeff() / scale);
    }
    return worst;
}

double residual_sum_of_squares(const FitProblem& problem, std::span<const double> b) {
    return residuals(problem, b).squaredNorm();
}

FitResult fit(const FitProblem& problem, const LmSettings& settings) {
    problem.validate();
    const std::size_t m = coefficient_count(problem.kind);
    const auto guess = problem.initial_guess.coefficients();
    std::vector<double> b(guess.begin(), guess.end());

    Eigen::VectorXd r = residuals(problem, b);
    double rss = r.squaredNorm();
    if (!std::isfinite(rss)) throw NumericFailure("non-finite residuals at the initial guess");

    FitResult result;
    result.initial_rss = rss;
    double lambda = settings.lambda0;
    int iteration = 0;
    bool converged = false;
    bool stalled = false;

    while (iteration < settings.max_iterations && !converged && !stalled) {
        ++iteration;
        const Eigen::MatrixXd jac = analytic_jacobian(problem.params, problem.kind, b, problem.grid);
        const Eigen::VectorXd gradient = jac.transpose() * r;

        // Components pushing against an active bound do not count as slope.
        double projected_max = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const auto gi = gradient[static_cast<Eigen::Index>(i)];
            const bool at_lo = b[i] <= problem.bounds[i].lo && gi > 0.0;
            const bool at_hi = b[i] >= problem.bounds[i].hi && gi < 0.0;
            if (!at_lo && !at_hi) projected_max = std::max(projected_max, std::abs(gi));
        }
        if (projected_max < settings.gradient_tol) {
            converged = true;
            break;
        }

        // Coefficients held at a bound by the gradient are frozen for this step.
        std::vector<bool> active(m, false);
        for (std::size_t i = 0; i < m; ++i) {
            const auto gi = gradient[static_cast<Eigen::Index>(i)];
            active[i] = (b[i] <= problem.bounds[i].lo && gi > 0.0) || (b[i] >= problem.bounds[i].hi && gi < 0.0);
        }
        const Eigen::MatrixXd normal = jac.transpose() * jac;
        while (true) {
            Eigen::MatrixXd damped = normal;
            Eigen::VectorXd rhs = -gradient;
            for (Eigen::Index i = 0; i < damped.rows(); ++i) {
                damped(i, i) += lambda * std::max(normal(i, i), 1e-30);
                if (active[static_cast<std::size_t>(i)]) {
                    damped.row(i).setZero();
                    damped.col(i).setZero();
                    damped(i, i) = 1.0;
                    rhs[i] = 0.0;
                }
            }
            const Eigen::VectorXd delta = damped.ldlt().solve(rhs);
            std::vector<double> trial(m);
            for (std::size_t i = 0; i < m; ++i) trial[i] = b[i] + delta[static_cast<Eigen::Index>(i)];
            project(trial, problem.bounds);

            const Eigen::VectorXd trial_r = residuals(problem, trial);
            const double trial_rss = trial_r.squaredNorm();
            if (std::isfinite(trial_rss) && trial_rss < rss) {
                const double relative_change = (rss - trial_rss) / rss;
                b = std::move(trial);
                r = trial_r;
                rss = trial_rss;
                lambda = std::max(lambda / settings.lambda_factor, settings.lambda_min);
                if (relative_change < settings.rss_rtol) converged = true;
                break;
            }
            lambda *= settings.lambda_factor;
            if (lambda > settings.lambda_max) {
                lambda = settings.lambda_max;
                stalled = true;
                break;
            }
        }
    }

    result.model = ModelParams::from_coefficients(problem.kind, b);
    result.rss = rss;
    result.n_iterations = iteration;
    result.converged = converged;
    result.final_lambda = lambda;
    return result;
}

std::vector<FitResult> fit_batch(std::span<const FitProblem> problems, int threads) {
    std::vector<FitResult> results(problems.size());
    std::vector<std::string> errors(problems.size());
    const auto n = static_cast<std::int64_t>(problems.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(parallel::resolve_threads(threads))
    for (std::int64_t i = 0; i < n; ++i) {
        try {
            results[static_cast<std::size_t>(i)] = fit(problems[static_cast<std::size_t>(i)]);
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(i)] = e.what();
        }
    }
    std::string message;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i].empty()) message += "\n  problem " + std::to_string(i) + ": " + errors[i];
    }
    if (!message.empty()) throw NumericFailure("batch fit failed:" + message);
    return results;
}

}  // namespace mcvd::fit
