#include "mcvd/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "mcvd/errors.hpp"
#include "mcvd/fitter.hpp"
#include "mcvd/parallel.hpp"

namespace mcvd::nn {

std::string_view to_string(Provenance provenance) { return provenance == Provenance::TDS ? "TDS" : "VDS"; }

Provenance parse_provenance(std::string_view text) {
    if (text == "TDS" || text == "tds") return Provenance::TDS;
    if (text == "VDS" || text == "vds") return Provenance::VDS;
    throw ValidationError("unknown dataset label '" + std::string(text) + "'");
}

std::array<double, kInputDim> features(const SystemParams& p) { return {p.d, p.r_tx, p.r_rx, p.diff_coeff}; }

namespace {

void check_scaling(const MinMaxScaling& s, std::size_t expected, const char* what) {
    if (s.min.size() != expected || s.max.size() != expected) {
        throw ValidationError(std::string(what) + " scaling has the wrong dimension");
    }
    for (std::size_t i = 0; i < expected; ++i) {
        if (!(s.min[i] < s.max[i])) throw ValidationError(std::string(what) + " scaling needs min < max");
    }
}

}  // namespace

Network::Network(ModelKind kind, std::size_t hidden, MinMaxScaling input_scaling, MinMaxScaling output_scaling,
                 std::vector<double> weights)
    : kind_(kind),
      hidden_(hidden),
      input_scaling_(std::move(input_scaling)),
      output_scaling_(std::move(output_scaling)),
      weights_(std::move(weights)) {
    if (hidden_ == 0) throw ValidationError("hidden layer must have at least one unit");
    check_scaling(input_scaling_, kInputDim, "input");
    check_scaling(output_scaling_, out_dim(), "output");
    if (weights_.size() != weight_count(hidden_, out_dim())) {
        throw ValidationError("weight vector has length " + std::to_string(weights_.size()) + ", expected " +
                              std::to_string(weight_count(hidden_, out_dim())));
    }
}

Network Network::zeros(ModelKind kind, std::size_t hidden, MinMaxScaling input_scaling,
                       MinMaxScaling output_scaling) {
    std::vector<double> w(weight_count(hidden, coefficient_count(kind)), 0.0);
    return Network(kind, hidden, std::move(input_scaling), std::move(output_scaling), std::move(w));
}

void Network::set_weights(std::vector<double> weights) {
    if (weights.size() != weights_.size()) throw ValidationError("weight vector length mismatch");
    weights_ = std::move(weights);
}

Eigen::VectorXd Network::normalize_input(const SystemParams& p) const {
    const auto f = features(p);
    Eigen::VectorXd x(static_cast<Eigen::Index>(kInputDim));
    for (std::size_t i = 0; i < kInputDim; ++i) x[static_cast<Eigen::Index>(i)] = input_scaling_.to_unit(i, f[i]);
    return x;
}

bool Network::extrapolates(const SystemParams& p) const {
    const auto f = features(p);
    for (std::size_t i = 0; i < kInputDim; ++i) {
        if (!input_scaling_.contains(i, f[i])) return true;
    }
    return false;
}

namespace {

// Views into the flat weight vector.
struct Layers {
    std::size_t hidden;
    std::size_t out;
    const double* w1;
    const double* b1;
    const double* w2;
    const double* b2;

    Layers(std::span<const double> w, std::size_t h, std::size_t o)
        : hidden(h),
          out(o),
          w1(w.data()),
          b1(w.data() + h * kInputDim),
          w2(w.data() + h * (kInputDim + 1)),
          b2(w.data() + h * (kInputDim + 1) + o * h) {}

    std::size_t b1_offset() const { return hidden * kInputDim; }
    std::size_t w2_offset() const { return hidden * (kInputDim + 1); }
    std::size_t b2_offset() const { return hidden * (kInputDim + 1) + out * hidden; }
};

void hidden_activations(const Layers& l, const double* x, double* a) {
    for (std::size_t h = 0; h < l.hidden; ++h) {
        double z = l.b1[h];
        for (std::size_t i = 0; i < kInputDim; ++i) z += l.w1[h * kInputDim + i] * x[i];
        a[h] = std::tanh(z);
    }
}

// Writes d output_j / d weights into rows [row0, row0 + out) of `jac`.
void jacobian_rows(const Layers& l, const double* x, Eigen::MatrixXd& jac, Eigen::Index row0) {
    std::vector<double> a(l.hidden);
    hidden_activations(l, x, a.data());
    for (std::size_t j = 0; j < l.out; ++j) {
        const Eigen::Index row = row0 + static_cast<Eigen::Index>(j);
        jac.row(row).setZero();
        for (std::size_t h = 0; h < l.hidden; ++h) {
            const double back = l.w2[j * l.hidden + h] * (1.0 - a[h] * a[h]);
            for (std::size_t i = 0; i < kInputDim; ++i) {
                jac(row, static_cast<Eigen::Index>(h * kInputDim + i)) = back * x[i];
            }
            jac(row, static_cast<Eigen::Index>(l.b1_offset() + h)) = back;
            jac(row, static_cast<Eigen::Index>(l.w2_offset() + j * l.hidden + h)) = a[h];
        }
        jac(row, static_cast<Eigen::Index>(l.b2_offset() + j)) = 1.0;
    }
}

}  // namespace

Eigen::VectorXd Network::raw_output(const Eigen::VectorXd& x) const {
    const Layers l(weights_, hidden_, out_dim());
    std::vector<double> a(hidden_);
    hidden_activations(l, x.data(), a.data());
    Eigen::VectorXd out(static_cast<Eigen::Index>(l.out));
    for (std::size_t j = 0; j < l.out; ++j) {
        double o = l.b2[j];
        for (std::size_t h = 0; h < hidden_; ++h) o += l.w2[j * hidden_ + h] * a[h];
        out[static_cast<Eigen::Index>(j)] = o;
    }
    return out;
}

Eigen::MatrixXd Network::output_jacobian(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(out_dim()), static_cast<Eigen::Index>(n_weights()));
    jacobian_rows(Layers(weights_, hidden_, out_dim()), x.data(), jac, 0);
    return jac;
}

ModelParams forward(const Network& net, const SystemParams& p) {
    const Eigen::VectorXd raw = net.raw_output(net.normalize_input(p));
    const auto bounds = fit::default_bounds(net.kind());
    std::vector<double> b(net.out_dim());
    for (std::size_t j = 0; j < b.size(); ++j) {
        b[j] = bounds[j].clamp(net.output_scaling().from_unit(j, raw[static_cast<Eigen::Index>(j)]));
    }
    return ModelParams::from_coefficients(net.kind(), b);
}

Eigen::MatrixXd assemble_jacobian_serial(const Network& net, const Eigen::MatrixXd& inputs) {
    const Layers l(net.weights(), net.hidden(), net.out_dim());
    const auto out = static_cast<Eigen::Index>(net.out_dim());
    Eigen::MatrixXd jac(inputs.rows() * out, static_cast<Eigen::Index>(net.n_weights()));
    for (Eigen::Index n = 0; n < inputs.rows(); ++n) {
        const Eigen::VectorXd x = inputs.row(n).transpose();
        jacobian_rows(l, x.data(), jac, n * out);
    }
    return jac;
}

Eigen::MatrixXd assemble_jacobian(const Network& net, const Eigen::MatrixXd& inputs, int threads) {
    const Layers l(net.weights(), net.hidden(), net.out_dim());
    const auto out = static_cast<Eigen::Index>(net.out_dim());
    Eigen::MatrixXd jac(inputs.rows() * out, static_cast<Eigen::Index>(net.n_weights()));
    const Eigen::Index rows = inputs.rows();
#pragma omp parallel for schedule(static) num_threads(parallel::resolve_threads(threads))
    for (Eigen::Index n = 0; n < rows; ++n) {
        const Eigen::VectorXd x = inputs.row(n).transpose();
        jacobian_rows(l, x.data(), jac, n * out);
    }
    return jac;
}

double gradient_check(const Network& net, const CaseRecord& record) {
    constexpr double step = 1e-6;
    const Eigen::VectorXd x = net.normalize_input(record.input);
    const Eigen::MatrixXd analytic = net.output_jacobian(x);
    Network probe = net;
    std::vector<double> w(net.weights().begin(), net.weights().end());
    double worst = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double w0 = w[i];
        w[i] = w0 + step;
        probe.set_weights(w);
        const Eigen::VectorXd plus = probe.raw_output(x);
        w[i] = w0 - step;
        probe.set_weights(w);
        const Eigen::VectorXd minus = probe.raw_output(x);
        w[i] = w0;
        for (Eigen::Index j = 0; j < plus.size(); ++j) {
            const double numeric = (plus[j] - minus[j]) / (2.0 * step);
            const double a = analytic(j, static_cast<Eigen::Index>(i));
            const double scale = std::max({1.0, std::abs(a), std::abs(numeric)});
            worst = std::max(worst, std::abs(a - numeric) / scale);
        }
    }
    return worst;
}

MinMaxScaling fit_scaling(const std::vector<std::vector<double>>& columns, std::vector<bool>* degenerate) {
    MinMaxScaling s;
    if (degenerate) degenerate->assign(columns.size(), false);
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const auto [lo, hi] = std::minmax_element(columns[c].begin(), columns[c].end());
        double mn = *lo;
        double mx = *hi;
        if (!(mn < mx)) {
            const double half_span = 0.5 * std::max(1.0, std::abs(mn));
            mn -= half_span;
            mx += half_span;
            if (degenerate) (*degenerate)[c] = true;
        }
        s.min.push_back(mn);
        s.max.push_back(mx);
    }
    return s;
}

namespace {

constexpr double kHyperMin = 1e-12;
constexpr double kHyperMax = 1e12;

double clamp_hyper(double v) { return std::clamp(v, kHyperMin, kHyperMax); }

struct Objective {
    double e_d = 0.0;
    double e_w = 0.0;
    double value(double alpha, double beta) const { return beta * e_d + alpha * e_w; }
};

Eigen::VectorXd errors(const Network& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
    const auto out = static_cast<Eigen::Index>(net.out_dim());
    Eigen::VectorXd e(inputs.rows() * out);
    for (Eigen::Index n = 0; n < inputs.rows(); ++n) {
        const Eigen::VectorXd o = net.raw_output(inputs.row(n).transpose());
        for (Eigen::Index j = 0; j < out; ++j) e[n * out + j] = o[j] - targets(n, j);
    }
    return e;
}

Objective evaluate(const Network& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
    Objective obj;
    obj.e_d = errors(net, inputs, targets).squaredNorm();
    double ww = 0.0;
    for (double w : net.weights()) ww += w * w;
    obj.e_w = 0.5 * ww;
    return obj;
}

}  // namespace

std::pair<Network, TrainReport> train(std::span<const CaseRecord> dataset, std::size_t hidden, std::uint64_t seed,
                                      const TrainSettings& settings) {
    if (dataset.size() < 10) throw ValidationError("training needs at least 10 records");
    const ModelKind kind = dataset.front().output.kind();
    for (const CaseRecord& r : dataset) {
        r.input.validate();
        if (r.output.kind() != kind) throw ValidationError("dataset mixes model kinds");
    }
    const std::size_t out_dim = coefficient_count(kind);
    const std::size_t n = dataset.size();

    TrainReport report;
    std::vector<std::vector<double>> in_cols(kInputDim), out_cols(out_dim);
    for (const CaseRecord& r : dataset) {
        const auto f = features(r.input);
        for (std::size_t i = 0; i < kInputDim; ++i) in_cols[i].push_back(f[i]);
        const auto b = r.output.coefficients();
        for (std::size_t j = 0; j < out_dim; ++j) out_cols[j].push_back(b[j]);
    }
    std::vector<bool> in_degenerate, out_degenerate;
    MinMaxScaling in_scaling = fit_scaling(in_cols, &in_degenerate);
    MinMaxScaling out_scaling = fit_scaling(out_cols, &out_degenerate);
    static constexpr const char* kFeatureNames[] = {"d", "r_tx", "r_rx", "D"};
    for (std::size_t i = 0; i < kInputDim; ++i) {
        if (in_degenerate[i]) report.warnings.push_back(std::string("constant input feature ") + kFeatureNames[i]);
    }
    for (std::size_t j = 0; j < out_dim; ++j) {
        if (out_degenerate[j]) report.warnings.push_back("degenerate dataset: constant target b" + std::to_string(j + 1));
    }

    Eigen::MatrixXd inputs(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kInputDim));
    Eigen::MatrixXd targets(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out_dim));
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < kInputDim; ++i) {
            inputs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = in_scaling.to_unit(i, in_cols[i][r]);
        }
        for (std::size_t j = 0; j < out_dim; ++j) {
            targets(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = out_scaling.to_unit(j, out_cols[j][r]);
        }
    }

    // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias of a layer.
    const std::size_t k = Network::weight_count(hidden, out_dim);
    std::vector<double> w(k);
    {
        boost::random::mt19937_64 engine(seed);
        const double hidden_limit = 1.0 / std::sqrt(static_cast<double>(kInputDim));
        const double output_limit = 1.0 / std::sqrt(static_cast<double>(hidden));
        boost::random::uniform_real_distribution<double> hidden_init(-hidden_limit, hidden_limit);
        boost::random::uniform_real_distribution<double> output_init(-output_limit, output_limit);
        const std::size_t split = hidden * (kInputDim + 1);
        for (std::size_t i = 0; i < k; ++i) w[i] = i < split ? hidden_init(engine) : output_init(engine);
    }
    Network net(kind, hidden, std::move(in_scaling), std::move(out_scaling), std::move(w));

    const auto n_targets = static_cast<double>(n * out_dim);
    report.n_targets = n * out_dim;
    double alpha = 0.0;
    double beta = 1.0;
    double gamma = static_cast<double>(k);
    double mu = settings.mu0;
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));

    Objective current = evaluate(net, inputs, targets);
    report.stop_reason = "max_epochs";
    int epoch = 0;
    for (; epoch < settings.max_epochs; ++epoch) {
        const Eigen::MatrixXd jac = assemble_jacobian(net, inputs, settings.threads);
        const Eigen::VectorXd e = errors(net, inputs, targets);
        const Eigen::Map<const Eigen::VectorXd> wv(net.weights().data(), static_cast<Eigen::Index>(k));
        const Eigen::MatrixXd hessian = 2.0 * beta * (jac.transpose() * jac) + alpha * identity;
        const Eigen::VectorXd gradient = 2.0 * beta * (jac.transpose() * e) + alpha * wv;
        const double f_before = current.value(alpha, beta);

        bool accepted = false;
        Network trial_net = net;
        Objective trial;
        while (mu <= settings.mu_max) {
            const Eigen::VectorXd delta = (hessian + mu * identity).ldlt().solve(-gradient);
            std::vector<double> tw(k);
            for (std::size_t i = 0; i < k; ++i) tw[i] = wv[static_cast<Eigen::Index>(i)] + delta[static_cast<Eigen::Index>(i)];
            trial_net.set_weights(std::move(tw));
            trial = evaluate(trial_net, inputs, targets);
            if (std::isfinite(trial.value(alpha, beta)) && trial.value(alpha, beta) < f_before) {
                accepted = true;
                break;
            }
            mu *= settings.mu_increase;
        }
        if (!accepted) {
            report.stop_reason = "mu_max";
            break;
        }
        const double f_after = trial.value(alpha, beta);
        net = std::move(trial_net);
        current = trial;
        mu = std::max(mu * settings.mu_decrease, 1e-20);

        // Evidence update from the Gauss-Newton Hessian of the accepted step.
        if (alpha > 0.0) {
            const Eigen::MatrixXd h_inv = hessian.ldlt().solve(identity);
            gamma = std::clamp(static_cast<double>(k) - alpha * h_inv.trace(), 0.0, static_cast<double>(k));
        } else {
            gamma = static_cast<double>(k);
        }
        alpha = current.e_w > 0.0 ? clamp_hyper(gamma / (2.0 * current.e_w)) : 1.0;
        beta = clamp_hyper(std::max(n_targets - gamma, 1.0) / (2.0 * std::max(current.e_d, 1e-300)));

        report.trace.push_back({f_before, f_after, alpha, beta, gamma, mu});
        if ((f_before - f_after) / f_before < settings.objective_rtol) {
            ++epoch;
            report.stop_reason = "objective_rtol";
            break;
        }
    }

    report.epochs = epoch;
    report.e_d = current.e_d;
    report.e_w = current.e_w;
    report.alpha = alpha > 0.0 ? alpha : kHyperMin;
    report.beta = beta;
    report.gamma = gamma;
    return {std::move(net), std::move(report)};
}

}  // namespace mcvd::nn
