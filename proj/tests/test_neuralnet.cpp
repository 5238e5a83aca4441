#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mcvd/errors.hpp"
#include "mcvd/fitter.hpp"
#include "mcvd/neuralnet.hpp"

using namespace mcvd;
using namespace mcvd::nn;

namespace {

MinMaxScaling unit_inputs() { return {{0, 0, 0, 0}, {10, 10, 10, 100}}; }
MinMaxScaling enhanced_outputs() { return {{0.5, 0.3, 0.3}, {2.0, 0.7, 0.7}}; }

Network random_network(std::uint64_t seed, double scale, ModelKind kind = ModelKind::Enhanced) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    const MinMaxScaling out = kind == ModelKind::Enhanced ? enhanced_outputs() : MinMaxScaling{{0.5}, {2.0}};
    std::vector<double> w(Network::weight_count(6, coefficient_count(kind)));
    for (double& x : w) x = u(gen);
    return Network(kind, 6, unit_inputs(), out, w);
}

// Enhanced coefficients that are an exact affine function of the inputs.
std::vector<CaseRecord> affine_dataset() {
    std::vector<CaseRecord> data;
    for (double d : {2.0, 4.0, 6.0, 8.0, 10.0}) {
        for (double rtx : {5.0, 10.0}) {
            for (double rrx : {5.0, 7.5, 10.0}) {
                const double D = 50.0 + 5.0 * d;
                const double b1 = 1.0 + 0.02 * d + 0.01 * rtx - 0.015 * rrx;
                const double b2 = 0.5 + 0.004 * d - 0.002 * rrx + 0.0003 * D;
                const double b3 = 0.45 + 0.003 * rtx + 0.002 * rrx;
                data.push_back({{d, rtx, rrx, D}, ModelParams::enhanced(b1, b2, b3), Provenance::TDS});
            }
        }
    }
    return data;
}

}  // namespace

TEST_CASE("network shape and validation") {
    CHECK(Network::weight_count(10, 3) == 10 * 5 + 3 * 11);
    CHECK(Network::weight_count(10, 1) == 61);
    const Network z = Network::zeros(ModelKind::Primitive, 10, unit_inputs(), {{0.5}, {2.0}});
    CHECK(z.n_weights() == 61);
    CHECK(z.out_dim() == 1);
    CHECK_THROWS_AS(Network(ModelKind::Primitive, 3, unit_inputs(), {{0.5}, {2.0}}, {1.0, 2.0}), ValidationError);
    CHECK_THROWS_AS(Network::zeros(ModelKind::Primitive, 3, {{0, 0, 0, 0}, {1, 1, 0, 1}}, {{0.5}, {2.0}}),
                    ValidationError);
}

TEST_CASE("zero-weight network predicts the target mid-range") {
    const Network z = Network::zeros(ModelKind::Enhanced, 10, unit_inputs(), enhanced_outputs());
    const ModelParams m = forward(z, {3, 4, 5, 60});
    CHECK(m.b1() == doctest::Approx(1.25));
    CHECK(m.b2() == doctest::Approx(0.5));
    CHECK(m.b3() == doctest::Approx(0.5));
}

TEST_CASE("forward is deterministic and clamps to the fitter bounds") {
    const Network net = random_network(1, 3.0);
    CHECK(forward(net, {3, 4, 5, 60}) == forward(net, {3, 4, 5, 60}));
    const auto bounds = fit::default_bounds(ModelKind::Enhanced);
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0.1, 40.0);
    for (int i = 0; i < 1000; ++i) {
        const Network wild = random_network(100 + i, 20.0);
        const ModelParams m = forward(wild, {u(gen), u(gen), u(gen), 5 * u(gen)});
        for (std::size_t j = 0; j < 3; ++j) CHECK(bounds[j].contains(m.coefficients()[j]));
    }
}

TEST_CASE("extrapolation is detected, not rejected") {
    const Network net = random_network(3, 1.0);
    CHECK_FALSE(net.extrapolates({3, 4, 5, 60}));
    CHECK(net.extrapolates({11, 4, 5, 60}));
    CHECK_NOTHROW(forward(net, {11, 4, 5, 60}));
}

TEST_CASE("gradient check") {
    const CaseRecord rec{{3, 4, 5, 60}, ModelParams::enhanced(1, 0.5, 0.5), Provenance::TDS};
    for (std::uint64_t s = 0; s < 20; ++s) CHECK(gradient_check(random_network(s, 1.5), rec) <= 1e-6);
    CHECK(gradient_check(random_network(7, 1.0, ModelKind::Primitive),
                         {{3, 4, 5, 60}, ModelParams::primitive(1), Provenance::TDS}) <= 1e-6);
    const Network z = Network::zeros(ModelKind::Enhanced, 10, unit_inputs(), enhanced_outputs());
    CHECK(gradient_check(z, rec) <= 1e-8);
}

TEST_CASE("gradient check error is symmetric under input-layer sign flip with negated inputs") {
    // Flipping W1 and negating the normalized input leaves every hidden
    // pre-activation unchanged, so analytic and numeric Jacobians agree equally well.
    const MinMaxScaling inputs{{-10, -10, -10, -100}, {10, 10, 10, 100}};
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    std::vector<double> w(Network::weight_count(6, 3));
    for (double& x : w) x = u(gen);
    std::vector<double> flipped = w;
    for (std::size_t i = 0; i < 6 * kInputDim; ++i) flipped[i] = -flipped[i];
    const Network a(ModelKind::Enhanced, 6, inputs, enhanced_outputs(), w);
    const Network b(ModelKind::Enhanced, 6, inputs, enhanced_outputs(), flipped);
    const CaseRecord rec{{3, 4, 5, 60}, ModelParams::enhanced(1, 0.5, 0.5), Provenance::TDS};
    const CaseRecord neg{{-3, -4, -5, -60}, ModelParams::enhanced(1, 0.5, 0.5), Provenance::TDS};
    CHECK((a.raw_output(a.normalize_input(rec.input)) - b.raw_output(b.normalize_input(neg.input)))
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
    // SystemParams validation is not part of the Jacobian path, so negative inputs are fine here.
    CHECK(std::abs(gradient_check(a, rec) - gradient_check(b, neg)) <= 1e-9);
}

TEST_CASE("parallel Jacobian assembly matches the serial reference") {
    const Network net = random_network(5, 1.0);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(37, 4);
    const Eigen::MatrixXd ref = assemble_jacobian_serial(net, x);
    for (int threads : {1, 2, 8}) CHECK(assemble_jacobian(net, x, threads) == ref);
    // Row block of sample n equals the per-sample output Jacobian.
    CHECK(ref.block(3 * 5, 0, 3, ref.cols()) == net.output_jacobian(x.row(5).transpose()));
}

TEST_CASE("min/max scaling round-trips") {
    const auto data = affine_dataset();
    std::vector<std::vector<double>> cols(4);
    for (const auto& r : data) {
        const auto f = features(r.input);
        for (std::size_t i = 0; i < 4; ++i) cols[i].push_back(f[i]);
    }
    std::vector<bool> degenerate;
    const MinMaxScaling s = fit_scaling(cols, &degenerate);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK_FALSE(degenerate[i]);
        for (double v : cols[i]) CHECK(std::abs(s.from_unit(i, s.to_unit(i, v)) - v) <= 1e-12);
    }
    const MinMaxScaling c = fit_scaling({{2.0, 2.0}}, &degenerate);
    CHECK(degenerate[0]);
    CHECK(c.min[0] < c.max[0]);
}

TEST_CASE("training fits an affine dataset") {
    const auto data = affine_dataset();
    const auto [net, report] = train(data, 4, 11);
    CHECK(report.e_d <= 1e-6);
    const double k = static_cast<double>(net.n_weights());
    CHECK(report.gamma >= 0.0);
    CHECK(report.gamma <= k);
    CHECK(report.alpha > 0.0);
    CHECK(report.beta > 0.0);
    CHECK(report.epochs >= 1);
    CHECK(report.epochs <= 300);
    for (const EpochTrace& t : report.trace) {
        CHECK(t.objective_after < t.objective_before);
        CHECK(t.gamma >= 0.0);
        CHECK(t.gamma <= k);
    }
}

TEST_CASE("training is deterministic for a fixed seed") {
    const auto data = affine_dataset();
    const auto [a, ra] = train(data, 5, 3);
    const auto [b, rb] = train(data, 5, 3);
    CHECK(a == b);
    CHECK(ra.e_d == rb.e_d);
    CHECK(ra.gamma == rb.gamma);
    CHECK(ra.epochs == rb.epochs);
    const auto [c, rc] = train(data, 5, 4);
    CHECK_FALSE(a == c);
}

TEST_CASE("duplicated records leave training predictions unchanged") {
    const auto data = affine_dataset();
    std::vector<CaseRecord> doubled = data;
    doubled.insert(doubled.end(), data.begin(), data.end());
    const auto [single, rs] = train(data, 4, 11);
    const auto [dup, rd] = train(doubled, 4, 11);
    double worst = 0.0;
    for (const CaseRecord& r : data) {
        const Eigen::VectorXd a = single.raw_output(single.normalize_input(r.input));
        const Eigen::VectorXd b = dup.raw_output(dup.normalize_input(r.input));
        worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("training predictions stay within the reported training error") {
    // A smooth nonlinear target that the network cannot fit exactly.
    std::vector<CaseRecord> data;
    for (double d : {2.0, 4.0, 6.0, 8.0, 10.0})
        for (double rtx : {5.0, 7.5, 10.0})
            for (double rrx : {5.0, 10.0}) {
                const double b1 = 1.0 + 0.3 * std::sin(d / 3.0) * rtx / 10.0 + 0.05 * rrx / (d + rrx);
                data.push_back({{d, rtx, rrx, 75}, ModelParams::primitive(b1), Provenance::TDS});
            }
    const auto [net, report] = train(data, 10, 5);
    const double bound = std::sqrt(report.e_d) * (net.output_scaling().max[0] - net.output_scaling().min[0]) / 2.0;
    for (const CaseRecord& r : data) CHECK(std::abs(forward(net, r.input).b1() - r.output.b1()) <= bound + 1e-12);
}

TEST_CASE("training input errors") {
    auto data = affine_dataset();
    CHECK_THROWS_AS(train(std::span(data).first(9), 4, 1), ValidationError);
    data[3].output = ModelParams::primitive(1.0);
    CHECK_THROWS_AS(train(data, 4, 1), ValidationError);
}

TEST_CASE("constant targets are reported") {
    std::vector<CaseRecord> data;
    for (int i = 0; i < 12; ++i) {
        data.push_back({{2.0 + i, 5, 5, 50}, ModelParams::primitive(1.3), Provenance::TDS});
    }
    const auto [net, report] = train(data, 4, 1);
    const bool flagged = std::any_of(report.warnings.begin(), report.warnings.end(), [](const std::string& w) {
        return w.find("degenerate") != std::string::npos;
    });
    CHECK(flagged);
    CHECK(std::abs(forward(net, data[0].input).b1() - 1.3) <= 1e-3);
}
