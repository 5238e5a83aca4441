// Wall-clock comparison of the OpenMP kernels against their serial
// references. Each line reports the best of several runs and whether the
// two results are identical.
//
//   bench_kernels [--threads N] [--repeats R] [--replications N]

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>

#include "mcvd/diffusion_sim.hpp"
#include "mcvd/fitter.hpp"
#include "mcvd/neuralnet.hpp"
#include "mcvd/parallel.hpp"
#include "mcvd/pipeline.hpp"

using namespace mcvd;

namespace {

template <class F>
double best_seconds(int repeats, F&& fn) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void report(const char* name, double serial, double parallel, bool identical) {
    std::printf("%-28s serial %9.4f s   openmp %9.4f s   speedup %5.2fx   %s\n", name, serial, parallel,
                serial / parallel, identical ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"serial vs OpenMP kernel timings"};
    int threads = 0;
    int repeats = 3;
    std::int64_t replications = 20;
    app.add_option("--threads", threads, "OpenMP threads (0 = default)");
    app.add_option("--repeats", repeats, "runs per kernel; the best is reported");
    app.add_option("--replications", replications, "replications for the simulation kernel");
    CLI11_PARSE(app, argc, argv);

    std::printf("threads: %d\n", parallel::resolve_threads(threads));

    // Monte Carlo simulation of one case.
    const SystemParams p{5, 4, 8, 80};
    sim::SimConfig cfg;
    cfg.n_replications = replications;
    std::optional<ReceivedSignal> a;
    std::optional<ReceivedSignal> b;
    const double ts = best_seconds(repeats, [&] { a = sim::simulate_case_serial(p, cfg); });
    const double tp = best_seconds(repeats, [&] { b = sim::simulate_case(p, cfg, threads); });
    report("simulate_case", ts, tp, *a == *b);

    // Network Jacobian over the 135 training inputs, H = 10, three outputs.
    const auto cases = pipeline::table1_grids().first.cases();
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> w(nn::Network::weight_count(10, 3));
    for (double& x : w) x = u(gen);
    const nn::Network net(ModelKind::Enhanced, 10, {{2, 5, 5, 50}, {10, 10, 10, 100}},
                          {{0.5, 0.3, 0.3}, {2, 0.7, 0.7}}, w);
    Eigen::MatrixXd inputs(static_cast<Eigen::Index>(cases.size()), nn::kInputDim);
    for (std::size_t i = 0; i < cases.size(); ++i)
        inputs.row(static_cast<Eigen::Index>(i)) = net.normalize_input(cases[i]).transpose();
    Eigen::MatrixXd ja;
    Eigen::MatrixXd jb;
    const int jac_loops = 200;
    const double js = best_seconds(repeats, [&] {
        for (int i = 0; i < jac_loops; ++i) ja = nn::assemble_jacobian_serial(net, inputs);
    });
    const double jp = best_seconds(repeats, [&] {
        for (int i = 0; i < jac_loops; ++i) jb = nn::assemble_jacobian(net, inputs, threads);
    });
    report("assemble_jacobian (x200)", js, jp, ja == jb);

    // Curve fits over the 135 training cases against point-formula targets.
    std::vector<fit::FitProblem> problems;
    for (const SystemParams& c : cases)
        problems.push_back(fit::default_problem(c, sample_point_formula(c, cfg.grid), ModelKind::Enhanced));
    std::vector<fit::FitResult> fa;
    std::vector<fit::FitResult> fb;
    const double fs = best_seconds(repeats, [&] {
        fa.clear();
        for (const fit::FitProblem& pr : problems) fa.push_back(fit::fit(pr));
    });
    const double fp = best_seconds(repeats, [&] { fb = fit::fit_batch(problems, threads); });
    bool same = fa.size() == fb.size();
    for (std::size_t i = 0; same && i < fa.size(); ++i) same = fa[i].model == fb[i].model && fa[i].rss == fb[i].rss;
    report("fit_batch (135 problems)", fs, fp, same);
    return 0;
}
