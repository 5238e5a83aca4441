#include "mcvd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "mcvd/errors.hpp"
#include "mcvd/io.hpp"
#include "mcvd/parallel.hpp"
#include "mcvd/svg.hpp"

namespace mcvd::analysis {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t index(Method m) { return static_cast<std::size_t>(m); }

std::string case_label(const SystemParams& p) {
    return "(d=" + io::format_double(p.d) + ", r_tx=" + io::format_double(p.r_tx) +
           ", r_rx=" + io::format_double(p.r_rx) + ", D=" + io::format_double(p.diff_coeff) + ")";
}

const nn::CaseRecord* find_record(std::span<const nn::CaseRecord> records, const SystemParams& p, ModelKind kind) {
    for (const nn::CaseRecord& r : records)
        if (r.input == p && r.output.kind() == kind) return &r;
    return nullptr;
}

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

std::string sir_csv(const ReceivedSignal& sig, double simulation_final) {
    const std::vector<double> own = sir_curve(sig);
    const std::vector<double> vs_sim = sir_curve(sig, simulation_final);
    std::string out = "time_s,sir_own_end,sir_simulation_end\n";
    for (std::size_t k = 0; k < own.size(); ++k)
        out += io::format_double(sig.grid().bin_end(k)) + ',' + io::format_double(own[k]) + ',' +
               io::format_double(vs_sim[k]) + '\n';
    return out;
}

std::vector<double> to_db(const std::vector<double>& sir) {
    std::vector<double> out(sir.size());
    for (std::size_t k = 0; k < sir.size(); ++k)
        out[k] = sir[k] > 0 && std::isfinite(sir[k]) ? 10.0 * std::log10(sir[k]) : kNaN;
    return out;
}

std::string method_color(Method m) {
    switch (m) {
        case Method::PointFormula: return "#7f7f7f";
        case Method::PrimitiveFit: return "#2ca02c";
        case Method::EnhancedFit: return "#1f77b4";
        case Method::PrimitiveAnn: return "#ff7f0e";
        case Method::EnhancedAnn: return "#d62728";
    }
    return "#000000";
}

std::vector<double> times(const TimeGrid& g) {
    std::vector<double> t(g.n_bins());
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = g.bin_end(k);
    return t;
}

}  // namespace

std::string_view to_string(Method m) {
    switch (m) {
        case Method::PointFormula: return "point_formula";
        case Method::PrimitiveFit: return "primitive_fit";
        case Method::EnhancedFit: return "enhanced_fit";
        case Method::PrimitiveAnn: return "primitive_ann";
        case Method::EnhancedAnn: return "enhanced_ann";
    }
    return "unknown";
}

Method parse_method(std::string_view text) {
    for (Method m : kAllMethods)
        if (to_string(m) == text) return m;
    throw ValidationError("unknown method '" + std::string(text) + "'");
}

std::optional<ModelKind> method_kind(Method m) {
    switch (m) {
        case Method::PrimitiveFit:
        case Method::PrimitiveAnn: return ModelKind::Primitive;
        case Method::EnhancedFit:
        case Method::EnhancedAnn: return ModelKind::Enhanced;
        default: return std::nullopt;
    }
}

bool is_ann(Method m) { return m == Method::PrimitiveAnn || m == Method::EnhancedAnn; }

double rmse(const ReceivedSignal& a, const ReceivedSignal& b, double n_emitted) {
    if (!(a.grid() == b.grid())) throw ValidationError("rmse: signals are on different time grids");
    const auto va = a.values();
    const auto vb = b.values();
    double sum = 0.0;
    for (std::size_t k = 0; k < va.size(); ++k) {
        const double e = n_emitted * (va[k] - vb[k]);
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(va.size()));
}

Curve method_curve(Method m, const SystemParams& p, const TimeGrid& grid, const std::optional<ModelParams>& model) {
    if (m == Method::PointFormula) return {m, sample_point_formula(p, grid)};
    if (!model) throw MissingArtifact("no model parameters for " + std::string(to_string(m)) + " at " + case_label(p));
    if (model->kind() != *method_kind(m))
        throw ValidationError(std::string(to_string(m)) + " needs a " + std::string(mcvd::to_string(*method_kind(m))) +
                              " model");
    return {m, sample_model(p, *model, grid)};
}

Evaluation evaluate_vds(std::span<const SimulatedCase> vds_sims, std::span<const nn::CaseRecord> fit_records,
                        std::span<const nn::CaseRecord> ann_records, const sim::SimConfig& cfg,
                        std::span<const Method> methods) {
    Evaluation eval;
    eval.methods.assign(methods.begin(), methods.end());
    const std::size_t n = vds_sims.size();

    // Resolve every model up front so that all gaps are reported together.
    std::vector<std::array<std::optional<ModelParams>, kMethodCount>> models(n);
    std::string missing;
    for (std::size_t i = 0; i < n; ++i) {
        for (Method m : methods) {
            const auto kind = method_kind(m);
            if (!kind) continue;
            const nn::CaseRecord* r = find_record(is_ann(m) ? ann_records : fit_records, vds_sims[i].params, *kind);
            if (r) {
                models[i][index(m)] = r->output;
            } else {
                missing += "\n  " + case_label(vds_sims[i].params) + " " + std::string(to_string(m));
            }
        }
    }
    if (!missing.empty()) throw MissingArtifact("evaluation inputs missing:" + missing);

    const double n_emitted = static_cast<double>(cfg.n_molecules);
    eval.cases.resize(n);
    const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic)
    for (long long ii = 0; ii < count; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const SimulatedCase& c = vds_sims[i];
        CaseRmse row{c.params, {}};
        row.rmse.fill(kNaN);
        for (Method m : methods)
            row.rmse[index(m)] = rmse(method_curve(m, c.params, c.signal.grid(), models[i][index(m)]).signal,
                                      c.signal, n_emitted);
        eval.cases[i] = row;
    }

    std::map<std::pair<double, double>, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < n; ++i) members[{eval.cases[i].params.d, eval.cases[i].params.r_rx}].push_back(i);
    for (const auto& [key, idx] : members) {
        RmseGroup g;
        g.d = key.first;
        g.r_rx = key.second;
        g.members = idx.size();
        g.mean_rmse.fill(kNaN);
        for (Method m : methods) {
            double sum = 0.0;
            for (std::size_t i : idx) sum += eval.cases[i].rmse[index(m)];
            g.mean_rmse[index(m)] = sum / static_cast<double>(idx.size());
        }
        eval.groups.push_back(g);
    }
    return eval;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ValidationError("spearman: length mismatch");
    if (x.size() < 2) return kNaN;
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return kNaN;
    return sxy / std::sqrt(sxx * syy);
}

std::vector<Trend> distance_trend(std::span<const RmseGroup> groups, Method m) {
    std::map<double, std::pair<std::vector<double>, std::vector<double>>> strata;
    for (const RmseGroup& g : groups) {
        strata[g.r_rx].first.push_back(g.d);
        strata[g.r_rx].second.push_back(g.mean(m));
    }
    std::vector<Trend> out;
    for (const auto& [r_rx, xy] : strata) out.push_back({r_rx, spearman(xy.first, xy.second), xy.first.size()});
    return out;
}

std::string groups_csv(const Evaluation& eval) {
    std::string out = "d_um,rrx_um,members";
    for (Method m : eval.methods) out += "," + std::string(to_string(m));
    out += '\n';
    for (const RmseGroup& g : eval.groups) {
        out += io::format_double(g.d) + ',' + io::format_double(g.r_rx) + ',' + std::to_string(g.members);
        for (Method m : eval.methods) out += ',' + io::format_double(g.mean(m));
        out += '\n';
    }
    return out;
}

std::string cases_csv(const Evaluation& eval) {
    std::string out = "d_um,rtx_um,rrx_um,D_um2s";
    for (Method m : eval.methods) out += "," + std::string(to_string(m));
    out += '\n';
    for (const CaseRmse& c : eval.cases) {
        out += io::format_double(c.params.d) + ',' + io::format_double(c.params.r_tx) + ',' +
               io::format_double(c.params.r_rx) + ',' + io::format_double(c.params.diff_coeff);
        for (Method m : eval.methods) out += ',' + io::format_double(c.rmse[index(m)]);
        out += '\n';
    }
    return out;
}

std::vector<fs::path> export_curves(const SystemParams& p, const ReceivedSignal& simulation,
                                    std::span<const Curve> curves, const fs::path& out_dir) {
    for (const Curve& c : curves)
        if (!(c.signal.grid() == simulation.grid()))
            throw ValidationError("export: curve " + std::string(to_string(c.method)) + " is on a different grid");
    const double sim_final = simulation.final_value();
    std::vector<fs::path> written;
    const auto write = [&](const std::string& name, const std::string& content) {
        const fs::path path = out_dir / name;
        io::write_file_atomic(path, content);
        written.push_back(path);
    };

    write("signal_simulation.csv", io::signal_csv(simulation));
    for (const Curve& c : curves) write("signal_" + std::string(to_string(c.method)) + ".csv", io::signal_csv(c.signal));
    write("sir_simulation.csv", sir_csv(simulation, sim_final));
    for (const Curve& c : curves)
        write("sir_" + std::string(to_string(c.method)) + ".csv", sir_csv(c.signal, sim_final));

    const std::vector<double> t = times(simulation.grid());
    const std::string where = "d=" + io::format_double(p.d) + " um, r_tx=" + io::format_double(p.r_tx) +
                              " um, r_rx=" + io::format_double(p.r_rx) + " um, D=" + io::format_double(p.diff_coeff) +
                              " um^2/s";

    svg::LineChart signal_chart{"Received signal, " + where, "time (s)", "cumulative fraction received", {}, 0.0, {}};
    const auto values = [](const ReceivedSignal& s) { return std::vector<double>(s.values().begin(), s.values().end()); };
    signal_chart.series.push_back({"simulation", t, values(simulation), "#000000", false});
    for (const Curve& c : curves)
        signal_chart.series.push_back({std::string(to_string(c.method)), t, values(c.signal), method_color(c.method), false});
    write("received_signal.svg", svg::render(signal_chart));

    svg::LineChart sir_chart{"SIR, " + where, "time (s)", "SIR (dB)", {}, -30.0, {}};
    sir_chart.series.push_back({"simulation", t, to_db(sir_curve(simulation)), "#000000", false});
    for (const Curve& c : curves) {
        const std::string name(to_string(c.method));
        const std::string color = method_color(c.method);
        sir_chart.series.push_back({name + " (own end)", t, to_db(sir_curve(c.signal)), color, false});
        sir_chart.series.push_back({name + " (simulation end)", t, to_db(sir_curve(c.signal, sim_final)), color, true});
    }
    write("sir_db.svg", svg::render(sir_chart));
    return written;
}

}  // namespace mcvd::analysis
