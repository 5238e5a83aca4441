#include "mcvd/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "mcvd/errors.hpp"

namespace mcvd::io {

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(std::string_view text) {
    if (text == "inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ValidationError("malformed number '" + std::string(text) + "'");
    }
    return v;
}

void write_file_atomic(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact("missing artifact: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) lines.push_back(line);
        start = end + 1;
    }
    return lines;
}

void expect_header(const CsvTable& t, std::initializer_list<std::string_view> expected) {
    if (t.header.size() != expected.size() || !std::equal(t.header.begin(), t.header.end(), expected.begin())) {
        std::string want;
        for (auto e : expected) want += (want.empty() ? "" : ",") + std::string(e);
        throw ValidationError("unexpected CSV header, want " + want);
    }
}

}  // namespace

CsvTable parse_csv(std::string_view text) {
    const auto lines = lines_of(text);
    if (lines.empty()) throw ValidationError("empty CSV");
    CsvTable t;
    t.header = split(lines[0], ',');
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto row = split(lines[i], ',');
        if (row.size() != t.header.size()) {
            throw ValidationError("CSV row " + std::to_string(i) + " has " + std::to_string(row.size()) +
                                  " fields, expected " + std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::string signal_csv(const ReceivedSignal& sig) {
    std::string out = "time_s,cumulative_fraction\n";
    const auto values = sig.values();
    for (std::size_t k = 0; k < values.size(); ++k) {
        out += format_double(sig.grid().bin_end(k));
        out += ',';
        out += format_double(values[k]);
        out += '\n';
    }
    return out;
}

void write_signal_csv(const fs::path& path, const ReceivedSignal& sig) { write_file_atomic(path, signal_csv(sig)); }

ReceivedSignal parse_signal_csv(std::string_view text, SignalSource source) {
    const CsvTable t = parse_csv(text);
    expect_header(t, {"time_s", "cumulative_fraction"});
    if (t.rows.empty()) throw ValidationError("signal CSV has no rows");
    std::vector<double> values;
    values.reserve(t.rows.size());
    for (const auto& row : t.rows) values.push_back(parse_double(row[1]));
    const double dt = parse_double(t.rows.front()[0]);
    const TimeGrid grid(dt, parse_double(t.rows.back()[0]));
    return ReceivedSignal(grid, std::move(values), source);
}

ReceivedSignal read_signal_csv(const fs::path& path, SignalSource source) {
    return parse_signal_csv(read_file(path), source);
}

std::string records_csv(std::span<const nn::CaseRecord> records) {
    std::string out = "d_um,rtx_um,rrx_um,D_um2s,kind,b1,b2,b3\n";
    for (const nn::CaseRecord& r : records) {
        out += format_double(r.input.d) + ',' + format_double(r.input.r_tx) + ',' + format_double(r.input.r_rx) +
               ',' + format_double(r.input.diff_coeff) + ',' + std::string(to_string(r.output.kind())) + ',' +
               format_double(r.output.b1()) + ',';
        if (r.output.kind() == ModelKind::Enhanced) {
            out += format_double(r.output.b2()) + ',' + format_double(r.output.b3());
        } else {
            out += ',';
        }
        out += '\n';
    }
    return out;
}

void write_records_csv(const fs::path& path, std::span<const nn::CaseRecord> records) {
    write_file_atomic(path, records_csv(records));
}

std::vector<nn::CaseRecord> parse_records_csv(std::string_view text, nn::Provenance provenance) {
    const CsvTable t = parse_csv(text);
    expect_header(t, {"d_um", "rtx_um", "rrx_um", "D_um2s", "kind", "b1", "b2", "b3"});
    std::vector<nn::CaseRecord> out;
    for (const auto& row : t.rows) {
        nn::CaseRecord r;
        r.input = {parse_double(row[0]), parse_double(row[1]), parse_double(row[2]), parse_double(row[3])};
        r.input.validate();
        const ModelKind kind = parse_model_kind(row[4]);
        if (kind == ModelKind::Primitive) {
            if (!row[6].empty() || !row[7].empty()) throw ValidationError("primitive record with b2/b3 values");
            r.output = ModelParams::primitive(parse_double(row[5]));
        } else {
            r.output = ModelParams::enhanced(parse_double(row[5]), parse_double(row[6]), parse_double(row[7]));
        }
        r.provenance = provenance;
        out.push_back(r);
    }
    return out;
}

std::vector<nn::CaseRecord> read_records_csv(const fs::path& path, nn::Provenance provenance) {
    return parse_records_csv(read_file(path), provenance);
}

std::string fit_result_csv(const fit::FitResult& result) {
    const auto b = result.model.coefficients();
    std::string out = "kind,b1,b2,b3,rss,initial_rss,n_iterations,converged,final_lambda\n";
    out += std::string(to_string(result.model.kind())) + ',' + format_double(b[0]) + ',';
    out += b.size() == 3 ? format_double(b[1]) + ',' + format_double(b[2]) : std::string(",");
    out += ',' + format_double(result.rss) + ',' + format_double(result.initial_rss) + ',' +
           std::to_string(result.n_iterations) + ',' + (result.converged ? "1" : "0") + ',' +
           format_double(result.final_lambda) + '\n';
    return out;
}

fit::FitResult parse_fit_result_csv(std::string_view text) {
    const CsvTable t = parse_csv(text);
    expect_header(t, {"kind", "b1", "b2", "b3", "rss", "initial_rss", "n_iterations", "converged", "final_lambda"});
    if (t.rows.size() != 1) throw ValidationError("fit result file must hold exactly one row");
    const auto& row = t.rows[0];
    fit::FitResult r;
    const ModelKind kind = parse_model_kind(row[0]);
    r.model = kind == ModelKind::Primitive
                  ? ModelParams::primitive(parse_double(row[1]))
                  : ModelParams::enhanced(parse_double(row[1]), parse_double(row[2]), parse_double(row[3]));
    r.rss = parse_double(row[4]);
    r.initial_rss = parse_double(row[5]);
    r.n_iterations = std::stoi(row[6]);
    r.converged = row[7] == "1";
    r.final_lambda = parse_double(row[8]);
    return r;
}

namespace {

void append_line(std::string& out, std::string_view key, std::span<const double> values) {
    out += key;
    for (double v : values) {
        out += ' ';
        out += format_double(v);
    }
    out += '\n';
}

}  // namespace

std::string network_text(const nn::Network& net) {
    std::string out = "format mcvd-network\n";
    out += "version " + std::to_string(kNetworkFormatVersion) + "\n";
    out += "kind " + std::string(to_string(net.kind())) + "\n";
    out += "inputs d r_tx r_rx D\n";
    out += "hidden " + std::to_string(net.hidden()) + "\n";
    out += "hidden_activation tanh\n";
    out += "output_activation identity\n";
    append_line(out, "input_min", net.input_scaling().min);
    append_line(out, "input_max", net.input_scaling().max);
    append_line(out, "output_min", net.output_scaling().min);
    append_line(out, "output_max", net.output_scaling().max);
    append_line(out, "weights", net.weights());
    return out;
}

void write_network(const fs::path& path, const nn::Network& net) { write_file_atomic(path, network_text(net)); }

nn::Network parse_network_text(std::string_view text) {
    std::map<std::string, std::vector<std::string>> fields;
    for (std::string_view line : lines_of(text)) {
        auto parts = split(line, ' ');
        std::string key = parts.front();
        parts.erase(parts.begin());
        fields[key] = std::move(parts);
    }
    const auto single = [&](const std::string& key) -> std::string {
        const auto it = fields.find(key);
        if (it == fields.end() || it->second.size() != 1) throw ValidationError("network file: bad field " + key);
        return it->second[0];
    };
    const auto numbers = [&](const std::string& key) {
        const auto it = fields.find(key);
        if (it == fields.end()) throw ValidationError("network file: missing field " + key);
        std::vector<double> v;
        for (const auto& s : it->second) v.push_back(parse_double(s));
        return v;
    };
    if (single("format") != "mcvd-network") throw ValidationError("not a network file");
    if (std::stoi(single("version")) != kNetworkFormatVersion) throw ValidationError("unsupported network version");
    if (single("hidden_activation") != "tanh" || single("output_activation") != "identity") {
        throw ValidationError("unsupported activations in network file");
    }
    const ModelKind kind = parse_model_kind(single("kind"));
    const auto hidden = static_cast<std::size_t>(std::stoul(single("hidden")));
    return nn::Network(kind, hidden, {numbers("input_min"), numbers("input_max")},
                       {numbers("output_min"), numbers("output_max")}, numbers("weights"));
}

nn::Network read_network(const fs::path& path) { return parse_network_text(read_file(path)); }

}  // namespace mcvd::io
