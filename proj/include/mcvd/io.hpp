#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcvd/channel.hpp"
#include "mcvd/fitter.hpp"
#include "mcvd/neuralnet.hpp"

namespace mcvd::io {

namespace fs = std::filesystem;

/// 17 significant digits; round-trips every finite double. Infinity is "inf".
std::string format_double(double v);
double parse_double(std::string_view text);

/// Writes `content` to `path` through a temporary file and a rename, creating
/// parent directories as needed.
void write_file_atomic(const fs::path& path, std::string_view content);
/// Throws MissingArtifact when the file does not exist.
std::string read_file(const fs::path& path);

/// Signal CSV: header `time_s,cumulative_fraction`, one row per bin, LF endings.
std::string signal_csv(const ReceivedSignal& sig);
void write_signal_csv(const fs::path& path, const ReceivedSignal& sig);
ReceivedSignal parse_signal_csv(std::string_view text, SignalSource source);
ReceivedSignal read_signal_csv(const fs::path& path, SignalSource source = SignalSource::Simulation);

/// CaseRecord CSV: header `d_um,rtx_um,rrx_um,D_um2s,kind,b1,b2,b3`; b2 and b3
/// are empty for primitive records.
std::string records_csv(std::span<const nn::CaseRecord> records);
void write_records_csv(const fs::path& path, std::span<const nn::CaseRecord> records);
std::vector<nn::CaseRecord> parse_records_csv(std::string_view text, nn::Provenance provenance);
std::vector<nn::CaseRecord> read_records_csv(const fs::path& path, nn::Provenance provenance);

/// One fit outcome: header `kind,b1,b2,b3,rss,initial_rss,n_iterations,converged,final_lambda`.
std::string fit_result_csv(const fit::FitResult& result);
fit::FitResult parse_fit_result_csv(std::string_view text);

/// Versioned plain-text network file ("key value..." per line).
inline constexpr int kNetworkFormatVersion = 1;
std::string network_text(const nn::Network& net);
void write_network(const fs::path& path, const nn::Network& net);
nn::Network parse_network_text(std::string_view text);
nn::Network read_network(const fs::path& path);

/// CSV with a header row; every row must have the header's column count.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};
CsvTable parse_csv(std::string_view text);

}  // namespace mcvd::io
