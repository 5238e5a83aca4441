#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "mcvd/errors.hpp"
#include "mcvd/io.hpp"

using namespace mcvd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("mcvd_test_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("format_double round-trips arbitrary doubles") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    for (int i = 0; i < 2000; ++i) {
        const double v = u(gen) * std::pow(10.0, static_cast<int>(gen() % 40) - 20);
        CHECK(io::parse_double(io::format_double(v)) == v);
    }
    CHECK(io::format_double(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(std::isinf(io::parse_double("inf")));
    CHECK_THROWS_AS(io::parse_double("1.0x"), ValidationError);
    CHECK_THROWS_AS(io::parse_double(""), ValidationError);
}

TEST_CASE("signal CSV has one row per bin and round-trips bit for bit") {
    const SystemParams p{5, 4, 8, 80};
    const ReceivedSignal sig = sample_point_formula(p, TimeGrid(1e-3, 1.0));
    const std::string text = io::signal_csv(sig);
    const io::CsvTable t = io::parse_csv(text);
    CHECK(t.header == std::vector<std::string>{"time_s", "cumulative_fraction"});
    CHECK(t.rows.size() == sig.grid().n_bins());
    CHECK(text.find('\r') == std::string::npos);

    const ReceivedSignal back = io::parse_signal_csv(text, SignalSource::PointFormula);
    CHECK(back == sig);
    CHECK(io::signal_csv(back) == text);
}

TEST_CASE("signal CSV rejects a wrong header and non-monotone data") {
    CHECK_THROWS_AS(io::parse_signal_csv("t,f\n0.001,0\n", SignalSource::Simulation), ValidationError);
    CHECK_THROWS_AS(io::parse_signal_csv("time_s,cumulative_fraction\n0.001,0.5\n0.002,0.4\n", SignalSource::Simulation),
                    ValidationError);
    CHECK_THROWS_AS(io::parse_csv("a,b\n1\n"), ValidationError);
}

TEST_CASE("records CSV leaves b2 and b3 empty for primitive records") {
    const std::vector<nn::CaseRecord> prim{{{2, 5, 5, 50}, ModelParams::primitive(1.25), nn::Provenance::TDS}};
    const std::string text = io::records_csv(prim);
    CHECK(text == "d_um,rtx_um,rrx_um,D_um2s,kind,b1,b2,b3\n2,5,5,50,primitive,1.25,,\n");
    const auto back = io::parse_records_csv(text, nn::Provenance::TDS);
    REQUIRE(back.size() == 1);
    CHECK(back[0].input == prim[0].input);
    CHECK(back[0].output == prim[0].output);

    const std::vector<nn::CaseRecord> enh{{{3, 4, 6, 60}, ModelParams::enhanced(0.9, 1.0 / 3.0, 0.51), nn::Provenance::VDS}};
    const auto back2 = io::parse_records_csv(io::records_csv(enh), nn::Provenance::VDS);
    REQUIRE(back2.size() == 1);
    CHECK(back2[0].output == enh[0].output);
    CHECK(back2[0].provenance == nn::Provenance::VDS);
}

TEST_CASE("fit result CSV round-trips") {
    fit::FitResult r;
    r.model = ModelParams::enhanced(1.1, 0.45, 0.55);
    r.rss = 1.0 / 7.0;
    r.initial_rss = 3.0;
    r.n_iterations = 17;
    r.converged = true;
    r.final_lambda = 1e-9;
    const fit::FitResult back = io::parse_fit_result_csv(io::fit_result_csv(r));
    CHECK(back.model == r.model);
    CHECK(back.rss == r.rss);
    CHECK(back.initial_rss == r.initial_rss);
    CHECK(back.n_iterations == 17);
    CHECK(back.converged);
    CHECK(back.final_lambda == r.final_lambda);
}

TEST_CASE("network text round-trips and rejects foreign versions") {
    std::vector<double> w(nn::Network::weight_count(3, 3));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(static_cast<double>(i) + 0.5);
    const nn::Network net(ModelKind::Enhanced, 3, {{2, 5, 5, 50}, {10, 10, 10, 100}}, {{0.5, 0.3, 0.3}, {2, 0.7, 0.7}},
                          w);
    const std::string text = io::network_text(net);
    CHECK(text.rfind("format mcvd-network\nversion 1\n", 0) == 0);
    const nn::Network back = io::parse_network_text(text);
    CHECK(back == net);

    std::string bumped = text;
    bumped.replace(bumped.find("version 1"), 9, "version 2");
    CHECK_THROWS_AS(io::parse_network_text(bumped), ValidationError);
}

TEST_CASE("atomic writes leave no temporary file and missing reads throw MissingArtifact") {
    const fs::path dir = scratch("atomic");
    const fs::path file = dir / "nested" / "a.txt";
    io::write_file_atomic(file, "hello\n");
    CHECK(io::read_file(file) == "hello\n");
    io::write_file_atomic(file, "again\n");
    CHECK(io::read_file(file) == "again\n");
    CHECK_FALSE(fs::exists(dir / "nested" / "a.txt.tmp"));
    CHECK_THROWS_AS(io::read_file(dir / "absent.csv"), MissingArtifact);
    fs::remove_all(dir);
}
