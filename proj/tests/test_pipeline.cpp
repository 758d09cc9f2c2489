#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cpitk/error.hpp"
#include "cpitk/io.hpp"
#include "cpitk/pipeline.hpp"
#include "selection_oracle.hpp"

using namespace cpitk;
using namespace cpitk::pipeline;
namespace fs = std::filesystem;

namespace {

const fs::path kData = CPITK_DATA_DIR;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("cpitk_test_pipeline_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

PipelineConfig toy(const fs::path& out) {
    auto c = load_config(kData / "toy.json");
    c.output_dir = out.string();
    return c;
}

// Data rows of a CSV artifact, metadata and header skipped.
std::vector<std::vector<std::string>> rows(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> out;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        out.push_back(io::split_csv_line(line));
    }
    return out;
}

const std::string kMinimal = R"({"data": {"target": "cn_cpi.csv"}})";

}  // namespace

TEST_CASE("defaults mirror the published settings", "[pipeline]") {
    const auto c = parse_config(kMinimal, kData);
    CHECK(c.orders == selection::OrderSpec{1, 0, 1, 2});
    CHECK(c.tau == calendar::HolidayWindow{4, 0, 12});
    CHECK(c.grid_max_order == 2);
    CHECK(c.grid_orders.empty());
    CHECK(c.grid_taus.empty());
    CHECK(c.detect.critical == 3.5);
    CHECK(c.protocol.training_start == YearMonth{2002, 1});
    CHECK(c.protocol.forecast_span.first == YearMonth{2009, 1});
    CHECK(c.protocol.forecast_span.last == YearMonth{2016, 11});
    CHECK(c.protocol.horizons == std::vector<int>{1, 2, 3, 6, 9, 12});
    CHECK(c.protocol.refit_stride == 1);
    CHECK(c.threads == 1);
}

TEST_CASE("config schema violations are data errors", "[pipeline]") {
    CHECK_THROWS_AS(parse_config("{", kData), DataError);
    CHECK_THROWS_AS(parse_config(R"({"data": {"target": "cn_cpi.csv"}, "colour": 1})", kData), DataError);
    CHECK_THROWS_AS(parse_config(R"({"data": {"target": "missing.csv"}})", kData), DataError);
    CHECK_THROWS_AS(parse_config(R"({"data": {}})", kData), DataError);
    CHECK_THROWS_AS(parse_config(R"({"data": {"target": "cn_cpi.csv"}, "model": {"tau": [4, 0]}})", kData), DataError);
    CHECK_THROWS_AS(parse_config(R"({"data": {"target": "cn_cpi.csv"}, "grid": {"orders": []}})", kData), DataError);
    CHECK_THROWS_AS(parse_config(R"({"data": {"target": "cn_cpi.csv"}, "backtest": {"horizons": []}})", kData),
                    DataError);
    CHECK_THROWS_AS(parse_config(R"({"data": {"target": "cn_cpi.csv"}, "backtest": {"engines": ["x"]}})", kData),
                    DataError);
    CHECK_THROWS_AS(parse_config(R"({"data": {"target": "cn_cpi.csv"}, "di": {"transform": 7}})", kData), DataError);
    CHECK_THROWS_AS(parse_config(R"({"data": {"target": "cn_cpi.csv"}, "outliers": {"critical": "high"}})", kData),
                    DataError);
    CHECK_THROWS_AS(load_config(kData / "nope.json"), DataError);
}

TEST_CASE("FNV-1a matches the reference vectors", "[pipeline]") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("config hash ignores threads and output location only", "[pipeline]") {
    auto a = parse_config(kMinimal, kData);
    auto b = a;
    b.threads = 8;
    b.output_dir = "/elsewhere";
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    b.seed = 7;
    CHECK(config_hash(a) != config_hash(b));
    b = a;
    b.fast = true;
    CHECK(config_hash(a) != config_hash(b));
    b = a;
    b.tau = {8, 0, 8};
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("fit output is byte-identical on rerun and across thread counts", "[pipeline][cli]") {
    const auto d1 = scratch("fit1"), d2 = scratch("fit2");
    std::ostringstream log;
    auto c = toy(d1);
    run_subcommand("fit", c, log);
    c.output_dir = d2.string();
    c.threads = 3;
    run_subcommand("fit", c, log);
    const auto a = slurp(d1 / "model.json");
    CHECK(!a.empty());
    CHECK(a == slurp(d2 / "model.json"));
    CHECK(a.find("\"config_hash\"") != std::string::npos);
    CHECK(a.find("\"version\": \"1.0.0\"") != std::string::npos);
}

TEST_CASE("toy grid reports four cells ordered like the enumeration oracle", "[pipeline][cli]") {
    const auto dir = scratch("grid");
    std::ostringstream log;
    const auto c = toy(dir);
    run_subcommand("grid", c, log);
    const auto cells = rows(dir / "grid_cells.csv");
    REQUIRE(cells.size() == 4);
    std::vector<selection::CellScores> scores;
    for (const auto& r : cells) {
        REQUIRE(r.size() == 14);
        const selection::CellKey k{{std::stoi(r[0]), std::stoi(r[1]), std::stoi(r[2]), std::stoi(r[3])},
                                   {std::stoi(r[4]), std::stoi(r[5]), std::stoi(r[6])}};
        scores.push_back({k, std::stod(r[7]), std::stod(r[8]), std::stod(r[9]), {}});
    }
    const auto want = oracle::enumerate(scores);
    const auto orders = rows(dir / "grid_orders.csv");
    REQUIRE(orders.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
        const auto& r = orders[i];
        CHECK(selection::OrderSpec{std::stoi(r[0]), std::stoi(r[1]), std::stoi(r[2]), std::stoi(r[3])} ==
              want[i].best.order);
        CHECK(calendar::HolidayWindow{std::stoi(r[4]), std::stoi(r[5]), std::stoi(r[6])} == want[i].best.tau);
        CHECK(std::stoi(r[13]) == want[i].rank_sum);
    }
    CHECK(slurp(dir / "grid_cells.csv").rfind("# tool: cpitk 1.0.0\n", 0) == 0);

    // Two threads give the same bytes.
    const auto dir2 = scratch("grid2");
    auto c2 = toy(dir2);
    c2.threads = 2;
    run_subcommand("grid", c2, log);
    CHECK(slurp(dir / "grid_cells.csv") == slurp(dir2 / "grid_cells.csv"));
    CHECK(slurp(dir / "grid_summary.json") == slurp(dir2 / "grid_summary.json"));
}

TEST_CASE("report after backtest gives one ratio per horizon", "[pipeline][cli]") {
    const auto dir = scratch("report");
    std::ostringstream log;
    const auto c = toy(dir);
    CHECK_THROWS_AS(run_subcommand("report", c, log), DataError);
    run_subcommand("backtest", c, log);
    run_subcommand("report", c, log);
    const auto r = rows(dir / "ratio.csv");
    REQUIRE(r.size() == 2);
    const auto di = rows(dir / "backtest_di_summary.csv");
    const auto sx = rows(dir / "backtest_sarimax_summary.csv");
    for (std::size_t i = 0; i < r.size(); ++i) {
        CHECK(r[i][0] == di[i][0]);
        CHECK(std::stod(r[i][1]) == Catch::Approx(std::stod(di[i][1]) / std::stod(sx[i][1])).epsilon(1e-12));
    }
    CHECK(rows(dir / "backtest_di_h1.csv").size() == 24);
    CHECK(log.str().find("reads past origin") == std::string::npos);
    CHECK(slurp(dir / "backtest_di_summary.csv").find("# note: reads past origin: 0\n") != std::string::npos);
}

TEST_CASE("remaining subcommands write their artifacts without touching inputs", "[pipeline][cli]") {
    const auto dir = scratch("rest");
    const auto before = slurp(kData / "cn_cpi.csv") + slurp(kData / "covariates.csv");
    std::ostringstream log;
    const auto c = toy(dir);
    for (const char* name : {"outliers", "sf-effects", "seasadj", "di-forecast"}) run_subcommand(name, c, log);
    for (const char* f : {"outliers.csv", "census.csv", "census_summary.json", "sf_effects.csv", "sf_relative.csv",
                          "decomposition.csv", "di_forecast.csv", "loadings.csv"}) {
        INFO(f);
        CHECK(fs::file_size(dir / f) > 0);
    }
    CHECK(rows(dir / "decomposition.csv").size() == 132);
    CHECK(rows(dir / "di_forecast.csv").size() == 2);
    CHECK(slurp(dir / "decomposition.csv").find("X-13ARIMA-SEATS") != std::string::npos);
    CHECK(slurp(kData / "cn_cpi.csv") + slurp(kData / "covariates.csv") == before);
}

TEST_CASE("unknown subcommands and malformed data are data errors", "[pipeline][cli]") {
    const auto dir = scratch("bad");
    std::ostringstream log;
    CHECK_THROWS_AS(run_subcommand("plot", toy(dir), log), DataError);

    {
        std::ofstream f(dir / "bad.csv");
        f << "date,value\n2002-01,1.0\n2002-02,abc\n";
    }
    auto c = parse_config(R"({"data": {"target": "bad.csv"}})", dir);
    c.output_dir = (dir / "out").string();
    try {
        run_subcommand("fit", c, log);
        FAIL("expected a data error");
    } catch (const DataError& e) {
        const std::string what = e.what();
        CHECK(what.find("bad.csv:3 column 'value'") != std::string::npos);
    }
}
