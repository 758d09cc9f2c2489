// Writes the synthetic fixture data and example configs: make_fixtures DIR
//
// cn_cpi.csv       additive seasonality, Spring Festival effects (4,0,12), an AO in 2008-02
// us_cpi.csv       multiplicative seasonality, no holiday effects
// us_cpi_sa.csv    its seasonally adjusted counterpart
// covariates.csv   8 series led by the inflation driver, with a few missing cells
// cn.json, us.json, toy.json

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "cpitk/calendar.hpp"
#include "cpitk/io.hpp"
#include "cpitk/timeseries.hpp"

namespace {

using namespace cpitk;
namespace fs = std::filesystem;

const YearMonth kStart{2002, 1};
const YearMonth kEnd{2016, 11};

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
}

void write_series(const fs::path& path, const MonthlySeries& s, const std::string& comment) {
    std::ofstream f(path, std::ios::binary);
    f << "# " << comment << '\n';
    io::write_series_csv(f, s, "value");
}

/// Monthly inflation driver shared by both economies: an AR(1) leading factor.
std::vector<double> leading_factor(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> z;
    std::vector<double> g(static_cast<std::size_t>(n));
    double a = 0.0;
    for (auto& v : g) v = a = 0.8 * a + z(rng);
    return g;
}

/// Seasonally adjusted level: monthly changes mean-revert and load on the
/// factor one month earlier.
std::vector<double> adjusted_level(std::mt19937_64& rng, const std::vector<double>& g, double start, double drift,
                                   double load, double noise) {
    std::normal_distribution<double> z;
    std::vector<double> sa(g.size());
    double level = start, prev = drift;
    for (std::size_t t = 0; t < g.size(); ++t) {
        const double d = drift + 0.4 * (prev - drift) + (t > 0 ? load * g[t - 1] : 0.0) + noise * z(rng);
        level += d;
        prev = d;
        sa[t] = level;
    }
    return sa;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_fixtures DIR\n";
        return 1;
    }
    const fs::path dir = argv[1];
    fs::create_directories(dir);

    std::mt19937_64 rng(20161130);
    std::normal_distribution<double> z;
    const int n = kEnd - kStart + 1;
    const MonthRange range{kStart, kEnd};
    const auto g = leading_factor(rng, n);

    // China: additive seasonal pattern plus holiday effects and one AO.
    const auto sa_cn = adjusted_level(rng, g, 100.0, 0.2, 0.12, 0.15);
    const double pattern_cn[12] = {0.25, 0.15, -0.35, -0.1, -0.2, -0.15, 0.05, 0.1, 0.2, 0.0, -0.05, 0.1};
    const auto sf = calendar::sf_active_columns(range, calendar::LunarTable::embedded(), {4, 0, 12});
    std::vector<double> cn(static_cast<std::size_t>(n));
    for (std::size_t t = 0; t < cn.size(); ++t) {
        cn[t] = sa_cn[t] + pattern_cn[t % 12] + 1.2 * sf[0].values[t] - 0.6 * sf[1].values[t];
    }
    cn[static_cast<std::size_t>(YearMonth{2008, 2} - kStart)] += 1.5;
    write_series(dir / "cn_cpi.csv", MonthlySeries(kStart, cn), "synthetic CN-like CPI level");

    // United States: multiplicative seasonality, percent deviations.
    const auto sa_us = adjusted_level(rng, g, 180.0, 0.2, 0.1, 0.12);
    const double pattern_us[12] = {-0.3, -0.05, 0.2, 0.3, 0.25, 0.1, -0.05, -0.1, 0.05, 0.0, -0.2, -0.2};
    std::vector<double> us(sa_us.size());
    for (std::size_t t = 0; t < us.size(); ++t) us[t] = sa_us[t] * (1.0 + pattern_us[t % 12] / 100.0);
    write_series(dir / "us_cpi.csv", MonthlySeries(kStart, us), "synthetic US-like CPI level, not adjusted");
    write_series(dir / "us_cpi_sa.csv", MonthlySeries(kStart, sa_us), "synthetic US-like CPI level, adjusted");

    // Covariates: levels whose first differences load on the leading factor.
    Panel p;
    p.start = kStart;
    const int k = 8;
    p.data.resize(n, k);
    for (int j = 0; j < k; ++j) {
        p.names.push_back("x" + std::to_string(j + 1));
        const double load = (j % 2 == 0 ? 1.0 : -0.7) * (1.0 + 0.1 * j);
        double level = 50.0 + 5.0 * j;
        for (int t = 0; t < n; ++t) {
            level += 0.05 + load * g[static_cast<std::size_t>(t)] + 0.6 * z(rng);
            p.data(t, j) = level;
        }
    }
    for (auto [t, j] : {std::pair{17, 2}, {60, 5}, {61, 5}, {120, 0}, {150, 7}}) p.data(t, j) = std::nan("");
    {
        std::ofstream f(dir / "covariates.csv", std::ios::binary);
        f << "# synthetic covariate panel; a few cells are missing\n";
        io::write_panel_csv(f, p);
    }

    write_file(dir / "cn.json", R"({
  "data": {"target": "cn_cpi.csv", "covariates": "covariates.csv"},
  "model": {"orders": [1, 0, 1, 2], "tau": [4, 0, 12],
            "interventions": [{"type": "AO", "month": "2008-02"}]},
  "backtest": {"scheme": "expanding", "training_start": "2002-01", "span": ["2009-01", "2016-11"],
               "horizons": [1, 2, 3, 6, 9, 12], "engines": ["sarimax", "di"]},
  "seasadj": {"mode": "additive"},
  "di": {"max_k": 5, "transform": 1},
  "output_dir": "out/cn"
}
)");
    write_file(dir / "us.json", R"({
  "data": {"target": "us_cpi.csv", "adjusted": "us_cpi_sa.csv", "covariates": "covariates.csv"},
  "model": {"orders": [1, 0, 1, 1], "tau": [0, 0, 0]},
  "backtest": {"scheme": "expanding", "training_start": "2002-01", "span": ["2009-01", "2016-11"],
               "horizons": [1, 2, 3, 6, 9, 12], "engines": ["sarimax", "di"]},
  "seasadj": {"mode": "multiplicative", "use_official_adjusted": true},
  "di": {"max_k": 5, "transform": 1},
  "output_dir": "out/us"
}
)");
    write_file(dir / "toy.json", R"({
  "data": {"target": "cn_cpi.csv", "covariates": "covariates.csv"},
  "sample": {"start": "2002-01", "end": "2012-12"},
  "model": {"orders": [0, 0, 0, 1], "tau": [4, 0, 12],
            "interventions": [{"type": "AO", "month": "2008-02"}]},
  "grid": {"orders": [[0, 0, 0, 1], [1, 0, 0, 1]], "taus": [[4, 0, 12], [8, 0, 8]]},
  "outliers": {"census": true},
  "backtest": {"scheme": "expanding", "training_start": "2002-01", "span": ["2011-01", "2012-12"],
               "horizons": [1, 3], "engines": ["sarimax", "di"]},
  "di": {"max_k": 2, "max_p": 3, "max_m": 2},
  "output_dir": "out/toy"
}
)");
    std::cout << "fixtures written to " << dir.string() << '\n';
    return 0;
}
