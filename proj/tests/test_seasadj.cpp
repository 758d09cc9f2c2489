#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "cpitk/error.hpp"
#include "cpitk/seasadj.hpp"

using namespace cpitk;
using namespace cpitk::seasadj;
using Catch::Approx;

namespace {

const YearMonth kStart{2002, 1};

MonthlySeries make(int n, const std::function<double(int)>& f) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) v[static_cast<std::size_t>(t)] = f(t);
    return {kStart, v};
}

MonthlySeries noisy_seasonal(int n, std::uint64_t seed, double level = 100.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 0.3);
    return make(n, [&](int t) { return level + 0.05 * t + 2.0 * std::sin(2.0 * std::numbers::pi * t / 12.0) + z(rng); });
}

double max_abs(const MonthlySeries& s) {
    double m = 0.0;
    for (double v : s.values()) m = std::max(m, std::abs(v));
    return m;
}

void check_identity(const Decomposition& d) {
    for (std::size_t t = 0; t < d.raw.size(); ++t) {
        const double zt = d.raw[t] - d.sf_effect[t];
        if (d.mode == Mode::Additive) {
            CHECK(d.trend[t] + d.seasonal[t] + d.irregular[t] == Approx(zt).margin(1e-10));
            CHECK(d.adjusted[t] == Approx(d.raw[t] - d.sf_effect[t] - d.seasonal[t]).margin(1e-10));
        } else {
            CHECK(d.trend[t] * d.seasonal[t] * d.irregular[t] == Approx(zt).epsilon(1e-10));
            CHECK(d.adjusted[t] == Approx(zt / d.seasonal[t]).epsilon(1e-10));
            CHECK(d.seasonal[t] > 0.0);
        }
    }
}

}  // namespace

TEST_CASE("sinusoid is captured by the seasonal component", "[seasadj]") {
    const auto z = make(96, [](int t) { return 3.0 * std::cos(2.0 * std::numbers::pi * (t + 0.3) / 12.0); });
    const auto d = decompose(z, Mode::Additive);
    check_identity(d);
    for (std::size_t t = 6; t + 6 < z.size(); ++t) {
        CHECK(std::abs(d.irregular[t]) < 1e-6);
        CHECK(d.seasonal[t] == Approx(z[t]).margin(1e-6));
    }
}

TEST_CASE("additive factors sum to zero over any twelve months", "[seasadj][property]") {
    const auto d = decompose(noisy_seasonal(120, 1), Mode::Additive);
    for (std::size_t t = 0; t + 12 <= d.seasonal.size(); ++t) {
        double s = 0.0;
        for (std::size_t k = t; k < t + 12; ++k) s += d.seasonal[k];
        CHECK(std::abs(s) < 1e-10);
    }
}

TEST_CASE("trend of a ramp equals the ramp away from the ends", "[seasadj]") {
    const auto z = make(60, [](int t) { return 5.0 + 0.7 * t; });
    const auto d = decompose(z, Mode::Additive);
    // Explicit 2x12 weights: 1/24, 1/12 x 11, 1/24.
    std::vector<double> w(13, 1.0 / 12.0);
    w.front() = w.back() = 1.0 / 24.0;
    for (std::size_t t = 6; t + 6 < z.size(); ++t) {
        double ma = 0.0;
        for (std::size_t k = 0; k < 13; ++k) ma += w[k] * z[t - 6 + k];
        CHECK(d.trend[t] == Approx(ma).epsilon(1e-12));
        CHECK(d.trend[t] == Approx(z[t]).epsilon(1e-12));
    }
    // Ends repeat the nearest computable value.
    CHECK(d.trend[0] == d.trend[6]);
    CHECK(d.trend[59] == d.trend[53]);
}

TEST_CASE("reconstruction identities hold in both modes", "[seasadj][property]") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto z = noisy_seasonal(100, seed);
        check_identity(decompose(z, Mode::Additive));
        const auto m = decompose(z, Mode::Multiplicative);
        check_identity(m);
        double mean = 0.0;
        for (std::size_t t = 0; t < 12; ++t) mean += m.seasonal[t] / 12.0;
        CHECK(mean == Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("decomposing the adjusted series leaves little seasonality", "[seasadj][property]") {
    for (auto mode : {Mode::Additive, Mode::Multiplicative}) {
        const auto z = noisy_seasonal(120, 3);
        const auto d = decompose(z, mode);
        const auto again = decompose(d.adjusted, mode);
        if (mode == Mode::Additive) {
            CHECK(max_abs(again.seasonal) < 0.1 * max_abs(d.seasonal));
        } else {
            double a = 0.0, b = 0.0;
            for (std::size_t t = 0; t < 12; ++t) {
                a = std::max(a, std::abs(again.seasonal[t] - 1.0));
                b = std::max(b, std::abs(d.seasonal[t] - 1.0));
            }
            CHECK(a < 0.1 * b);
        }
    }
}

TEST_CASE("decompose rejects bad input", "[seasadj]") {
    CHECK_THROWS_AS(decompose(noisy_seasonal(35, 1), Mode::Additive), DataError);
    CHECK_THROWS_AS(decompose(noisy_seasonal(48, 1, 0.0), Mode::Multiplicative), DataError);
    CHECK_NOTHROW(decompose(noisy_seasonal(48, 1, 0.0), Mode::Additive));
    CHECK(mode_from_name("multiplicative") == Mode::Multiplicative);
    CHECK_THROWS_AS(mode_from_name("x13"), DataError);
}

TEST_CASE("remove_sf recovers an injected SF effect", "[seasadj]") {
    const auto& table = calendar::LunarTable::embedded();
    const MonthRange range{kStart, YearMonth{2016, 11}};
    sarimax::SarimaSpec spec;
    spec.q = 1;
    spec.Q = 1;
    spec.mean_regressors = calendar::sf_active_columns(range, table, {4, 0, 12});
    sarimax::ModelParams par;
    par.arma.ma = {-0.4};
    par.arma.sma = {-0.6};
    par.beta = {3.0, -1.5};
    par.sigma2 = 0.09;
    const auto y = sarimax::simulate(spec, par, range.size(), 21, kStart);
    const auto m = sarimax::fit(y, spec);
    const auto r = remove_sf(y, m, table);

    double worst = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        const double truth = 3.0 * spec.mean_regressors[0].values[t] - 1.5 * spec.mean_regressors[1].values[t];
        worst = std::max(worst, std::abs(r.effect[t] - truth));
        CHECK(r.adjusted[t] + r.effect[t] == Approx(y[t]).margin(1e-12));
        const int month = y.month_at(t).month;
        if (month >= 4 && month <= 11) CHECK(r.effect[t] == 0.0);
    }
    // Effect error is bounded by the coefficient error times the column maxima (<= 1).
    CHECK(worst <= 4.0 * (m.std_errors[2] + m.std_errors[3]));

    auto zero = m;
    std::fill(zero.beta.begin(), zero.beta.end(), 0.0);
    const auto r0 = remove_sf(y, zero, table);
    for (std::size_t t = 0; t < y.size(); ++t) CHECK(r0.adjusted[t] == y[t]);

    auto none = m;
    none.spec.mean_regressors.clear();
    CHECK_THROWS_AS(remove_sf(y, none, table), DataError);

    const auto d = decompose(y, r.effect, Mode::Additive);
    check_identity(d);
    std::ostringstream os;
    write_decomposition_csv(os, d);
    CHECK(os.str().rfind("date,raw,sf_effect,trend,seasonal,irregular,adjusted\n2002-01,", 0) == 0);
}

TEST_CASE("periodic seasonality is continued exactly", "[seasadj]") {
    const std::vector<double> pattern{0.3, 1.2, -0.4, -0.2, 0.0, -0.1, 0.1, 0.2, -0.3, -0.5, -0.2, -0.1};
    const auto s = make(60, [&](int t) { return pattern[static_cast<std::size_t>(t % 12)]; });
    const auto f = forecast_seasonality(s, default_seasonality_spec(), 24);
    for (int k = 0; k < 24; ++k) CHECK(f[static_cast<std::size_t>(k)] == pattern[static_cast<std::size_t>(k % 12)]);

    const auto pos = make(60, [&](int t) { return 1.0 + 0.01 * pattern[static_cast<std::size_t>(t % 12)]; });
    const auto g = forecast_seasonality(pos, default_seasonality_spec(), 12, true);
    for (int k = 0; k < 12; ++k) CHECK(g[static_cast<std::size_t>(k)] == Approx(pos[static_cast<std::size_t>(k)]).epsilon(1e-14));
}

TEST_CASE("seasonality forecasts delegate to sarimax", "[seasadj]") {
    const auto spec = default_seasonality_spec();
    sarimax::ModelParams par;
    par.arma.ma = {0.3};
    par.arma.sma = {-0.7};
    par.sigma2 = 0.01;
    const auto s = sarimax::simulate(spec, par, 120, 4, kStart);
    const auto f = forecast_seasonality(s, spec, 12);
    const auto direct = sarimax::forecast(sarimax::fit(s, spec), 12, std::vector<calendar::RegressorColumn>{});
    for (std::size_t k = 0; k < 12; ++k) CHECK(f[k] == direct.point[k]);
}

TEST_CASE("stable seasonality is forecast within the irregular noise", "[seasadj][simulation]") {
    const std::vector<double> pattern{0.3, 1.2, -0.4, -0.2, 0.0, -0.1, 0.1, 0.2, -0.3, -0.5, -0.2, -0.1};
    const double sd = 0.05;
    int ok = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> z(0.0, sd);
        const auto all = make(132, [&](int t) { return pattern[static_cast<std::size_t>(t % 12)] + z(rng); });
        const auto train = all.slice(kStart, kStart + 119);
        const auto f = forecast_seasonality(train, default_seasonality_spec(), 12);
        double ss = 0.0;
        for (std::size_t k = 0; k < 12; ++k) ss += std::pow(f[k] - all[120 + k], 2);
        ok += std::sqrt(ss / 12.0) <= 2.0 * sd ? 1 : 0;
    }
    CHECK(ok >= 19);
}

TEST_CASE("seasonality from official adjusted data", "[seasadj]") {
    const MonthlySeries raw(kStart, {101.0, 102.0, 99.0});
    const MonthlySeries adj(kStart + 1, {100.0, 100.0, 100.0});
    const auto s = seasonality_from_adjusted(raw, adj);
    CHECK(s.start() == kStart + 1);
    REQUIRE(s.size() == 2);
    CHECK(s[0] == Approx(1.02));
    CHECK(s[1] == Approx(0.99));
    CHECK_THROWS_AS(seasonality_from_adjusted(raw, MonthlySeries(kStart, {100.0, 0.0, 1.0})), DataError);
}
