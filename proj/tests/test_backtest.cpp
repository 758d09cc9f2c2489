#include <catch_amalgamated.hpp>

#include <atomic>
#include <cmath>
#include <random>
#include <sstream>

#include "cpitk/backtest.hpp"
#include "cpitk/error.hpp"

using namespace cpitk;
using namespace cpitk::backtest;
using Catch::Approx;

namespace {

MonthlySeries random_walk(int n, std::uint64_t seed, YearMonth start = {2002, 1}) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::vector<double> v(static_cast<std::size_t>(n));
    double x = 100.0;
    for (auto& e : v) e = x += z(rng);
    return {start, v};
}

// Last observed value for every horizon.
class NaiveTrained final : public TrainedModel {
public:
    std::vector<double> forecast(const DataAccessor& data, MonthRange window,
                                 const std::vector<int>& horizons) const override {
        const auto s = data.target(window.first, window.last);
        return std::vector<double>(horizons.size(), s.values().back());
    }
};

class Naive final : public Forecaster {
public:
    mutable std::atomic<int> trains{0};
    std::string name() const override { return "naive"; }
    std::unique_ptr<TrainedModel> train(const DataAccessor& data, MonthRange window) const override {
        (void)data.target(window.first, window.last);
        ++trains;
        return std::make_unique<NaiveTrained>();
    }
};

// Reads one month past the origin.
class Cheat final : public Forecaster {
public:
    std::string name() const override { return "cheat"; }
    std::unique_ptr<TrainedModel> train(const DataAccessor& data, MonthRange window) const override {
        (void)data.target(window.first, window.last + 1);
        return std::make_unique<NaiveTrained>();
    }
};

BacktestProtocol small_protocol(Scheme scheme) {
    BacktestProtocol p;
    p.scheme = scheme;
    p.training_start = {2002, 1};
    p.forecast_span = {YearMonth{2007, 1}, YearMonth{2008, 12}};
    p.horizons = {1, 3, 12};
    return p;
}

}  // namespace

TEST_CASE("training windows follow the scheme", "[backtest]") {
    auto p = small_protocol(Scheme::Expanding);
    const YearMonth t{2009, 6};
    CHECK(p.training_window(t, 1).first == YearMonth{2002, 1});
    CHECK(p.training_window(t, 1).last == YearMonth{2009, 5});
    CHECK(p.training_window(t, 12).last == YearMonth{2008, 6});
    p.scheme = Scheme::Rolling;
    for (int h : {1, 2, 3, 6, 9, 12}) {
        const auto w = p.training_window(t, h);
        CHECK(w.size() == 49 - h);
        CHECK(w.last == t - h);
    }
}

TEST_CASE("protocol validation", "[backtest]") {
    auto p = small_protocol(Scheme::Expanding);
    p.horizons.clear();
    CHECK_THROWS_AS(p.validate(), DataError);
    p = small_protocol(Scheme::Expanding);
    p.refit_stride = 0;
    CHECK_THROWS_AS(p.validate(), DataError);
    p = small_protocol(Scheme::Expanding);
    p.training_start = {2010, 1};
    CHECK_THROWS_AS(p.validate(), DataError);
    CHECK(scheme_from_name("rolling") == Scheme::Rolling);
    CHECK_THROWS_AS(scheme_from_name("sliding"), DataError);
}

TEST_CASE("naive backtest matches a hand computation", "[backtest]") {
    const auto y = random_walk(96, 1);
    const Dataset d{y, {}, {}};
    for (auto scheme : {Scheme::Expanding, Scheme::Rolling}) {
        const auto p = small_protocol(scheme);
        const auto rep = run(d, Naive{}, p, 2.0);
        REQUIRE(rep.horizons.size() == 3);
        for (const auto& hr : rep.horizons) {
            REQUIRE(hr.records.size() == 24);
            double ss = 0.0;
            for (YearMonth t = p.forecast_span.first; t <= p.forecast_span.last; ++t) {
                const double e = y.at(t - hr.h) - y.at(t);
                ss += e * e;
            }
            const double rmse = std::sqrt(ss / 24.0);
            CHECK(hr.rmse == Approx(rmse).epsilon(1e-14));
            CHECK(hr.rmse_over_sigma0 == Approx(rmse / 2.0).epsilon(1e-14));
            for (std::size_t i = 1; i < hr.records.size(); ++i) CHECK(hr.records[i - 1].target < hr.records[i].target);
            for (const auto& r : hr.records) CHECK(r.target - r.origin == hr.h);
        }
    }
}

TEST_CASE("no read passes its origin", "[backtest][property]") {
    const auto y = random_walk(96, 2);
    const Dataset d{y, {}, {}};
    for (auto scheme : {Scheme::Expanding, Scheme::Rolling}) {
        ReadLog log;
        RunOptions opt;
        opt.log = &log;
        (void)run(d, Naive{}, small_protocol(scheme), 1.0, opt);
        CHECK_FALSE(log.records().empty());
        CHECK(log.violations() == 0);
    }
    ReadLog log;
    RunOptions opt;
    opt.log = &log;
    CHECK_THROWS_AS(run(d, Cheat{}, small_protocol(Scheme::Expanding), 1.0, opt), DataError);
    CHECK(log.violations() >= 1);
}

TEST_CASE("expanding origins are trained once across horizons", "[backtest]") {
    const auto y = random_walk(96, 3);
    const Dataset d{y, {}, {}};
    Naive f;
    const auto p = small_protocol(Scheme::Expanding);
    (void)run(d, f, p, 1.0);
    // Origins span 2006-01 .. 2008-11.
    CHECK(f.trains == 35);

    Naive g;
    auto ps = p;
    ps.refit_stride = 4;
    const auto a = run(d, g, ps, 1.0);
    CHECK(g.trains == 9);
    // Naive forecasts only depend on the data window, so the stride changes nothing.
    const auto b = run(d, Naive{}, p, 1.0);
    for (std::size_t i = 0; i < a.horizons.size(); ++i) CHECK(a.horizons[i].rmse == b.horizons[i].rmse);
}

TEST_CASE("data coverage is checked", "[backtest]") {
    const auto y = random_walk(60, 4);
    CHECK_THROWS_AS(run(Dataset{y, {}, {}}, Naive{}, small_protocol(Scheme::Expanding), 1.0), DataError);
}

TEST_CASE("compare reports RMSE ratios", "[backtest]") {
    const auto y = random_walk(96, 5);
    const Dataset d{y, {}, {}};
    const auto a = run(d, Naive{}, small_protocol(Scheme::Expanding), 1.0);
    const auto b = run(d, Naive{}, small_protocol(Scheme::Rolling), 1.0);
    const auto r = compare(a, b);
    REQUIRE(r.size() == 3);
    for (const auto& x : r) CHECK(x.ratio == Approx(1.0));
    auto p = small_protocol(Scheme::Expanding);
    p.forecast_span.last = YearMonth{2008, 6};
    CHECK_THROWS_AS(compare(a, run(d, Naive{}, p, 1.0)), DataError);

    std::ostringstream os;
    write_ratio_csv(os, r);
    CHECK(os.str() == "h,ratio\n1,1\n3,1\n12,1\n");
}

TEST_CASE("sarimax backtest is deterministic and matches a direct fit", "[backtest][sarimax]") {
    sarimax::SarimaSpec spec;
    spec.q = 1;
    spec.Q = 1;
    sarimax::ModelParams par;
    par.arma.ma = {-0.4};
    par.arma.sma = {-0.6};
    const auto y = sarimax::simulate(spec, par, 96, 11, {2002, 1});
    const Dataset d{y, {}, {}};
    const auto table = calendar::LunarTable::embedded();
    BacktestProtocol p;
    p.training_start = {2002, 1};
    p.forecast_span = {YearMonth{2008, 7}, YearMonth{2008, 12}};
    p.horizons = {1, 2};
    const SarimaxForecaster f(spec, table);
    RunOptions one;
    RunOptions two;
    two.threads = 2;
    const auto a = run(d, f, p, 1.0, one);
    const auto b = run(d, f, p, 1.0, two);
    for (std::size_t k = 0; k < a.horizons.size(); ++k) {
        for (std::size_t i = 0; i < a.horizons[k].records.size(); ++i) {
            CHECK(a.horizons[k].records[i].forecast == b.horizons[k].records[i].forecast);
        }
    }
    // Origin 2008-08 at h = 1, fitted directly.
    const auto m = sarimax::fit(y.slice({2002, 1}, {2008, 8}), spec);
    const auto fc = sarimax::forecast(m, 1, table);
    CHECK(a.at(1).records[2].origin == YearMonth{2008, 8});
    CHECK(a.at(1).records[2].forecast == Approx(fc.point[0]).epsilon(1e-10));
}

TEST_CASE("report CSV layouts", "[backtest]") {
    const auto y = random_walk(96, 6);
    const auto rep = run(Dataset{y, {}, {}}, Naive{}, small_protocol(Scheme::Expanding), 1.0);
    std::ostringstream h, s, t;
    write_horizon_csv(h, rep.at(1));
    write_summary_csv(s, rep);
    write_trace_csv(t, rep);
    CHECK(h.str().rfind("origin,forecast,actual,error\n2006-12,", 0) == 0);
    CHECK(s.str().rfind("h,rmse,rmse_over_sigma0\n1,", 0) == 0);
    CHECK(t.str().rfind("h,month,error\n1,2007-01,", 0) == 0);
}

TEST_CASE("constant series gives zero naive errors", "[backtest]") {
    const MonthlySeries y({2002, 1}, std::vector<double>(96, 101.5));
    for (auto scheme : {Scheme::Expanding, Scheme::Rolling}) {
        const auto rep = run(Dataset{y, {}, {}}, Naive{}, small_protocol(scheme), 1.0);
        for (const auto& hr : rep.horizons) {
            CHECK(hr.rmse == 0.0);
            for (const auto& r : hr.records) CHECK(r.error == 0.0);
        }
    }
}
