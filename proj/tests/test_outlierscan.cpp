#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "cpitk/error.hpp"
#include "cpitk/outlierscan.hpp"

using namespace cpitk;
using namespace cpitk::outlierscan;
using Catch::Approx;

namespace {

const YearMonth kStart{2002, 1};
constexpr int kT = 180;

sarimax::SarimaSpec airline() {
    sarimax::SarimaSpec s;
    s.q = 1;
    s.Q = 1;
    return s;
}

sarimax::ModelParams airline_params() {
    sarimax::ModelParams p;
    p.arma.ma = {-0.4};
    p.arma.sma = {-0.6};
    return p;
}

MonthlySeries inject(const MonthlySeries& y, OutlierType type, int anchor, double omega) {
    std::vector<double> v(y.values().begin(), y.values().end());
    for (int t = anchor; t < static_cast<int>(v.size()); ++t) {
        const double s = type == OutlierType::AO ? (t == anchor ? 1.0 : 0.0)
                         : type == OutlierType::LS ? 1.0
                                                   : std::pow(0.8, t - anchor);
        v[static_cast<std::size_t>(t)] += omega * s;
    }
    return {y.start(), v};
}

}  // namespace

TEST_CASE("type names round trip", "[outlierscan]") {
    for (auto t : {OutlierType::AO, OutlierType::IO, OutlierType::LS, OutlierType::TC}) {
        CHECK(type_from_name(type_name(t)) == t);
    }
    CHECK_THROWS_AS(type_from_name("XX"), DataError);
}

TEST_CASE("AO and IO regressors coincide at the last observation", "[outlierscan][property]") {
    const auto y = sarimax::simulate(airline(), airline_params(), kT, 3, kStart);
    const auto m = sarimax::fit(y, airline());
    const auto ao = filtered_regressor(m, OutlierType::AO, y.end());
    const auto io = filtered_regressor(m, OutlierType::IO, y.end());
    REQUIRE(ao.size() == io.size());
    for (std::size_t t = 0; t < ao.size(); ++t) CHECK(ao[t] == Approx(io[t]).margin(1e-10));
}

TEST_CASE("AO regressor is the pi-weight sequence", "[outlierscan]") {
    // For (0,1,1)x(0,1,1) the filtered AO at anchor k starts with 1 at the
    // anchor's differenced index and its tail follows the inverse MA filter.
    const auto y = sarimax::simulate(airline(), airline_params(), kT, 4, kStart);
    const auto m = sarimax::fit(y, airline());
    const int k = 100;
    const auto x = filtered_regressor(m, OutlierType::AO, kStart + k);
    for (int t = 0; t < k - 13; ++t) CHECK(x[static_cast<std::size_t>(t)] == 0.0);
    CHECK(x[static_cast<std::size_t>(k - 13)] == Approx(1.0));
    // Second element: pi_1 = -(1 + theta) for the regular part of the airline model.
    CHECK(x[static_cast<std::size_t>(k - 12)] == Approx(-1.0 - m.arma.ma[0]).margin(1e-12));
}

TEST_CASE("detect finds an injected 8 sigma AO", "[outlierscan][simulation]") {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto clean = sarimax::simulate(airline(), airline_params(), kT, 500 + seed, kStart);
        const auto y = inject(clean, OutlierType::AO, 100, 8.0);
        const auto m = sarimax::fit(y, airline());
        const auto f = detect(y, m);
        for (const auto& x : f) {
            if (x.month == kStart + 100 && x.type == OutlierType::AO && std::abs(x.t_stat) > 3.5) ++hits;
        }
        for (const auto& x : f) CHECK(std::abs(x.t_stat) >= 3.5);
    }
    CHECK(hits >= 27);
}

TEST_CASE("detect on clean series rarely fires", "[outlierscan][simulation]") {
    int total = 0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto y = sarimax::simulate(airline(), airline_params(), kT, 700 + seed, kStart);
        total += static_cast<int>(detect(y, sarimax::fit(y, airline())).size());
    }
    CHECK(total / 30.0 <= 2.0);
}

TEST_CASE("detect is deterministic and sorted by |t|", "[outlierscan][property]") {
    const auto clean = sarimax::simulate(airline(), airline_params(), kT, 42, kStart);
    const auto y = inject(inject(clean, OutlierType::AO, 60, 7.0), OutlierType::LS, 130, -6.0);
    const auto m = sarimax::fit(y, airline());
    const auto a = detect(y, m);
    const auto b = detect(y, m);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].month == b[i].month);
        CHECK(a[i].t_stat == b[i].t_stat);
        if (i > 0) CHECK(std::abs(a[i - 1].t_stat) >= std::abs(a[i].t_stat));
    }
}

TEST_CASE("detect_iterative absorbs an injected level shift", "[outlierscan]") {
    const auto clean = sarimax::simulate(airline(), airline_params(), kT, 8, kStart);
    const auto y = inject(clean, OutlierType::LS, 90, 8.0);
    const auto r = detect_iterative(y, airline());
    bool found = false;
    for (const auto& f : r.findings) found = found || (f.month == kStart + 90 && f.type == OutlierType::LS);
    CHECK(found);
    CHECK_FALSE(r.round_limit_reached);
    // After refitting with the shift, no further month is flagged.
    std::vector<YearMonth> months;
    for (const auto& f : r.findings) months.push_back(f.month);
    for (const auto& f : detect(y, r.model)) {
        CHECK(std::find(months.begin(), months.end(), f.month) != months.end());
    }
}

TEST_CASE("detect_iterative leaves a clean series alone", "[outlierscan]") {
    const auto y = sarimax::simulate(airline(), airline_params(), kT, 700, kStart);
    const auto base = sarimax::fit(y, airline());
    const auto r = detect_iterative(y, airline());
    CHECK(r.findings.empty());
    CHECK(r.rounds == 0);
    CHECK(r.model.loglik == base.loglik);
    CHECK(r.model.arma.flatten() == base.arma.flatten());
}

TEST_CASE("census counts models per month", "[outlierscan]") {
    const auto clean = sarimax::simulate(airline(), airline_params(), kT, 77, kStart);
    const auto y = inject(clean, OutlierType::AO, 61, 9.0);  // February 2007
    std::vector<sarimax::FittedModel> models;
    for (auto [p, q] : {std::pair{0, 1}, std::pair{1, 1}, std::pair{1, 0}}) {
        auto s = airline();
        s.p = p;
        s.q = q;
        models.push_back(sarimax::fit(y, s));
    }
    const auto c = census(y, models, {}, 2);
    CHECK(c.models == 3);
    int recount = 0;
    int expect_at_anchor = 0;
    for (std::size_t i = 0; i < models.size(); ++i) {
        const auto f = detect(y, models[i]);
        recount += static_cast<int>(f.size());
        for (const auto& x : f) expect_at_anchor += x.month == kStart + 61 ? 1 : 0;
    }
    CHECK(c.total == recount);
    CHECK(c.counts[61] == expect_at_anchor);
    CHECK(c.counts[61] >= 1);
    for (int v : c.counts) CHECK(v <= 3);
    CHECK(c.share_january + c.share_february + c.share_other == Approx(1.0));

    std::ostringstream os;
    write_census_csv(os, c);
    CHECK(os.str().rfind("date,count\n2002-01,", 0) == 0);
    CHECK_THROWS_AS(census(y, {}, {}), DataError);
}

TEST_CASE("census of a clean single model is empty", "[outlierscan]") {
    const auto y = sarimax::simulate(airline(), airline_params(), 120, 2, kStart);
    const auto m = sarimax::fit(y, airline());
    DetectOptions opt;
    opt.critical = 50.0;
    const auto c = census(y, {m}, opt);
    CHECK(c.total == 0);
}

TEST_CASE("findings CSV", "[outlierscan]") {
    std::ostringstream os;
    write_findings_csv(os, {{YearMonth{2008, 2}, OutlierType::AO, 1.5, 4.25}});
    CHECK(os.str() == "date,type,omega,t_stat\n2008-02,AO,1.5,4.25\n");
}
