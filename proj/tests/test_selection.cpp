#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

#include "cpitk/error.hpp"
#include "cpitk/selection.hpp"
#include "selection_oracle.hpp"

using namespace cpitk;
using namespace cpitk::selection;
using Catch::Approx;
using oracle::count_rank;
using oracle::enumerate;

namespace {

std::vector<CellScores> random_cells(const std::vector<OrderSpec>& orders, const std::vector<HolidayWindow>& taus,
                                     std::mt19937_64& rng) {
    // Few distinct values so ties are common; occasional failures.
    std::uniform_int_distribution<int> level(0, 3);
    std::uniform_int_distribution<int> fail(0, 9);
    std::vector<CellScores> cells;
    for (const auto& o : orders) {
        for (const auto& t : taus) {
            CellScores c{{o, t}, 0.5 + 0.1 * level(rng), 200.0 + level(rng), 0.5 + 0.1 * level(rng), {}};
            if (fail(rng) == 0) c = CellScores{{o, t}, kFailed, kFailed, kFailed, "stub failure"};
            cells.push_back(c);
        }
    }
    return cells;
}

const std::vector<OrderSpec> kToyOrders{{0, 0, 0, 1}, {1, 0, 1, 2}, {2, 1, 0, 0}};
const std::vector<HolidayWindow> kToyTaus{{4, 0, 12}, {4, 8, 12}};

}  // namespace

TEST_CASE("order grid enumerates 81 orders lexicographically", "[selection]") {
    const auto g = order_grid();
    REQUIRE(g.size() == 81);
    CHECK(std::is_sorted(g.begin(), g.end()));
    CHECK(g.front() == OrderSpec{0, 0, 0, 0});
    CHECK(g.back() == OrderSpec{2, 2, 2, 2});
}

TEST_CASE("ranks form a permutation", "[selection][property]") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> level(0, 4);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v;
        std::vector<CellKey> k;
        for (int i = 0; i < 30; ++i) {
            v.push_back(level(rng) == 0 ? kFailed : level(rng));
            k.push_back({{i % 3, i / 3 % 3, 0, 0}, {4 * (i / 9), 0, 0}});
        }
        auto r = rank(v, k);
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(r[i] == count_rank(v, k, i));
        std::sort(r.begin(), r.end());
        for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i] == static_cast<int>(i) + 1);
    }
}

TEST_CASE("a single cell has rank sum 3", "[selection]") {
    const auto g = rank_two_step({CellScores{{{1, 0, 1, 2}, {4, 0, 12}}, 0.5, 200.0, 0.5, {}}}, 1.0);
    REQUIRE(g.orders.size() == 1);
    CHECK(g.orders[0].score.rank_sum == 3);
    CHECK(g.orders[0].within.rank_sum == 3);
    CHECK(g.orders[0].tau_star == HolidayWindow{4, 0, 12});
}

TEST_CASE("two-step ordering equals brute-force enumeration", "[selection][oracle]") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const auto cells = random_cells(kToyOrders, kToyTaus, rng);
        const auto g = rank_two_step(cells, 1.0);
        const auto want = enumerate(cells);
        REQUIRE(g.orders.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) {
            CHECK(g.orders[i].order == want[i].best.order);
            CHECK(g.orders[i].tau_star == want[i].best.tau);
            CHECK(g.orders[i].score.rank_sum == want[i].rank_sum);
        }
    }
}

TEST_CASE("ranking ignores the input order of cells", "[selection][property]") {
    std::mt19937_64 rng(9);
    const auto orders = order_grid(1);
    const auto cells = random_cells(orders, kToyTaus, rng);
    const auto a = rank_two_step(cells, 1.0);
    auto shuffled = cells;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto b = rank_two_step(shuffled, 1.0);
    std::ostringstream sa, sb;
    write_cells_csv(sa, a);
    write_orders_csv(sa, a);
    write_cells_csv(sb, b);
    write_orders_csv(sb, b);
    CHECK(sa.str() == sb.str());
}

TEST_CASE("improving one criterion never worsens a rank sum", "[selection][property]") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        auto cells = random_cells(kToyOrders, kToyTaus, rng);
        const auto before = rank_two_step(cells, 1.0);
        const std::size_t i = rng() % cells.size();
        if (cells[i].failed()) continue;
        cells[i].bic -= 1.5;
        const auto after = rank_two_step(cells, 1.0);
        auto find = [&](const GridResult& g) {
            for (const auto& c : g.cells) {
                if (c.raw.key == cells[i].key) return c.score.rank_sum;
            }
            return -1;
        };
        CHECK(find(after) <= find(before));
    }
}

TEST_CASE("failed cells rank last", "[selection]") {
    std::vector<CellScores> cells{
        {{{0, 0, 0, 0}, {0, 0, 0}}, kFailed, kFailed, kFailed, "boom"},
        {{{0, 0, 0, 0}, {4, 0, 0}}, 0.9, 300.0, 0.9, {}},
        {{{0, 0, 0, 1}, {0, 0, 0}}, kFailed, kFailed, kFailed, "boom"},
    };
    const auto g = rank_two_step(cells, 1.0);
    CHECK(g.failures == 2);
    CHECK(g.cells[0].score.rank_sum == 6);
    CHECK(g.orders.front().order == OrderSpec{0, 0, 0, 0});
    CHECK(g.orders.front().tau_star == HolidayWindow{4, 0, 0});
    CHECK(g.orders.back().failed);
    CHECK_THROWS_AS(rank_two_step({}, 1.0), DataError);
    CHECK_THROWS_AS(rank_two_step({cells[1], cells[1]}, 1.0), DataError);
}

TEST_CASE("criteria on a fitted model", "[selection]") {
    sarimax::SarimaSpec spec;
    spec.q = 1;
    spec.Q = 1;
    sarimax::ModelParams par;
    par.arma.ma = {-0.4};
    par.arma.sma = {-0.6};
    const auto y = sarimax::simulate(spec, par, 120, 3, {2002, 1});
    const auto m = sarimax::fit(y, spec);
    const double s0 = baseline_sigma(y);
    CHECK(s0 == Approx(timeseries::sample_sd(timeseries::difference(y, 1, 1, 12).values())));
    CHECK(c_fit(m, m.sigma) == Approx(1.0));
    CHECK(c_fit(m, 2.0 * m.sigma) == Approx(0.5));
    CHECK_THROWS_AS(c_fit(m, 0.0), DataError);

    const double n = m.n_effective;
    CHECK(n == 120 - 13);
    CHECK(bic(m) == Approx(-2.0 * m.loglik + std::log(n) * 2.0));
    // Same log-likelihood, one more counted parameter.
    auto m2 = m;
    m2.spec.mean_regressors = calendar::sf_active_columns(y.range(), calendar::LunarTable::embedded(), {4, 0, 0});
    CHECK(bic(m2) - bic(m) == Approx(std::log(n)));
    // tau = (4,0,12) counts two columns; outlier columns count none.
    auto s = spec;
    s.mean_regressors = calendar::sf_active_columns(y.range(), calendar::LunarTable::embedded(), {4, 0, 12});
    s.mean_regressors.push_back(calendar::intervention_column(y.range(), calendar::RegressorKind::AOPulse, {2008, 2}));
    CHECK(sf_count(s) == 2);
}

TEST_CASE("c_fc on a random walk tracks the innovation sd", "[selection][simulation]") {
    sarimax::SarimaSpec rw;
    rw.D = 0;
    const double sd = 0.8;
    backtest::BacktestProtocol p;  // 2009-01 .. 2016-11, 95 forecasts
    int inside = 0;
    double ms = 0.0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        sarimax::ModelParams par;
        par.sigma2 = sd * sd;
        const auto y = sarimax::simulate(rw, par, 179, 100 + seed, {2002, 1});
        const double s0 = 1.7;
        const double v = c_fc(y, rw, s0, p, calendar::LunarTable::embedded()) * s0;
        inside += std::abs(v / sd - 1.0) <= 0.1 ? 1 : 0;
        ms += (v / sd) * (v / sd) / 40.0;
        if (seed == 0) {
            // Same as the h = 1 expanding backtest.
            const backtest::SarimaxForecaster f(rw, calendar::LunarTable::embedded());
            auto p1 = p;
            p1.horizons = {1};
            const auto rep = backtest::run({y, {}, {}}, f, p1, s0);
            CHECK(rep.at(1).rmse == Approx(v).epsilon(1e-10));
            CHECK(rep.at(1).records.size() == 95);
        }
    }
    // The RMSE of 95 normals has relative sd 1/sqrt(190), so about 83% of
    // seeds land within 10%; the pooled mean square is far tighter.
    CHECK(inside >= 28);
    CHECK(ms == Approx(1.0).margin(0.08));
}

TEST_CASE("grid search is deterministic and reproducible from stored models", "[selection]") {
    const auto& table = calendar::LunarTable::embedded();
    const MonthRange range{YearMonth{2002, 1}, YearMonth{2008, 12}};
    sarimax::SarimaSpec truth;
    truth.q = 1;
    truth.Q = 1;
    truth.mean_regressors = calendar::sf_active_columns(range, table, {4, 0, 12});
    sarimax::ModelParams par;
    par.arma.ma = {-0.4};
    par.arma.sma = {-0.6};
    par.beta = {2.0, -1.0};
    par.sigma2 = 0.25;
    const auto y = sarimax::simulate(truth, par, range.size(), 5, range.first);

    GridOptions opt;
    opt.table = table;
    opt.protocol.training_start = range.first;
    opt.protocol.forecast_span = {YearMonth{2008, 7}, YearMonth{2008, 12}};
    const std::vector<OrderSpec> orders{{0, 1, 0, 1}, {1, 0, 0, 1}};
    const std::vector<HolidayWindow> taus{{0, 0, 0}, {4, 0, 12}};
    const double s0 = baseline_sigma(y);

    std::size_t calls = 0;
    opt.progress = [&](std::size_t done, std::size_t total) {
        ++calls;
        CHECK(done <= total);
    };
    const auto a = grid_search(y, orders, taus, s0, opt);
    CHECK(calls == 4);
    opt.progress = nullptr;
    opt.threads = 2;
    const auto b = grid_search(y, orders, taus, s0, opt);

    std::ostringstream sa, sb;
    write_cells_csv(sa, a);
    write_orders_csv(sa, a);
    write_cells_csv(sb, b);
    write_orders_csv(sb, b);
    CHECK(sa.str() == sb.str());
    CHECK(a.cells.size() == 4);
    CHECK(a.failures == 0);
    CHECK(a.cells[0].raw.key < a.cells[1].raw.key);

    // The SF window that generated the data wins for the true orders.
    for (const auto& r : a.orders) {
        if (r.order == OrderSpec{0, 1, 0, 1}) CHECK(r.tau_star == HolidayWindow{4, 0, 12});
    }
    for (const auto& r : a.orders) {
        REQUIRE(r.model.has_value());
        CHECK(c_fit(*r.model, s0) == Approx(r.score.c_fit).epsilon(1e-10));
        CHECK(bic(*r.model) == Approx(r.score.bic).epsilon(1e-10));
        const auto spec = cell_spec(opt.base, {r.order, r.tau_star}, y.range(), table);
        CHECK(c_fc(y, spec, s0, opt.protocol, table) == Approx(r.score.c_fc).epsilon(1e-10));
    }

    const auto j = nlohmann::json::parse(summary_json(a, {1, 10.0, 1e6, 10.0}));
    CHECK(j["top"].size() == 1);
    CHECK(j["within_thresholds"].size() == 2);
    CHECK(j["sigma0"].get<double>() == s0);
    CHECK(j["c_fc_rmse_divisor"] == "number of forecasts");
    CHECK(sa.str().rfind("p,q,P,Q,tau1,tau2,tau3,c_fit,bic,c_fc,r_fit,r_bic,r_fc,rank_sum\n", 0) == 0);
}

TEST_CASE("grid search records fit failures", "[selection]") {
    const MonthlySeries y({2002, 1}, std::vector<double>(30, 1.0));
    GridOptions opt;
    opt.protocol.training_start = {2002, 1};
    opt.protocol.forecast_span = {YearMonth{2004, 1}, YearMonth{2004, 6}};
    const auto g = grid_search(y, {{0, 0, 0, 0}}, {{0, 0, 0}}, 1.0, opt);
    CHECK(g.failures == 1);
    CHECK(g.orders[0].failed);
    CHECK_FALSE(g.orders[0].model.has_value());
    CHECK_THROWS_AS(grid_search(y, {}, {{0, 0, 0}}, 1.0, opt), DataError);
}
