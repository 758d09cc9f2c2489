#include "cpitk/selection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>

#include "json.hpp"

#include "cpitk/error.hpp"
#include "cpitk/io.hpp"
#include "cpitk/parallel.hpp"

namespace cpitk::selection {

std::string OrderSpec::to_string() const {
    return "(" + std::to_string(p) + "," + std::to_string(q) + "," + std::to_string(P) + "," + std::to_string(Q) + ")";
}

std::vector<OrderSpec> order_grid(int max_order) {
    if (max_order < 0) throw DataError("order grid bound must be >= 0");
    std::vector<OrderSpec> out;
    for (int p = 0; p <= max_order; ++p)
        for (int q = 0; q <= max_order; ++q)
            for (int P = 0; P <= max_order; ++P)
                for (int Q = 0; Q <= max_order; ++Q) out.push_back({p, q, P, Q});
    return out;
}

double baseline_sigma(const MonthlySeries& series) {
    const auto w = timeseries::difference(series, 1, 1, 12);
    return timeseries::sample_sd(w.values());
}

double c_fit(const sarimax::FittedModel& model, double sigma0) {
    if (!(sigma0 > 0.0)) throw DataError("baseline sigma must be positive");
    return model.sigma / sigma0;
}

int sf_count(const sarimax::SarimaSpec& spec) {
    return static_cast<int>(std::count_if(spec.mean_regressors.begin(), spec.mean_regressors.end(),
                                          [](const calendar::RegressorColumn& c) { return c.is_sf(); }));
}

double bic(const sarimax::FittedModel& model) {
    const int k = model.spec.arma_count() + sf_count(model.spec);
    return -2.0 * model.loglik + std::log(static_cast<double>(model.n_effective)) * k;
}

double c_fc(const MonthlySeries& series, const sarimax::SarimaSpec& spec, double sigma0,
            const backtest::BacktestProtocol& protocol, const calendar::LunarTable& table,
            const sarimax::FitOptions& fit_options) {
    if (!(sigma0 > 0.0)) throw DataError("baseline sigma must be positive");
    auto p = protocol;
    p.horizons = {1};
    const backtest::SarimaxForecaster f(spec, table, fit_options);
    const auto rep = backtest::run(backtest::Dataset{series, {}, {}}, f, p, sigma0);
    return rep.at(1).rmse / sigma0;
}

std::vector<int> rank(const std::vector<double>& values, const std::vector<CellKey>& keys) {
    if (values.size() != keys.size()) throw DataError("rank: values and keys differ in length");
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const bool fa = std::isfinite(values[a]);
        const bool fb = std::isfinite(values[b]);
        if (fa != fb) return fa;
        if (fa && values[a] != values[b]) return values[a] < values[b];
        return keys[a] < keys[b];
    });
    std::vector<int> r(values.size());
    for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<int>(i) + 1;
    return r;
}

namespace {

std::vector<ScoreTriple> rank_pool(const std::vector<const CellScores*>& pool, const std::vector<CellKey>& keys) {
    std::vector<double> f, b, c;
    for (const auto* x : pool) {
        f.push_back(x->c_fit);
        b.push_back(x->bic);
        c.push_back(x->c_fc);
    }
    const auto rf = rank(f, keys);
    const auto rb = rank(b, keys);
    const auto rc = rank(c, keys);
    std::vector<ScoreTriple> out(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        auto& s = out[i];
        s.c_fit = f[i];
        s.bic = b[i];
        s.c_fc = c[i];
        s.r_fit = rf[i];
        s.r_bic = rb[i];
        s.r_fc = rc[i];
        s.rank_sum = rf[i] + rb[i] + rc[i];
    }
    return out;
}

}  // namespace

GridResult rank_two_step(std::vector<CellScores> cells, double sigma0) {
    if (cells.empty()) throw DataError("grid: no cells");
    std::sort(cells.begin(), cells.end(), [](const CellScores& a, const CellScores& b) { return a.key < b.key; });
    for (std::size_t i = 1; i < cells.size(); ++i) {
        if (cells[i - 1].key == cells[i].key) throw DataError("grid: duplicate cell");
    }

    GridResult g;
    g.sigma0 = sigma0;
    g.cells.resize(cells.size());
    std::map<OrderSpec, std::vector<std::size_t>> by_order;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        g.cells[i].raw = cells[i];
        if (cells[i].failed()) ++g.failures;
        by_order[cells[i].key.order].push_back(i);
    }

    // Step 1: tau* within each order.
    std::vector<const CellScores*> best_raw;
    std::vector<CellKey> best_keys;
    for (const auto& [order, members] : by_order) {
        std::vector<const CellScores*> pool;
        std::vector<CellKey> keys;
        for (std::size_t i : members) {
            pool.push_back(&cells[i]);
            keys.push_back(cells[i].key);
        }
        const auto scores = rank_pool(pool, keys);
        std::size_t best = 0;
        for (std::size_t k = 0; k < members.size(); ++k) {
            g.cells[members[k]].score = scores[k];
            // Members are in key order, so the first minimum wins ties.
            if (scores[k].rank_sum < scores[best].rank_sum) best = k;
        }
        OrderResult r;
        r.order = order;
        r.tau_star = keys[best].tau;
        r.within = scores[best];
        r.failed = pool[best]->failed();
        g.orders.push_back(r);
        best_raw.push_back(pool[best]);
        best_keys.push_back(keys[best]);
    }

    // Step 2: orders at their tau*.
    const auto across = rank_pool(best_raw, best_keys);
    for (std::size_t i = 0; i < g.orders.size(); ++i) g.orders[i].score = across[i];
    std::sort(g.orders.begin(), g.orders.end(), [](const OrderResult& a, const OrderResult& b) {
        if (a.score.rank_sum != b.score.rank_sum) return a.score.rank_sum < b.score.rank_sum;
        return CellKey{a.order, a.tau_star} < CellKey{b.order, b.tau_star};
    });
    return g;
}

sarimax::SarimaSpec cell_spec(const sarimax::SarimaSpec& base, const CellKey& key, MonthRange range,
                              const calendar::LunarTable& table) {
    auto s = base;
    s.p = key.order.p;
    s.q = key.order.q;
    s.P = key.order.P;
    s.Q = key.order.Q;
    s.mean_regressors = calendar::sf_active_columns(range, table, key.tau);
    for (const auto& c : base.mean_regressors) {
        if (!c.is_sf()) s.mean_regressors.push_back(calendar::regenerate(c, range, table));
    }
    for (auto& c : s.innovation_pulses) c = calendar::regenerate(c, range, table);
    return s;
}

GridResult grid_search(const MonthlySeries& series, const std::vector<OrderSpec>& orders,
                       const std::vector<HolidayWindow>& taus, double sigma0, const GridOptions& options) {
    if (orders.empty() || taus.empty()) throw DataError("grid: empty order or window grid");
    if (!(sigma0 > 0.0)) throw DataError("baseline sigma must be positive");

    std::vector<CellKey> keys;
    for (const auto& o : orders)
        for (const auto& t : taus) keys.push_back({o, t});

    std::vector<CellScores> scores(keys.size());
    std::mutex progress_mutex;
    std::size_t done = 0;
    parallel_for(keys.size(), options.threads, [&](std::size_t i) {
        auto& s = scores[i];
        s.key = keys[i];
        try {
            const auto spec = cell_spec(options.base, keys[i], series.range(), options.table);
            auto fo = options.fit;
            fo.compute_std_errors = false;
            const auto m = sarimax::fit(series, spec, fo);
            s.c_fit = c_fit(m, sigma0);
            s.bic = bic(m);
            s.c_fc = c_fc(series, spec, sigma0, options.protocol, options.table, fo);
        } catch (const DataError& e) {
            s = CellScores{keys[i], kFailed, kFailed, kFailed, e.what()};
        } catch (const NumericalError& e) {
            s = CellScores{keys[i], kFailed, kFailed, kFailed, e.what()};
        }
        if (options.progress) {
            const std::lock_guard lock(progress_mutex);
            options.progress(++done, keys.size());
        }
    });

    auto g = rank_two_step(std::move(scores), sigma0);
    if (options.keep_models) {
        // Fits are deterministic, so refitting tau* reproduces the scored model.
        parallel_for(g.orders.size(), options.threads, [&](std::size_t i) {
            auto& r = g.orders[i];
            if (r.failed) return;
            const auto spec = cell_spec(options.base, {r.order, r.tau_star}, series.range(), options.table);
            auto fo = options.fit;
            fo.compute_std_errors = false;
            r.model = sarimax::fit(series, spec, fo);
        });
    }
    return g;
}

namespace {

void write_row(std::ostream& out, const CellKey& k, const ScoreTriple& s) {
    out << k.order.p << ',' << k.order.q << ',' << k.order.P << ',' << k.order.Q << ',' << k.tau.before << ','
        << k.tau.during << ',' << k.tau.after << ',' << io::format_double(s.c_fit) << ',' << io::format_double(s.bic)
        << ',' << io::format_double(s.c_fc) << ',' << s.r_fit << ',' << s.r_bic << ',' << s.r_fc << ',' << s.rank_sum
        << '\n';
}

constexpr const char* kHeader = "p,q,P,Q,tau1,tau2,tau3,c_fit,bic,c_fc,r_fit,r_bic,r_fc,rank_sum\n";

nlohmann::json order_json(const OrderResult& r) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    return {{"order", {r.order.p, r.order.q, r.order.P, r.order.Q}},
            {"tau", {r.tau_star.before, r.tau_star.during, r.tau_star.after}},
            {"c_fit", num(r.score.c_fit)},
            {"bic", num(r.score.bic)},
            {"c_fc", num(r.score.c_fc)},
            {"ranks", {r.score.r_fit, r.score.r_bic, r.score.r_fc}},
            {"rank_sum", r.score.rank_sum}};
}

}  // namespace

void write_cells_csv(std::ostream& out, const GridResult& g) {
    out << kHeader;
    for (const auto& c : g.cells) write_row(out, c.raw.key, c.score);
}

void write_orders_csv(std::ostream& out, const GridResult& g) {
    out << kHeader;
    for (const auto& r : g.orders) write_row(out, {r.order, r.tau_star}, r.score);
}

std::string summary_json(const GridResult& g, const SummaryOptions& options) {
    nlohmann::json j;
    j["sigma0"] = g.sigma0;
    j["orders"] = g.orders.size();
    j["cells"] = g.cells.size();
    j["failures"] = g.failures;
    j["thresholds"] = {{"c_fit", options.max_c_fit}, {"bic", options.max_bic}, {"c_fc", options.max_c_fc}};
    j["c_fc_rmse_divisor"] = "number of forecasts";
    auto& top = j["top"] = nlohmann::json::array();
    for (std::size_t i = 0; i < std::min(options.top_n, g.orders.size()); ++i) top.push_back(order_json(g.orders[i]));
    auto& pass = j["within_thresholds"] = nlohmann::json::array();
    for (const auto& r : g.orders) {
        if (r.score.c_fit <= options.max_c_fit && r.score.bic <= options.max_bic && r.score.c_fc <= options.max_c_fc) {
            pass.push_back(order_json(r));
        }
    }
    // Window frequencies among the top set.
    std::map<std::string, int> freq;
    for (std::size_t i = 0; i < std::min(options.top_n, g.orders.size()); ++i) ++freq[g.orders[i].tau_star.to_string()];
    j["top_window_counts"] = freq;
    return j.dump(2) + "\n";
}

}  // namespace cpitk::selection
