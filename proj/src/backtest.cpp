#include "cpitk/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "cpitk/error.hpp"
#include "cpitk/io.hpp"
#include "cpitk/parallel.hpp"

namespace cpitk::backtest {

std::string scheme_name(Scheme s) { return s == Scheme::Expanding ? "expanding" : "rolling"; }

Scheme scheme_from_name(const std::string& name) {
    if (name == "expanding") return Scheme::Expanding;
    if (name == "rolling") return Scheme::Rolling;
    throw DataError("unknown backtest scheme '" + name + "'");
}

void BacktestProtocol::validate() const {
    if (horizons.empty()) throw DataError("backtest: no horizons");
    for (int h : horizons) {
        if (h < 1) throw DataError("backtest: horizons must be >= 1");
        if (scheme == Scheme::Rolling && rolling_base - h < 2) throw DataError("backtest: rolling window too short");
    }
    if (forecast_span.last < forecast_span.first) throw DataError("backtest: empty forecast span");
    if (!(training_start < forecast_span.first)) throw DataError("backtest: forecast span must follow training start");
    if (refit_stride < 1) throw DataError("backtest: refit stride must be >= 1");
}

MonthRange BacktestProtocol::training_window(YearMonth target, int h) const {
    const YearMonth origin = target - h;
    if (scheme == Scheme::Expanding) return {training_start, origin};
    return {origin - (rolling_base - h) + 1, origin};
}

void ReadLog::record(const ReadRecord& r) {
    const std::lock_guard lock(mutex_);
    records_.push_back(r);
}

std::vector<ReadRecord> ReadLog::records() const {
    const std::lock_guard lock(mutex_);
    return records_;
}

std::size_t ReadLog::violations() const {
    const std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [](const ReadRecord& r) { return r.last > r.origin; }));
}

DataAccessor::DataAccessor(const Dataset& data, YearMonth origin, ReadLog* log)
    : data_(&data), origin_(origin), log_(log) {}

void DataAccessor::check(YearMonth first, YearMonth last) const {
    if (log_) log_->record({origin_, first, last});
    if (last > origin_) {
        throw DataError("look-ahead read up to " + last.to_string() + " at origin " + origin_.to_string());
    }
}

MonthlySeries DataAccessor::target(YearMonth first, YearMonth last) const {
    check(first, last);
    return data_->target.slice(first, last);
}

Panel DataAccessor::covariates(YearMonth first, YearMonth last) const {
    if (!data_->covariates) throw DataError("no covariate panel supplied");
    check(first, last);
    return data_->covariates->slice(first, last);
}

MonthlySeries DataAccessor::adjusted(YearMonth first, YearMonth last) const {
    if (!data_->adjusted) throw DataError("no adjusted series supplied");
    check(first, last);
    return data_->adjusted->slice(first, last);
}

// ---------------------------------------------------------------------------

namespace {

class SarimaxTrained final : public TrainedModel {
public:
    SarimaxTrained(sarimax::FittedModel model, const calendar::LunarTable* table)
        : model_(std::move(model)), table_(table) {}

    std::vector<double> forecast(const DataAccessor& data, MonthRange window,
                                 const std::vector<int>& horizons) const override {
        const int h_max = *std::max_element(horizons.begin(), horizons.end());
        const sarimax::FittedModel* m = &model_;
        sarimax::FittedModel moved;
        if (window.first != model_.series.start() || window.last != model_.series.end()) {
            // Same parameters, later data.
            moved = model_;
            moved.series = data.target(window.first, window.last);
            moved.spec = sarimax::restrict_regressors(model_.spec, window, *table_);
            m = &moved;
        }
        const auto fc = sarimax::forecast(*m, h_max, *table_);
        std::vector<double> out;
        for (int h : horizons) out.push_back(fc.point[static_cast<std::size_t>(h - 1)]);
        return out;
    }

private:
    sarimax::FittedModel model_;
    const calendar::LunarTable* table_;
};

}  // namespace

SarimaxForecaster::SarimaxForecaster(sarimax::SarimaSpec spec, calendar::LunarTable table, sarimax::FitOptions options)
    : spec_(std::move(spec)), table_(std::move(table)), options_(std::move(options)) {}

std::unique_ptr<TrainedModel> SarimaxForecaster::train(const DataAccessor& data, MonthRange window) const {
    auto series = data.target(window.first, window.last);
    auto spec = sarimax::restrict_regressors(spec_, window, table_);
    auto opts = options_;
    opts.compute_std_errors = false;
    return std::make_unique<SarimaxTrained>(sarimax::fit(series, spec, opts), &table_);
}

// ---------------------------------------------------------------------------

const HorizonReport& ForecastReport::at(int h) const {
    for (const auto& r : horizons) {
        if (r.h == h) return r;
    }
    throw DataError("report has no horizon " + std::to_string(h));
}

namespace {

struct Item {
    YearMonth origin;
    MonthRange window;
    std::vector<int> horizons;
};

struct Group {
    MonthRange train_window;
    std::vector<std::size_t> items;
};

}  // namespace

ForecastReport run(const Dataset& data, const Forecaster& forecaster, const BacktestProtocol& protocol, double sigma0,
                   const RunOptions& options) {
    protocol.validate();
    const auto& y = data.target;
    if (!y.range().contains(protocol.forecast_span.last) || !y.range().contains(protocol.training_start)) {
        throw DataError("backtest: target series does not cover the protocol's months");
    }

    // Work items: one per (origin, window). Expanding windows share one item
    // across horizons; rolling windows differ per horizon.
    std::vector<Item> items;
    std::map<std::pair<int, int>, std::size_t> index;  // (origin ordinal, rolling length or 0)
    for (int h : protocol.horizons) {
        for (YearMonth t = protocol.forecast_span.first; t <= protocol.forecast_span.last; ++t) {
            const auto window = protocol.training_window(t, h);
            if (window.first < y.start()) throw DataError("backtest: training window starts before the data");
            const int len = protocol.scheme == Scheme::Rolling ? window.size() : 0;
            const auto key = std::pair{window.last.ordinal(), len};
            auto it = index.find(key);
            if (it == index.end()) {
                it = index.emplace(key, items.size()).first;
                items.push_back({window.last, window, {}});
            }
            items[it->second].horizons.push_back(h);
        }
    }

    // Refit groups: origins share parameters estimated at the group's first origin.
    std::map<std::pair<int, int>, Group> group_map;
    {
        std::map<int, int> first_origin;  // per rolling length
        for (const auto& it : items) {
            const int len = protocol.scheme == Scheme::Rolling ? it.window.size() : 0;
            auto [f, inserted] = first_origin.emplace(len, it.origin.ordinal());
            if (!inserted) f->second = std::min(f->second, it.origin.ordinal());
        }
        for (std::size_t i = 0; i < items.size(); ++i) {
            const auto& it = items[i];
            const int len = protocol.scheme == Scheme::Rolling ? it.window.size() : 0;
            const int base = first_origin[len];
            const int refit = base + (it.origin.ordinal() - base) / protocol.refit_stride * protocol.refit_stride;
            const YearMonth r = YearMonth::from_ordinal(refit);
            const MonthRange train = protocol.scheme == Scheme::Rolling ? MonthRange{r - len + 1, r}
                                                                        : MonthRange{protocol.training_start, r};
            auto& g = group_map[{refit, len}];
            g.train_window = train;
            g.items.push_back(i);
        }
    }
    std::vector<Group> groups;
    for (auto& [k, g] : group_map) groups.push_back(std::move(g));

    std::vector<std::vector<double>> results(items.size());
    std::mutex progress_mutex;
    std::size_t done = 0;
    parallel_for(groups.size(), options.threads, [&](std::size_t gi) {
        const auto& g = groups[gi];
        const DataAccessor train_access(data, g.train_window.last, options.log);
        const auto model = forecaster.train(train_access, g.train_window);
        for (std::size_t i : g.items) {
            const auto& it = items[i];
            const DataAccessor access(data, it.origin, options.log);
            auto hs = it.horizons;
            results[i] = model->forecast(access, it.window, hs);
            for (double v : results[i]) {
                if (!std::isfinite(v)) throw NumericalError("non-finite forecast at origin " + it.origin.to_string());
            }
        }
        if (options.progress) {
            const std::lock_guard lock(progress_mutex);
            options.progress(++done, groups.size());
        }
    });

    ForecastReport rep;
    rep.engine = forecaster.name();
    rep.scheme = protocol.scheme;
    rep.span = protocol.forecast_span;
    rep.sigma0 = sigma0;
    for (int h : protocol.horizons) {
        HorizonReport hr;
        hr.h = h;
        rep.horizons.push_back(std::move(hr));
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& it = items[i];
        for (std::size_t k = 0; k < it.horizons.size(); ++k) {
            const int h = it.horizons[k];
            ForecastRecord r;
            r.origin = it.origin;
            r.target = it.origin + h;
            r.forecast = results[i][k];
            r.actual = y.at(r.target);
            r.error = r.forecast - r.actual;
            const auto pos = static_cast<std::size_t>(
                std::find(protocol.horizons.begin(), protocol.horizons.end(), h) - protocol.horizons.begin());
            rep.horizons[pos].records.push_back(r);
        }
    }
    for (auto& hr : rep.horizons) {
        std::sort(hr.records.begin(), hr.records.end(),
                  [](const ForecastRecord& a, const ForecastRecord& b) { return a.target < b.target; });
        double ss = 0.0;
        for (const auto& r : hr.records) ss += r.error * r.error;
        hr.rmse = std::sqrt(ss / static_cast<double>(hr.records.size()));
        hr.rmse_over_sigma0 = hr.rmse / sigma0;
    }
    return rep;
}

std::vector<HorizonRatio> compare(const ForecastReport& a, const ForecastReport& b) {
    if (a.span.first != b.span.first || a.span.last != b.span.last) throw DataError("compare: span mismatch");
    if (a.horizons.size() != b.horizons.size()) throw DataError("compare: horizon mismatch");
    std::vector<HorizonRatio> out;
    for (const auto& ha : a.horizons) {
        const auto& hb = b.at(ha.h);
        if (ha.records.size() != hb.records.size()) throw DataError("compare: span mismatch");
        out.push_back({ha.h, ha.rmse / hb.rmse});
    }
    return out;
}

void write_horizon_csv(std::ostream& out, const HorizonReport& r) {
    out << "origin,forecast,actual,error\n";
    for (const auto& x : r.records) {
        out << x.origin.to_string() << ',' << io::format_double(x.forecast) << ',' << io::format_double(x.actual) << ','
            << io::format_double(x.error) << '\n';
    }
}

void write_summary_csv(std::ostream& out, const ForecastReport& r) {
    out << "h,rmse,rmse_over_sigma0\n";
    for (const auto& h : r.horizons) {
        out << h.h << ',' << io::format_double(h.rmse) << ',' << io::format_double(h.rmse_over_sigma0) << '\n';
    }
}

void write_trace_csv(std::ostream& out, const ForecastReport& r) {
    out << "h,month,error\n";
    for (const auto& h : r.horizons) {
        for (const auto& x : h.records) out << h.h << ',' << x.target.to_string() << ',' << io::format_double(x.error) << '\n';
    }
}

void write_ratio_csv(std::ostream& out, const std::vector<HorizonRatio>& ratios) {
    out << "h,ratio\n";
    for (const auto& r : ratios) out << r.h << ',' << io::format_double(r.ratio) << '\n';
}

}  // namespace cpitk::backtest
