#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cpitk/calendar.hpp"
#include "cpitk/sarimax.hpp"
#include "cpitk/timeseries.hpp"

namespace cpitk::backtest {

enum class Scheme { Expanding, Rolling };

[[nodiscard]] std::string scheme_name(Scheme s);
[[nodiscard]] Scheme scheme_from_name(const std::string& name);

struct BacktestProtocol {
    Scheme scheme = Scheme::Expanding;
    YearMonth training_start{2002, 1};
    MonthRange forecast_span{YearMonth{2009, 1}, YearMonth{2016, 11}};
    std::vector<int> horizons{1, 2, 3, 6, 9, 12};
    /// Rolling windows hold (rolling_base - h) months.
    int rolling_base = 49;
    /// Parameters are re-estimated every `refit_stride` origins and kept
    /// fixed (data still updated) in between.
    int refit_stride = 1;

    void validate() const;
    /// Months available to a forecast of `target` at horizon h.
    [[nodiscard]] MonthRange training_window(YearMonth target, int h) const;
};

/// Everything a forecaster may read.
struct Dataset {
    MonthlySeries target;
    std::optional<Panel> covariates;
    std::optional<MonthlySeries> adjusted;  // official seasonally adjusted target, if any
};

struct ReadRecord {
    YearMonth origin;
    YearMonth first;
    YearMonth last;
};

/// Thread-safe log of every data read made through a DataAccessor.
class ReadLog {
public:
    void record(const ReadRecord& r);
    [[nodiscard]] std::vector<ReadRecord> records() const;
    /// Reads that reached past their origin.
    [[nodiscard]] std::size_t violations() const;

private:
    mutable std::mutex mutex_;
    std::vector<ReadRecord> records_;
};

/// Read access bounded by a forecast origin. Reads past the origin are
/// logged and rejected with DataError.
class DataAccessor {
public:
    DataAccessor(const Dataset& data, YearMonth origin, ReadLog* log = nullptr);

    [[nodiscard]] YearMonth origin() const noexcept { return origin_; }
    [[nodiscard]] MonthlySeries target(YearMonth first, YearMonth last) const;
    [[nodiscard]] bool has_covariates() const noexcept { return data_->covariates.has_value(); }
    [[nodiscard]] Panel covariates(YearMonth first, YearMonth last) const;
    [[nodiscard]] bool has_adjusted() const noexcept { return data_->adjusted.has_value(); }
    [[nodiscard]] MonthlySeries adjusted(YearMonth first, YearMonth last) const;

private:
    const Dataset* data_;
    YearMonth origin_;
    ReadLog* log_;

    void check(YearMonth first, YearMonth last) const;
};

/// A model estimated on one window; forecasts may use a later window with
/// the same parameters.
class TrainedModel {
public:
    virtual ~TrainedModel() = default;
    /// Point forecasts for origin + h, h in `horizons`, using data in `window`.
    [[nodiscard]] virtual std::vector<double> forecast(const DataAccessor& data, MonthRange window,
                                                       const std::vector<int>& horizons) const = 0;
};

class Forecaster {
public:
    virtual ~Forecaster() = default;
    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual std::unique_ptr<TrainedModel> train(const DataAccessor& data, MonthRange window) const = 0;
};

/// S-ARIMAX engine: regressors are regenerated over every window from their
/// shapes and the lunar table.
class SarimaxForecaster final : public Forecaster {
public:
    SarimaxForecaster(sarimax::SarimaSpec spec, calendar::LunarTable table, sarimax::FitOptions options = {});
    [[nodiscard]] std::string name() const override { return "sarimax"; }
    [[nodiscard]] std::unique_ptr<TrainedModel> train(const DataAccessor& data, MonthRange window) const override;

private:
    sarimax::SarimaSpec spec_;
    calendar::LunarTable table_;
    sarimax::FitOptions options_;
};

struct ForecastRecord {
    YearMonth origin;
    YearMonth target;
    double forecast = 0.0;
    double actual = 0.0;
    double error = 0.0;  // forecast - actual
};

struct HorizonReport {
    int h = 1;
    std::vector<ForecastRecord> records;  // ordered by target month
    double rmse = 0.0;
    double rmse_over_sigma0 = 0.0;
};

struct ForecastReport {
    std::string engine;
    Scheme scheme = Scheme::Expanding;
    MonthRange span;
    double sigma0 = 0.0;
    std::vector<HorizonReport> horizons;

    [[nodiscard]] const HorizonReport& at(int h) const;
};

struct RunOptions {
    int threads = 1;
    ReadLog* log = nullptr;
    /// Called after each training group with (done, total).
    std::function<void(std::size_t, std::size_t)> progress;
};

/// Trains at each origin per the protocol and scores the forecasts against
/// the realized target. `sigma0` scales the reported RMSE (NaN leaves it out).
[[nodiscard]] ForecastReport run(const Dataset& data, const Forecaster& forecaster, const BacktestProtocol& protocol,
                                 double sigma0, const RunOptions& options = {});

struct HorizonRatio {
    int h = 1;
    double ratio = 0.0;
};

/// Per-horizon RMSE(a) / RMSE(b).
[[nodiscard]] std::vector<HorizonRatio> compare(const ForecastReport& a, const ForecastReport& b);

/// `origin,forecast,actual,error`
void write_horizon_csv(std::ostream& out, const HorizonReport& r);
/// `h,rmse,rmse_over_sigma0`
void write_summary_csv(std::ostream& out, const ForecastReport& r);
/// `h,month,error` error traces for plotting.
void write_trace_csv(std::ostream& out, const ForecastReport& r);
/// `h,ratio`
void write_ratio_csv(std::ostream& out, const std::vector<HorizonRatio>& ratios);

}  // namespace cpitk::backtest
