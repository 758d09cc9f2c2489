#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cpitk/backtest.hpp"
#include "cpitk/calendar.hpp"
#include "cpitk/sarimax.hpp"

namespace cpitk::selection {

using calendar::HolidayWindow;

struct OrderSpec {
    int p = 0;
    int q = 0;
    int P = 0;
    int Q = 0;

    [[nodiscard]] std::string to_string() const;
    friend auto operator<=>(const OrderSpec&, const OrderSpec&) = default;
};

/// All (p,q,P,Q) in {0..max_order}^4, lexicographic.
[[nodiscard]] std::vector<OrderSpec> order_grid(int max_order = 2);

/// Lexicographic tie-break key (p,q,P,Q,tau).
struct CellKey {
    OrderSpec order;
    HolidayWindow tau;

    friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

constexpr double kFailed = std::numeric_limits<double>::infinity();

struct ScoreTriple {
    double c_fit = kFailed;
    double bic = kFailed;
    double c_fc = kFailed;
    int r_fit = 0;
    int r_bic = 0;
    int r_fc = 0;
    int rank_sum = 0;
};

/// Sample sd of the (1-B)(1-B^12) differenced series.
[[nodiscard]] double baseline_sigma(const MonthlySeries& series);

/// sigma_a / sigma0.
[[nodiscard]] double c_fit(const sarimax::FittedModel& model, double sigma0);

/// Number of SF columns in the spec (non-zero window lengths).
[[nodiscard]] int sf_count(const sarimax::SarimaSpec& spec);

/// -2 loglik + log(n) (p+q+P+Q+|tau|). Outlier coefficients are not counted.
[[nodiscard]] double bic(const sarimax::FittedModel& model);

/// 1-step RMSE over the protocol's span divided by sigma0. Only h = 1 is
/// evaluated, with the protocol's scheme and refit stride. The RMSE divisor
/// is the number of forecasts.
[[nodiscard]] double c_fc(const MonthlySeries& series, const sarimax::SarimaSpec& spec, double sigma0,
                          const backtest::BacktestProtocol& protocol, const calendar::LunarTable& table,
                          const sarimax::FitOptions& fit_options = {});

/// Ascending ranks 1..N; ties and non-finite values are ordered by key, with
/// non-finite values last.
[[nodiscard]] std::vector<int> rank(const std::vector<double>& values, const std::vector<CellKey>& keys);

/// Raw criteria of one grid cell. Failed cells carry kFailed values.
struct CellScores {
    CellKey key;
    double c_fit = kFailed;
    double bic = kFailed;
    double c_fc = kFailed;
    std::string failure;  // empty when the fit succeeded

    [[nodiscard]] bool failed() const noexcept { return !failure.empty(); }
};

struct RankedCell {
    CellScores raw;
    ScoreTriple score;  // ranks within the cell's order
};

struct OrderResult {
    OrderSpec order;
    HolidayWindow tau_star;
    ScoreTriple within;  // tau*'s ranks among its order's windows
    ScoreTriple score;   // ranks among orders at their tau*
    bool failed = false;
    std::optional<sarimax::FittedModel> model;  // tau* model, when kept
};

struct GridResult {
    double sigma0 = 0.0;
    std::vector<RankedCell> cells;    // full table, key order
    std::vector<OrderResult> orders;  // ascending rank_sum, ties by key
    std::size_t failures = 0;
};

/// Two-step rank-sum ordering of precomputed cell scores: tau* per order by
/// the within-order rank sum, then orders ranked at their tau*.
[[nodiscard]] GridResult rank_two_step(std::vector<CellScores> cells, double sigma0);

struct GridOptions {
    /// Orders and SF columns are replaced per cell; other mean regressors and
    /// innovation pulses are kept.
    sarimax::SarimaSpec base;
    calendar::LunarTable table;
    backtest::BacktestProtocol protocol;
    sarimax::FitOptions fit;
    int threads = 1;
    bool keep_models = true;
    /// Called after each cell with (done, total).
    std::function<void(std::size_t, std::size_t)> progress;
};

/// Spec for one cell: `base` with the cell's orders and SF columns over `range`.
[[nodiscard]] sarimax::SarimaSpec cell_spec(const sarimax::SarimaSpec& base, const CellKey& key, MonthRange range,
                                            const calendar::LunarTable& table);

/// Scores every (order, window) cell, then ranks with rank_two_step.
/// Fit failures are recorded and ranked last.
[[nodiscard]] GridResult grid_search(const MonthlySeries& series, const std::vector<OrderSpec>& orders,
                                     const std::vector<HolidayWindow>& taus, double sigma0,
                                     const GridOptions& options);

/// `p,q,P,Q,tau1,tau2,tau3,c_fit,bic,c_fc,r_fit,r_bic,r_fc,rank_sum`, one row per cell.
void write_cells_csv(std::ostream& out, const GridResult& g);
/// Same columns, one row per order at tau*, in overall order.
void write_orders_csv(std::ostream& out, const GridResult& g);

struct SummaryOptions {
    std::size_t top_n = 20;
    double max_c_fit = 0.55;
    double max_bic = 220.0;
    double max_c_fc = 0.55;
};

/// JSON summary: sigma0, thresholds, top-N orders and the orders meeting all
/// three thresholds.
[[nodiscard]] std::string summary_json(const GridResult& g, const SummaryOptions& options = {});

}  // namespace cpitk::selection
