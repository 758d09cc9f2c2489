#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cpitk {

/// A calendar month. Arithmetic is in whole months.
struct YearMonth {
    int year = 2000;
    int month = 1;  // 1..12

    constexpr YearMonth() = default;
    YearMonth(int y, int m);

    /// Months since year 0, January.
    [[nodiscard]] constexpr int ordinal() const noexcept { return year * 12 + (month - 1); }
    [[nodiscard]] static YearMonth from_ordinal(int ordinal);

    /// Parses `YYYY-MM`.
    [[nodiscard]] static YearMonth parse(std::string_view text);
    [[nodiscard]] std::string to_string() const;

    [[nodiscard]] int days_in_month() const noexcept;

    YearMonth operator+(int months) const { return from_ordinal(ordinal() + months); }
    YearMonth operator-(int months) const { return from_ordinal(ordinal() - months); }
    int operator-(const YearMonth& other) const noexcept { return ordinal() - other.ordinal(); }
    YearMonth& operator+=(int months) { return *this = *this + months; }
    YearMonth& operator++() { return *this = *this + 1; }

    friend constexpr bool operator==(const YearMonth& a, const YearMonth& b) noexcept {
        return a.ordinal() == b.ordinal();
    }
    friend constexpr std::strong_ordering operator<=>(const YearMonth& a, const YearMonth& b) noexcept {
        return a.ordinal() <=> b.ordinal();
    }
};

/// Inclusive span of months.
struct MonthRange {
    YearMonth first;
    YearMonth last;

    [[nodiscard]] int size() const noexcept { return last - first + 1; }
    [[nodiscard]] bool contains(YearMonth m) const noexcept { return first <= m && m <= last; }
};

/// Contiguous monthly observations. Missing entries are stored as quiet NaN;
/// every non-missing value is finite.
class MonthlySeries {
public:
    MonthlySeries() = default;
    MonthlySeries(YearMonth start, std::vector<double> values);

    [[nodiscard]] static double missing_value() noexcept;

    [[nodiscard]] YearMonth start() const noexcept { return start_; }
    [[nodiscard]] YearMonth end() const { return start_ + (static_cast<int>(values_.size()) - 1); }
    [[nodiscard]] MonthRange range() const { return {start(), end()}; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] bool empty() const noexcept { return values_.empty(); }

    [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }
    [[nodiscard]] double at(YearMonth m) const;
    [[nodiscard]] bool is_missing(std::size_t i) const;
    [[nodiscard]] bool has_missing() const;
    [[nodiscard]] std::size_t count_observed() const;

    [[nodiscard]] YearMonth month_at(std::size_t i) const { return start_ + static_cast<int>(i); }
    /// Index of month `m`, or nullopt when outside the series.
    [[nodiscard]] std::optional<std::size_t> index_of(YearMonth m) const;

    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] Eigen::Map<const Eigen::VectorXd> as_vector() const {
        return {values_.data(), static_cast<Eigen::Index>(values_.size())};
    }

    /// Sub-series over `[first, last]`, both inside the series.
    [[nodiscard]] MonthlySeries slice(YearMonth first, YearMonth last) const;

private:
    YearMonth start_{};
    std::vector<double> values_;
};

/// Columns aligned on a common monthly index; NaN marks missing cells.
struct Panel {
    YearMonth start{};
    std::vector<std::string> names;
    Eigen::MatrixXd data;  // rows = months, cols = names

    [[nodiscard]] YearMonth end() const { return start + (static_cast<int>(data.rows()) - 1); }
    [[nodiscard]] MonthlySeries column(std::size_t j) const;
    [[nodiscard]] std::optional<std::size_t> find(std::string_view name) const;
    [[nodiscard]] Panel slice(YearMonth first, YearMonth last) const;
};

namespace timeseries {

/// Transformation codes 1..3 applied to covariates before factor extraction.
enum class TransformCode { Diff = 1, DiffLog = 2, Diff2Log = 3 };

[[nodiscard]] TransformCode transform_from_int(int code);

/// Applies (1-B)^d (1-B^season)^D. Refuses missing values.
[[nodiscard]] MonthlySeries difference(const MonthlySeries& s, int d, int D, int season = 12);

/// Coefficients c of (1-B)^d (1-B^season)^D = 1 - sum_i c_i B^i, c[0] unused (=0).
[[nodiscard]] std::vector<double> differencing_polynomial(int d, int D, int season = 12);

struct Correlogram {
    std::vector<double> acf;   // lags 0..max_lag, acf[0] = 1
    std::vector<double> pacf;  // lags 0..max_lag, pacf[0] = 1
    double conf_band = 0.0;    // 1.96 / sqrt(T)
};

[[nodiscard]] Correlogram acf_pacf(const MonthlySeries& s, int max_lag);

/// Sample autocorrelations with mean removal and divisor T.
[[nodiscard]] std::vector<double> sample_acf(std::span<const double> x, int max_lag);

/// Partial autocorrelations from autocorrelations (Durbin-Levinson).
[[nodiscard]] std::vector<double> pacf_from_acf(std::span<const double> acf);

struct AdfLagPolicy {
    /// nullopt selects the order by AIC over 0..floor(12 (T/100)^(1/4)).
    std::optional<int> fixed;
};

struct AdfResult {
    double statistic = 0.0;
    double p_value = 1.0;
    int lags = 0;
    int n_obs = 0;
};

/// Augmented Dickey-Fuller test with constant and linear trend.
/// p-values interpolate the tabulated Dickey-Fuller tau_tau quantiles and
/// are clamped to [0.01, 0.99].
[[nodiscard]] AdfResult adf_test(const MonthlySeries& s, AdfLagPolicy policy = {});

[[nodiscard]] int schwert_lag(std::size_t n);

/// Missing inputs propagate to missing outputs. Output starts one (codes 1,2)
/// or two (code 3) months after the input.
[[nodiscard]] MonthlySeries apply_transform(const MonthlySeries& s, TransformCode code);

struct Standardized {
    Eigen::MatrixXd z;
    Eigen::VectorXd means;
    Eigen::VectorXd sds;
};

/// Column-wise zero mean / unit sd (divisor n-1) over non-missing cells.
[[nodiscard]] Standardized standardize(const Eigen::MatrixXd& x);
[[nodiscard]] Eigen::MatrixXd unstandardize(const Standardized& s);

/// Sample standard deviation, divisor n-1, NaN entries skipped.
[[nodiscard]] double sample_sd(std::span<const double> x);

}  // namespace timeseries
}  // namespace cpitk
