#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cpitk/timeseries.hpp"

namespace cpitk::calendar {

/// Gregorian day number (days since 1970-01-01).
[[nodiscard]] long days_from_civil(int year, int month, int day) noexcept;

struct SolarDate {
    int year = 0;
    int month = 1;
    int day = 1;
};

/// Spring Festival (first day of the lunar year) solar dates by year.
/// Every date lies between January 21 and February 20 inclusive.
class LunarTable {
public:
    LunarTable() = default;

    /// Built-in table, 1990-2050.
    [[nodiscard]] static const LunarTable& embedded();

    /// Reads `year,month,day` rows.
    [[nodiscard]] static LunarTable read_csv(const std::string& path);

    void set(int year, int month, int day);
    [[nodiscard]] std::optional<SolarDate> find(int year) const;
    [[nodiscard]] SolarDate at(int year) const;

    /// Entries of `overrides` replace this table's entries for the same year.
    [[nodiscard]] LunarTable merged_with(const LunarTable& overrides) const;

    [[nodiscard]] const std::map<int, SolarDate>& entries() const noexcept { return dates_; }

private:
    std::map<int, SolarDate> dates_;
};

/// Lengths in days of the before / during / after sub-periods.
struct HolidayWindow {
    int before = 0;
    int during = 0;
    int after = 0;

    [[nodiscard]] std::array<int, 3> lengths() const noexcept { return {before, during, after}; }
    /// Number of non-zero lengths.
    [[nodiscard]] int nonzero() const noexcept {
        return (before > 0) + (during > 0) + (after > 0);
    }
    [[nodiscard]] std::string to_string() const;

    friend auto operator<=>(const HolidayWindow&, const HolidayWindow&) = default;
};

/// The 7 x 3 x 7 = 147 window grid: before, after in {0,4,...,24}, during in {0,4,8}.
[[nodiscard]] std::vector<HolidayWindow> window_grid();

enum class RegressorKind { SFBefore, SFDuring, SFAfter, AOPulse, LSStep, TCDecay, IOPulse };

[[nodiscard]] std::string kind_name(RegressorKind kind);
[[nodiscard]] RegressorKind kind_from_name(const std::string& name);

/// One regressor aligned to a month range. The shape parameters are kept so
/// the column can be regenerated over any other range (e.g. forecast months).
struct RegressorColumn {
    RegressorKind kind = RegressorKind::AOPulse;
    YearMonth anchor{};       // interventions only
    double delta = 0.8;       // TCDecay only
    HolidayWindow window{};   // SF kinds only
    YearMonth start{};
    std::vector<double> values;

    [[nodiscard]] bool is_sf() const noexcept {
        return kind == RegressorKind::SFBefore || kind == RegressorKind::SFDuring || kind == RegressorKind::SFAfter;
    }
    [[nodiscard]] bool is_innovation() const noexcept { return kind == RegressorKind::IOPulse; }
    [[nodiscard]] MonthRange range() const {
        return {start, start + (static_cast<int>(values.size()) - 1)};
    }
    [[nodiscard]] double at(YearMonth m) const;
    [[nodiscard]] std::string name() const;
};

struct SfColumns {
    RegressorColumn before;
    RegressorColumn during;
    RegressorColumn after;
};

/// H_it = (days of month t inside sub-period i) / tau_i, zero when tau_i = 0.
[[nodiscard]] SfColumns sf_regressors(MonthRange range, const LunarTable& table, HolidayWindow w);

/// The SF columns with non-zero window length, in before/during/after order.
[[nodiscard]] std::vector<RegressorColumn> sf_active_columns(MonthRange range, const LunarTable& table,
                                                            HolidayWindow w);

[[nodiscard]] RegressorColumn intervention_column(MonthRange range, RegressorKind kind, YearMonth anchor,
                                                  double delta = 0.8);

/// Same shape as `proto`, evaluated over `range`. Anchors may lie outside.
[[nodiscard]] RegressorColumn regenerate(const RegressorColumn& proto, MonthRange range, const LunarTable& table);

/// |R_t - R~_t| / |R_t| where R is the 12-month percent change of `raw` and
/// R~ that of raw - sf_effect. Output covers start+12..end; only January and
/// February are reported, other months are missing.
[[nodiscard]] MonthlySeries sf_relative_percentage(const MonthlySeries& raw, const MonthlySeries& sf_effect);

}  // namespace cpitk::calendar
