#include "cpitk/calendar.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cpitk/error.hpp"
#include "cpitk/io.hpp"

namespace cpitk::calendar {

long days_from_civil(int year, int month, int day) noexcept {
    // Howard Hinnant's algorithm.
    const int y = year - (month <= 2 ? 1 : 0);
    const long era = (y >= 0 ? y : y - 399) / 400;
    const long yoe = y - era * 400;
    const long doy = (153L * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1;
    const long doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

namespace {

// First day of the lunar year, 1990-2050.
constexpr int kFirstYear = 1990;
constexpr std::array<std::array<int, 2>, 61> kSpringFestival{{
    {1, 27}, {2, 15}, {2, 4},  {1, 23}, {2, 10}, {1, 31}, {2, 19}, {2, 7},  {1, 28}, {2, 16},  // 1990
    {2, 5},  {1, 24}, {2, 12}, {2, 1},  {1, 22}, {2, 9},  {1, 29}, {2, 18}, {2, 7},  {1, 26},  // 2000
    {2, 14}, {2, 3},  {1, 23}, {2, 10}, {1, 31}, {2, 19}, {2, 8},  {1, 28}, {2, 16}, {2, 5},   // 2010
    {1, 25}, {2, 12}, {2, 1},  {1, 22}, {2, 10}, {1, 29}, {2, 17}, {2, 6},  {1, 26}, {2, 13},  // 2020
    {2, 3},  {1, 23}, {2, 11}, {1, 31}, {2, 19}, {2, 8},  {1, 28}, {2, 15}, {2, 4},  {1, 24},  // 2030
    {2, 12}, {2, 1},  {1, 22}, {2, 10}, {1, 30}, {2, 17}, {2, 6},  {1, 26}, {2, 14}, {2, 2},   // 2040
    {1, 23},                                                                                  // 2050
}};

}  // namespace

const LunarTable& LunarTable::embedded() {
    static const LunarTable table = [] {
        LunarTable t;
        for (std::size_t i = 0; i < kSpringFestival.size(); ++i) {
            t.set(kFirstYear + static_cast<int>(i), kSpringFestival[i][0], kSpringFestival[i][1]);
        }
        return t;
    }();
    return table;
}

void LunarTable::set(int year, int month, int day) {
    const bool ok = (month == 1 && day >= 21 && day <= 31) || (month == 2 && day >= 1 && day <= 20);
    if (!ok) {
        throw DataError("Spring Festival date " + std::to_string(year) + "-" + std::to_string(month) + "-" +
                        std::to_string(day) + " outside January 21 .. February 20");
    }
    dates_[year] = SolarDate{year, month, day};
}

std::optional<SolarDate> LunarTable::find(int year) const {
    const auto it = dates_.find(year);
    if (it == dates_.end()) return std::nullopt;
    return it->second;
}

SolarDate LunarTable::at(int year) const {
    const auto d = find(year);
    if (!d) throw DataError("lunar table has no Spring Festival date for " + std::to_string(year));
    return *d;
}

LunarTable LunarTable::merged_with(const LunarTable& overrides) const {
    LunarTable out = *this;
    for (const auto& [y, d] : overrides.dates_) out.dates_[y] = d;
    return out;
}

LunarTable LunarTable::read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open lunar table " + path);
    LunarTable t;
    std::string line;
    int lineno = 0;
    bool header = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto cells = io::split_csv_line(line);
        if (header) {
            header = false;
            if (cells.size() != 3 || cells[0] != "year" || cells[1] != "month" || cells[2] != "day") {
                throw DataError(path + ":" + std::to_string(lineno) + ": expected header year,month,day");
            }
            continue;
        }
        if (cells.size() != 3) {
            throw DataError(path + ":" + std::to_string(lineno) + ": expected 3 columns");
        }
        try {
            t.set(std::stoi(cells[0]), std::stoi(cells[1]), std::stoi(cells[2]));
        } catch (const std::logic_error&) {
            throw DataError(path + ":" + std::to_string(lineno) + ": malformed row");
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return t;
}

std::string HolidayWindow::to_string() const {
    return "(" + std::to_string(before) + "," + std::to_string(during) + "," + std::to_string(after) + ")";
}

std::vector<HolidayWindow> window_grid() {
    std::vector<HolidayWindow> out;
    for (int b = 0; b <= 24; b += 4) {
        for (int d = 0; d <= 8; d += 4) {
            for (int a = 0; a <= 24; a += 4) out.push_back({b, d, a});
        }
    }
    return out;
}

std::string kind_name(RegressorKind kind) {
    switch (kind) {
        case RegressorKind::SFBefore: return "SF_before";
        case RegressorKind::SFDuring: return "SF_during";
        case RegressorKind::SFAfter: return "SF_after";
        case RegressorKind::AOPulse: return "AO";
        case RegressorKind::LSStep: return "LS";
        case RegressorKind::TCDecay: return "TC";
        case RegressorKind::IOPulse: return "IO";
    }
    return "?";
}

RegressorKind kind_from_name(const std::string& name) {
    for (auto k : {RegressorKind::SFBefore, RegressorKind::SFDuring, RegressorKind::SFAfter, RegressorKind::AOPulse,
                   RegressorKind::LSStep, RegressorKind::TCDecay, RegressorKind::IOPulse}) {
        if (kind_name(k) == name) return k;
    }
    throw DataError("unknown regressor kind '" + name + "'");
}

double RegressorColumn::at(YearMonth m) const {
    const int i = m - start;
    if (i < 0 || i >= static_cast<int>(values.size())) {
        throw DataError("regressor " + name() + " does not cover " + m.to_string());
    }
    return values[static_cast<std::size_t>(i)];
}

std::string RegressorColumn::name() const {
    if (is_sf()) return kind_name(kind) + window.to_string();
    return kind_name(kind) + "_" + anchor.to_string();
}

namespace {

struct DaySpan {
    long first;
    long last;  // inclusive; empty when last < first
};

long overlap(DaySpan a, DaySpan b) { return std::max(0L, std::min(a.last, b.last) - std::max(a.first, b.first) + 1); }

std::array<DaySpan, 3> sub_periods(SolarDate sf, HolidayWindow w) {
    const long d0 = days_from_civil(sf.year, sf.month, sf.day);
    return {DaySpan{d0 - w.before, d0 - 1}, DaySpan{d0, d0 + w.during - 1},
            DaySpan{d0 + w.during, d0 + w.during + w.after - 1}};
}

// Day share of month m inside sub-period i, summed over the Spring Festivals
// whose windows can touch m.
double sf_value(YearMonth m, int which, const LunarTable& table, HolidayWindow w) {
    const int len = w.lengths()[static_cast<std::size_t>(which)];
    if (len == 0) return 0.0;
    const DaySpan month{days_from_civil(m.year, m.month, 1), days_from_civil(m.year, m.month, m.days_in_month())};
    long days = 0;
    (void)table.at(m.year);
    for (int y = m.year; y <= m.year + 1; ++y) {
        const auto sf = table.find(y);
        if (!sf) {
            // Next year's "before" window reaches back into December only for long windows.
            if (m.month == 12 && which == 0 && w.before > 20) {
                throw DataError("lunar table has no Spring Festival date for " + std::to_string(y));
            }
            continue;
        }
        days += overlap(month, sub_periods(*sf, w)[static_cast<std::size_t>(which)]);
    }
    return static_cast<double>(days) / static_cast<double>(len);
}

double shape_value(RegressorKind kind, YearMonth anchor, double delta, YearMonth m) {
    const int j = m - anchor;
    switch (kind) {
        case RegressorKind::AOPulse:
        case RegressorKind::IOPulse: return j == 0 ? 1.0 : 0.0;
        case RegressorKind::LSStep: return j >= 0 ? 1.0 : 0.0;
        case RegressorKind::TCDecay: return j >= 0 ? std::pow(delta, j) : 0.0;
        default: throw std::logic_error("shape_value called with SF kind");
    }
}

RegressorColumn make_sf(RegressorKind kind, int which, MonthRange range, const LunarTable& table, HolidayWindow w) {
    RegressorColumn c;
    c.kind = kind;
    c.window = w;
    c.start = range.first;
    c.values.resize(static_cast<std::size_t>(range.size()));
    for (int i = 0; i < range.size(); ++i) {
        c.values[static_cast<std::size_t>(i)] = sf_value(range.first + i, which, table, w);
    }
    return c;
}

}  // namespace

SfColumns sf_regressors(MonthRange range, const LunarTable& table, HolidayWindow w) {
    if (w.before < 0 || w.during < 0 || w.after < 0) throw DataError("negative holiday window length");
    return {make_sf(RegressorKind::SFBefore, 0, range, table, w), make_sf(RegressorKind::SFDuring, 1, range, table, w),
            make_sf(RegressorKind::SFAfter, 2, range, table, w)};
}

std::vector<RegressorColumn> sf_active_columns(MonthRange range, const LunarTable& table, HolidayWindow w) {
    std::vector<RegressorColumn> out;
    if (w.nonzero() == 0) return out;
    auto cols = sf_regressors(range, table, w);
    if (w.before > 0) out.push_back(std::move(cols.before));
    if (w.during > 0) out.push_back(std::move(cols.during));
    if (w.after > 0) out.push_back(std::move(cols.after));
    return out;
}

RegressorColumn intervention_column(MonthRange range, RegressorKind kind, YearMonth anchor, double delta) {
    if (!range.contains(anchor)) {
        throw DataError("intervention anchor " + anchor.to_string() + " outside " + range.first.to_string() + ".." +
                        range.last.to_string());
    }
    if (kind == RegressorKind::TCDecay && !(delta > 0.0 && delta < 1.0)) {
        throw DataError("TC decay must lie in (0,1)");
    }
    RegressorColumn c;
    c.kind = kind;
    c.anchor = anchor;
    c.delta = delta;
    return regenerate(c, range, LunarTable{});
}

RegressorColumn regenerate(const RegressorColumn& proto, MonthRange range, const LunarTable& table) {
    if (proto.is_sf()) {
        const int which = proto.kind == RegressorKind::SFBefore ? 0 : proto.kind == RegressorKind::SFDuring ? 1 : 2;
        return make_sf(proto.kind, which, range, table, proto.window);
    }
    RegressorColumn c = proto;
    c.start = range.first;
    c.values.resize(static_cast<std::size_t>(range.size()));
    for (int i = 0; i < range.size(); ++i) {
        c.values[static_cast<std::size_t>(i)] = shape_value(proto.kind, proto.anchor, proto.delta, range.first + i);
    }
    return c;
}

MonthlySeries sf_relative_percentage(const MonthlySeries& raw, const MonthlySeries& sf_effect) {
    if (raw.start() != sf_effect.start() || raw.size() != sf_effect.size()) {
        throw DataError("sf_relative_percentage: series are not aligned");
    }
    if (raw.size() < 13) throw DataError("sf_relative_percentage: need at least 13 months");
    std::vector<double> out(raw.size() - 12, MonthlySeries::missing_value());
    for (std::size_t t = 12; t < raw.size(); ++t) {
        const YearMonth m = raw.month_at(t);
        if (m.month != 1 && m.month != 2) continue;
        const double r = 100.0 * (raw[t] / raw[t - 12] - 1.0);
        const double adj_now = raw[t] - sf_effect[t];
        const double adj_prev = raw[t - 12] - sf_effect[t - 12];
        const double r_adj = 100.0 * (adj_now / adj_prev - 1.0);
        if (std::isnan(r) || std::isnan(r_adj)) continue;
        if (r == 0.0) throw DataError("sf_relative_percentage: zero annual rate at " + m.to_string());
        out[t - 12] = std::abs(r - r_adj) / std::abs(r);
    }
    return {raw.start() + 12, std::move(out)};
}

}  // namespace cpitk::calendar
