#include "cpitk/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cpitk/error.hpp"

namespace cpitk::io {

namespace {

std::string trim(std::string s) {
    const auto ws = " \t\r\n\"";
    const auto a = s.find_first_not_of(ws);
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(ws);
    return s.substr(a, b - a + 1);
}

double parse_cell(const std::string& cell, const std::string& where) {
    if (cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan") {
        return MonthlySeries::missing_value();
    }
    double v = 0.0;
    const auto* first = cell.data();
    const auto* last = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
        throw DataError(where + ": cannot parse number '" + cell + "'");
    }
    return v;
}

struct RawTable {
    std::vector<std::string> header;
    std::vector<YearMonth> dates;
    std::vector<std::vector<double>> rows;
};

RawTable parse_table(std::istream& in, const std::string& source) {
    RawTable t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        auto cells = split_csv_line(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            if (t.header.size() < 2 || t.header[0] != "date") {
                throw DataError(source + ":" + std::to_string(lineno) +
                                ": header must start with 'date' followed by at least one column");
            }
            continue;
        }
        // A trailing empty field is a missing value, so pad short rows only by one.
        if (cells.size() + 1 == t.header.size()) cells.emplace_back();
        if (cells.size() != t.header.size()) {
            throw DataError(source + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(t.header.size()) + " columns, found " + std::to_string(cells.size()));
        }
        const std::string where = source + ":" + std::to_string(lineno);
        YearMonth date;
        try {
            date = YearMonth::parse(cells[0]);
        } catch (const DataError& e) {
            throw DataError(where + ": " + e.what());
        }
        if (!t.dates.empty() && date != t.dates.back() + 1) {
            throw DataError(where + ": non-contiguous date " + date.to_string() + " after " +
                            t.dates.back().to_string());
        }
        std::vector<double> row;
        row.reserve(cells.size() - 1);
        for (std::size_t j = 1; j < cells.size(); ++j) {
            row.push_back(parse_cell(cells[j], where + " column '" + t.header[j] + "'"));
        }
        t.dates.push_back(date);
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw DataError(source + ": empty file");
    if (t.rows.empty()) throw DataError(source + ": no data rows");
    return t;
}

std::ifstream open(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return in;
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

MonthlySeries parse_series_csv(std::istream& in, const std::string& source) {
    const auto t = parse_table(in, source);
    if (t.header.size() != 2) {
        throw DataError(source + ": series file must have exactly two columns (date,value)");
    }
    std::vector<double> v;
    v.reserve(t.rows.size());
    for (const auto& r : t.rows) v.push_back(r[0]);
    return {t.dates.front(), std::move(v)};
}

MonthlySeries read_series_csv(const std::string& path) {
    auto in = open(path);
    return parse_series_csv(in, path);
}

Panel parse_panel_csv(std::istream& in, const std::string& source) {
    const auto t = parse_table(in, source);
    Panel p;
    p.start = t.dates.front();
    p.names.assign(t.header.begin() + 1, t.header.end());
    p.data.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(p.names.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        for (std::size_t j = 0; j < p.names.size(); ++j) {
            p.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t.rows[i][j];
        }
    }
    return p;
}

Panel read_panel_csv(const std::string& path) {
    auto in = open(path);
    return parse_panel_csv(in, path);
}

std::string format_double(double v) {
    if (std::isnan(v)) return {};
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

void write_series_csv(std::ostream& out, const MonthlySeries& s, const std::string& value_name) {
    out << "date," << value_name << '\n';
    for (std::size_t i = 0; i < s.size(); ++i) {
        out << s.month_at(i).to_string() << ',' << format_double(s[i]) << '\n';
    }
}

void write_panel_csv(std::ostream& out, const Panel& p) {
    out << "date";
    for (const auto& n : p.names) out << ',' << n;
    out << '\n';
    for (Eigen::Index i = 0; i < p.data.rows(); ++i) {
        out << (p.start + static_cast<int>(i)).to_string();
        for (Eigen::Index j = 0; j < p.data.cols(); ++j) out << ',' << format_double(p.data(i, j));
        out << '\n';
    }
}

}  // namespace cpitk::io
