#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cpitk/timeseries.hpp"

namespace cpitk::io {

/// Reads `date,value` (date = YYYY-MM, empty field = missing). Lines starting
/// with '#' are skipped. Dates must be contiguous.
[[nodiscard]] MonthlySeries read_series_csv(const std::string& path);
[[nodiscard]] MonthlySeries parse_series_csv(std::istream& in, const std::string& source = "<stream>");

/// Reads a `date,<name1>,<name2>,...` matrix.
[[nodiscard]] Panel read_panel_csv(const std::string& path);
[[nodiscard]] Panel parse_panel_csv(std::istream& in, const std::string& source = "<stream>");

void write_series_csv(std::ostream& out, const MonthlySeries& s, const std::string& value_name = "value");
void write_panel_csv(std::ostream& out, const Panel& p);

/// Splits one CSV line on commas; no quoting support beyond stripping
/// surrounding double quotes and whitespace.
[[nodiscard]] std::vector<std::string> split_csv_line(const std::string& line);

/// Shortest round-trip text for a double; empty string for NaN.
[[nodiscard]] std::string format_double(double v);

}  // namespace cpitk::io
