#pragma once

#include <string>
#include <vector>

namespace pcr {

// Comma split without quoting; trailing '\r' is dropped and cells are trimmed.
std::vector<std::string> split_csv_line(const std::string& line);

// Full-string decimal parse; throws DataError on garbage or non-finite values.
double parse_double(const std::string& cell);

// Shortest text that round-trips the double exactly.
std::string format_double(double v);

}  // namespace pcr
