#pragma once

// Minimal CSV helpers for the flat numeric files this project exchanges.
// Fields never contain separators or quotes, so no quoting rules are needed.

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace yulefx::csv {

std::vector<std::string> split(std::string_view line, char sep = ',');

/// Reads the next non-comment line (lines starting with '#' are skipped). Strips a trailing '\r'.
bool next_record(std::istream& in, std::string& line);

double to_double(std::string_view field);
long long to_int(std::string_view field);

/// Index of `name` in the header, or throws ArgumentError.
std::size_t column(const std::vector<std::string>& header, std::string_view name);

}  // namespace yulefx::csv
