#include "yulefx/csv.hpp"

#include <algorithm>
#include <charconv>

#include <fmt/format.h>

#include "yulefx/errors.hpp"

namespace yulefx::csv {

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

bool next_record(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty() || line.front() == '#') {
      continue;
    }
    return true;
  }
  return false;
}

double to_double(std::string_view field) {
  double value = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ArgumentError(fmt::format("not a number: '{}'", field));
  }
  return value;
}

long long to_int(std::string_view field) {
  long long value = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ArgumentError(fmt::format("not an integer: '{}'", field));
  }
  return value;
}

std::size_t column(const std::vector<std::string>& header, std::string_view name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw ArgumentError(fmt::format("missing CSV column '{}'", name));
  }
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace yulefx::csv
