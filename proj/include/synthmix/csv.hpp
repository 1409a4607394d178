#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace synthmix::csv {

using Row = std::vector<std::string>;

/// RFC 4180: quoted fields, doubled quotes, embedded separators and newlines.
std::vector<Row> parse(std::string_view data);

std::string escape(std::string_view field);
std::string format_row(const Row& row);

} // namespace synthmix::csv
