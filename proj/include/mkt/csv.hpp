#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>

#include "mkt/series.hpp"

namespace mkt {

/// Header "x1,...,xd" then one row per time step.
void write_csv(std::ostream& out, const MultiSeries& series);

/// Parses the format written by write_csv. The header is optional; blank
/// lines are skipped. Throws ParseError (with line number) on malformed
/// input and SchemaError when the column count differs from expected_dim.
MultiSeries read_csv(std::istream& in, std::optional<std::size_t> expected_dim = std::nullopt);

MultiSeries read_csv_file(const std::string& path, std::optional<std::size_t> expected_dim = std::nullopt);
void write_csv_file(const std::string& path, const MultiSeries& series);

} // namespace mkt
