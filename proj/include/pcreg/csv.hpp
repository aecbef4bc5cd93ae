#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace pcreg::csv {

using Row = std::vector<std::string>;

/// Quotes a field when it contains a comma, quote, CR or LF (RFC 4180).
std::string escape(const std::string& field);
void write_row(std::ostream& out, const Row& row);
/// Shortest decimal text that parses back to the same double.
std::string format(double value);

/// Parses a whole CSV document; quoted fields may span lines.
std::vector<Row> parse(const std::string& text);
std::vector<Row> read_file(const std::filesystem::path& path);

}  // namespace pcreg::csv
