#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Minimal RFC 4180 CSV: comma separated, double-quote escaping, LF or CRLF
// line endings on input, LF on output.
namespace kgdiv::csv {

using Row = std::vector<std::string>;

struct Table {
    Row header;
    std::vector<Row> rows;
    std::vector<std::size_t> line_numbers; // 1-based source line of each row

    std::optional<std::size_t> find_column(std::string_view name) const;
    // Throws DataError listing the missing column.
    std::size_t column(std::string_view name) const;
    void require_columns(const std::vector<std::string>& names, std::string_view what) const;
};

std::vector<Row> parse_rows(std::string_view text);

// First row is the header; every later row must have the header's width.
Table parse_table(std::string_view text, std::string_view what = "csv");

std::string format_row(const Row& row);
std::string format_table(const Row& header, const std::vector<Row>& rows);

std::string read_file(const std::filesystem::path& path);
Table read_table(const std::filesystem::path& path);

// Writes to a sibling temp file then renames, so readers never see a
// half-written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

} // namespace kgdiv::csv
