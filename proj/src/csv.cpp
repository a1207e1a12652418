#include "kgdiv/csv.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "kgdiv/errors.hpp"

namespace kgdiv::csv {

std::optional<std::size_t> Table::find_column(std::string_view name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
        return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
}

std::size_t Table::column(std::string_view name) const {
    if (auto c = find_column(name))
        return *c;
    throw DataError(fmt::format("missing column '{}'", name));
}

void Table::require_columns(const std::vector<std::string>& names, std::string_view what) const {
    for (const auto& n : names)
        if (!find_column(n))
            throw DataError(fmt::format("{}: missing column '{}'", what, n));
}

namespace {

std::vector<Row> parse_with_lines(std::string_view text, std::vector<std::size_t>* lines) {
    std::vector<Row> rows;
    Row row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    std::size_t row_line = 1;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        // A lone empty field means a blank line; skip it.
        if (!(row.size() == 1 && row[0].empty())) {
            rows.push_back(std::move(row));
            if (lines)
                lines->push_back(row_line);
        }
        row.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n')
                    ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
        case '"':
            if (field_started || !field.empty())
                throw DataError(fmt::format("line {}: stray quote inside unquoted field", line));
            in_quotes = true;
            field_started = true;
            break;
        case ',':
            end_field();
            break;
        case '\r':
            if (i + 1 < text.size() && text[i + 1] == '\n')
                break;
            [[fallthrough]];
        case '\n':
            end_row();
            ++line;
            row_line = line;
            break;
        default:
            field.push_back(c);
        }
    }
    if (in_quotes)
        throw DataError(fmt::format("line {}: unterminated quoted field", line));
    if (field_started || !field.empty() || !row.empty())
        end_row();
    return rows;
}

} // namespace

std::vector<Row> parse_rows(std::string_view text) {
    return parse_with_lines(text, nullptr);
}

Table parse_table(std::string_view text, std::string_view what) {
    // Tolerate a UTF-8 byte order mark from spreadsheet exports.
    if (text.starts_with("\xEF\xBB\xBF"))
        text.remove_prefix(3);
    std::vector<std::size_t> lines;
    auto rows = parse_with_lines(text, &lines);
    Table t;
    if (rows.empty())
        throw DataError(fmt::format("{}: empty file, expected a header row", what));
    t.header = std::move(rows.front());
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != t.header.size())
            throw DataError(fmt::format("{}: line {}: expected {} fields, found {}", what, lines[i],
                                        t.header.size(), rows[i].size()));
        t.rows.push_back(std::move(rows[i]));
        t.line_numbers.push_back(lines[i]);
    }
    return t;
}

std::string format_row(const Row& row) {
    std::string out;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i)
            out.push_back(',');
        const auto& f = row[i];
        bool quote = f.find_first_of(",\"\r\n") != std::string::npos;
        if (!quote) {
            out += f;
            continue;
        }
        out.push_back('"');
        for (char c : f) {
            if (c == '"')
                out.push_back('"');
            out.push_back(c);
        }
        out.push_back('"');
    }
    out.push_back('\n');
    return out;
}

std::string format_table(const Row& header, const std::vector<Row>& rows) {
    std::string out = format_row(header);
    for (const auto& r : rows)
        out += format_row(r);
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError(fmt::format("cannot open '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Table read_table(const std::filesystem::path& path) {
    return parse_table(read_file(path), path.string());
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error(fmt::format("cannot write '{}'", tmp.string()));
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw Error(fmt::format("short write to '{}'", tmp.string()));
        }
    }
    std::filesystem::rename(tmp, path);
}

} // namespace kgdiv::csv
