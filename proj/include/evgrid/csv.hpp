#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace evgrid::csv {

/// Comma-delimited table with a mandatory header row. Blank lines and lines
/// starting with '#' are skipped; fields are whitespace-trimmed.
class Table {
public:
    struct Row {
        std::size_t line = 0;
        std::vector<std::string> fields;
    };

    static Table parse(std::istream& in, const std::string& source);
    static Table read_file(const std::filesystem::path& path);

    const std::string& source() const noexcept { return source_; }
    const std::vector<std::string>& header() const noexcept { return header_; }
    const std::vector<Row>& rows() const noexcept { return rows_; }

    std::optional<std::size_t> find_column(std::string_view name) const;
    /// Throws ParseError naming the missing column.
    std::size_t column(std::string_view name) const;

    std::string where(const Row& row) const;

    const std::string& field(const Row& row, std::size_t col) const;
    double number(const Row& row, std::size_t col) const;
    int integer(const Row& row, std::size_t col) const;
    /// Empty cells yield std::nullopt.
    std::optional<double> optional_number(const Row& row, std::size_t col) const;
    std::optional<int> optional_integer(const Row& row, std::size_t col) const;

private:
    std::string source_;
    std::vector<std::string> header_;
    std::vector<Row> rows_;
};

std::vector<std::string> split(std::string_view line, char delim);
std::string_view trim(std::string_view s);

double parse_double(std::string_view text, const std::string& where);
int parse_int(std::string_view text, const std::string& where);

/// Shortest representation that parses back to the same double.
std::string format_double(double value);

}  // namespace evgrid::csv
