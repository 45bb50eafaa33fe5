#include "evgrid/csv.hpp"

#include <charconv>
#include <fstream>
#include <system_error>

#include "evgrid/error.hpp"

namespace evgrid::csv {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view line, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delim, start);
        out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_double(std::string_view text, const std::string& where) {
    text = trim(text);
    double value = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || text.empty()) {
        throw ParseError(where, "expected a number, got '" + std::string(text) + "'");
    }
    return value;
}

int parse_int(std::string_view text, const std::string& where) {
    text = trim(text);
    int value = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || text.empty()) {
        throw ParseError(where, "expected an integer, got '" + std::string(text) + "'");
    }
    return value;
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) return "nan";
    return std::string(buf, ptr);
}

Table Table::parse(std::istream& in, const std::string& source) {
    Table table;
    table.source_ = source;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        auto fields = split(body, ',');
        if (!have_header) {
            table.header_ = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() > table.header_.size()) {
            throw ParseError(source + ":" + std::to_string(line_no),
                             "expected at most " + std::to_string(table.header_.size()) + " fields, got " +
                                 std::to_string(fields.size()));
        }
        fields.resize(table.header_.size());
        table.rows_.push_back(Row{line_no, std::move(fields)});
    }
    if (!have_header) throw ParseError(source, "missing header row");
    return table;
}

Table Table::read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), "cannot open file");
    return parse(in, path.string());
}

std::optional<std::size_t> Table::find_column(std::string_view name) const {
    for (std::size_t i = 0; i < header_.size(); ++i) {
        if (header_[i] == name) return i;
    }
    return std::nullopt;
}

std::size_t Table::column(std::string_view name) const {
    if (auto c = find_column(name)) return *c;
    throw ParseError(source_, "missing column '" + std::string(name) + "'");
}

std::string Table::where(const Row& row) const { return source_ + ":" + std::to_string(row.line); }

const std::string& Table::field(const Row& row, std::size_t col) const { return row.fields.at(col); }

double Table::number(const Row& row, std::size_t col) const {
    const auto& f = field(row, col);
    if (f.empty()) throw ParseError(where(row), "missing value for '" + header_[col] + "'");
    return parse_double(f, where(row));
}

int Table::integer(const Row& row, std::size_t col) const {
    const auto& f = field(row, col);
    if (f.empty()) throw ParseError(where(row), "missing value for '" + header_[col] + "'");
    return parse_int(f, where(row));
}

std::optional<double> Table::optional_number(const Row& row, std::size_t col) const {
    if (field(row, col).empty()) return std::nullopt;
    return number(row, col);
}

std::optional<int> Table::optional_integer(const Row& row, std::size_t col) const {
    if (field(row, col).empty()) return std::nullopt;
    return integer(row, col);
}

}  // namespace evgrid::csv
