#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mlclean::csv {

using Row = std::vector<std::string>;

// Comma-separated reader. Fields may be wrapped in double quotes; a doubled
// quote inside a quoted field is a literal quote. Quoted fields may span lines.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    // Returns false at end of input. line() is the 1-based physical line on
    // which the returned row started.
    bool next(Row& row);
    std::size_t line() const noexcept { return row_line_; }

private:
    std::istream& in_;
    std::size_t line_ = 0;
    std::size_t row_line_ = 0;
};

std::vector<Row> parse(std::string_view text);

std::string quote(std::string_view field);
void write_row(std::ostream& out, const Row& row);

// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);
std::optional<double> parse_double(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::vector<std::string> split(std::string_view s, char sep);
std::string trim(std::string_view s);

}  // namespace mlclean::csv
