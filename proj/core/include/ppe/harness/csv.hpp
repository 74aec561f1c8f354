#pragma once

#include <functional>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace ppe {

/// Shortest round-trip decimal representation, '.' separator, locale-free.
std::string format_double(double v);

/// Strict parse of a format_double value. Throws std::invalid_argument.
double parse_double(std::string_view s);

/// Minimal CSV writer: header row, '\n' line endings, no quoting (fields
/// must not contain commas or newlines).
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);
    void row(const std::vector<std::string>& fields);
    const std::string& str() const noexcept { return text_; }

private:
    std::size_t columns_;
    std::string text_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index; throws std::invalid_argument when absent.
    std::size_t column(std::string_view name) const;
};

/// Throws std::invalid_argument on ragged rows or an empty document.
CsvTable parse_csv(std::string_view text);

/// Re-emits `text` without the columns whose header matches `drop`.
std::string strip_columns(std::string_view text,
                          const std::function<bool(std::string_view)>& drop);

/// True for wall-clock columns: names containing "time".
bool is_time_column(std::string_view name);

}  // namespace ppe
