#include "ppe/harness/csv.hpp"

#include <charconv>
#include <stdexcept>
#include <system_error>

namespace ppe {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::invalid_argument("not a number: '" + std::string(s) + "'");
    return v;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    if (fields.size() != columns_) throw std::invalid_argument("csv row has wrong field count");
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i].find_first_of(",\n\r") != std::string::npos)
            throw std::invalid_argument("csv field contains a separator");
        if (i) text_ += ',';
        text_ += fields[i];
    }
    text_ += '\n';
}

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw std::invalid_argument("csv has no column '" + std::string(name) + "'");
}

namespace {

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.emplace_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

template <class F>
void for_each_line(std::string_view text, F&& f) {
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        f(line);
        start = end + 1;
    }
}

}  // namespace

CsvTable parse_csv(std::string_view text) {
    CsvTable t;
    bool first = true;
    for_each_line(text, [&](std::string_view line) {
        if (line.empty()) return;
        auto fields = split_line(line);
        if (first) {
            t.header = std::move(fields);
            first = false;
            return;
        }
        if (fields.size() != t.header.size()) throw std::invalid_argument("ragged csv row");
        t.rows.push_back(std::move(fields));
    });
    if (first) throw std::invalid_argument("empty csv document");
    return t;
}

std::string strip_columns(std::string_view text,
                          const std::function<bool(std::string_view)>& drop) {
    const CsvTable t = parse_csv(text);
    std::vector<std::size_t> keep;
    std::vector<std::string> header;
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (drop(t.header[i])) continue;
        keep.push_back(i);
        header.push_back(t.header[i]);
    }
    CsvWriter w(header);
    for (const auto& r : t.rows) {
        std::vector<std::string> fields;
        for (std::size_t i : keep) fields.push_back(r[i]);
        w.row(fields);
    }
    return w.str();
}

bool is_time_column(std::string_view name) { return name.find("time") != std::string_view::npos; }

}  // namespace ppe
