#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rodd/cube.hpp"
#include "rodd/errors.hpp"

namespace rodd {

/// Shortest round-trip decimal rendering, so exported values re-parse to the
/// identical bits and output is byte-stable across runs.
inline std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, const std::string& context) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc{} || res.ptr != end)
        throw ParseError("cannot parse '" + std::string(text) + "' as a number (" + context + ")");
    return value;
}

/// Splits one CSV line. Fields containing the delimiter, quotes, or newlines
/// are expected double-quoted with "" escaping.
inline std::vector<std::string> split_csv_line(std::string_view line, char delimiter) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current += c;
            }
        } else if (c == '"' && current.empty()) {
            quoted = true;
        } else if (c == delimiter) {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current += c;
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

inline std::string csv_escape(std::string_view field, char delimiter) {
    bool needs_quotes = false;
    for (char c : field)
        if (c == delimiter || c == '"' || c == '\n' || c == '\r') needs_quotes = true;
    if (!needs_quotes) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

/// All rows of a CSV document, header included.
inline std::vector<std::vector<std::string>> read_csv_rows(std::istream& in, char delimiter) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
        rows.push_back(split_csv_line(line, delimiter));
    }
    return rows;
}

/// Reads a cube from CSV: one column per dimension, one measure column.
/// Dimension categories are the distinct column values, sorted
/// lexicographically so construction is deterministic.
inline DataCube read_cube_csv(const std::string& path,
                              const std::vector<std::string>& dim_columns,
                              const std::string& measure_column,
                              char delimiter = ',') {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    auto rows = read_csv_rows(in, delimiter);
    if (rows.empty()) throw ParseError("'" + path + "' has no header row");

    const auto& header = rows.front();
    auto column_index = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw ParseError("column '" + name + "' not found in '" + path + "'");
    };

    std::vector<std::size_t> dim_idx;
    dim_idx.reserve(dim_columns.size());
    for (const auto& name : dim_columns) dim_idx.push_back(column_index(name));
    const std::size_t measure_idx = column_index(measure_column);

    std::vector<Record> records;
    std::vector<std::vector<std::string>> distinct(dim_columns.size());
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size())
            throw ParseError("row " + std::to_string(r + 1) + " of '" + path + "' has " +
                             std::to_string(row.size()) + " fields, header has " +
                             std::to_string(header.size()));
        Record rec;
        rec.labels.reserve(dim_columns.size());
        for (std::size_t d = 0; d < dim_columns.size(); ++d) {
            rec.labels.push_back(row[dim_idx[d]]);
            distinct[d].push_back(row[dim_idx[d]]);
        }
        rec.measure = parse_double(row[measure_idx], "column '" + measure_column + "', row " +
                                                         std::to_string(r + 1));
        records.push_back(std::move(rec));
    }

    std::vector<Dimension> dims;
    dims.reserve(dim_columns.size());
    for (std::size_t d = 0; d < dim_columns.size(); ++d) {
        auto& labels = distinct[d];
        std::sort(labels.begin(), labels.end());
        labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
        dims.push_back(Dimension{dim_columns[d], std::move(labels)});
    }
    return build_cube(records, std::move(dims));
}

inline void write_cube_csv(std::ostream& out, const DataCube& cube,
                           const std::string& measure_column = "value",
                           char delimiter = ',') {
    const auto& dims = cube.dimensions();
    for (const auto& d : dims) out << csv_escape(d.name, delimiter) << delimiter;
    out << csv_escape(measure_column, delimiter) << '\n';
    for (const auto& cell : cube.cells()) {
        for (std::size_t d = 0; d < dims.size(); ++d)
            out << csv_escape(dims[d].categories[cell.coord.indices[d]], delimiter) << delimiter;
        out << format_double(cell.measure) << '\n';
    }
}

inline void write_cube_csv(const std::string& path, const DataCube& cube,
                           const std::string& measure_column = "value",
                           char delimiter = ',') {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write '" + path + "'");
    write_cube_csv(out, cube, measure_column, delimiter);
}

}  // namespace rodd
