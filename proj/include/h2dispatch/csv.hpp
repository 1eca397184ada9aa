#pragma once

#include <string>
#include <vector>

namespace h2d::csv {

// A fully materialized CSV file with a mandatory header row.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Index of a named column; throws IoError if absent.
    int column(const std::string& name) const;
    const std::string& cell(size_t row, int col) const { return rows[row][size_t(col)]; }
};

// Reads a comma-separated file. Cells are trimmed of surrounding whitespace;
// quoting is not supported (none of the consumed formats need it).
Table read_file(const std::string& path);

// Requires that the header is exactly `expected` (order included).
void require_header(const Table& t, const std::vector<std::string>& expected,
                    const std::string& path);

double to_double(const std::string& cell, const std::string& context);
long to_long(const std::string& cell, const std::string& context);

// Minimal writer: formats doubles with enough digits to round-trip.
class Writer {
public:
    explicit Writer(const std::string& path);
    ~Writer();
    Writer(const Writer&) = delete;
    Writer& operator=(const Writer&) = delete;

    void row(const std::vector<std::string>& cells);
    static std::string num(double v);
    static std::string num(long v);

private:
    struct Impl;
    Impl* impl_;
};

} // namespace h2d::csv
