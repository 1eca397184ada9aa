#include "h2dispatch/csv.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "h2dispatch/errors.hpp"

namespace h2d::csv {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

} // namespace

int Table::column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return int(i);
    throw IoError("missing CSV column '" + name + "'");
}

Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open CSV file: " + path);
    Table t;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto cells = split_line(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw IoError(path + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(t.header.size()) + " cells, got " +
                          std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) throw IoError("CSV file has no header row: " + path);
    return t;
}

void require_header(const Table& t, const std::vector<std::string>& expected,
                    const std::string& path) {
    if (t.header != expected) {
        std::string want, got;
        for (const auto& c : expected) want += (want.empty() ? "" : ",") + c;
        for (const auto& c : t.header) got += (got.empty() ? "" : ",") + c;
        throw IoError(path + ": expected header '" + want + "', got '" + got + "'");
    }
}

double to_double(const std::string& cell, const std::string& context) {
    try {
        size_t pos = 0;
        double v = std::stod(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument("trailing chars");
        return v;
    } catch (const std::exception&) {
        throw IoError(context + ": not a number: '" + cell + "'");
    }
}

long to_long(const std::string& cell, const std::string& context) {
    try {
        size_t pos = 0;
        long v = std::stol(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument("trailing chars");
        return v;
    } catch (const std::exception&) {
        throw IoError(context + ": not an integer: '" + cell + "'");
    }
}

struct Writer::Impl {
    std::ofstream out;
};

Writer::Writer(const std::string& path) : impl_(new Impl) {
    impl_->out.open(path);
    if (!impl_->out) {
        delete impl_;
        throw IoError("cannot open file for writing: " + path);
    }
}

Writer::~Writer() { delete impl_; }

void Writer::row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
        if (i) impl_->out << ',';
        impl_->out << cells[i];
    }
    impl_->out << '\n';
}

std::string Writer::num(double v) {
    if (std::isnan(v)) return "nan";
    // Shortest representation that parses back to the same double.
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

std::string Writer::num(long v) { return std::to_string(v); }

} // namespace h2d::csv
