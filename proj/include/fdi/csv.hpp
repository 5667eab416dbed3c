#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fdi::csv {

class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& msg, int line)
        : std::runtime_error("csv parse error at line " + std::to_string(line) + ": " + msg),
          line_(line) {}
    int line() const { return line_; }

  private:
    int line_;
};

/// Formats a double losslessly (17 significant digits), '.' radix, no locale.
inline std::string format(double v) {
    char buf[40];
    const int n = std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf, buf + n);
}

inline double parse_double(const std::string& s, int line) {
    double v = 0.0;
    const auto* begin = s.data();
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end)
        throw ParseError("bad numeric field '" + s + "'", line);
    return v;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw ParseError("missing column \"" + name + "\"", 1);
    }
};

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline Table read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    Table t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (lineno == 1) {
            t.header = std::move(fields);
        } else {
            if (fields.size() != t.header.size())
                throw ParseError("expected " + std::to_string(t.header.size()) + " fields, got " +
                                     std::to_string(fields.size()),
                                 lineno);
            t.rows.push_back(std::move(fields));
        }
    }
    if (t.header.empty()) throw ParseError("empty file", 1);
    return t;
}

class Writer {
  public:
    explicit Writer(const std::string& path) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
    }

    void header(const std::vector<std::string>& names) { line(names); }

    void line(const std::vector<std::string>& fields) {
        for (size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << fields[i];
        }
        out_ << '\n';
    }

  private:
    std::ofstream out_;
};

} // namespace fdi::csv
