// io.hpp - CSV emission shared by all exporters.
//
// Every table starts with a "# schema: <name>" comment line followed by a
// fixed header; numbers are written with 17 significant digits.

#pragma once

#include <cstdio>
#include <initializer_list>
#include <ostream>
#include <string>
#include <vector>

namespace qbm::io {

inline std::string number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(std::ostream& out, const std::string& schema, const std::vector<std::string>& columns)
        : out_(out), width_(columns.size()) {
        out_ << "# schema: " << schema << '\n';
        for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
        out_ << '\n';
    }

    void row(std::initializer_list<double> values) { row(std::vector<double>(values)); }

    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << number(values[i]);
        out_ << '\n';
    }

    std::size_t width() const noexcept { return width_; }

private:
    std::ostream& out_;
    std::size_t width_;
};

} // namespace qbm::io
