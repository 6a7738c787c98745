#include "afcsim/csv.hpp"

#include "afcsim/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace afcsim {

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (value == 0.0) return "0";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", value);
    return buf;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
    if (header_.empty()) throw DomainError("CSV header must not be empty");
}

void CsvTable::add_row(std::span<const double> values) {
    if (values.size() != header_.size()) throw DomainError("CSV row width does not match header");
    std::string row;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) row += ',';
        row += format_number(values[i]);
    }
    rows_.push_back(std::move(row));
}

void CsvTable::add_row(const std::string& label, std::span<const double> values) {
    add_row(std::vector<std::string>{label}, values);
}

void CsvTable::add_row(const std::vector<std::string>& labels, std::span<const double> values) {
    if (values.size() + labels.size() != header_.size()) {
        throw DomainError("CSV row width does not match header");
    }
    std::string row;
    bool first = true;
    for (const auto& label : labels) {
        if (label.find_first_of(",\"\n") != std::string::npos) {
            throw DomainError("CSV text cell must not contain a comma, quote or newline");
        }
        if (!first) row += ',';
        row += label;
        first = false;
    }
    for (double v : values) {
        if (!first) row += ',';
        row += format_number(v);
        first = false;
    }
    rows_.push_back(std::move(row));
}

std::string CsvTable::str() const {
    std::string out;
    for (std::size_t i = 0; i < header_.size(); ++i) {
        if (i) out += ',';
        out += header_[i];
    }
    out += '\n';
    for (const auto& r : rows_) {
        out += r;
        out += '\n';
    }
    return out;
}

void CsvTable::write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << str();
    if (!out) throw Error("failed writing " + path);
}

}  // namespace afcsim
