#pragma once

#include <span>
#include <string>
#include <vector>

namespace afcsim {

/// Column-oriented CSV table. Numbers are written with 10 significant digits
/// in the classic locale so reruns are byte-identical.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);

    void add_row(std::span<const double> values);
    void add_row(std::initializer_list<double> values) {
        add_row(std::span<const double>(values.begin(), values.size()));
    }
    /// Row with a leading text cell.
    void add_row(const std::string& label, std::span<const double> values);
    /// Row with leading text cells, which may not contain ',', '"' or newlines.
    void add_row(const std::vector<std::string>& labels, std::span<const double> values);

    std::size_t rows() const { return rows_.size(); }
    std::string str() const;
    void write(const std::string& path) const;

private:
    std::vector<std::string> header_;
    std::vector<std::string> rows_;
};

std::string format_number(double value);

}  // namespace afcsim
