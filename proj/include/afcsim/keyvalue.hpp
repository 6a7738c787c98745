#pragma once

// Line-oriented key-value text format shared by level schemes, protocol
// scripts and scenario configs.
//
//   # comment (also allowed after a value)
//   key = value
//   [section]
//   key = 100 us
//
// Keys are [A-Za-z_][A-Za-z0-9_.]*; values run to end of line. Numeric values
// may carry a unit suffix which is converted to the canonical unit of the
// requested dimension. Sections may repeat; their order is preserved.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace afcsim::kv {

enum class Dimension {
    none,         // dimensionless
    time,         // canonical: s      (accepts s, ms, us, ns)
    frequency,    // canonical: MHz    (accepts Hz, kHz, MHz, GHz)
    attenuation,  // canonical: dB
    temperature,  // canonical: K      (accepts K, mK)
    length,       // canonical: cm     (accepts m, cm, mm, um)
};

struct Entry {
    std::string key;
    std::string value;
    int line = 0;
    int key_column = 0;
    int value_column = 0;
};

class Section {
public:
    Section() = default;
    Section(std::string name, int line, std::string source);

    const std::string& name() const noexcept { return name_; }
    int line() const noexcept { return line_; }
    const std::string& source() const noexcept { return source_; }
    const std::vector<Entry>& entries() const noexcept { return entries_; }

    void add(Entry entry);
    bool has(std::string_view key) const;

    // Typed accessors. Each marks the key as consumed; required variants throw
    // ConfigError naming the key when it is missing or malformed.
    std::string get_string(std::string_view key) const;
    std::optional<std::string> find_string(std::string_view key) const;
    double get_number(std::string_view key, Dimension dim = Dimension::none) const;
    double get_number_or(std::string_view key, double fallback,
                         Dimension dim = Dimension::none) const;
    long long get_integer(std::string_view key) const;
    long long get_integer_or(std::string_view key, long long fallback) const;
    std::vector<double> get_numbers(std::string_view key, Dimension dim = Dimension::none) const;
    std::vector<std::string> get_list(std::string_view key) const;
    bool get_bool_or(std::string_view key, bool fallback) const;

    // Validation helpers for semantic checks.
    [[noreturn]] void fail(std::string_view key, const std::string& message) const;
    const Entry* entry(std::string_view key) const;

    /// Throws ConfigError for the first key never read through an accessor.
    void reject_unknown() const;

private:
    const Entry& require(std::string_view key) const;

    std::string name_;
    int line_ = 0;
    std::string source_;
    std::vector<Entry> entries_;
    mutable std::vector<bool> used_;
};

struct Document {
    std::string source;
    Section root;
    std::vector<Section> sections;
};

/// Parses text; `source` names the origin in diagnostics (usually a path).
Document parse(std::string_view text, const std::string& source = {});
Document parse_file(const std::string& path);

/// Reads a whole file; throws ConfigError naming the path on failure.
std::string read_file(const std::string& path);

/// Parses "<number> [unit]" into the canonical unit of `dim`.
double parse_quantity(std::string_view text, Dimension dim);

/// Splits a comma-separated list, trimming whitespace; empty items dropped.
std::vector<std::string> split_list(std::string_view text);

std::string trim(std::string_view text);

}  // namespace afcsim::kv
