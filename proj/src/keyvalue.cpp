#include "afcsim/keyvalue.hpp"

#include "afcsim/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace afcsim::kv {

namespace {

bool is_key_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

struct UnitScale {
    std::string_view unit;
    double scale;
};

// Scale factors into the canonical unit of each dimension.
constexpr UnitScale kTimeUnits[] = {{"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}, {"ns", 1e-9}};
constexpr UnitScale kFrequencyUnits[] = {
    {"Hz", 1e-6}, {"kHz", 1e-3}, {"MHz", 1.0}, {"GHz", 1e3}};
constexpr UnitScale kAttenuationUnits[] = {{"dB", 1.0}};
constexpr UnitScale kTemperatureUnits[] = {{"K", 1.0}, {"mK", 1e-3}};
constexpr UnitScale kLengthUnits[] = {{"m", 100.0}, {"cm", 1.0}, {"mm", 0.1}, {"um", 1e-4}};

template <std::size_t N>
std::optional<double> lookup(const UnitScale (&table)[N], std::string_view unit) {
    for (const auto& u : table) {
        if (u.unit == unit) return u.scale;
    }
    return std::nullopt;
}

const char* dimension_name(Dimension dim) {
    switch (dim) {
        case Dimension::none: return "dimensionless";
        case Dimension::time: return "time";
        case Dimension::frequency: return "frequency";
        case Dimension::attenuation: return "attenuation";
        case Dimension::temperature: return "temperature";
        case Dimension::length: return "length";
    }
    return "unknown";
}

}  // namespace

std::string trim(std::string_view text) {
    std::size_t b = 0;
    std::size_t e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    return std::string(text.substr(b, e - b));
}

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> items;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t comma = text.find(',', start);
        if (comma == std::string_view::npos) comma = text.size();
        std::string item = trim(text.substr(start, comma - start));
        if (!item.empty()) items.push_back(std::move(item));
        start = comma + 1;
    }
    return items;
}

double parse_quantity(std::string_view text, Dimension dim) {
    const std::string s = trim(text);
    if (s.empty()) throw ConfigError("empty value, expected a number");
    double value = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    // from_chars rejects a leading '+', which is common in hand-written configs
    if (*begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr == begin) {
        throw ConfigError("expected a number, got '" + s + "'");
    }
    if (*s.data() == '+' && *begin == '-') throw ConfigError("malformed number '" + s + "'");
    const std::string unit = trim(std::string_view(ptr, static_cast<std::size_t>(end - ptr)));
    if (unit.empty()) return value;

    std::optional<double> scale;
    switch (dim) {
        case Dimension::none: break;
        case Dimension::time: scale = lookup(kTimeUnits, unit); break;
        case Dimension::frequency: scale = lookup(kFrequencyUnits, unit); break;
        case Dimension::attenuation: scale = lookup(kAttenuationUnits, unit); break;
        case Dimension::temperature: scale = lookup(kTemperatureUnits, unit); break;
        case Dimension::length: scale = lookup(kLengthUnits, unit); break;
    }
    if (!scale) {
        throw ConfigError("unit '" + unit + "' is not a valid " + dimension_name(dim) + " unit");
    }
    return value * *scale;
}

Section::Section(std::string name, int line, std::string source)
    : name_(std::move(name)), line_(line), source_(std::move(source)) {}

void Section::add(Entry entry) {
    for (const auto& e : entries_) {
        if (e.key == entry.key) {
            throw ConfigError("duplicate key '" + entry.key + "'", entry.line, entry.key_column,
                              source_);
        }
    }
    entries_.push_back(std::move(entry));
    used_.push_back(false);
}

bool Section::has(std::string_view key) const { return entry(key) != nullptr; }

const Entry* Section::entry(std::string_view key) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].key == key) {
            used_[i] = true;
            return &entries_[i];
        }
    }
    return nullptr;
}

const Entry& Section::require(std::string_view key) const {
    const Entry* e = entry(key);
    if (!e) {
        const std::string where = name_.empty() ? std::string() : " in [" + name_ + "]";
        throw ConfigError("missing required key '" + std::string(key) + "'" + where, line_, 0,
                          source_);
    }
    return *e;
}

void Section::fail(std::string_view key, const std::string& message) const {
    const Entry* e = entry(key);
    if (e) {
        throw ConfigError("'" + std::string(key) + "': " + message, e->line, e->value_column,
                          source_);
    }
    throw ConfigError("'" + std::string(key) + "': " + message, line_, 0, source_);
}

std::string Section::get_string(std::string_view key) const { return require(key).value; }

std::optional<std::string> Section::find_string(std::string_view key) const {
    const Entry* e = entry(key);
    if (!e) return std::nullopt;
    return e->value;
}

double Section::get_number(std::string_view key, Dimension dim) const {
    const Entry& e = require(key);
    try {
        return parse_quantity(e.value, dim);
    } catch (const ConfigError& err) {
        throw ConfigError("'" + e.key + "': " + err.what(), e.line, e.value_column, source_);
    }
}

double Section::get_number_or(std::string_view key, double fallback, Dimension dim) const {
    return has(key) ? get_number(key, dim) : fallback;
}

long long Section::get_integer(std::string_view key) const {
    const Entry& e = require(key);
    long long value = 0;
    const std::string s = trim(e.value);
    const char* begin = s.data();
    if (s.size() > 1 && s[0] == '+' && s[1] != '-') ++begin;
    auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || ptr == begin) {
        throw ConfigError("'" + e.key + "': expected an integer, got '" + s + "'", e.line,
                          e.value_column, source_);
    }
    return value;
}

long long Section::get_integer_or(std::string_view key, long long fallback) const {
    return has(key) ? get_integer(key) : fallback;
}

std::vector<double> Section::get_numbers(std::string_view key, Dimension dim) const {
    const Entry& e = require(key);
    std::vector<double> out;
    for (const auto& item : split_list(e.value)) {
        try {
            out.push_back(parse_quantity(item, dim));
        } catch (const ConfigError& err) {
            throw ConfigError("'" + e.key + "': " + err.what(), e.line, e.value_column, source_);
        }
    }
    return out;
}

std::vector<std::string> Section::get_list(std::string_view key) const {
    return split_list(require(key).value);
}

bool Section::get_bool_or(std::string_view key, bool fallback) const {
    const Entry* e = entry(key);
    if (!e) return fallback;
    const std::string v = trim(e->value);
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw ConfigError("'" + e->key + "': expected a boolean, got '" + v + "'", e->line,
                      e->value_column, source_);
}

void Section::reject_unknown() const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (!used_[i]) {
            const std::string where = name_.empty() ? std::string() : " in [" + name_ + "]";
            throw ConfigError("unknown key '" + entries_[i].key + "'" + where, entries_[i].line,
                              entries_[i].key_column, source_);
        }
    }
}

Document parse(std::string_view text, const std::string& source) {
    Document doc;
    doc.source = source;
    doc.root = Section({}, 0, source);
    Section* current = &doc.root;

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view raw = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);

        if (std::size_t hash = raw.find('#'); hash != std::string_view::npos) {
            raw = raw.substr(0, hash);
        }
        std::size_t first = 0;
        while (first < raw.size() && std::isspace(static_cast<unsigned char>(raw[first]))) ++first;
        if (first == raw.size()) {
            if (nl == text.size()) break;
            continue;
        }
        const int col = static_cast<int>(first) + 1;

        if (raw[first] == '[') {
            const std::size_t close = raw.find(']', first);
            if (close == std::string_view::npos) {
                throw ConfigError("unterminated section header", line_no, col, source);
            }
            std::string name = trim(raw.substr(first + 1, close - first - 1));
            if (name.empty() || !is_key_start(name.front()) ||
                !std::all_of(name.begin(), name.end(), is_key_char)) {
                throw ConfigError("invalid section name '" + name + "'", line_no, col + 1, source);
            }
            if (!trim(raw.substr(close + 1)).empty()) {
                throw ConfigError("unexpected text after section header", line_no,
                                  static_cast<int>(close) + 2, source);
            }
            doc.sections.emplace_back(std::move(name), line_no, source);
            current = &doc.sections.back();
            continue;
        }

        if (!is_key_start(raw[first])) {
            throw ConfigError("expected a key", line_no, col, source);
        }
        std::size_t key_end = first;
        while (key_end < raw.size() && is_key_char(raw[key_end])) ++key_end;
        std::size_t eq = key_end;
        while (eq < raw.size() && std::isspace(static_cast<unsigned char>(raw[eq]))) ++eq;
        if (eq == raw.size() || raw[eq] != '=') {
            throw ConfigError("expected '=' after key", line_no, static_cast<int>(eq) + 1, source);
        }
        std::size_t vstart = eq + 1;
        while (vstart < raw.size() && std::isspace(static_cast<unsigned char>(raw[vstart]))) {
            ++vstart;
        }
        Entry entry;
        entry.key = std::string(raw.substr(first, key_end - first));
        entry.value = trim(raw.substr(vstart));
        entry.line = line_no;
        entry.key_column = col;
        entry.value_column = static_cast<int>(vstart) + 1;
        if (entry.value.empty()) {
            throw ConfigError("key '" + entry.key + "' has no value", line_no, entry.value_column,
                              source);
        }
        current->add(std::move(entry));
        if (nl == text.size()) break;
    }
    return doc;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file", 0, 0, path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Document parse_file(const std::string& path) { return parse(read_file(path), path); }

}  // namespace afcsim::kv
