#include "afcsim/error.hpp"

namespace afcsim {

namespace {

std::string format_location(const std::string& message, int line, int column,
                            const std::string& source) {
    if (line <= 0) {
        return source.empty() ? message : source + ": " + message;
    }
    std::string where = source.empty() ? std::string("line ") : source + ":";
    where += std::to_string(line);
    if (column > 0) {
        where += ":" + std::to_string(column);
    }
    return where + ": " + message;
}

}  // namespace

ConfigError::ConfigError(const std::string& message, int line, int column, std::string source)
    : Error(format_location(message, line, column, source)),
      line_(line),
      column_(column),
      source_(std::move(source)) {}

}  // namespace afcsim
