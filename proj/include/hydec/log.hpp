#pragma once

#include <string>

namespace hydec {

enum class LogLevel { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3 };

void set_log_level(LogLevel level);
LogLevel log_level_from_string(const std::string& s);  // throws Error on unknown

// Line-oriented logging to stderr.
void log_debug(const std::string& msg);
void log_info(const std::string& msg);
void log_warn(const std::string& msg);
void log_error(const std::string& msg);

}  // namespace hydec
