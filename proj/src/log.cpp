#include "hydec/log.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

#include "hydec/common.hpp"

namespace hydec {

namespace {
std::atomic<int> g_level{static_cast<int>(LogLevel::kInfo)};
std::mutex g_mutex;

void emit(const char* tag, const std::string& msg) {
  std::lock_guard<std::mutex> lock(g_mutex);
  std::fprintf(stderr, "[%s] %s\n", tag, msg.c_str());
  std::fflush(stderr);
}
}  // namespace

void set_log_level(LogLevel level) { g_level.store(static_cast<int>(level)); }

LogLevel log_level_from_string(const std::string& s) {
  if (s == "debug") return LogLevel::kDebug;
  if (s == "info") return LogLevel::kInfo;
  if (s == "warn") return LogLevel::kWarn;
  if (s == "error") return LogLevel::kError;
  throw Error("unknown log level: " + s);
}

void log_debug(const std::string& msg) {
  if (g_level.load() <= 0) emit("DEBUG", msg);
}
void log_info(const std::string& msg) {
  if (g_level.load() <= 1) emit("INFO", msg);
}
void log_warn(const std::string& msg) {
  if (g_level.load() <= 2) emit("WARN", msg);
}
void log_error(const std::string& msg) {
  if (g_level.load() <= 3) emit("ERROR", msg);
}

}  // namespace hydec
