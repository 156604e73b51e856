#include "uarl/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace uarl {

namespace {

LogLevel from_env() {
  const char* v = std::getenv("UARL_LOG");
  if (v == nullptr) return LogLevel::warn;
  const std::string s(v);
  if (s == "debug") return LogLevel::debug;
  if (s == "info") return LogLevel::info;
  if (s == "error") return LogLevel::error;
  if (s == "off") return LogLevel::off;
  return LogLevel::warn;
}

std::atomic<LogLevel>& level_ref() {
  static std::atomic<LogLevel> level{from_env()};
  return level;
}

}  // namespace

LogLevel log_level() { return level_ref().load(); }
void set_log_level(LogLevel level) { level_ref().store(level); }

void log(LogLevel level, std::string_view message) {
  if (level < log_level()) return;
  static std::mutex mu;
  static constexpr const char* kTags[] = {"debug", "info", "warn", "error"};
  std::lock_guard lock(mu);
  std::cerr << "[uarl " << kTags[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace uarl
