#pragma once

#include <string_view>

namespace uarl {

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

/// Process-wide threshold; initialised from UARL_LOG (debug|info|warn|error|off), default warn.
LogLevel log_level();
void set_log_level(LogLevel level);

void log(LogLevel level, std::string_view message);

}  // namespace uarl
