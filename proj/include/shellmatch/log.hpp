#pragma once

#include <functional>
#include <string>

namespace shellmatch {

enum class LogLevel { Debug, Info, Warning };

/// Receives every message at or above the configured level. The default sink
/// writes to stderr. Thread safe.
using LogSink = std::function<void(LogLevel, const std::string&)>;

void set_log_sink(LogSink sink);
void set_log_level(LogLevel level);
void log_message(LogLevel level, const std::string& message);

inline void log_debug(const std::string& m) { log_message(LogLevel::Debug, m); }
inline void log_info(const std::string& m) { log_message(LogLevel::Info, m); }
inline void log_warning(const std::string& m) { log_message(LogLevel::Warning, m); }

}  // namespace shellmatch
