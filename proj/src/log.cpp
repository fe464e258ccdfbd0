#include "shellmatch/log.hpp"

#include <iostream>
#include <mutex>

namespace shellmatch {

namespace {

std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}

LogSink& sink() {
  static LogSink s = [](LogLevel level, const std::string& message) {
    static const char* names[] = {"debug", "info", "warning"};
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << message << '\n';
  };
  return s;
}

LogLevel& threshold() {
  static LogLevel l = LogLevel::Info;
  return l;
}

}  // namespace

void set_log_sink(LogSink s) {
  std::lock_guard lock(log_mutex());
  sink() = std::move(s);
}

void set_log_level(LogLevel level) {
  std::lock_guard lock(log_mutex());
  threshold() = level;
}

void log_message(LogLevel level, const std::string& message) {
  std::lock_guard lock(log_mutex());
  if (level < threshold() || !sink()) return;
  sink()(level, message);
}

}  // namespace shellmatch
