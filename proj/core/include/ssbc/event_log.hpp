#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <string_view>

#include "ssbc/json_io.hpp"

namespace ssbc {

/// Line-delimited event log. Each record carries run id, stage and event name
/// plus free-form fields. Thread-safe.
class EventLog {
 public:
  EventLog() = default;
  EventLog(const std::filesystem::path& path, std::string run_id);

  void set_stage(std::string stage);
  void emit(std::string_view event, json fields = json::object());

  /// Also echo events to stderr (used by the CLI with --verbose).
  void set_echo(bool echo) { echo_ = echo; }

  static EventLog& null();

 private:
  std::mutex mu_;
  std::ofstream out_;
  std::string run_id_;
  std::string stage_;
  bool echo_ = false;
};

}  // namespace ssbc
