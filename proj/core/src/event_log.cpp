#include "ssbc/event_log.hpp"

#include <chrono>
#include <iostream>

namespace ssbc {

EventLog::EventLog(const std::filesystem::path& path, std::string run_id)
    : run_id_(std::move(run_id)) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::app);
}

void EventLog::set_stage(std::string stage) {
  std::lock_guard lock(mu_);
  stage_ = std::move(stage);
}

void EventLog::emit(std::string_view event, json fields) {
  if (!fields.is_object()) fields = json{{"value", std::move(fields)}};
  const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  std::lock_guard lock(mu_);
  fields["ts_ms"] = now;
  fields["run_id"] = run_id_;
  fields["stage"] = stage_;
  fields["event"] = event;
  const auto line = canonical_dump(fields);
  if (out_.is_open()) {
    out_ << line << '\n';
    out_.flush();
  }
  if (echo_) std::cerr << line << '\n';
}

EventLog& EventLog::null() {
  static EventLog log;
  return log;
}

}  // namespace ssbc
