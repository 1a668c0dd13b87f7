#include "hatsim/event_log.hpp"

#include <sstream>
#include <stdexcept>

namespace hatsim {

const char* event_kind_name(EventKind kind) {
  switch (kind) {
    case EventKind::Arrival: return "arrival";
    case EventKind::LocalComputeDone: return "local-compute-done";
    case EventKind::UploadDone: return "upload-done";
    case EventKind::BatchFormed: return "batch-formed";
    case EventKind::StageDone: return "stage-done";
    case EventKind::DownloadDone: return "download-done";
    case EventKind::DraftStepDone: return "draft-step-done";
    case EventKind::TokenEmit: return "token-emit";
    case EventKind::RequestComplete: return "request-complete";
  }
  return "?";
}

namespace {

EventKind kind_from_name(const std::string& name) {
  for (int k = 0; k <= static_cast<int>(EventKind::RequestComplete); ++k) {
    if (name == event_kind_name(static_cast<EventKind>(k))) {
      return static_cast<EventKind>(k);
    }
  }
  throw std::invalid_argument("EventLog: unknown kind '" + name + "'");
}

}  // namespace

void EventLog::append(LogRecord record) {
  if (!records_.empty()) {
    const auto& last = records_.back();
    if (record.time_ns < last.time_ns ||
        (record.time_ns == last.time_ns && record.seq <= last.seq)) {
      throw std::logic_error("EventLog: records must be appended in (time, seq) order");
    }
  }
  records_.push_back(std::move(record));
}

std::string EventLog::serialize() const {
  std::ostringstream out;
  for (const auto& r : records_) {
    out << r.time_ns << ',' << r.seq << ',' << event_kind_name(r.kind) << ','
        << r.request_id << ',' << r.detail << '\n';
  }
  return out.str();
}

EventLog EventLog::parse(const std::string& text) {
  EventLog log;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LogRecord r;
    std::size_t p0 = line.find(',');
    std::size_t p1 = line.find(',', p0 + 1);
    std::size_t p2 = line.find(',', p1 + 1);
    std::size_t p3 = line.find(',', p2 + 1);
    if (p0 == std::string::npos || p1 == std::string::npos ||
        p2 == std::string::npos || p3 == std::string::npos) {
      throw std::invalid_argument("EventLog: malformed line: " + line);
    }
    r.time_ns = std::stoll(line.substr(0, p0));
    r.seq = std::stoull(line.substr(p0 + 1, p1 - p0 - 1));
    r.kind = kind_from_name(line.substr(p1 + 1, p2 - p1 - 1));
    r.request_id = std::stoi(line.substr(p2 + 1, p3 - p2 - 1));
    r.detail = line.substr(p3 + 1);
    log.append(std::move(r));
  }
  return log;
}

}  // namespace hatsim
