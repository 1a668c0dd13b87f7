#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hatsim/time.hpp"

namespace hatsim {

enum class EventKind {
  Arrival,
  LocalComputeDone,
  UploadDone,
  BatchFormed,
  StageDone,
  DownloadDone,
  DraftStepDone,
  TokenEmit,
  RequestComplete,
};

const char* event_kind_name(EventKind kind);

struct LogRecord {
  TimeNs time_ns = 0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::Arrival;
  int request_id = -1;  // -1 for batch-level records
  std::string detail;   // space-separated k=v pairs
};

// Chronological trace of one simulation run. Records are appended in
// strict (time, seq) order.
class EventLog {
 public:
  void append(LogRecord record);
  const std::vector<LogRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }

  // Line-delimited CSV: time_ns,seq,kind,request,detail
  std::string serialize() const;
  static EventLog parse(const std::string& text);

 private:
  std::vector<LogRecord> records_;
};

}  // namespace hatsim
