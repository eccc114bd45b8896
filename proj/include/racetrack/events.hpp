#pragma once

#include <cstdint>
#include <iosfwd>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "racetrack/arena.hpp"

namespace racetrack {

enum class EventKind { SessionCreated, TurnOffered, ResponseSelected, SessionClosed };
std::string_view event_kind_name(EventKind k);
EventKind parse_event_kind(std::string_view name);

/// One line of the event log.
///   SessionCreated:   {bots, seed, annotator_id}
///   TurnOffered:      {turn} with candidates, bot ids, permutation and seed
///   ResponseSelected: {turn_index, slot, bot_id}
///   SessionClosed:    {valid, completed_turns}
struct EventRecord {
  std::uint64_t seq = 0;
  std::int64_t timestamp_ms = 0;
  EventKind kind = EventKind::SessionCreated;
  std::string session_id;
  nlohmann::json payload;

  bool operator==(const EventRecord&) const = default;
};

nlohmann::json to_json(const EventRecord& e);
EventRecord event_from_json(const nlohmann::json& j);

nlohmann::json to_json(const BotDescriptor& b);
BotDescriptor bot_from_json(const nlohmann::json& j);
/// Full server-side record of a turn, bot ids included.
nlohmann::json to_json(const ArenaTurn& t);
ArenaTurn arena_turn_from_json(const nlohmann::json& j);

/// Append-only JSON Lines log with a single appender. Each append is
/// written and fsync'ed before it returns. A failed append throws
/// StorageFailure and leaves the sequence counter where it was.
/// An empty path keeps the log in memory only.
class EventLog {
 public:
  explicit EventLog(std::string path = {}, std::uint64_t last_seq = 0);

  EventRecord append(EventKind kind, const std::string& session_id, nlohmann::json payload,
                     std::int64_t timestamp_ms);

  std::uint64_t last_seq() const;
  const std::string& path() const noexcept { return path_; }
  /// Events appended through this object.
  std::vector<EventRecord> records() const;

 private:
  std::string path_;
  mutable std::mutex mu_;
  std::uint64_t last_seq_;
  std::vector<EventRecord> records_;
};

/// Parses a log. CorruptLog for an unreadable line or a sequence gap.
std::vector<EventRecord> read_events(std::istream& in);
/// Missing file reads as an empty log.
std::vector<EventRecord> read_event_file(const std::string& path);

/// Applies one event. CorruptLog when the event does not fit the store.
void apply_event(ArenaStore& store, const EventRecord& event);

/// Rebuilds the store from a complete log, checking that sequence numbers
/// start at 1 and have no gaps.
ArenaStore replay(const std::vector<EventRecord>& events);

}  // namespace racetrack
