#include "racetrack/events.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

#include "racetrack/serialization.hpp"

namespace racetrack {

using nlohmann::json;

std::string_view event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::SessionCreated: return "SessionCreated";
    case EventKind::TurnOffered: return "TurnOffered";
    case EventKind::ResponseSelected: return "ResponseSelected";
    case EventKind::SessionClosed: return "SessionClosed";
  }
  return "SessionCreated";
}

EventKind parse_event_kind(std::string_view name) {
  if (name == "SessionCreated") return EventKind::SessionCreated;
  if (name == "TurnOffered") return EventKind::TurnOffered;
  if (name == "ResponseSelected") return EventKind::ResponseSelected;
  if (name == "SessionClosed") return EventKind::SessionClosed;
  throw Error(ErrorCode::ParseError, "unknown event kind '" + std::string(name) + "'");
}

json to_json(const EventRecord& e) {
  return json{{"seq", e.seq},
              {"timestamp_ms", e.timestamp_ms},
              {"kind", event_kind_name(e.kind)},
              {"session_id", e.session_id},
              {"payload", e.payload}};
}

EventRecord event_from_json(const json& j) {
  EventRecord e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
  e.kind = parse_event_kind(j.at("kind").get<std::string>());
  e.session_id = j.at("session_id").get<std::string>();
  e.payload = j.at("payload");
  return e;
}

json to_json(const BotDescriptor& b) {
  return json{{"bot_id", b.bot_id},
              {"mode", pipeline_mode_name(b.mode)},
              {"generator", b.generator},
              {"search", b.search}};
}

BotDescriptor bot_from_json(const json& j) {
  BotDescriptor b;
  b.bot_id = j.at("bot_id").get<std::string>();
  b.mode = parse_pipeline_mode(j.value("mode", "full"));
  b.generator = j.value("generator", "");
  b.search = j.value("search", "");
  return b;
}

json to_json(const ArenaTurn& t) {
  json candidates = json::array();
  for (const auto& c : t.candidates) {
    json timings = json::array();
    for (const auto& s : c.timings) timings.push_back(to_json(s));
    candidates.push_back({{"bot_id", c.bot_id}, {"text", c.text}, {"timings", std::move(timings)}});
  }
  json failed = json::array();
  for (const auto& f : t.failed_bots) failed.push_back({{"bot_id", f.bot_id}, {"reason", f.reason}});
  return json{{"turn_index", t.turn_index},
              {"user_message", t.user_message.text()},
              {"candidates", std::move(candidates)},
              {"failed_bots", std::move(failed)},
              {"permutation", t.permutation},
              {"shuffle_seed", t.shuffle_seed},
              {"selected_bot", t.selected_bot ? json(*t.selected_bot) : json(nullptr)},
              {"selected_slot", t.selected_slot ? json(*t.selected_slot) : json(nullptr)}};
}

ArenaTurn arena_turn_from_json(const json& j) {
  ArenaTurn t;
  t.turn_index = j.at("turn_index").get<std::size_t>();
  t.user_message = Utterance::user(j.at("user_message").get<std::string>());
  for (const auto& c : j.at("candidates")) {
    Candidate cand{c.at("bot_id").get<std::string>(), c.at("text").get<std::string>(), {}};
    for (const auto& s : c.value("timings", json::array())) cand.timings.push_back(timing_from_json(s));
    t.candidates.push_back(std::move(cand));
  }
  for (const auto& f : j.value("failed_bots", json::array()))
    t.failed_bots.push_back({f.at("bot_id").get<std::string>(), f.value("reason", "")});
  t.permutation = j.at("permutation").get<std::vector<std::size_t>>();
  t.shuffle_seed = j.at("shuffle_seed").get<std::uint64_t>();
  if (j.contains("selected_bot") && !j.at("selected_bot").is_null())
    t.selected_bot = j.at("selected_bot").get<std::string>();
  if (j.contains("selected_slot") && !j.at("selected_slot").is_null())
    t.selected_slot = j.at("selected_slot").get<std::size_t>();
  return t;
}

// ---------------------------------------------------------------------------

EventLog::EventLog(std::string path, std::uint64_t last_seq) : path_(std::move(path)), last_seq_(last_seq) {}

namespace {

void append_line(const std::string& path, const std::string& line) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorCode::StorageFailure, "cannot open event log " + path + ": " + std::strerror(errno));
  std::size_t written = 0;
  int err = 0;
  while (written < line.size()) {
    const auto n = ::write(fd, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      err = errno;
      break;
    }
    written += static_cast<std::size_t>(n);
  }
  if (err == 0 && ::fsync(fd) != 0 && errno != EINVAL) err = errno;
  ::close(fd);
  if (err != 0) throw Error(ErrorCode::StorageFailure, "cannot append to event log " + path + ": " + std::strerror(err));
}

}  // namespace

EventRecord EventLog::append(EventKind kind, const std::string& session_id, json payload,
                             std::int64_t timestamp_ms) {
  std::lock_guard lock(mu_);
  EventRecord e{last_seq_ + 1, timestamp_ms, kind, session_id, std::move(payload)};
  if (!path_.empty()) append_line(path_, to_json(e).dump() + "\n");
  last_seq_ = e.seq;
  records_.push_back(e);
  return e;
}

std::uint64_t EventLog::last_seq() const {
  std::lock_guard lock(mu_);
  return last_seq_;
}

std::vector<EventRecord> EventLog::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::vector<EventRecord> read_events(std::istream& in) {
  std::vector<EventRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    EventRecord e;
    try {
      e = event_from_json(json::parse(line));
    } catch (const std::exception& ex) {
      throw Error(ErrorCode::CorruptLog, "event log line " + std::to_string(line_no) + ": " + ex.what());
    }
    const std::uint64_t expected = out.empty() ? 1 : out.back().seq + 1;
    if (e.seq != expected)
      throw Error(ErrorCode::CorruptLog, "expected seq " + std::to_string(expected) + " but found seq " +
                                             std::to_string(e.seq));
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<EventRecord> read_event_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) return {};
  return read_events(in);
}

void apply_event(ArenaStore& store, const EventRecord& e) {
  try {
    switch (e.kind) {
      case EventKind::SessionCreated: {
        std::vector<BotDescriptor> bots;
        for (const auto& b : e.payload.at("bots")) bots.push_back(bot_from_json(b));
        store.add(ArenaSession::create(e.session_id, std::move(bots), e.payload.at("seed").get<std::uint64_t>(),
                                       e.timestamp_ms, e.payload.value("annotator_id", "")));
        break;
      }
      case EventKind::TurnOffered:
        store.get(e.session_id).apply_turn(arena_turn_from_json(e.payload.at("turn")));
        break;
      case EventKind::ResponseSelected: {
        auto& session = store.get(e.session_id);
        const auto turn_index = e.payload.at("turn_index").get<std::size_t>();
        const auto slot = e.payload.at("slot").get<std::size_t>();
        const auto bot = session.check_selection(turn_index, slot);
        if (bot != e.payload.at("bot_id").get<std::string>())
          throw Error(ErrorCode::CorruptLog, "selected bot does not match the recorded permutation");
        session.apply_selection(turn_index, slot);
        break;
      }
      case EventKind::SessionClosed:
        store.get(e.session_id).apply_close(e.timestamp_ms);
        break;
    }
  } catch (const std::exception& ex) {
    throw Error(ErrorCode::CorruptLog, "seq " + std::to_string(e.seq) + ": " + ex.what());
  }
}

ArenaStore replay(const std::vector<EventRecord>& events) {
  ArenaStore store;
  std::uint64_t expected = 1;
  for (const auto& e : events) {
    if (e.seq != expected)
      throw Error(ErrorCode::CorruptLog, "expected seq " + std::to_string(expected) + " but found seq " +
                                             std::to_string(e.seq));
    apply_event(store, e);
    ++expected;
  }
  return store;
}

}  // namespace racetrack
