#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "racetrack/arena.hpp"
#include "racetrack/clock.hpp"
#include "racetrack/config.hpp"
#include "racetrack/events.hpp"

namespace httplib {
class Server;
}

namespace racetrack {

struct ServiceOptions {
  std::uint64_t seed = 0;
  std::string admin_token;  // empty disables the admin views
  /// Wall-clock milliseconds stamped on events and sessions.
  std::function<std::int64_t()> now_ms;
};

/// Arena sessions behind an event log. Every mutation is persisted before it
/// is applied, so a failed append leaves the state untouched. Operations on
/// one session are serialized; different sessions run concurrently.
class Service {
 public:
  /// Replays `past_events` before accepting requests. `log` must continue
  /// their sequence.
  Service(std::vector<BotDescriptor> bots, BotRunner runner, OpeningPool openings,
          std::shared_ptr<EventLog> log, ServiceOptions options,
          const std::vector<EventRecord>& past_events = {});

  /// Builds backends from the configuration and replays its event log.
  static std::unique_ptr<Service> from_config(const ServiceConfig& config);

  nlohmann::json create_session(const std::string& annotator_id = {});
  nlohmann::json session_view(const std::string& session_id) const;
  /// {turn_index, candidates: [{slot, text}]}
  nlohmann::json post_message(const std::string& session_id, const std::string& text);
  /// Repeating an identical selection succeeds without a new event.
  nlohmann::json select(const std::string& session_id, std::size_t turn_index, const std::string& slot);
  nlohmann::json close(const std::string& session_id);
  /// [{rank, selections, valid_sessions}], plus bot_id for admins.
  nlohmann::json ranking_view(bool admin) const;
  nlohmann::json topic_tip();
  nlohmann::json bots_view() const;

  bool is_admin(const std::string& token) const;
  ArenaStore snapshot() const;
  const EventLog& log() const noexcept { return *log_; }

 private:
  std::shared_ptr<std::mutex> session_lock(const std::string& session_id) const;
  std::int64_t now() const;

  std::vector<BotDescriptor> bots_;
  BotRunner runner_;
  OpeningPool openings_;
  std::shared_ptr<EventLog> log_;
  ServiceOptions options_;

  mutable std::mutex store_mu_;  // store_, session_locks_, next_session_
  ArenaStore store_;
  mutable std::map<std::string, std::shared_ptr<std::mutex>> session_locks_;
  std::uint64_t next_session_ = 1;

  std::mutex tip_mu_;
  std::mt19937_64 tip_rng_;
};

/// HTTP facade over a Service:
///   POST /api/sessions                 {annotator_id?}
///   GET  /api/sessions/{id}
///   POST /api/sessions/{id}/message    {text}
///   POST /api/sessions/{id}/select     {turn_index, slot}
///   POST /api/sessions/{id}/close
///   GET  /api/ranking                  admin view with ?admin=TOKEN or X-Admin-Token
///   GET  /api/topic-tip
///   GET  /api/bots                     admin only
/// Errors are {error, message} with a status derived from the error code.
class ApiServer {
 public:
  explicit ApiServer(Service& service);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds and serves on a background thread; port 0 picks a free port.
  int start(const std::string& host, int port);
  void listen(const std::string& host, int port);
  void stop();

 private:
  Service& service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace racetrack
