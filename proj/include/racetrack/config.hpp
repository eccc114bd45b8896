#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "racetrack/arena.hpp"
#include "racetrack/backends.hpp"

namespace racetrack {

/// A named backend binding. `type` is "http" (remote endpoint) or one of the
/// built-in mocks: "echo" for generators, "corpus" for search and "hashed"
/// for embedders.
struct BackendSpec {
  std::string name;
  std::string type;
  std::string url;
  std::chrono::milliseconds timeout{30000};
  std::vector<std::string> documents;  // corpus search
  std::size_t dimension = 256;         // hashed embedder
};

/// Service configuration file:
///
///   {
///     "listen": {"host": "127.0.0.1", "port": 8080},
///     "pool_size": 1,
///     "token_budget": 512,
///     "openings": "data/openings.jsonl",
///     "event_log": "var/events.jsonl",
///     "seed": 7,
///     "admin_token": "change-me",
///     "generators": {"glm": {"type": "http", "url": "http://127.0.0.1:9000", "timeout_ms": 30000}},
///     "search": {"web": {"type": "http", "url": "http://127.0.0.1:9000"}},
///     "embedders": {"fallback": {"type": "hashed", "dimension": 256}},
///     "bots": [{"id": "bot-1", "mode": "full", "generator": "glm", "search": "web"}]
///   }
///
/// Relative paths resolve against the directory holding the file.
struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t pool_size = 1;
  std::size_t token_budget = 512;
  std::string openings_path;
  std::string event_log_path;
  std::uint64_t seed = 0;
  std::string admin_token;
  std::map<std::string, BackendSpec> generators;
  std::map<std::string, BackendSpec> search;
  std::map<std::string, BackendSpec> embedders;
  std::vector<BotDescriptor> bots;

  /// ConfigError on any inconsistency: fewer than two bots, unknown backend
  /// names, pool size 0, missing openings file or event-log directory.
  void validate() const;
};

/// ConfigError for malformed content.
ServiceConfig parse_config(const nlohmann::json& j, const std::string& base_dir = ".");
ServiceConfig load_config(const std::string& path);
/// `flag` when non-empty, otherwise DIALOG_RACETRACK_CONFIG. ConfigError if
/// neither is set.
std::string resolve_config_path(const std::string& flag);

std::shared_ptr<TextGenerator> make_generator(const BackendSpec& spec);
std::shared_ptr<SearchEngine> make_search(const BackendSpec& spec);
std::shared_ptr<Embedder> make_embedder(const BackendSpec& spec);

}  // namespace racetrack
