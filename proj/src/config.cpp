#include "racetrack/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "racetrack/http_backends.hpp"
#include "racetrack/pipeline.hpp"

namespace racetrack {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string resolve(const std::string& base_dir, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read corpus file " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line))
    if (!trim(line).empty()) out.emplace_back(trim(line));
  return out;
}

std::map<std::string, BackendSpec> parse_backends(const json& j, const char* section, const std::string& base_dir) {
  std::map<std::string, BackendSpec> out;
  if (!j.contains(section)) return out;
  for (const auto& [name, body] : j.at(section).items()) {
    BackendSpec s;
    s.name = name;
    s.type = body.value("type", "http");
    s.url = body.value("url", "");
    s.timeout = std::chrono::milliseconds(body.value("timeout_ms", 30000));
    s.dimension = body.value("dimension", std::size_t{256});
    if (body.contains("documents")) {
      const auto& d = body.at("documents");
      s.documents = d.is_string() ? read_lines(resolve(base_dir, d.get<std::string>()))
                                  : d.get<std::vector<std::string>>();
    }
    if (s.type == "http" && s.url.empty())
      throw Error(ErrorCode::ConfigError, std::string(section) + "." + name + " needs a url");
    out.emplace(name, std::move(s));
  }
  return out;
}

}  // namespace

ServiceConfig parse_config(const json& j, const std::string& base_dir) {
  try {
    ServiceConfig c;
    if (j.contains("listen")) {
      c.host = j.at("listen").value("host", c.host);
      c.port = j.at("listen").value("port", c.port);
    }
    c.pool_size = j.value("pool_size", c.pool_size);
    c.token_budget = j.value("token_budget", c.token_budget);
    c.openings_path = resolve(base_dir, j.at("openings").get<std::string>());
    c.event_log_path = resolve(base_dir, j.at("event_log").get<std::string>());
    c.seed = j.value("seed", std::uint64_t{0});
    c.admin_token = j.value("admin_token", "");
    c.generators = parse_backends(j, "generators", base_dir);
    c.search = parse_backends(j, "search", base_dir);
    c.embedders = parse_backends(j, "embedders", base_dir);
    for (const auto& b : j.at("bots")) {
      BotDescriptor d;
      d.bot_id = b.at("id").get<std::string>();
      d.mode = parse_pipeline_mode(b.value("mode", "full"));
      d.generator = b.at("generator").get<std::string>();
      d.search = b.value("search", "");
      c.bots.push_back(std::move(d));
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, e.what());
  }
}

void ServiceConfig::validate() const {
  if (pool_size < 1) throw Error(ErrorCode::ConfigError, "pool_size must be at least 1");
  if (bots.size() < 2) throw Error(ErrorCode::ConfigError, "at least two bots are required");
  std::set<std::string> ids;
  for (const auto& b : bots) {
    if (!ids.insert(b.bot_id).second) throw Error(ErrorCode::ConfigError, "duplicate bot id " + b.bot_id);
    if (!generators.count(b.generator))
      throw Error(ErrorCode::ConfigError, "bot " + b.bot_id + " uses unknown generator '" + b.generator + "'");
    if (b.mode != PipelineMode::NoKnowledge && !search.count(b.search))
      throw Error(ErrorCode::ConfigError, "bot " + b.bot_id + " uses unknown search '" + b.search + "'");
  }
  for (const auto& [name, s] : generators)
    if (s.type != "http" && s.type != "echo")
      throw Error(ErrorCode::ConfigError, "generator " + name + " has unknown type '" + s.type + "'");
  for (const auto& [name, s] : search)
    if (s.type != "http" && s.type != "corpus")
      throw Error(ErrorCode::ConfigError, "search " + name + " has unknown type '" + s.type + "'");
  for (const auto& [name, s] : embedders)
    if (s.type != "http" && s.type != "hashed")
      throw Error(ErrorCode::ConfigError, "embedder " + name + " has unknown type '" + s.type + "'");
  if (!fs::is_regular_file(openings_path))
    throw Error(ErrorCode::ConfigError, "openings file " + openings_path + " does not exist");
  const auto log_dir = fs::path(event_log_path).parent_path();
  if (event_log_path.empty() || (!log_dir.empty() && !fs::is_directory(log_dir)))
    throw Error(ErrorCode::ConfigError, "event log directory for '" + event_log_path + "' does not exist");
}

ServiceConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path + ": " + e.what());
  }
  auto dir = fs::path(path).parent_path().string();
  return parse_config(j, dir.empty() ? "." : dir);
}

std::string resolve_config_path(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("DIALOG_RACETRACK_CONFIG"); env && *env) return env;
  throw Error(ErrorCode::ConfigError, "no config given; pass --config or set DIALOG_RACETRACK_CONFIG");
}

std::shared_ptr<TextGenerator> make_generator(const BackendSpec& spec) {
  if (spec.type == "http") return std::make_shared<HttpGenerator>(HttpEndpoint{spec.url, spec.timeout});
  if (spec.type == "echo") return std::make_shared<EchoGenerator>();
  throw Error(ErrorCode::ConfigError, "unknown generator type '" + spec.type + "'");
}

std::shared_ptr<SearchEngine> make_search(const BackendSpec& spec) {
  if (spec.type == "http") return std::make_shared<HttpSearch>(HttpEndpoint{spec.url, spec.timeout});
  if (spec.type == "corpus") {
    std::vector<KnowledgeSnippet> docs;
    for (const auto& d : spec.documents) {
      KnowledgeSnippet s;
      s.text = d;
      docs.push_back(std::move(s));
    }
    return std::make_shared<CorpusSearch>(std::move(docs));
  }
  throw Error(ErrorCode::ConfigError, "unknown search type '" + spec.type + "'");
}

std::shared_ptr<Embedder> make_embedder(const BackendSpec& spec) {
  if (spec.type == "http") return std::make_shared<HttpEmbedder>(HttpEndpoint{spec.url, spec.timeout});
  if (spec.type == "hashed") return std::make_shared<HashedTrigramEmbedder>(spec.dimension);
  throw Error(ErrorCode::ConfigError, "unknown embedder type '" + spec.type + "'");
}

}  // namespace racetrack
