#include "racetrack/service.hpp"

#include <chrono>
#include <cstdio>

#include <httplib.h>

#include "racetrack/http_backends.hpp"

namespace racetrack {

using nlohmann::json;

namespace {

std::int64_t system_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string session_name(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(n));
  return buf;
}

std::uint64_t session_seed(std::uint64_t service_seed, std::uint64_t n) {
  std::seed_seq seq{static_cast<std::uint32_t>(service_seed), static_cast<std::uint32_t>(service_seed >> 32),
                    static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(n >> 32)};
  std::mt19937_64 rng(seq);
  return rng();
}

}  // namespace

Service::Service(std::vector<BotDescriptor> bots, BotRunner runner, OpeningPool openings,
                 std::shared_ptr<EventLog> log, ServiceOptions options,
                 const std::vector<EventRecord>& past_events)
    : bots_(std::move(bots)),
      runner_(std::move(runner)),
      openings_(std::move(openings)),
      log_(std::move(log)),
      options_(std::move(options)),
      tip_rng_(options_.seed) {
  if (!log_) log_ = std::make_shared<EventLog>();
  if (!options_.now_ms) options_.now_ms = system_ms;
  store_ = replay(past_events);
  next_session_ = store_.size() + 1;
}

std::unique_ptr<Service> Service::from_config(const ServiceConfig& config) {
  config.validate();
  std::map<std::string, std::shared_ptr<TextGenerator>> generators;
  std::map<std::string, std::shared_ptr<SearchEngine>> searches;
  for (const auto& [name, spec] : config.generators) generators[name] = make_generator(spec);
  for (const auto& [name, spec] : config.search) searches[name] = make_search(spec);

  std::map<std::string, PipelineBackends> backends;
  for (const auto& bot : config.bots) {
    PipelineBackends b;
    b.generator = generators.at(bot.generator);
    if (auto it = searches.find(bot.search); it != searches.end()) b.search = it->second;
    backends[bot.bot_id] = std::move(b);
  }
  PipelineOptions pipeline;
  pipeline.pool_size = config.pool_size;
  pipeline.token_budget = config.token_budget;
  auto clock = std::make_shared<SteadyClock>();
  BotRunner runner = [backends, pipeline, clock](const BotDescriptor& bot, const DialogueHistory& h) {
    return run_turn(h, bot.mode, backends.at(bot.bot_id), *clock, pipeline);
  };

  auto past = read_event_file(config.event_log_path);
  const auto last = past.empty() ? 0 : past.back().seq;
  auto log = std::make_shared<EventLog>(config.event_log_path, last);
  ServiceOptions options;
  options.seed = config.seed;
  options.admin_token = config.admin_token;
  return std::make_unique<Service>(config.bots, std::move(runner), OpeningPool::load(config.openings_path),
                                   std::move(log), std::move(options), past);
}

std::int64_t Service::now() const { return options_.now_ms(); }

std::shared_ptr<std::mutex> Service::session_lock(const std::string& session_id) const {
  std::lock_guard lock(store_mu_);
  if (!store_.contains(session_id)) throw Error(ErrorCode::NotFound, "no session " + session_id);
  auto& m = session_locks_[session_id];
  if (!m) m = std::make_shared<std::mutex>();
  return m;
}

bool Service::is_admin(const std::string& token) const {
  return !options_.admin_token.empty() && token == options_.admin_token;
}

json Service::create_session(const std::string& annotator_id) {
  std::lock_guard lock(store_mu_);
  std::string id;
  do {
    id = session_name(next_session_++);
  } while (store_.contains(id));
  const auto seed = session_seed(options_.seed, next_session_ - 1);
  const auto ts = now();
  auto session = ArenaSession::create(id, bots_, seed, ts, annotator_id);

  json bots = json::array();
  for (const auto& b : bots_) bots.push_back(to_json(b));
  log_->append(EventKind::SessionCreated, id,
               json{{"bots", std::move(bots)}, {"seed", seed}, {"annotator_id", annotator_id}}, ts);
  return store_.add(std::move(session)).client_view();
}

json Service::session_view(const std::string& session_id) const {
  std::lock_guard lock(store_mu_);
  return store_.get(session_id).client_view();
}

json Service::post_message(const std::string& session_id, const std::string& text) {
  auto sl = session_lock(session_id);
  std::lock_guard session_guard(*sl);
  ArenaSession copy = [&] {
    std::lock_guard lock(store_mu_);
    return store_.get(session_id);
  }();
  // Bots run without holding the store lock; the session lock keeps the copy current.
  ArenaTurn turn = copy.prepare_turn(text, runner_);

  std::lock_guard lock(store_mu_);
  log_->append(EventKind::TurnOffered, session_id, json{{"turn", to_json(turn)}}, now());
  auto& session = store_.get(session_id);
  session.apply_turn(std::move(turn));
  return client_turn_payload(session.turns().back());
}

json Service::select(const std::string& session_id, std::size_t turn_index, const std::string& slot_text) {
  auto sl = session_lock(session_id);
  std::lock_guard session_guard(*sl);
  std::lock_guard lock(store_mu_);
  auto& session = store_.get(session_id);
  const auto slot = parse_slot_label(slot_text);
  if (!slot) throw Error(ErrorCode::InvalidSlot, "'" + slot_text + "' is not a slot label");

  auto reply = [&] {
    return json{{"session_id", session_id},
                {"turn_index", turn_index},
                {"slot", slot_label(*slot)},
                {"completed_turns", session.verdict().completed_turns}};
  };
  if (turn_index >= 1 && turn_index <= session.turns().size()) {
    const auto& turn = session.turns()[turn_index - 1];
    if (turn.selected_slot && *turn.selected_slot == *slot) return reply();
  }
  const auto bot = session.check_selection(turn_index, *slot);
  log_->append(EventKind::ResponseSelected, session_id,
               json{{"turn_index", turn_index}, {"slot", *slot}, {"bot_id", bot}}, now());
  session.apply_selection(turn_index, *slot);
  return reply();
}

json Service::close(const std::string& session_id) {
  auto sl = session_lock(session_id);
  std::lock_guard session_guard(*sl);
  std::lock_guard lock(store_mu_);
  auto& session = store_.get(session_id);
  const auto verdict = session.check_close();
  const auto ts = now();
  log_->append(EventKind::SessionClosed, session_id,
               json{{"valid", verdict.valid}, {"completed_turns", verdict.completed_turns}}, ts);
  session.apply_close(ts);
  return json{{"session_id", session_id},
              {"state", "closed"},
              {"valid", verdict.valid},
              {"completed_turns", verdict.completed_turns}};
}

json Service::ranking_view(bool admin) const {
  std::vector<RankingEntry> entries;
  {
    std::lock_guard lock(store_mu_);
    entries = ranking(store_);
  }
  json out = json::array();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    json row{{"rank", i + 1}, {"selections", entries[i].selections}, {"valid_sessions", entries[i].valid_sessions}};
    if (admin) row["bot_id"] = entries[i].bot_id;
    out.push_back(std::move(row));
  }
  return out;
}

json Service::topic_tip() {
  std::lock_guard lock(tip_mu_);
  const auto& o = racetrack::topic_tip(openings_, tip_rng_);
  return json{{"id", o.id},
              {"text", o.text},
              {"category", o.category == OpeningCategory::Chitchat ? "chitchat" : "knowledge"},
              {"question_type", question_type_name(o.question_type)}};
}

json Service::bots_view() const {
  json out = json::array();
  for (const auto& b : bots_) out.push_back(to_json(b));
  return out;
}

ArenaStore Service::snapshot() const {
  std::lock_guard lock(store_mu_);
  return store_;
}

// ---------------------------------------------------------------------------

namespace {

void write_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", code}, {"message", message}}.dump(), "application/json");
}

template <class Fn>
void respond(httplib::Response& res, Fn&& fn) {
  try {
    res.set_content(fn().dump(), "application/json");
  } catch (const Error& e) {
    write_error(res, http_status_for(e.code()), error_code_name(e.code()), e.what());
  } catch (const json::exception& e) {
    write_error(res, 400, "InvalidArgument", e.what());
  } catch (const std::exception& e) {
    write_error(res, 500, "Internal", e.what());
  }
}

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  auto j = json::parse(req.body);
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
  return j;
}

std::string admin_token(const httplib::Request& req) {
  if (req.has_param("admin")) return req.get_param_value("admin");
  return req.get_header_value("X-Admin-Token");
}

}  // namespace

ApiServer::ApiServer(Service& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;
  s.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] {
      const auto body = body_of(req);
      auto annotator = body.value("annotator_id", req.get_header_value("X-Annotator"));
      return service_.create_session(annotator);
    });
  });
  s.Get(R"(/api/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return service_.session_view(req.matches[1]); });
  });
  s.Post(R"(/api/sessions/([^/]+)/message)", [this](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] {
      const auto body = body_of(req);
      return service_.post_message(req.matches[1], body.at("text").get<std::string>());
    });
  });
  s.Post(R"(/api/sessions/([^/]+)/select)", [this](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] {
      const auto body = body_of(req);
      return service_.select(req.matches[1], body.at("turn_index").get<std::size_t>(),
                             body.at("slot").get<std::string>());
    });
  });
  s.Post(R"(/api/sessions/([^/]+)/close)", [this](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return service_.close(req.matches[1]); });
  });
  s.Get("/api/ranking", [this](const httplib::Request& req, httplib::Response& res) {
    const auto token = admin_token(req);
    if (!token.empty() && !service_.is_admin(token)) {
      write_error(res, 403, "Forbidden", "admin token rejected");
      return;
    }
    respond(res, [&] { return service_.ranking_view(!token.empty()); });
  });
  s.Get("/api/topic-tip", [this](const httplib::Request&, httplib::Response& res) {
    respond(res, [&] { return service_.topic_tip(); });
  });
  s.Get("/api/bots", [this](const httplib::Request& req, httplib::Response& res) {
    if (!service_.is_admin(admin_token(req))) {
      write_error(res, 403, "Forbidden", "admin token required");
      return;
    }
    respond(res, [&] { return service_.bots_view(); });
  });
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(ErrorCode::BackendUnavailable, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void ApiServer::listen(const std::string& host, int port) {
  if (!server_->listen(host, port))
    throw Error(ErrorCode::BackendUnavailable, "cannot listen on " + host + ":" + std::to_string(port));
}

void ApiServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace racetrack
