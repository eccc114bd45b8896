#include "racetrack/http_backends.hpp"

#include <httplib.h>

namespace racetrack {

using nlohmann::json;

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::EmptyHistory:
    case ErrorCode::InvalidHistory:
    case ErrorCode::InvalidSlot:
    case ErrorCode::SchemaViolation:
    case ErrorCode::ParseError:
    case ErrorCode::TooFewBots:
      return 400;
    case ErrorCode::NotFound:
    case ErrorCode::EmptyResult:
      return 404;
    case ErrorCode::SessionClosed:
    case ErrorCode::TurnPending:
    case ErrorCode::AlreadySelected:
      return 409;
    case ErrorCode::MalformedResponse:
    case ErrorCode::GenerationFailed:
    case ErrorCode::AllBotsFailed:
      return 502;
    case ErrorCode::BackendUnavailable:
      return 503;
    case ErrorCode::Timeout:
      return 504;
    default:
      return 500;
  }
}

namespace {

json post_json(const HttpEndpoint& endpoint, const char* path, const json& body,
               std::string_view stage) {
  httplib::Client client(endpoint.base_url);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  const auto started = std::chrono::steady_clock::now();
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    const auto waited = std::chrono::steady_clock::now() - started;
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout ||
        ((err == httplib::Error::Read || err == httplib::Error::Write) &&
         waited >= endpoint.timeout)) {
      throw Error(ErrorCode::Timeout, endpoint.base_url + path + " timed out", std::string(stage));
    }
    throw Error(ErrorCode::BackendUnavailable,
                endpoint.base_url + path + ": " + httplib::to_string(err), std::string(stage));
  }

  json parsed = json::parse(res->body, nullptr, /*allow_exceptions=*/false);
  if (res->status != 200) {
    if (parsed.is_object() && parsed.value("error", "") == "EmptyResult")
      throw Error(ErrorCode::EmptyResult, "remote search returned no hits", std::string(stage));
    const auto code = res->status >= 500 ? ErrorCode::BackendUnavailable : ErrorCode::MalformedResponse;
    throw Error(code, endpoint.base_url + path + " answered HTTP " + std::to_string(res->status),
                std::string(stage));
  }
  if (parsed.is_discarded())
    throw Error(ErrorCode::MalformedResponse, "response body is not JSON", std::string(stage));
  return parsed;
}

template <class Fn>
auto decode(std::string_view stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), e.what(), std::string(stage));
  }
}

}  // namespace

GenerationResult HttpGenerator::generate(const GenerationRequest& request) {
  request.validate();
  const auto body = post_json(endpoint_, "/v1/generate", to_json(request), "generate");
  return decode("generate", [&] { return generation_result_from_json(body); });
}

SearchResult HttpSearch::search(const WebQuery& query, int top_k) {
  if (top_k < 1) throw Error(ErrorCode::InvalidArgument, "top_k must be positive", "search");
  const auto body = post_json(endpoint_, "/v1/search", search_request_to_json(query, top_k), "search");
  auto result = decode("search", [&] { return search_result_from_json(body); });
  if (result.snippets.empty())
    throw Error(ErrorCode::EmptyResult, "remote search returned no hits", "search");
  if (result.snippets.size() > static_cast<std::size_t>(top_k))
    result.snippets.resize(static_cast<std::size_t>(top_k));
  return result;
}

EmbeddingVector HttpEmbedder::embed(std::string_view text) {
  if (text.empty()) throw Error(ErrorCode::InvalidArgument, "cannot embed empty text", "embed");
  const auto body = post_json(endpoint_, "/v1/embed", embed_request_to_json(text), "embed");
  return decode("embed", [&] { return embedding_from_json(body); });
}

// ---------------------------------------------------------------------------

namespace {

void write_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  res.status = http_status_for(code);
  res.set_content(json{{"error", error_code_name(code)}, {"message", message}}.dump(),
                  "application/json");
}

template <class Fn>
void handle(const httplib::Request& req, httplib::Response& res, Fn&& fn) {
  try {
    const json body = json::parse(req.body);
    res.set_content(fn(body).dump(), "application/json");
  } catch (const Error& e) {
    // Decoding errors on the server side are the client's fault.
    const auto code = e.code() == ErrorCode::MalformedResponse ? ErrorCode::InvalidArgument : e.code();
    write_error(res, code, e.what());
  } catch (const json::exception& e) {
    write_error(res, ErrorCode::InvalidArgument, e.what());
  }
}

}  // namespace

BackendServer::BackendServer(std::shared_ptr<TextGenerator> generator,
                             std::shared_ptr<SearchEngine> search,
                             std::shared_ptr<Embedder> embedder)
    : generator_(std::move(generator)),
      search_(std::move(search)),
      embedder_(std::move(embedder)),
      server_(std::make_unique<httplib::Server>()) {
  if (generator_) {
    server_->Post("/v1/generate", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res, [&](const json& body) {
        return to_json(generator_->generate(generation_request_from_json(body)));
      });
    });
  }
  if (search_) {
    server_->Post("/v1/search", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res, [&](const json& body) {
        const WebQuery query(body.at("query").get<std::string>());
        return to_json(search_->search(query, body.at("top_k").get<int>()));
      });
    });
  }
  if (embedder_) {
    server_->Post("/v1/embed", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res, [&](const json& body) {
        return to_json(embedder_->embed(body.at("text").get<std::string>()));
      });
    });
  }
}

BackendServer::~BackendServer() { stop(); }

int BackendServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0)
    throw Error(ErrorCode::BackendUnavailable, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void BackendServer::listen(const std::string& host, int port) {
  if (!server_->listen(host, port))
    throw Error(ErrorCode::BackendUnavailable, "cannot listen on " + host + ":" + std::to_string(port));
}

void BackendServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace racetrack
