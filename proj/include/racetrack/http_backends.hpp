#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <thread>

#include "racetrack/backends.hpp"

namespace httplib {
class Server;
}

namespace racetrack {

/// Connection settings for one remote backend, e.g. "http://127.0.0.1:9000".
struct HttpEndpoint {
  std::string base_url;
  std::chrono::milliseconds timeout = kDefaultBackendTimeout;
};

// Clients for the JSON protocol:
//   POST /v1/generate {prompt, max_new_tokens, want_token_logprobs, want_knowledge_scores}
//   POST /v1/search   {query, top_k}  -> {snippets: [{text, provenance}]}
//   POST /v1/embed    {text}          -> {vector: [...]}
// Transport failures map to BackendUnavailable, timeouts to Timeout and
// undecodable bodies to MalformedResponse.

class HttpGenerator final : public TextGenerator {
 public:
  explicit HttpGenerator(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  GenerationResult generate(const GenerationRequest& request) override;

 private:
  HttpEndpoint endpoint_;
};

class HttpSearch final : public SearchEngine {
 public:
  explicit HttpSearch(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  SearchResult search(const WebQuery& query, int top_k) override;

 private:
  HttpEndpoint endpoint_;
};

class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  EmbeddingVector embed(std::string_view text) override;

 private:
  HttpEndpoint endpoint_;
};

/// Serves in-process backends over the same protocol. Any of the three may be
/// null, in which case its route answers 404.
class BackendServer {
 public:
  BackendServer(std::shared_ptr<TextGenerator> generator, std::shared_ptr<SearchEngine> search,
                std::shared_ptr<Embedder> embedder);
  ~BackendServer();
  BackendServer(const BackendServer&) = delete;
  BackendServer& operator=(const BackendServer&) = delete;

  /// Binds and serves on a background thread; port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop() is called.
  void listen(const std::string& host, int port);
  void stop();

 private:
  std::shared_ptr<TextGenerator> generator_;
  std::shared_ptr<SearchEngine> search_;
  std::shared_ptr<Embedder> embedder_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

/// HTTP status used when an Error crosses the wire, and its inverse.
int http_status_for(ErrorCode code);

}  // namespace racetrack
