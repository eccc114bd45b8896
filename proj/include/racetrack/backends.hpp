#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "racetrack/clock.hpp"
#include "racetrack/core.hpp"

namespace racetrack {

inline constexpr std::chrono::milliseconds kDefaultBackendTimeout{15000};
inline constexpr std::size_t kDefaultEmbeddingDimension = 256;

struct GenerationRequest {
  std::string prompt;
  int max_new_tokens = 128;
  bool want_token_logprobs = false;
  bool want_knowledge_scores = false;

  void validate() const;
};

struct GenerationResult {
  std::string text;
  std::optional<std::vector<double>> token_logprobs;    // each <= 0
  std::optional<std::vector<double>> knowledge_scores;  // one per snippet, each in [0,1]

  bool operator==(const GenerationResult&) const = default;
};

struct SearchResult {
  std::vector<KnowledgeSnippet> snippets;  // best first

  bool operator==(const SearchResult&) const = default;
};

struct EmbeddingVector {
  std::vector<double> components;
  std::size_t dimension() const noexcept { return components.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

// The three external capabilities. Implementations must tolerate concurrent
// calls and must bound every call by a timeout (ErrorCode::Timeout).

class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  virtual GenerationResult generate(const GenerationRequest& request) = 0;
};

class SearchEngine {
 public:
  virtual ~SearchEngine() = default;
  /// Throws InvalidArgument for top_k < 1 and EmptyResult when nothing matches.
  virtual SearchResult search(const WebQuery& query, int top_k) = 0;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbeddingVector embed(std::string_view text) = 0;
};

std::uint64_t fnv1a64(std::string_view data);

// ---------------------------------------------------------------------------
// In-process mocks

/// Injected behaviour shared by all mocks. A delay longer than the timeout
/// sleeps for the timeout and then fails with Timeout.
struct MockLatency {
  std::chrono::milliseconds delay{0};
  std::chrono::milliseconds timeout = kDefaultBackendTimeout;
  bool unavailable = false;
  std::shared_ptr<Clock> clock = std::make_shared<SteadyClock>();

  void simulate(std::string_view stage) const;
};

/// Number of knowledge scores a generator owes for `prompt`: the snippet count
/// of a knowledge prompt, 1 for a need-knowledge prompt, 0 otherwise.
std::size_t expected_knowledge_scores(std::string_view prompt);

/// Returns the prompt as the generated text.
class EchoGenerator final : public TextGenerator {
 public:
  explicit EchoGenerator(MockLatency latency = {}) : latency_(std::move(latency)) {}
  GenerationResult generate(const GenerationRequest& request) override;
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  MockLatency latency_;
  std::atomic<std::size_t> calls_{0};
};

struct ScriptedReply {
  std::string text;
  std::optional<std::vector<double>> knowledge_scores;
  std::optional<std::vector<double>> token_logprobs;
};

/// Replies looked up by the FNV-1a hash of the prompt. Unknown prompts get the
/// fallback reply, or MalformedResponse when there is none. Populate the table
/// before sharing the instance across threads.
class ScriptedGenerator final : public TextGenerator {
 public:
  explicit ScriptedGenerator(std::optional<ScriptedReply> fallback = std::nullopt,
                             MockLatency latency = {});

  ScriptedGenerator& add(std::string_view prompt, ScriptedReply reply);
  ScriptedGenerator& add_by_hash(std::uint64_t prompt_hash, ScriptedReply reply);

  GenerationResult generate(const GenerationRequest& request) override;

  std::size_t calls() const noexcept { return calls_.load(); }
  std::vector<std::string> prompts_seen() const;

 private:
  std::map<std::uint64_t, ScriptedReply> replies_;
  std::optional<ScriptedReply> fallback_;
  MockLatency latency_;
  std::atomic<std::size_t> calls_{0};
  mutable std::mutex seen_mu_;
  std::vector<std::string> seen_;
};

/// Ranks a local snippet store by clipped token overlap with the query
/// (CharCJKWordLatin tokens). Ties keep insertion order; documents with no
/// overlap are never returned.
class CorpusSearch final : public SearchEngine {
 public:
  explicit CorpusSearch(std::vector<KnowledgeSnippet> documents, MockLatency latency = {});
  SearchResult search(const WebQuery& query, int top_k) override;
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  std::vector<KnowledgeSnippet> documents_;
  std::vector<TokenSequence> document_tokens_;
  MockLatency latency_;
  std::atomic<std::size_t> calls_{0};
};

/// Hashed character-trigram counts, L2-normalized. Texts shorter than three
/// codepoints hash as a single gram.
class HashedTrigramEmbedder final : public Embedder {
 public:
  explicit HashedTrigramEmbedder(std::size_t dimension = kDefaultEmbeddingDimension,
                                 MockLatency latency = {});
  EmbeddingVector embed(std::string_view text) override;
  std::size_t dimension() const noexcept { return dimension_; }

 private:
  std::size_t dimension_;
  MockLatency latency_;
};

// ---------------------------------------------------------------------------
// Wire format (field names are part of the protocol)

nlohmann::json to_json(const GenerationRequest& r);
GenerationRequest generation_request_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GenerationResult& r);
GenerationResult generation_result_from_json(const nlohmann::json& j);
nlohmann::json search_request_to_json(const WebQuery& query, int top_k);
nlohmann::json to_json(const SearchResult& r);
SearchResult search_result_from_json(const nlohmann::json& j);
nlohmann::json embed_request_to_json(std::string_view text);
nlohmann::json to_json(const EmbeddingVector& v);
EmbeddingVector embedding_from_json(const nlohmann::json& j);

}  // namespace racetrack
