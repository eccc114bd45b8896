#include "racetrack/backends.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "racetrack/prompts.hpp"

namespace racetrack {

using nlohmann::json;

void GenerationRequest::validate() const {
  if (trim(prompt).empty()) throw Error(ErrorCode::InvalidArgument, "generation prompt is empty");
  if (max_new_tokens < 1) throw Error(ErrorCode::InvalidArgument, "max_new_tokens must be positive");
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void MockLatency::simulate(std::string_view stage) const {
  if (unavailable)
    throw Error(ErrorCode::BackendUnavailable, "mock backend marked unavailable", std::string(stage));
  if (delay > timeout) {
    clock->sleep_for(timeout);
    throw Error(ErrorCode::Timeout,
                "no reply within " + std::to_string(timeout.count()) + " ms", std::string(stage));
  }
  clock->sleep_for(delay);
}

std::size_t expected_knowledge_scores(std::string_view prompt) {
  const auto kind = classify_prompt(prompt);
  if (kind == PromptKind::KnowledgeResponse) {
    const auto parsed = parse_knowledge_prompt(prompt);
    return parsed ? parsed->snippets.size() : 0;
  }
  if (kind == PromptKind::NeedKnowledge) return 1;
  return 0;
}

namespace {

std::vector<double> default_logprobs(std::string_view text) {
  // One entry per output token, deterministic in the text.
  const auto tokens = tokenize(text);
  std::vector<double> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens.tokens)
    out.push_back(-static_cast<double>(fnv1a64(t) % 1000) / 1000.0);
  return out;
}

void fill_optional_fields(const GenerationRequest& request, GenerationResult& result,
                          const ScriptedReply* scripted) {
  if (request.want_knowledge_scores) {
    if (scripted && scripted->knowledge_scores)
      result.knowledge_scores = scripted->knowledge_scores;
    else
      result.knowledge_scores = std::vector<double>(expected_knowledge_scores(request.prompt), 1.0);
  }
  if (request.want_token_logprobs) {
    if (scripted && scripted->token_logprobs)
      result.token_logprobs = scripted->token_logprobs;
    else
      result.token_logprobs = default_logprobs(result.text);
  }
}

}  // namespace

GenerationResult EchoGenerator::generate(const GenerationRequest& request) {
  request.validate();
  ++calls_;
  latency_.simulate("generate");
  GenerationResult result;
  result.text = request.prompt;
  fill_optional_fields(request, result, nullptr);
  return result;
}

ScriptedGenerator::ScriptedGenerator(std::optional<ScriptedReply> fallback, MockLatency latency)
    : fallback_(std::move(fallback)), latency_(std::move(latency)) {}

ScriptedGenerator& ScriptedGenerator::add(std::string_view prompt, ScriptedReply reply) {
  return add_by_hash(fnv1a64(prompt), std::move(reply));
}

ScriptedGenerator& ScriptedGenerator::add_by_hash(std::uint64_t prompt_hash, ScriptedReply reply) {
  replies_[prompt_hash] = std::move(reply);
  return *this;
}

GenerationResult ScriptedGenerator::generate(const GenerationRequest& request) {
  request.validate();
  ++calls_;
  {
    std::lock_guard lock(seen_mu_);
    seen_.push_back(request.prompt);
  }
  latency_.simulate("generate");
  const ScriptedReply* reply = nullptr;
  if (auto it = replies_.find(fnv1a64(request.prompt)); it != replies_.end())
    reply = &it->second;
  else if (fallback_)
    reply = &*fallback_;
  if (!reply)
    throw Error(ErrorCode::MalformedResponse, "no scripted reply for prompt", "generate");
  GenerationResult result;
  result.text = reply->text;
  fill_optional_fields(request, result, reply);
  return result;
}

std::vector<std::string> ScriptedGenerator::prompts_seen() const {
  std::lock_guard lock(seen_mu_);
  return seen_;
}

// ---------------------------------------------------------------------------

namespace {

std::unordered_map<std::string, std::size_t> count_tokens(const TokenSequence& seq) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& t : seq.tokens) ++counts[t];
  return counts;
}

}  // namespace

CorpusSearch::CorpusSearch(std::vector<KnowledgeSnippet> documents, MockLatency latency)
    : documents_(std::move(documents)), latency_(std::move(latency)) {
  document_tokens_.reserve(documents_.size());
  for (const auto& d : documents_) document_tokens_.push_back(tokenize(d.text));
}

SearchResult CorpusSearch::search(const WebQuery& query, int top_k) {
  if (top_k < 1) throw Error(ErrorCode::InvalidArgument, "top_k must be positive", "search");
  ++calls_;
  latency_.simulate("search");

  const auto query_counts = count_tokens(tokenize(query.text()));
  std::vector<std::pair<std::size_t, std::size_t>> scored;  // (overlap, index)
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    std::size_t overlap = 0;
    for (const auto& [token, n] : count_tokens(document_tokens_[i])) {
      if (auto it = query_counts.find(token); it != query_counts.end())
        overlap += std::min(n, it->second);
    }
    if (overlap > 0) scored.emplace_back(overlap, i);
  }
  if (scored.empty()) throw Error(ErrorCode::EmptyResult, "no document matches the query", "search");
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  SearchResult result;
  const auto keep = std::min(scored.size(), static_cast<std::size_t>(top_k));
  for (std::size_t r = 0; r < keep; ++r) {
    KnowledgeSnippet s = documents_[scored[r].second];
    s.source = KnowledgeSource::WebSearch;
    if (!s.provenance) s.provenance = "corpus:" + std::to_string(scored[r].second);
    result.snippets.push_back(std::move(s));
  }
  return result;
}

HashedTrigramEmbedder::HashedTrigramEmbedder(std::size_t dimension, MockLatency latency)
    : dimension_(dimension), latency_(std::move(latency)) {
  if (dimension_ == 0) throw Error(ErrorCode::InvalidArgument, "embedding dimension must be positive");
}

EmbeddingVector HashedTrigramEmbedder::embed(std::string_view text) {
  if (text.empty()) throw Error(ErrorCode::InvalidArgument, "cannot embed empty text", "embed");
  latency_.simulate("embed");
  const auto cps = decode_utf8(text);
  EmbeddingVector v;
  v.components.assign(dimension_, 0.0);
  auto add_gram = [&](std::size_t begin, std::size_t len) {
    std::string gram;
    for (std::size_t k = begin; k < begin + len; ++k) gram += encode_utf8(cps[k]);
    v.components[fnv1a64(gram) % dimension_] += 1.0;
  };
  if (cps.size() < 3) {
    add_gram(0, cps.size());
  } else {
    for (std::size_t i = 0; i + 3 <= cps.size(); ++i) add_gram(i, 3);
  }
  double norm = 0.0;
  for (double c : v.components) norm += c * c;
  norm = std::sqrt(norm);
  for (double& c : v.components) c /= norm;
  return v;
}

// ---------------------------------------------------------------------------
// Wire format

namespace {

template <class T>
T field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name))
    throw Error(ErrorCode::MalformedResponse, std::string("missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("bad field '") + name + "': " + e.what());
  }
}

template <class T>
std::optional<T> optional_field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name) || j.at(name).is_null()) return std::nullopt;
  return field<T>(j, name);
}

}  // namespace

json to_json(const GenerationRequest& r) {
  return json{{"prompt", r.prompt},
              {"max_new_tokens", r.max_new_tokens},
              {"want_token_logprobs", r.want_token_logprobs},
              {"want_knowledge_scores", r.want_knowledge_scores}};
}

GenerationRequest generation_request_from_json(const json& j) {
  GenerationRequest r;
  r.prompt = field<std::string>(j, "prompt");
  r.max_new_tokens = optional_field<int>(j, "max_new_tokens").value_or(128);
  r.want_token_logprobs = optional_field<bool>(j, "want_token_logprobs").value_or(false);
  r.want_knowledge_scores = optional_field<bool>(j, "want_knowledge_scores").value_or(false);
  return r;
}

json to_json(const GenerationResult& r) {
  json j{{"text", r.text}};
  if (r.token_logprobs) j["token_logprobs"] = *r.token_logprobs;
  if (r.knowledge_scores) j["knowledge_scores"] = *r.knowledge_scores;
  return j;
}

GenerationResult generation_result_from_json(const json& j) {
  GenerationResult r;
  r.text = field<std::string>(j, "text");
  r.token_logprobs = optional_field<std::vector<double>>(j, "token_logprobs");
  r.knowledge_scores = optional_field<std::vector<double>>(j, "knowledge_scores");
  if (r.token_logprobs) {
    for (double lp : *r.token_logprobs)
      if (!(lp <= 0.0)) throw Error(ErrorCode::MalformedResponse, "token logprob above zero");
  }
  if (r.knowledge_scores) {
    for (double s : *r.knowledge_scores)
      if (!(s >= 0.0 && s <= 1.0))
        throw Error(ErrorCode::MalformedResponse, "knowledge score outside [0,1]");
  }
  return r;
}

json search_request_to_json(const WebQuery& query, int top_k) {
  return json{{"query", query.text()}, {"top_k", top_k}};
}

json to_json(const SearchResult& r) {
  json snippets = json::array();
  for (const auto& s : r.snippets) {
    json item{{"text", s.text}};
    item["provenance"] = s.provenance ? json(*s.provenance) : json(nullptr);
    snippets.push_back(std::move(item));
  }
  return json{{"snippets", std::move(snippets)}};
}

SearchResult search_result_from_json(const json& j) {
  SearchResult r;
  const auto items = field<json>(j, "snippets");
  if (!items.is_array()) throw Error(ErrorCode::MalformedResponse, "'snippets' is not an array");
  for (const auto& item : items) {
    KnowledgeSnippet s;
    s.text = field<std::string>(item, "text");
    s.source = KnowledgeSource::WebSearch;
    s.provenance = optional_field<std::string>(item, "provenance");
    r.snippets.push_back(std::move(s));
  }
  return r;
}

json embed_request_to_json(std::string_view text) { return json{{"text", text}}; }

json to_json(const EmbeddingVector& v) { return json{{"vector", v.components}}; }

EmbeddingVector embedding_from_json(const json& j) {
  EmbeddingVector v;
  v.components = field<std::vector<double>>(j, "vector");
  for (double c : v.components)
    if (!std::isfinite(c)) throw Error(ErrorCode::MalformedResponse, "non-finite embedding component");
  return v;
}

}  // namespace racetrack
