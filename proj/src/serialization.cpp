#include "racetrack/serialization.hpp"

namespace racetrack {

using nlohmann::json;

namespace {

template <class Fn>
auto parsing(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bad ") + what + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) throw;
    throw Error(ErrorCode::ParseError, std::string("bad ") + what + ": " + e.what());
  }
}

template <class T>
json optional_to_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

json to_json(const Utterance& u) {
  return json{{"speaker", speaker_name(u.speaker())}, {"text", u.text()}};
}

Utterance utterance_from_json(const json& j) {
  return parsing("utterance", [&] {
    return Utterance(parse_speaker(j.at("speaker").get<std::string>()), j.at("text").get<std::string>());
  });
}

json to_json(const DialogueHistory& h) {
  json arr = json::array();
  for (const auto& u : h.utterances()) arr.push_back(to_json(u));
  return arr;
}

DialogueHistory history_from_json(const json& j) {
  return parsing("dialogue history", [&] {
    if (!j.is_array()) throw Error(ErrorCode::ParseError, "history is not an array");
    std::vector<Utterance> us;
    for (const auto& item : j) us.push_back(utterance_from_json(item));
    return DialogueHistory(std::move(us));
  });
}

DialogueHistory history_from_json_lenient(const json& j) {
  if (j.is_array() && !j.empty() && j.front().is_string()) {
    return parsing("dialogue history",
                   [&] { return DialogueHistory::from_texts(j.get<std::vector<std::string>>()); });
  }
  return history_from_json(j);
}

json to_json(const KnowledgeSnippet& s) {
  return json{{"text", s.text},
              {"source", knowledge_source_name(s.source)},
              {"label", optional_to_json(s.label)},
              {"classifier_score", optional_to_json(s.classifier_score)},
              {"provenance", optional_to_json(s.provenance)}};
}

KnowledgeSnippet snippet_from_json(const json& j) {
  return parsing("knowledge snippet", [&] {
    KnowledgeSnippet s;
    s.text = j.at("text").get<std::string>();
    if (j.contains("source")) s.source = parse_knowledge_source(j.at("source").get<std::string>());
    s.label = optional_from<int>(j, "label");
    s.classifier_score = optional_from<double>(j, "classifier_score");
    s.provenance = optional_from<std::string>(j, "provenance");
    s.validate();
    return s;
  });
}

json to_json(const KnowledgePool& p) {
  json arr = json::array();
  for (const auto& s : p.snippets) arr.push_back(to_json(s));
  return arr;
}

KnowledgePool pool_from_json(const json& j) {
  return parsing("knowledge pool", [&] {
    KnowledgePool p;
    for (const auto& item : j) p.snippets.push_back(snippet_from_json(item));
    return p;
  });
}

json to_json(const StageTiming& t) {
  return json{{"stage", stage_name(t.stage)}, {"elapsed_ms", t.elapsed_ms}, {"present", t.present}};
}

StageTiming timing_from_json(const json& j) {
  return parsing("stage timing", [&] {
    return StageTiming{parse_stage(j.at("stage").get<std::string>()), j.at("elapsed_ms").get<double>(),
                       j.at("present").get<bool>()};
  });
}

json to_json(const TurnTranscript& t) {
  json timings = json::array();
  for (const auto& s : t.timings) timings.push_back(to_json(s));
  json prompts = json::array();
  for (const auto& p : t.prompts) prompts.push_back({{"stage", stage_name(p.stage)}, {"prompt", p.text}});
  return json{{"mode", pipeline_mode_name(t.mode)},
              {"history_in", to_json(t.history_in)},
              {"need_knowledge_score", optional_to_json(t.need_knowledge_score)},
              {"query", t.query ? json(t.query->text()) : json(nullptr)},
              {"pool", to_json(t.pool)},
              {"knowledge_scores", optional_to_json(t.knowledge_scores)},
              {"response", t.response ? json(t.response->text()) : json(nullptr)},
              {"timings", std::move(timings)},
              {"overall_ms", t.overall_ms},
              {"prompts", std::move(prompts)},
              {"search_error", optional_to_json(t.search_error)},
              {"generation_calls", t.generation_calls},
              {"knowledge_retried", t.knowledge_retried}};
}

TurnTranscript transcript_from_json(const json& j) {
  return parsing("transcript", [&] {
    TurnTranscript t;
    t.mode = parse_pipeline_mode(j.at("mode").get<std::string>());
    t.history_in = history_from_json(j.at("history_in"));
    t.need_knowledge_score = optional_from<double>(j, "need_knowledge_score");
    if (auto q = optional_from<std::string>(j, "query")) t.query = WebQuery(*q);
    t.pool = pool_from_json(j.at("pool"));
    t.knowledge_scores = optional_from<std::vector<double>>(j, "knowledge_scores");
    if (auto r = optional_from<std::string>(j, "response")) t.response = Utterance::system(*r);
    for (const auto& s : j.at("timings")) t.timings.push_back(timing_from_json(s));
    t.overall_ms = j.at("overall_ms").get<double>();
    for (const auto& p : j.at("prompts"))
      t.prompts.push_back({parse_stage(p.at("stage").get<std::string>()), p.at("prompt").get<std::string>()});
    t.search_error = optional_from<std::string>(j, "search_error");
    t.generation_calls = j.at("generation_calls").get<std::size_t>();
    t.knowledge_retried = j.at("knowledge_retried").get<bool>();
    return t;
  });
}

json to_json(const MetricReport& r) {
  return json{{"bleu4", r.bleu4},     {"f1", r.f1},           {"rouge_l", r.rouge_l},
              {"rouge_1", r.rouge_1}, {"rouge_2", r.rouge_2}, {"bert_score", r.bert_score}};
}

}  // namespace racetrack
