#pragma once

#include <nlohmann/json.hpp>

#include "racetrack/core.hpp"
#include "racetrack/metrics.hpp"
#include "racetrack/pipeline.hpp"

namespace racetrack {

// JSON encodings of the domain types. Decoders throw ParseError on bad input.

nlohmann::json to_json(const Utterance& u);
Utterance utterance_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DialogueHistory& h);
DialogueHistory history_from_json(const nlohmann::json& j);
/// Accepts either [{speaker, text}, ...] or a plain list of strings.
DialogueHistory history_from_json_lenient(const nlohmann::json& j);

nlohmann::json to_json(const KnowledgeSnippet& s);
KnowledgeSnippet snippet_from_json(const nlohmann::json& j);

nlohmann::json to_json(const KnowledgePool& p);
KnowledgePool pool_from_json(const nlohmann::json& j);

nlohmann::json to_json(const StageTiming& t);
StageTiming timing_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TurnTranscript& t);
TurnTranscript transcript_from_json(const nlohmann::json& j);

nlohmann::json to_json(const MetricReport& r);

}  // namespace racetrack
