#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "racetrack/core.hpp"
#include "racetrack/pipeline.hpp"
#include "racetrack/prompts.hpp"

namespace racetrack {

enum class InstanceSource { KnowledgeDialogue, QA, OnlineService };
std::string_view instance_source_name(InstanceSource s);
InstanceSource parse_instance_source(std::string_view name);

/// Input record flavours accepted by build_instances, named on the command
/// line as kdialog, qa and service.
enum class BuildMode { KnowledgeDialogue, QA, Service };
BuildMode parse_build_mode(std::string_view name);

struct TrainingInstance {
  DialogueHistory history;  // ends with the user turn being answered
  Utterance response = Utterance::system("-");
  KnowledgePool pool;
  std::vector<int> labels;  // one per pool snippet
  InstanceSource source = InstanceSource::KnowledgeDialogue;

  /// SchemaViolation unless labels match the pool and lie in {0,1}.
  void validate() const;
  bool operator==(const TrainingInstance&) const = default;
};

struct EntityCandidate {
  std::string surface;
  std::string description;
  double confidence = 0.0;  // entity-linking confidence in [0,1]
};

/// Record shapes:
///   kdialog: {history, response, knowledge: string | [string | snippet]}
///   qa:      {question, answer, document}
///   service: {history, response, entities: [{surface, description}]}
/// SchemaViolation names the offending record index.
std::vector<TrainingInstance> build_instances(const std::vector<nlohmann::json>& records, BuildMode mode);

/// Appends each candidate with confidence < tau as a label-0 snippet.
TrainingInstance inject_negatives(TrainingInstance instance, const std::vector<EntityCandidate>& candidates,
                                  double tau = 0.5);

/// The knowledge-response prompt for the instance's pool and history.
std::string serialize_training_prompt(const TrainingInstance& instance,
                                      std::size_t token_budget = kDefaultTokenBudget);

nlohmann::json to_json(const TrainingInstance& instance);
TrainingInstance instance_from_json(const nlohmann::json& j);
std::vector<EntityCandidate> candidates_from_json(const nlohmann::json& j);

// Losses are minimization quantities: negative log-likelihood and binary
// cross entropy.

/// -sum(logprobs). PositiveLogProb on any entry above zero.
double loss_main(std::span<const double> token_logprobs);

enum class AuxLossMode { FullBCE, PositiveOnly };

/// Binary cross entropy over the knowledge labels. LengthMismatch on unequal
/// sizes, DegenerateScore for a score outside (0,1).
double loss_aux(std::span<const int> labels, std::span<const double> scores,
                AuxLossMode mode = AuxLossMode::FullBCE);

struct LossBreakdown {
  double loss_main = 0.0;
  double loss_aux = 0.0;
  double lambda = 1.0;
  double total = 0.0;
};

LossBreakdown loss_total(double main, double aux, double lambda = 1.0);

/// Keeps transcripts whose best knowledge score reaches `threshold`.
/// Transcripts without scores are dropped.
std::vector<TurnTranscript> bootstrap_filter(const std::vector<TurnTranscript>& transcripts,
                                             double threshold = 0.5);

}  // namespace racetrack
