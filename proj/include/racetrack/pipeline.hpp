#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "racetrack/backends.hpp"
#include "racetrack/clock.hpp"
#include "racetrack/core.hpp"
#include "racetrack/prompts.hpp"

namespace racetrack {

enum class PipelineMode {
  Full,           // query generation, search, knowledge-grounded response
  PreClassifier,  // ask whether knowledge is needed before querying
  NoKnowledge,    // response from the dialogue alone
};

enum class Stage { KnowledgeClass, QueryGen, Search, Response };

inline constexpr Stage kAllStages[] = {Stage::KnowledgeClass, Stage::QueryGen, Stage::Search,
                                       Stage::Response};

std::string_view pipeline_mode_name(PipelineMode mode);
PipelineMode parse_pipeline_mode(std::string_view name);
std::string_view stage_name(Stage stage);
Stage parse_stage(std::string_view name);

struct StageTiming {
  Stage stage;
  double elapsed_ms = 0.0;
  bool present = false;  // false when the mode skipped the stage

  bool operator==(const StageTiming&) const = default;
};

struct PromptRecord {
  Stage stage;
  std::string text;

  bool operator==(const PromptRecord&) const = default;
};

/// Everything one execution of the serving workflow did.
struct TurnTranscript {
  DialogueHistory history_in;
  PipelineMode mode = PipelineMode::Full;
  std::optional<double> need_knowledge_score;  // PreClassifier only
  std::optional<WebQuery> query;
  KnowledgePool pool;                          // exactly what the response prompt embedded
  std::optional<std::vector<double>> knowledge_scores;
  std::optional<Utterance> response;           // always set on a returned transcript
  std::vector<StageTiming> timings;            // one per Stage, in kAllStages order
  double overall_ms = 0.0;
  std::vector<PromptRecord> prompts;           // every generation prompt, in call order
  std::optional<std::string> search_error;     // search failed and the pool was left empty
  std::size_t generation_calls = 0;
  bool knowledge_retried = false;

  const StageTiming& timing(Stage stage) const;
  std::size_t present_stage_count() const;
  bool operator==(const TurnTranscript&) const = default;
};

struct PipelineBackends {
  std::shared_ptr<TextGenerator> generator;
  std::shared_ptr<SearchEngine> search;
};

struct PipelineOptions {
  std::size_t pool_size = 1;  // m
  std::size_t token_budget = kDefaultTokenBudget;
  int max_new_tokens = 128;
  double need_knowledge_threshold = 0.5;
  // When every returned knowledge score is below helpful_threshold, regenerate
  // once with the next-ranked search result in place of the pool.
  bool iterative_injection = false;
  double helpful_threshold = 0.5;
};

/// Runs one turn. `history` must end with the user's latest utterance.
///
/// Generation failures abort with GenerationFailed (stage set, cause kept).
/// Search failures leave the pool empty, record search_error and still
/// produce a response.
TurnTranscript run_turn(const DialogueHistory& history, PipelineMode mode,
                        const PipelineBackends& backends, Clock& clock,
                        const PipelineOptions& options = {});

}  // namespace racetrack
