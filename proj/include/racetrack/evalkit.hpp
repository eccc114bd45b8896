#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "racetrack/backends.hpp"
#include "racetrack/clock.hpp"
#include "racetrack/core.hpp"
#include "racetrack/metrics.hpp"
#include "racetrack/pipeline.hpp"

namespace racetrack {

/// One bot, seen as a function from history (ending with a user turn) to a
/// transcript.
using TurnFn = std::function<TurnTranscript(const DialogueHistory&)>;

TurnFn make_turn_fn(PipelineBackends backends, PipelineMode mode, std::shared_ptr<Clock> clock,
                    PipelineOptions options = {});

/// The bot talks to itself for `turns` exchanges starting from `opening`.
/// Each side sees the conversation relabeled so that it is the System; when
/// that would put a System utterance first, the leading utterance is left
/// out of its view. Returns 2*turns utterances labeled from the opener's side.
DialogueHistory self_chat(std::string_view opening, const TurnFn& bot, std::size_t turns);

// ---------------------------------------------------------------------------
// Human annotation

enum class AnnotationLevel { Utterance, Session };
enum class HumanMetric {
  Coherence,
  Informativeness,
  Safety,
  Inspiration,
  Hallucination,
  Engagingness,
  Faithfulness,
  Knowledgeability,
};

std::string_view annotation_level_name(AnnotationLevel l);
AnnotationLevel parse_annotation_level(std::string_view name);
std::string_view human_metric_name(HumanMetric m);
HumanMetric parse_human_metric(std::string_view name);

/// Largest admissible value (1 for the binary metrics, else 2).
int max_score(HumanMetric m);
bool metric_allowed_at(HumanMetric m, AnnotationLevel level);
/// Hallucination counts against a bot.
bool lower_is_better(HumanMetric m);

struct HumanScoreRecord {
  std::string dialogue_id;
  AnnotationLevel level = AnnotationLevel::Utterance;
  HumanMetric metric = HumanMetric::Coherence;
  int value = 0;
  std::string annotator_id;

  /// SchemaViolation for an out-of-range value or a metric at the wrong level.
  void validate() const;
};

struct AnnotationMean {
  AnnotationLevel level;
  HumanMetric metric;
  double mean = 0.0;
  std::size_t dialogues = 0;
  bool lower_is_better = false;
};

/// Mean per (level, metric): first across annotators within a dialogue, then
/// across dialogues. Independent of record order.
std::vector<AnnotationMean> aggregate_annotations(const std::vector<HumanScoreRecord>& records);

/// JSON Lines of {dialogue_id, level, metric, value, annotator_id}.
std::vector<HumanScoreRecord> parse_annotations(std::istream& in);

// ---------------------------------------------------------------------------
// Benchmark evaluation

struct BenchmarkExample {
  std::optional<std::string> session_id;
  DialogueHistory history;  // ends with the user turn to answer
  Utterance reference = Utterance::system("-");
  std::optional<WebQuery> gold_query;
  std::optional<KnowledgeSnippet> gold_knowledge;
  QuestionType question_type = QuestionType::None;
  bool has_ellipsis_or_coref = false;
};

/// One JSON object: history (list of strings or {speaker, text}), reference,
/// and optionally session_id, gold_query, gold_knowledge (string or snippet
/// object), question_type and ellipsis_coref. A lenient read also accepts a
/// history ending with the system; the reference then belongs to the user.
BenchmarkExample benchmark_example_from_json(const nlohmann::json& j, bool lenient = false);
/// ParseError names the offending line.
std::vector<BenchmarkExample> parse_benchmark(std::istream& in, bool lenient = false);
std::vector<BenchmarkExample> load_benchmark(const std::string& path);

struct BenchmarkReport {
  MetricReport corpus;
  std::vector<MetricReport> per_example;
  std::vector<std::string> candidates;
  /// (generated query, gold query) and (retrieved snippet, gold snippet).
  std::vector<std::pair<std::string, std::string>> query_pairs;
  std::vector<std::pair<std::string, std::string>> knowledge_pairs;
  std::optional<SimilarityHistogram> query_similarity;
  std::optional<SimilarityHistogram> knowledge_similarity;
};

/// Runs the bot on every example (up to `workers` at a time) and scores the
/// candidate against the reference. EmptyDataset for no examples.
BenchmarkReport evaluate_benchmark(const std::vector<BenchmarkExample>& examples, const TurnFn& bot,
                                   const MetricConfig& config, Embedder& embedder,
                                   std::size_t workers = 1);

// ---------------------------------------------------------------------------
// Dataset statistics

struct DatasetStats {
  std::size_t sessions = 0;
  std::size_t utterances = 0;
  double avg_utterances_per_session = 0.0;
  std::map<QuestionType, std::size_t> question_types;
  std::size_t ellipsis_coref = 0;
};

/// Rows sharing a session_id form one session whose length is the longest
/// history plus its reference. Rows without a session_id are sessions of
/// their own.
DatasetStats dataset_stats(const std::vector<BenchmarkExample>& examples);
/// Reads the file leniently, so sessions may end on a user utterance.
DatasetStats dataset_stats(std::istream& in);

nlohmann::json to_json(const DatasetStats& s);
nlohmann::json to_json(const std::vector<AnnotationMean>& means);

}  // namespace racetrack
