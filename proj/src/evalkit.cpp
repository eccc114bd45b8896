#include "racetrack/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <thread>

#include "racetrack/serialization.hpp"

namespace racetrack {

using nlohmann::json;

TurnFn make_turn_fn(PipelineBackends backends, PipelineMode mode, std::shared_ptr<Clock> clock,
                    PipelineOptions options) {
  return [backends = std::move(backends), mode, clock = std::move(clock), options](const DialogueHistory& h) {
    return run_turn(h, mode, backends, *clock, options);
  };
}

DialogueHistory self_chat(std::string_view opening, const TurnFn& bot, std::size_t turns) {
  if (turns == 0) throw Error(ErrorCode::InvalidArgument, "self-chat needs at least one turn");
  std::vector<std::string> texts{std::string(opening)};
  Utterance::user(texts.front());  // rejects a blank opening

  while (texts.size() < 2 * turns) {
    const std::size_t next = texts.size();
    const std::size_t start = next % 2 == 0 ? 1 : 0;
    std::vector<std::string> view(texts.begin() + static_cast<std::ptrdiff_t>(start), texts.end());
    const auto transcript = bot(DialogueHistory::from_texts(view));
    if (!transcript.response)
      throw Error(ErrorCode::GenerationFailed, "bot produced no response", "response");
    texts.push_back(transcript.response->text());
  }
  return DialogueHistory::from_texts(texts);
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::pair<HumanMetric, std::string_view> kMetricNames[] = {
    {HumanMetric::Coherence, "coherence"},
    {HumanMetric::Informativeness, "informativeness"},
    {HumanMetric::Safety, "safety"},
    {HumanMetric::Inspiration, "inspiration"},
    {HumanMetric::Hallucination, "hallucination"},
    {HumanMetric::Engagingness, "engagingness"},
    {HumanMetric::Faithfulness, "faithfulness"},
    {HumanMetric::Knowledgeability, "knowledgeability"},
};

}  // namespace

std::string_view annotation_level_name(AnnotationLevel l) {
  return l == AnnotationLevel::Utterance ? "utterance" : "session";
}

AnnotationLevel parse_annotation_level(std::string_view name) {
  if (name == "utterance") return AnnotationLevel::Utterance;
  if (name == "session") return AnnotationLevel::Session;
  throw Error(ErrorCode::SchemaViolation, "unknown annotation level '" + std::string(name) + "'");
}

std::string_view human_metric_name(HumanMetric m) {
  for (const auto& [metric, name] : kMetricNames)
    if (metric == m) return name;
  return "coherence";
}

HumanMetric parse_human_metric(std::string_view name) {
  for (const auto& [metric, n] : kMetricNames)
    if (n == name) return metric;
  throw Error(ErrorCode::SchemaViolation, "unknown human metric '" + std::string(name) + "'");
}

int max_score(HumanMetric m) {
  return m == HumanMetric::Hallucination || m == HumanMetric::Knowledgeability ? 1 : 2;
}

bool metric_allowed_at(HumanMetric m, AnnotationLevel level) {
  switch (m) {
    case HumanMetric::Engagingness:
    case HumanMetric::Faithfulness:
      return level == AnnotationLevel::Session;
    case HumanMetric::Knowledgeability:
      return level == AnnotationLevel::Utterance;
    default:
      return true;
  }
}

bool lower_is_better(HumanMetric m) { return m == HumanMetric::Hallucination; }

void HumanScoreRecord::validate() const {
  if (dialogue_id.empty()) throw Error(ErrorCode::SchemaViolation, "annotation has no dialogue_id");
  if (value < 0 || value > max_score(metric))
    throw Error(ErrorCode::SchemaViolation, std::string(human_metric_name(metric)) + " value " +
                                                std::to_string(value) + " outside 0.." +
                                                std::to_string(max_score(metric)));
  if (!metric_allowed_at(metric, level))
    throw Error(ErrorCode::SchemaViolation, std::string(human_metric_name(metric)) +
                                                " is not scored at " +
                                                std::string(annotation_level_name(level)) + " level");
}

std::vector<AnnotationMean> aggregate_annotations(const std::vector<HumanScoreRecord>& records) {
  // (level, metric) -> dialogue -> (sum, count)
  std::map<std::pair<AnnotationLevel, HumanMetric>, std::map<std::string, std::pair<long, long>>> groups;
  for (const auto& r : records) {
    r.validate();
    auto& cell = groups[{r.level, r.metric}][r.dialogue_id];
    cell.first += r.value;
    cell.second += 1;
  }
  std::vector<AnnotationMean> out;
  for (const auto& [key, dialogues] : groups) {
    double total = 0.0;
    for (const auto& [id, cell] : dialogues)
      total += static_cast<double>(cell.first) / static_cast<double>(cell.second);
    out.push_back({key.first, key.second, total / static_cast<double>(dialogues.size()), dialogues.size(),
                   lower_is_better(key.second)});
  }
  return out;
}

std::vector<HumanScoreRecord> parse_annotations(std::istream& in) {
  std::vector<HumanScoreRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      HumanScoreRecord r;
      r.dialogue_id = j.at("dialogue_id").get<std::string>();
      r.level = parse_annotation_level(j.at("level").get<std::string>());
      r.metric = parse_human_metric(j.at("metric").get<std::string>());
      r.value = j.at("value").get<int>();
      r.annotator_id = j.value("annotator_id", "");
      r.validate();
      out.push_back(std::move(r));
    } catch (const Error& e) {
      throw Error(e.code(), "annotations line " + std::to_string(line_no) + ": " + e.what());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, "annotations line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

BenchmarkExample benchmark_example_from_json(const json& j, bool lenient) {
  try {
    BenchmarkExample ex;
    if (j.contains("session_id") && !j.at("session_id").is_null()) {
      const auto& sid = j.at("session_id");
      ex.session_id = sid.is_string() ? sid.get<std::string>() : sid.dump();
    }
    ex.history = history_from_json_lenient(j.at("history"));
    if (!ex.history.ends_with_user() && !lenient)
      throw Error(ErrorCode::ParseError, "history must end with a user utterance");
    const auto speaker = ex.history.ends_with_user() ? Speaker::System : Speaker::User;
    ex.reference = Utterance(speaker, j.at("reference").get<std::string>());
    if (j.contains("gold_query") && !j.at("gold_query").is_null())
      ex.gold_query = WebQuery(j.at("gold_query").get<std::string>());
    if (j.contains("gold_knowledge") && !j.at("gold_knowledge").is_null()) {
      const auto& k = j.at("gold_knowledge");
      if (k.is_string()) {
        KnowledgeSnippet s;
        s.text = k.get<std::string>();
        s.source = KnowledgeSource::Benchmark;
        ex.gold_knowledge = std::move(s);
      } else {
        ex.gold_knowledge = snippet_from_json(k);
      }
    }
    ex.question_type = parse_question_type(j.value("question_type", "none"));
    ex.has_ellipsis_or_coref = j.value("ellipsis_coref", false);
    return ex;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) throw;
    throw Error(ErrorCode::ParseError, e.what());
  }
}

std::vector<BenchmarkExample> parse_benchmark(std::istream& in, bool lenient) {
  std::vector<BenchmarkExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      out.push_back(benchmark_example_from_json(json::parse(line), lenient));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<BenchmarkExample> load_benchmark(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open dataset " + path);
  return parse_benchmark(in);
}

BenchmarkReport evaluate_benchmark(const std::vector<BenchmarkExample>& examples, const TurnFn& bot,
                                   const MetricConfig& config, Embedder& embedder, std::size_t workers) {
  if (examples.empty()) throw Error(ErrorCode::EmptyDataset, "benchmark has no examples");

  std::vector<std::optional<TurnTranscript>> transcripts(examples.size());
  std::vector<std::exception_ptr> failures(examples.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < examples.size(); i = next++) {
      try {
        transcripts[i] = bot(examples[i].history);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, examples.size());
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  BenchmarkReport report;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    const auto& t = *transcripts[i];
    if (!t.response) throw Error(ErrorCode::GenerationFailed, "bot produced no response", "response");
    report.candidates.push_back(t.response->text());
    report.per_example.push_back(evaluate_pair(t.response->text(), ex.reference.text(), config, embedder));
    if (ex.gold_query && t.query) report.query_pairs.emplace_back(t.query->text(), ex.gold_query->text());
    if (ex.gold_knowledge && !t.pool.snippets.empty())
      report.knowledge_pairs.emplace_back(t.pool.snippets.front().text, ex.gold_knowledge->text);
  }
  report.corpus = corpus_mean(report.per_example);
  if (!report.query_pairs.empty()) report.query_similarity = similarity_histogram(report.query_pairs, embedder);
  if (!report.knowledge_pairs.empty())
    report.knowledge_similarity = similarity_histogram(report.knowledge_pairs, embedder);
  return report;
}

// ---------------------------------------------------------------------------

DatasetStats dataset_stats(const std::vector<BenchmarkExample>& examples) {
  DatasetStats s;
  std::map<std::string, std::size_t> by_session;
  for (const auto& ex : examples) {
    const std::size_t length = ex.history.size() + 1;
    if (ex.session_id) {
      auto& len = by_session[*ex.session_id];
      len = std::max(len, length);
    } else {
      ++s.sessions;
      s.utterances += length;
    }
    ++s.question_types[ex.question_type];
    if (ex.has_ellipsis_or_coref) ++s.ellipsis_coref;
  }
  for (const auto& [id, len] : by_session) {
    ++s.sessions;
    s.utterances += len;
  }
  if (s.sessions > 0)
    s.avg_utterances_per_session = static_cast<double>(s.utterances) / static_cast<double>(s.sessions);
  return s;
}

DatasetStats dataset_stats(std::istream& in) { return dataset_stats(parse_benchmark(in, true)); }

json to_json(const DatasetStats& s) {
  json types = json::object();
  for (const auto& [type, count] : s.question_types) types[std::string(question_type_name(type))] = count;
  return json{{"sessions", s.sessions},
              {"utterances", s.utterances},
              {"avg_utterances_per_session", s.avg_utterances_per_session},
              {"question_types", std::move(types)},
              {"ellipsis_coref", s.ellipsis_coref}};
}

json to_json(const std::vector<AnnotationMean>& means) {
  json arr = json::array();
  for (const auto& m : means)
    arr.push_back({{"level", annotation_level_name(m.level)},
                   {"metric", human_metric_name(m.metric)},
                   {"mean", m.mean},
                   {"dialogues", m.dialogues},
                   {"lower_is_better", m.lower_is_better}});
  return arr;
}

}  // namespace racetrack
