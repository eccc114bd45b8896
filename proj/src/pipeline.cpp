#include "racetrack/pipeline.hpp"

#include <algorithm>
#include <charconv>

namespace racetrack {

std::string_view pipeline_mode_name(PipelineMode mode) {
  switch (mode) {
    case PipelineMode::Full: return "full";
    case PipelineMode::PreClassifier: return "pre_classifier";
    case PipelineMode::NoKnowledge: return "no_knowledge";
  }
  return "full";
}

PipelineMode parse_pipeline_mode(std::string_view name) {
  if (name == "full") return PipelineMode::Full;
  if (name == "pre_classifier") return PipelineMode::PreClassifier;
  if (name == "no_knowledge") return PipelineMode::NoKnowledge;
  throw Error(ErrorCode::InvalidArgument, "unknown pipeline mode '" + std::string(name) + "'");
}

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::KnowledgeClass: return "knowledge_class";
    case Stage::QueryGen: return "query_gen";
    case Stage::Search: return "search";
    case Stage::Response: return "response";
  }
  return "response";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : kAllStages)
    if (stage_name(s) == name) return s;
  throw Error(ErrorCode::InvalidArgument, "unknown stage '" + std::string(name) + "'");
}

const StageTiming& TurnTranscript::timing(Stage stage) const {
  for (const auto& t : timings)
    if (t.stage == stage) return t;
  throw Error(ErrorCode::NotFound, "transcript has no timing for " + std::string(stage_name(stage)));
}

std::size_t TurnTranscript::present_stage_count() const {
  return static_cast<std::size_t>(
      std::count_if(timings.begin(), timings.end(), [](const StageTiming& t) { return t.present; }));
}

namespace {

class TurnRunner {
 public:
  TurnRunner(const PipelineBackends& backends, Clock& clock, const PipelineOptions& options,
             TurnTranscript& transcript)
      : backends_(backends), clock_(clock), options_(options), t_(transcript) {
    for (Stage s : kAllStages) t_.timings.push_back({s, 0.0, false});
  }

  // Runs `fn` as `stage`, adding its wall time to that stage's timing.
  template <class Fn>
  auto timed(Stage stage, Fn&& fn) {
    auto& timing = t_.timings[static_cast<std::size_t>(stage)];
    timing.present = true;
    const auto begin = clock_.now();
    struct Accumulate {
      StageTiming& timing;
      Clock& clock;
      std::chrono::nanoseconds begin;
      ~Accumulate() { timing.elapsed_ms += to_ms(clock.now() - begin); }
    } accumulate{timing, clock_, begin};
    return fn();
  }

  GenerationResult generate(Stage stage, std::string prompt, bool want_scores) {
    t_.prompts.push_back({stage, prompt});
    ++t_.generation_calls;
    GenerationRequest request;
    request.prompt = std::move(prompt);
    request.max_new_tokens = options_.max_new_tokens;
    request.want_knowledge_scores = want_scores;
    try {
      if (!backends_.generator)
        throw Error(ErrorCode::BackendUnavailable, "no generation backend configured");
      return backends_.generator->generate(request);
    } catch (const Error& e) {
      throw Error(ErrorCode::GenerationFailed, e.what(), std::string(stage_name(stage)), e.code());
    }
  }

  [[noreturn]] void fail(Stage stage, const std::string& message) {
    throw Error(ErrorCode::GenerationFailed, message, std::string(stage_name(stage)),
                ErrorCode::MalformedResponse);
  }

  double classify_need(const DialogueHistory& history) {
    return timed(Stage::KnowledgeClass, [&] {
      auto result = generate(Stage::KnowledgeClass,
                             build_need_knowledge_prompt(history, options_.token_budget).rendered,
                             /*want_scores=*/true);
      double verdict = -1.0;
      if (result.knowledge_scores && !result.knowledge_scores->empty()) {
        verdict = result.knowledge_scores->front();
      } else {
        const auto text = trim(result.text);
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), verdict);
        if (ec != std::errc() || ptr != text.data() + text.size())
          fail(Stage::KnowledgeClass, "need-knowledge verdict is not a number");
      }
      if (!(verdict >= 0.0 && verdict <= 1.0))
        fail(Stage::KnowledgeClass, "need-knowledge verdict outside [0,1]");
      return verdict;
    });
  }

  std::optional<WebQuery> generate_query(const DialogueHistory& history) {
    return timed(Stage::QueryGen, [&] {
      auto result = generate(Stage::QueryGen,
                             build_query_prompt(history, options_.token_budget).rendered, false);
      if (trim(result.text).empty()) fail(Stage::QueryGen, "generated query is empty");
      return std::optional<WebQuery>(WebQuery(std::string(trim(result.text))));
    });
  }

  std::vector<KnowledgeSnippet> search(const WebQuery& query) {
    return timed(Stage::Search, [&]() -> std::vector<KnowledgeSnippet> {
      const auto depth = options_.pool_size + (options_.iterative_injection ? 1 : 0);
      try {
        if (!backends_.search)
          throw Error(ErrorCode::BackendUnavailable, "no search backend configured", "search");
        return backends_.search->search(query, static_cast<int>(depth)).snippets;
      } catch (const Error& e) {
        t_.search_error = e.what();
        return {};
      }
    });
  }

  GenerationResult respond_with_knowledge(const DialogueHistory& history, const KnowledgePool& pool) {
    auto result = generate(Stage::Response,
                           build_knowledge_prompt(pool, history, options_.token_budget).rendered,
                           /*want_scores=*/true);
    if (result.knowledge_scores && result.knowledge_scores->size() != pool.size())
      fail(Stage::Response, "expected " + std::to_string(pool.size()) + " knowledge scores, got " +
                                std::to_string(result.knowledge_scores->size()));
    return result;
  }

  GenerationResult knowledge_response(const DialogueHistory& history,
                                      std::vector<KnowledgeSnippet> ranked) {
    return timed(Stage::Response, [&] {
      const auto m = std::min(options_.pool_size, ranked.size());
      t_.pool.snippets.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(m));
      auto result = respond_with_knowledge(history, t_.pool);

      const bool unhelpful =
          result.knowledge_scores && !result.knowledge_scores->empty() &&
          std::all_of(result.knowledge_scores->begin(), result.knowledge_scores->end(),
                      [&](double s) { return s < options_.helpful_threshold; });
      if (options_.iterative_injection && unhelpful && ranked.size() > m) {
        // Swap in the following results, keeping the pool size per prompt.
        const auto end = std::min(ranked.size(), m + options_.pool_size);
        t_.pool.snippets.assign(ranked.begin() + static_cast<std::ptrdiff_t>(m),
                                ranked.begin() + static_cast<std::ptrdiff_t>(end));
        t_.knowledge_retried = true;
        result = respond_with_knowledge(history, t_.pool);
      }
      if (result.knowledge_scores) {
        for (std::size_t i = 0; i < t_.pool.size(); ++i)
          t_.pool.snippets[i].classifier_score = (*result.knowledge_scores)[i];
      }
      t_.knowledge_scores = result.knowledge_scores;
      return result;
    });
  }

  GenerationResult plain_response(const DialogueHistory& history) {
    return timed(Stage::Response, [&] {
      return generate(Stage::Response, build_response_prompt(history, options_.token_budget).rendered,
                      false);
    });
  }

 private:
  const PipelineBackends& backends_;
  Clock& clock_;
  const PipelineOptions& options_;
  TurnTranscript& t_;
};

}  // namespace

TurnTranscript run_turn(const DialogueHistory& history, PipelineMode mode,
                        const PipelineBackends& backends, Clock& clock,
                        const PipelineOptions& options) {
  if (history.empty() || !history.ends_with_user())
    throw Error(ErrorCode::InvalidHistory, "pipeline input must end with a user utterance");
  if (options.pool_size < 1) throw Error(ErrorCode::InvalidArgument, "pool size must be at least 1");

  const auto started = clock.now();
  TurnTranscript t;
  t.history_in = history;
  t.mode = mode;
  TurnRunner runner(backends, clock, options, t);

  bool use_knowledge = mode != PipelineMode::NoKnowledge;
  if (mode == PipelineMode::PreClassifier) {
    t.need_knowledge_score = runner.classify_need(history);
    use_knowledge = *t.need_knowledge_score >= options.need_knowledge_threshold;
  }

  GenerationResult reply;
  if (use_knowledge) {
    t.query = runner.generate_query(history);
    auto ranked = runner.search(*t.query);
    reply = runner.knowledge_response(history, std::move(ranked));
  } else {
    reply = runner.plain_response(history);
  }

  const auto text = trim(reply.text);
  if (text.empty())
    throw Error(ErrorCode::GenerationFailed, "generated response is empty",
                std::string(stage_name(Stage::Response)), ErrorCode::MalformedResponse);
  t.response = Utterance::system(std::string(text));
  t.overall_ms = to_ms(clock.now() - started);
  return t;
}

}  // namespace racetrack
