#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "racetrack/pipeline.hpp"
#include "racetrack/serialization.hpp"

using namespace racetrack;
using namespace std::chrono_literals;
using fixtures::travel_history;

namespace {

struct Rig {
  std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>();
  std::shared_ptr<ScriptedGenerator> scripted;
  PipelineBackends backends;

  explicit Rig(const std::string& need = "0.3") {
    MockLatency search_latency;
    search_latency.delay = 40ms;
    search_latency.clock = clock;
    scripted = fixtures::travel_generator(need);
    backends.generator = std::make_shared<fixtures::StageDelayGenerator>(scripted, clock, 30ms, 50ms, 20ms);
    backends.search = fixtures::travel_search(search_latency);
  }

  TurnTranscript run(PipelineMode mode, PipelineOptions options = {}) {
    return run_turn(travel_history(), mode, backends, *clock, options);
  }
};

std::string dump(const TurnTranscript& t) { return to_json(t).dump(2) + "\n"; }

}  // namespace

TEST(PipelineGolden, FullModeTranscript) {
  Rig rig;
  const auto t = rig.run(PipelineMode::Full);
  EXPECT_EQ(dump(t), fixtures::golden("transcript_full.json", dump(t)));

  ASSERT_TRUE(t.query);
  EXPECT_EQ(t.query->text(), fixtures::kTravelQuery);
  ASSERT_EQ(t.pool.size(), 1u);
  EXPECT_EQ(t.pool.snippets[0].text, fixtures::kTravelSnippet);
  EXPECT_EQ(t.response->text(), fixtures::kTravelKnowledgeReply);
  EXPECT_EQ(t.generation_calls, 2u);
  EXPECT_EQ(t.prompts[0].text, fixtures::expected("prompt_query.txt"));
  EXPECT_EQ(t.prompts[1].text, fixtures::expected("prompt_knowledge.txt"));
  EXPECT_FALSE(t.timing(Stage::KnowledgeClass).present);
  EXPECT_DOUBLE_EQ(t.timing(Stage::QueryGen).elapsed_ms, 30.0);
  EXPECT_DOUBLE_EQ(t.timing(Stage::Search).elapsed_ms, 40.0);
  EXPECT_DOUBLE_EQ(t.timing(Stage::Response).elapsed_ms, 50.0);
  EXPECT_DOUBLE_EQ(t.overall_ms, 120.0);
  ASSERT_TRUE(t.knowledge_scores);
  EXPECT_EQ(*t.knowledge_scores, std::vector<double>{0.92});
  EXPECT_EQ(t.pool.snippets[0].classifier_score, 0.92);
}

TEST(PipelineGolden, NoKnowledgeTranscript) {
  Rig rig;
  const auto t = rig.run(PipelineMode::NoKnowledge);
  EXPECT_EQ(dump(t), fixtures::golden("transcript_no_knowledge.json", dump(t)));
  EXPECT_FALSE(t.timing(Stage::QueryGen).present);
  EXPECT_FALSE(t.timing(Stage::Search).present);
  EXPECT_TRUE(t.timing(Stage::Response).present);
  EXPECT_EQ(t.generation_calls, 1u);
  EXPECT_EQ(t.prompts[0].text, fixtures::expected("prompt_response.txt"));
  EXPECT_EQ(t.response->text(), fixtures::kTravelPlainReply);
}

TEST(PipelineGolden, PreClassifierBelowThresholdSkipsRetrieval) {
  Rig rig("0.3");
  const auto t = rig.run(PipelineMode::PreClassifier);
  EXPECT_EQ(dump(t), fixtures::golden("transcript_pre_classifier_skip.json", dump(t)));
  EXPECT_EQ(t.need_knowledge_score, 0.3);
  EXPECT_TRUE(t.timing(Stage::KnowledgeClass).present);
  EXPECT_FALSE(t.timing(Stage::QueryGen).present);
  EXPECT_FALSE(t.timing(Stage::Search).present);
  EXPECT_FALSE(t.query);
  EXPECT_EQ(t.response->text(), fixtures::kTravelPlainReply);
}

TEST(PipelineGolden, PreClassifierAboveThresholdRetrieves) {
  Rig rig("0.8");
  const auto t = rig.run(PipelineMode::PreClassifier);
  EXPECT_EQ(dump(t), fixtures::golden("transcript_pre_classifier_retrieve.json", dump(t)));
  EXPECT_EQ(t.present_stage_count(), 4u);
  EXPECT_EQ(t.generation_calls, 3u);
  EXPECT_EQ(t.response->text(), fixtures::kTravelKnowledgeReply);
}

TEST(Pipeline, RepeatedRunsAreByteIdentical) {
  for (auto mode : {PipelineMode::Full, PipelineMode::PreClassifier, PipelineMode::NoKnowledge}) {
    Rig a, b;
    EXPECT_EQ(dump(a.run(mode)), dump(b.run(mode)));
  }
}

TEST(Pipeline, TranscriptJsonRoundTrips) {
  Rig rig;
  const auto t = rig.run(PipelineMode::Full);
  EXPECT_EQ(transcript_from_json(to_json(t)), t);
}

TEST(Pipeline, RealClockDelaysAddUp) {
  auto clock = std::make_shared<SteadyClock>();
  MockLatency search_latency;
  search_latency.delay = 40ms;
  search_latency.clock = clock;
  PipelineBackends b;
  b.generator = std::make_shared<fixtures::StageDelayGenerator>(fixtures::travel_generator(), clock, 30ms, 50ms);
  b.search = fixtures::travel_search(search_latency);
  const auto t = run_turn(travel_history(), PipelineMode::Full, b, *clock);
  EXPECT_GE(t.overall_ms, 120.0);
  EXPECT_LE(t.overall_ms, 140.0);
  EXPECT_GE(t.timing(Stage::Search).elapsed_ms, 40.0);
}

TEST(Pipeline, SearchFailureLeavesPoolEmptyAndStillResponds) {
  auto clock = std::make_shared<ManualClock>();
  MockLatency down;
  down.unavailable = true;
  PipelineBackends b;
  auto g = std::make_shared<ScriptedGenerator>(ScriptedReply{"好的", std::nullopt, std::nullopt});
  b.generator = g;
  b.search = fixtures::travel_search(down);
  const auto t = run_turn(travel_history(), PipelineMode::Full, b, *clock);
  EXPECT_TRUE(t.search_error);
  EXPECT_EQ(t.pool.size(), 0u);
  EXPECT_EQ(g->prompts_seen().back(), fixtures::expected("prompt_knowledge_empty.txt"));
  EXPECT_EQ(t.response->text(), "好的");
}

TEST(Pipeline, GenerationTimeoutIsReportedWithStage) {
  auto clock = std::make_shared<ManualClock>();
  MockLatency slow;
  slow.delay = 5000ms;
  slow.timeout = 1000ms;
  slow.clock = clock;
  PipelineBackends b{std::make_shared<EchoGenerator>(slow), fixtures::travel_search()};
  try {
    run_turn(travel_history(), PipelineMode::Full, b, *clock);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GenerationFailed);
    EXPECT_EQ(e.stage(), "query_gen");
    EXPECT_EQ(e.cause(), ErrorCode::Timeout);
  }
  EXPECT_EQ(clock->now(), std::chrono::nanoseconds(1000ms));
}

TEST(Pipeline, KnowledgeScoreCountMustMatchPool) {
  auto clock = std::make_shared<ManualClock>();
  auto g = fixtures::travel_generator();
  KnowledgePool pool;
  KnowledgeSnippet s;
  s.text = fixtures::kTravelSnippet;
  pool.snippets.push_back(s);
  g->add(build_knowledge_prompt(pool, travel_history()).rendered, {"ok", std::vector<double>{0.5, 0.5}, std::nullopt});
  PipelineBackends b{g, fixtures::travel_search()};
  EXPECT_THROW(run_turn(travel_history(), PipelineMode::Full, b, *clock), Error);
}

TEST(Pipeline, PoolSizeControlsSearchDepth) {
  auto clock = std::make_shared<ManualClock>();
  PipelineBackends b{std::make_shared<ScriptedGenerator>(ScriptedReply{"故宫", std::nullopt, std::nullopt}),
                     fixtures::travel_search()};
  PipelineOptions o;
  o.pool_size = 2;
  const auto t = run_turn(travel_history(), PipelineMode::Full, b, *clock, o);
  ASSERT_EQ(t.pool.size(), 2u);
  EXPECT_EQ(t.knowledge_scores->size(), 2u);
}

TEST(Pipeline, IterativeInjectionRetriesWithNextSnippet) {
  auto clock = std::make_shared<ManualClock>();
  auto g = std::make_shared<ScriptedGenerator>(ScriptedReply{"默认", std::vector<double>{0.1}, std::nullopt});
  g->add(build_query_prompt(travel_history()).rendered, {"故宫", std::nullopt, std::nullopt});
  PipelineBackends b{g, fixtures::travel_search()};
  PipelineOptions o;
  o.iterative_injection = true;
  const auto t = run_turn(travel_history(), PipelineMode::Full, b, *clock, o);
  EXPECT_TRUE(t.knowledge_retried);
  EXPECT_EQ(t.generation_calls, 3u);
  ASSERT_EQ(t.pool.size(), 1u);
  // Ranked results for "故宫" are the two 故宫 documents in corpus order.
  EXPECT_EQ(t.pool.snippets[0].text, "故宫门票需要实名预约");
}

TEST(Pipeline, RejectsHistoryEndingWithSystem) {
  auto clock = std::make_shared<ManualClock>();
  PipelineBackends b{std::make_shared<EchoGenerator>(), fixtures::travel_search()};
  EXPECT_THROW(run_turn(DialogueHistory::from_texts({"a", "b"}), PipelineMode::Full, b, *clock), Error);
}
