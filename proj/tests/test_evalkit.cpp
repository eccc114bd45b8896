#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "racetrack/evalkit.hpp"

using namespace racetrack;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::InvalidArgument;
}

HumanScoreRecord rec(std::string dialogue, HumanMetric m, int value, std::string annotator = "a1",
                     AnnotationLevel level = AnnotationLevel::Utterance) {
  return {std::move(dialogue), level, m, value, std::move(annotator)};
}

const AnnotationMean& find(const std::vector<AnnotationMean>& means, HumanMetric m) {
  for (const auto& x : means)
    if (x.metric == m) return x;
  throw std::runtime_error("metric missing");
}

TurnFn echo_bot() {
  return make_turn_fn({std::make_shared<EchoGenerator>(), fixtures::travel_search()}, PipelineMode::NoKnowledge,
                      std::make_shared<ManualClock>());
}

}  // namespace

TEST(SelfChat, EchoBotTwoTurnsGivesFourUtterances) {
  const auto h = self_chat("hi", echo_bot(), 2);
  ASSERT_EQ(h.size(), 4u);
  for (std::size_t i = 0; i < h.size(); ++i)
    EXPECT_EQ(h.utterances()[i].speaker(), i % 2 == 0 ? Speaker::User : Speaker::System);
  EXPECT_EQ(h.utterances()[0].text(), "hi");
  EXPECT_EQ(h.utterances()[1].text(), "对话：hi, [sMask]");
}

TEST(SelfChat, EachSideSeesItselfAsSystem) {
  std::vector<DialogueHistory> views;
  TurnFn bot = [&](const DialogueHistory& h) {
    views.push_back(h);
    return fixtures::canned(h, "r" + std::to_string(views.size()));
  };
  const auto h = self_chat("open", bot, 3);
  EXPECT_EQ(h.texts(), (std::vector<std::string>{"open", "r1", "r2", "r3", "r4", "r5"}));
  ASSERT_EQ(views.size(), 5u);
  EXPECT_EQ(views[0].texts(), (std::vector<std::string>{"open"}));
  // The opener's side answers r1 as the user; it sees r1 as the user turn.
  EXPECT_EQ(views[1].texts(), (std::vector<std::string>{"r1"}));
  EXPECT_EQ(views[2].texts(), (std::vector<std::string>{"open", "r1", "r2"}));
  EXPECT_EQ(views[3].texts(), (std::vector<std::string>{"r1", "r2", "r3"}));
  for (const auto& v : views) EXPECT_TRUE(v.ends_with_user());
}

TEST(SelfChat, ScriptedBotIsReproducible) {
  auto make = [] {
    auto g = std::make_shared<ScriptedGenerator>(ScriptedReply{"嗯嗯", std::nullopt, std::nullopt});
    g->add(build_response_prompt(DialogueHistory::from_texts({"你好"})).rendered, {"你好呀", std::nullopt, std::nullopt});
    return make_turn_fn({g, fixtures::travel_search()}, PipelineMode::NoKnowledge, std::make_shared<ManualClock>());
  };
  const auto a = self_chat("你好", make(), 3);
  EXPECT_EQ(a, self_chat("你好", make(), 3));
  EXPECT_EQ(a.texts(), (std::vector<std::string>{"你好", "你好呀", "嗯嗯", "嗯嗯", "嗯嗯", "嗯嗯"}));
}

TEST(SelfChat, RejectsZeroTurnsAndBlankOpening) {
  EXPECT_EQ(code_of([] { self_chat("hi", echo_bot(), 0); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { self_chat("  ", echo_bot(), 1); }), ErrorCode::InvalidArgument);
}

TEST(SelfChat, GenerationFailurePropagates) {
  MockLatency down;
  down.unavailable = true;
  auto bot = make_turn_fn({std::make_shared<EchoGenerator>(down), fixtures::travel_search()},
                          PipelineMode::NoKnowledge, std::make_shared<ManualClock>());
  EXPECT_EQ(code_of([&] { self_chat("hi", bot, 1); }), ErrorCode::GenerationFailed);
}

TEST(Annotations, ThreeAnnotatorsMean) {
  const auto means = aggregate_annotations({rec("d1", HumanMetric::Coherence, 2, "a1"),
                                            rec("d1", HumanMetric::Coherence, 1, "a2"),
                                            rec("d1", HumanMetric::Coherence, 2, "a3")});
  ASSERT_EQ(means.size(), 1u);
  EXPECT_NEAR(means[0].mean, 5.0 / 3.0, 1e-9);
  EXPECT_EQ(means[0].dialogues, 1u);
}

TEST(Annotations, MeanOfDialogueMeans) {
  // d1 has three annotations averaging 1.0, d2 one annotation of 2.
  const auto means = aggregate_annotations({rec("d1", HumanMetric::Safety, 0, "a1"),
                                            rec("d1", HumanMetric::Safety, 1, "a2"),
                                            rec("d1", HumanMetric::Safety, 2, "a3"),
                                            rec("d2", HumanMetric::Safety, 2, "a1")});
  EXPECT_NEAR(find(means, HumanMetric::Safety).mean, 1.5, 1e-12);
}

TEST(Annotations, SchemaRanges) {
  EXPECT_EQ(code_of([] { aggregate_annotations({rec("d", HumanMetric::Hallucination, 2)}); }),
            ErrorCode::SchemaViolation);
  EXPECT_EQ(code_of([] { aggregate_annotations({rec("d", HumanMetric::Knowledgeability, 2)}); }),
            ErrorCode::SchemaViolation);
  EXPECT_EQ(code_of([] { aggregate_annotations({rec("d", HumanMetric::Coherence, 3)}); }),
            ErrorCode::SchemaViolation);
  EXPECT_EQ(code_of([] { aggregate_annotations({rec("d", HumanMetric::Coherence, -1)}); }),
            ErrorCode::SchemaViolation);
  EXPECT_EQ(code_of([] { aggregate_annotations({rec("d", HumanMetric::Engagingness, 1)}); }),
            ErrorCode::SchemaViolation);
  EXPECT_EQ(code_of([] {
              aggregate_annotations({rec("d", HumanMetric::Knowledgeability, 1, "a", AnnotationLevel::Session)});
            }),
            ErrorCode::SchemaViolation);
  EXPECT_NO_THROW(aggregate_annotations({rec("d", HumanMetric::Faithfulness, 2, "a", AnnotationLevel::Session)}));
  EXPECT_NO_THROW(aggregate_annotations({rec("d", HumanMetric::Hallucination, 1)}));
}

TEST(Annotations, HallucinationIsLowerBetter) {
  const auto means = aggregate_annotations({rec("d", HumanMetric::Hallucination, 1), rec("d", HumanMetric::Coherence, 1)});
  EXPECT_TRUE(find(means, HumanMetric::Hallucination).lower_is_better);
  EXPECT_FALSE(find(means, HumanMetric::Coherence).lower_is_better);
}

TEST(Annotations, InvariantUnderRecordOrder) {
  std::mt19937_64 rng(11);
  const HumanMetric metrics[] = {HumanMetric::Coherence, HumanMetric::Informativeness, HumanMetric::Hallucination};
  std::vector<HumanScoreRecord> records;
  for (int i = 0; i < 300; ++i) {
    const auto m = metrics[rng() % 3];
    records.push_back(rec("d" + std::to_string(rng() % 17), m, static_cast<int>(rng() % (max_score(m) + 1)),
                          "a" + std::to_string(rng() % 3)));
  }
  const auto base = aggregate_annotations(records);
  for (int k = 0; k < 20; ++k) {
    std::shuffle(records.begin(), records.end(), rng);
    const auto again = aggregate_annotations(records);
    ASSERT_EQ(again.size(), base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      EXPECT_EQ(again[i].metric, base[i].metric);
      EXPECT_NEAR(again[i].mean, base[i].mean, 1e-12);
    }
  }
}

TEST(Annotations, ParsesJsonLines) {
  std::istringstream in(
      R"({"dialogue_id":"d1","level":"utterance","metric":"coherence","value":2,"annotator_id":"a1"})"
      "\n"
      R"({"dialogue_id":"d1","level":"session","metric":"engagingness","value":1,"annotator_id":"a1"})"
      "\n");
  const auto records = parse_annotations(in);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[1].metric, HumanMetric::Engagingness);
  EXPECT_EQ(records[1].level, AnnotationLevel::Session);
  std::istringstream bad(R"({"dialogue_id":"d1","level":"utterance","metric":"charm","value":1})");
  EXPECT_EQ(code_of([&] { parse_annotations(bad); }), ErrorCode::SchemaViolation);
  std::istringstream range(R"({"dialogue_id":"d1","level":"utterance","metric":"hallucination","value":2})");
  EXPECT_EQ(code_of([&] { parse_annotations(range); }), ErrorCode::SchemaViolation);
  std::istringstream broken("{\"dialogue_id\":");
  EXPECT_EQ(code_of([&] { parse_annotations(broken); }), ErrorCode::ParseError);
}

TEST(Benchmark, EchoBotMatchingReferenceScoresOne) {
  std::vector<BenchmarkExample> examples;
  for (const char* last : {"今天天气怎么样", "北京有什么好吃的", "hello there friend"}) {
    BenchmarkExample ex;
    ex.history = DialogueHistory::from_texts({"你好", "你好呀", last});
    ex.reference = Utterance::system(build_response_prompt(ex.history).rendered);
    examples.push_back(ex);
  }
  HashedTrigramEmbedder embedder;
  const auto report = evaluate_benchmark(examples, echo_bot(), {}, embedder, 2);
  EXPECT_DOUBLE_EQ(report.corpus.bleu4, 1.0);
  EXPECT_DOUBLE_EQ(report.corpus.f1, 1.0);
  EXPECT_DOUBLE_EQ(report.corpus.rouge_l, 1.0);
  EXPECT_DOUBLE_EQ(report.corpus.rouge_1, 1.0);
  EXPECT_DOUBLE_EQ(report.corpus.rouge_2, 1.0);
  EXPECT_NEAR(report.corpus.bert_score, 1.0, 1e-12);
  EXPECT_EQ(report.candidates.size(), 3u);
  EXPECT_FALSE(report.query_similarity);
}

TEST(Benchmark, GoldQueryAndKnowledgeSimilarity) {
  BenchmarkExample ex;
  ex.history = fixtures::travel_history();
  ex.reference = Utterance::system(fixtures::kTravelKnowledgeReply);
  ex.gold_query = WebQuery(fixtures::kTravelQuery);
  KnowledgeSnippet k;
  k.text = fixtures::kTravelSnippet;
  k.source = KnowledgeSource::Benchmark;
  ex.gold_knowledge = k;
  auto bot = make_turn_fn({fixtures::travel_generator(), fixtures::travel_search()}, PipelineMode::Full,
                          std::make_shared<ManualClock>());
  HashedTrigramEmbedder embedder;
  const auto report = evaluate_benchmark({ex, ex}, bot, {}, embedder);
  ASSERT_TRUE(report.query_similarity);
  ASSERT_TRUE(report.knowledge_similarity);
  EXPECT_NEAR(report.query_similarity->mean, 1.0, 1e-12);
  EXPECT_NEAR(report.knowledge_similarity->mean, 1.0, 1e-12);
  EXPECT_EQ(report.query_similarity->scores.size(), 2u);
  EXPECT_DOUBLE_EQ(report.corpus.bleu4, 1.0);
}

TEST(Benchmark, CorpusMeanMatchesBruteForceAndWorkerCount) {
  std::mt19937_64 rng(3);
  std::vector<BenchmarkExample> examples;
  for (int i = 0; i < 60; ++i) {
    BenchmarkExample ex;
    std::string user;
    for (const auto& t : oracle::random_tokens(rng, 8, 10, 1)) user += t + " ";
    ex.history = DialogueHistory::from_texts({user});
    std::string ref;
    for (const auto& t : oracle::random_tokens(rng, 12, 10, 4)) ref += t + " ";
    ex.reference = Utterance::system(ref);
    examples.push_back(ex);
  }
  HashedTrigramEmbedder embedder;
  const auto one = evaluate_benchmark(examples, echo_bot(), {}, embedder, 1);
  const auto many = evaluate_benchmark(examples, echo_bot(), {}, embedder, 8);
  EXPECT_EQ(one.per_example, many.per_example);
  EXPECT_EQ(one.corpus, many.corpus);

  std::vector<double> bleu, rl, bs;
  for (const auto& r : one.per_example) {
    bleu.push_back(r.bleu4);
    rl.push_back(r.rouge_l);
    bs.push_back(r.bert_score);
  }
  EXPECT_NEAR(one.corpus.bleu4, static_cast<double>(oracle::mean(bleu)), 1e-9);
  EXPECT_NEAR(one.corpus.rouge_l, static_cast<double>(oracle::mean(rl)), 1e-9);
  EXPECT_NEAR(one.corpus.bert_score, static_cast<double>(oracle::mean(bs)), 1e-9);
}

TEST(Benchmark, EmptyDatasetAndFailures) {
  HashedTrigramEmbedder embedder;
  EXPECT_EQ(code_of([&] { evaluate_benchmark({}, echo_bot(), {}, embedder); }), ErrorCode::EmptyDataset);
  MockLatency down;
  down.unavailable = true;
  auto bot = make_turn_fn({std::make_shared<EchoGenerator>(down), nullptr}, PipelineMode::NoKnowledge,
                          std::make_shared<ManualClock>());
  BenchmarkExample ex;
  ex.history = DialogueHistory::from_texts({"hi"});
  EXPECT_EQ(code_of([&] { evaluate_benchmark({ex}, bot, {}, embedder, 4); }), ErrorCode::GenerationFailed);
}

TEST(BenchmarkFile, ParsesFieldsAndReportsLine) {
  std::istringstream in(
      R"({"session_id":"s1","history":["你好","你好呀","故宫在哪"],"reference":"在北京","gold_query":"故宫 位置","gold_knowledge":"故宫位于北京","question_type":"where","ellipsis_coref":true})"
      "\n"
      R"({"history":[{"speaker":"user","text":"hi"}],"reference":"hello"})"
      "\n");
  const auto examples = parse_benchmark(in);
  ASSERT_EQ(examples.size(), 2u);
  EXPECT_EQ(examples[0].session_id, "s1");
  EXPECT_EQ(examples[0].history.size(), 3u);
  EXPECT_EQ(examples[0].gold_query->text(), "故宫 位置");
  EXPECT_EQ(examples[0].gold_knowledge->text, "故宫位于北京");
  EXPECT_EQ(examples[0].question_type, QuestionType::Where);
  EXPECT_TRUE(examples[0].has_ellipsis_or_coref);
  EXPECT_EQ(examples[1].question_type, QuestionType::None);
  EXPECT_EQ(examples[1].reference.speaker(), Speaker::System);

  std::istringstream bad(R"({"history":["a"],"reference":"b"})"
                         "\n"
                         R"({"history":["a"],"reference":"b","question_type":"whence"})");
  try {
    parse_benchmark(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(DatasetStats, TwoSessionsOfThreeAndFive) {
  // Session a ends on a user utterance after 3; session b runs to 5.
  std::istringstream in(
      R"({"session_id":"a","history":["u1"],"reference":"s1","question_type":"comparison"})"
      "\n"
      R"({"session_id":"a","history":["u1","s1"],"reference":"u2","question_type":"comparison","ellipsis_coref":true})"
      "\n"
      R"({"session_id":"b","history":["u1","s1","u2","s2"],"reference":"u3","question_type":"comparison"})"
      "\n"
      R"({"session_id":"b","history":["u1"],"reference":"s1","question_type":"who"})"
      "\n");
  const auto stats = dataset_stats(in);
  EXPECT_EQ(stats.sessions, 2u);
  EXPECT_EQ(stats.utterances, 8u);
  EXPECT_DOUBLE_EQ(stats.avg_utterances_per_session, 4.0);
  EXPECT_EQ(stats.question_types.at(QuestionType::Comparison), 3u);
  EXPECT_EQ(stats.question_types.at(QuestionType::Who), 1u);
  EXPECT_EQ(stats.ellipsis_coref, 1u);
  EXPECT_EQ(to_json(stats)["question_types"]["comparison"], 3);
}

TEST(DatasetStats, UnknownQuestionTypeIsParseError) {
  std::istringstream in(R"({"history":["a"],"reference":"b","question_type":"whence"})");
  EXPECT_EQ(code_of([&] { dataset_stats(in); }), ErrorCode::ParseError);
}

TEST(BenchmarkFile, StrictReadNeedsUserLast) {
  std::istringstream in(R"({"history":["a","b"],"reference":"c"})");
  EXPECT_EQ(code_of([&] { parse_benchmark(in); }), ErrorCode::ParseError);
}

TEST(DatasetStats, AverageIsUtterancesOverSessions) {
  std::mt19937_64 rng(8);
  std::vector<BenchmarkExample> examples;
  for (int i = 0; i < 200; ++i) {
    BenchmarkExample ex;
    if (rng() % 3) ex.session_id = "s" + std::to_string(rng() % 25);
    std::vector<std::string> texts(1 + rng() % 9, "x");
    ex.history = DialogueHistory::from_texts(texts);
    examples.push_back(ex);
  }
  const auto s = dataset_stats(examples);
  EXPECT_DOUBLE_EQ(s.avg_utterances_per_session, static_cast<double>(s.utterances) / static_cast<double>(s.sessions));
}
