#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <httplib.h>

#include "fixtures.hpp"
#include "racetrack/backends.hpp"
#include "racetrack/http_backends.hpp"
#include "racetrack/metrics.hpp"

using namespace racetrack;
using namespace std::chrono_literals;

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

GenerationRequest request(std::string prompt, bool scores = false, bool logprobs = false) {
  GenerationRequest r;
  r.prompt = std::move(prompt);
  r.want_knowledge_scores = scores;
  r.want_token_logprobs = logprobs;
  return r;
}

// A port nobody listens on: bound once, then released.
int closed_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

}  // namespace

TEST(EchoGenerator, ReturnsPromptAndOneScorePerSnippet) {
  EchoGenerator g;
  const auto kr = build_knowledge_prompt(fixtures::pool_of({"k1", "k2"}),
                                         DialogueHistory::from_texts({"hi"}))
                      .rendered;
  const auto r = g.generate(request(kr, true, true));
  EXPECT_EQ(r.text, kr);
  ASSERT_TRUE(r.knowledge_scores);
  EXPECT_EQ(r.knowledge_scores->size(), 2u);
  ASSERT_TRUE(r.token_logprobs);
  for (double lp : *r.token_logprobs) EXPECT_LE(lp, 0.0);
  EXPECT_EQ(g.calls(), 1u);
}

TEST(EchoGenerator, RejectsEmptyPrompt) {
  EchoGenerator g;
  EXPECT_EQ(code_of([&] { g.generate(request(" ")); }), ErrorCode::InvalidArgument);
}

TEST(MockLatency, TimeoutAndUnavailable) {
  auto clock = std::make_shared<ManualClock>();
  MockLatency slow;
  slow.delay = 200ms;
  slow.timeout = 50ms;
  slow.clock = clock;
  EchoGenerator g(slow);
  EXPECT_EQ(code_of([&] { g.generate(request("p")); }), ErrorCode::Timeout);
  EXPECT_EQ(clock->now(), std::chrono::nanoseconds(50ms));

  MockLatency down;
  down.unavailable = true;
  EchoGenerator d(down);
  EXPECT_EQ(code_of([&] { d.generate(request("p")); }), ErrorCode::BackendUnavailable);
}

TEST(ScriptedGenerator, LooksUpByPromptAndRecordsCalls) {
  ScriptedGenerator g;
  g.add("p1", {"r1", std::nullopt, std::nullopt});
  EXPECT_EQ(g.generate(request("p1")).text, "r1");
  EXPECT_EQ(code_of([&] { g.generate(request("p2")); }), ErrorCode::MalformedResponse);
  EXPECT_EQ(g.calls(), 2u);
  EXPECT_EQ(g.prompts_seen(), (std::vector<std::string>{"p1", "p2"}));
}

TEST(CorpusSearch, RanksByOverlapAndFailsOnNoHit) {
  auto s = fixtures::travel_search();
  const auto r = s->search(WebQuery("故宫 开放时间"), 2);
  ASSERT_EQ(r.snippets.size(), 2u);
  EXPECT_EQ(r.snippets[0].text, fixtures::kTravelSnippet);
  EXPECT_EQ(r.snippets[0].provenance, "corpus:1");
  EXPECT_EQ(code_of([&] { s->search(WebQuery("zzz"), 1); }), ErrorCode::EmptyResult);
  EXPECT_EQ(code_of([&] { s->search(WebQuery("故宫"), 0); }), ErrorCode::InvalidArgument);
}

TEST(HashedTrigramEmbedder, UnitNormAndDeterministic) {
  HashedTrigramEmbedder e(64);
  const auto a = e.embed("故宫开放时间");
  double norm = 0;
  for (double c : a.components) norm += c * c;
  EXPECT_NEAR(norm, 1.0, 1e-12);
  EXPECT_EQ(a, e.embed("故宫开放时间"));
  EXPECT_EQ(e.embed("ab").dimension(), 64u);
  EXPECT_THROW(e.embed(""), Error);
}

TEST(WireFormat, RejectsOutOfRangeFields) {
  EXPECT_EQ(code_of([] { generation_result_from_json({{"text", "x"}, {"token_logprobs", {0.5}}}); }),
            ErrorCode::MalformedResponse);
  EXPECT_EQ(code_of([] { generation_result_from_json({{"text", "x"}, {"knowledge_scores", {1.5}}}); }),
            ErrorCode::MalformedResponse);
  EXPECT_EQ(code_of([] { generation_result_from_json({{"txt", "x"}}); }), ErrorCode::MalformedResponse);
}

class HttpRoundTrip : public ::testing::Test {
 protected:
  void SetUp() override {
    server_ = std::make_unique<BackendServer>(std::make_shared<EchoGenerator>(), fixtures::travel_search(),
                                              std::make_shared<HashedTrigramEmbedder>());
    port_ = server_->start("127.0.0.1", 0);
    url_ = "http://127.0.0.1:" + std::to_string(port_);
  }
  void TearDown() override { server_->stop(); }

  std::unique_ptr<BackendServer> server_;
  int port_ = 0;
  std::string url_;
};

TEST_F(HttpRoundTrip, GenerationMatchesInProcess) {
  HttpGenerator remote(HttpEndpoint{url_, 2000ms});
  EchoGenerator local;
  const auto prompt = build_knowledge_prompt(fixtures::pool_of({"故宫"}),
                                             fixtures::travel_history())
                          .rendered;
  EXPECT_EQ(remote.generate(request(prompt, true, true)), local.generate(request(prompt, true, true)));
}

TEST_F(HttpRoundTrip, SearchAndEmbedMatchInProcess) {
  HttpSearch remote(HttpEndpoint{url_, 2000ms});
  const auto r = remote.search(WebQuery("故宫 开放时间"), 1);
  ASSERT_EQ(r.snippets.size(), 1u);
  EXPECT_EQ(r.snippets[0].text, fixtures::kTravelSnippet);

  HttpEmbedder e(HttpEndpoint{url_, 2000ms});
  HashedTrigramEmbedder local;
  EXPECT_EQ(e.embed("故宫开放时间"), local.embed("故宫开放时间"));
}

TEST_F(HttpRoundTrip, EmptyResultSurvivesTheWire) {
  HttpSearch remote(HttpEndpoint{url_, 2000ms});
  EXPECT_EQ(code_of([&] { remote.search(WebQuery("zzz"), 1); }), ErrorCode::EmptyResult);
}

TEST_F(HttpRoundTrip, PipelineOverHttpMatchesInProcess) {
  PipelineBackends remote{std::make_shared<HttpGenerator>(HttpEndpoint{url_, 2000ms}),
                          std::make_shared<HttpSearch>(HttpEndpoint{url_, 2000ms})};
  PipelineBackends local{std::make_shared<EchoGenerator>(), fixtures::travel_search()};
  ManualClock c1, c2;
  auto a = run_turn(fixtures::travel_history(), PipelineMode::Full, remote, c1);
  auto b = run_turn(fixtures::travel_history(), PipelineMode::Full, local, c2);
  EXPECT_EQ(a.response, b.response);
  EXPECT_EQ(a.pool, b.pool);
}

TEST(HttpErrors, ConnectionRefusedIsUnavailable) {
  HttpGenerator g(HttpEndpoint{"http://127.0.0.1:" + std::to_string(closed_port()), 500ms});
  EXPECT_EQ(code_of([&] { g.generate(request("p")); }), ErrorCode::BackendUnavailable);
}

TEST(HttpErrors, SlowServerTimesOut) {
  MockLatency slow;
  slow.delay = 800ms;
  BackendServer server(std::make_shared<EchoGenerator>(slow), nullptr, nullptr);
  const int port = server.start("127.0.0.1", 0);
  HttpGenerator g(HttpEndpoint{"http://127.0.0.1:" + std::to_string(port), 150ms});
  EXPECT_EQ(code_of([&] { g.generate(request("p")); }), ErrorCode::Timeout);
  server.stop();
}

TEST(HttpErrors, GarbageBodyIsMalformed) {
  httplib::Server raw;
  raw.Post("/v1/generate", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json", "application/json");
  });
  raw.Post("/v1/search", [](const httplib::Request&, httplib::Response& res) {
    res.status = 503;
    res.set_content(R"({"error":"BackendUnavailable","message":"down"})", "application/json");
  });
  const int port = raw.bind_to_any_port("127.0.0.1");
  std::thread t([&] { raw.listen_after_bind(); });
  raw.wait_until_ready();
  const std::string url = "http://127.0.0.1:" + std::to_string(port);
  HttpGenerator g(HttpEndpoint{url, 1000ms});
  EXPECT_EQ(code_of([&] { g.generate(request("p")); }), ErrorCode::MalformedResponse);
  HttpSearch s(HttpEndpoint{url, 1000ms});
  EXPECT_EQ(code_of([&] { s.search(WebQuery("q"), 1); }), ErrorCode::BackendUnavailable);
  raw.stop();
  t.join();
}

TEST(HttpStatus, Mapping) {
  EXPECT_EQ(http_status_for(ErrorCode::NotFound), 404);
  EXPECT_EQ(http_status_for(ErrorCode::InvalidSlot), 400);
  EXPECT_EQ(http_status_for(ErrorCode::TurnPending), 409);
  EXPECT_EQ(http_status_for(ErrorCode::Timeout), 504);
}
