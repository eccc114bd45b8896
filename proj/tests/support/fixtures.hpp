#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <string>

#include "racetrack/arena.hpp"
#include "racetrack/backends.hpp"
#include "racetrack/clock.hpp"
#include "racetrack/pipeline.hpp"
#include "racetrack/prompts.hpp"
#include "racetrack/service.hpp"

namespace fixtures {

namespace fs = std::filesystem;
using namespace racetrack;

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

inline fs::path golden_dir() { return RACETRACK_GOLDEN_DIR; }
inline fs::path data_dir() { return RACETRACK_DATA_DIR; }

/// Hand-written expected output.
inline std::string expected(const std::string& name) { return read_file(golden_dir() / name); }

/// Recorded output. RACETRACK_UPDATE_GOLDEN=1 rewrites the file instead.
inline std::string golden(const std::string& name, const std::string& actual) {
  const auto path = golden_dir() / name;
  if (const char* u = std::getenv("RACETRACK_UPDATE_GOLDEN"); u && std::string(u) == "1") write_file(path, actual);
  return read_file(path);
}

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("racetrack-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline KnowledgePool pool_of(std::initializer_list<const char*> texts) {
  KnowledgePool p;
  for (const char* t : texts) {
    KnowledgeSnippet s;
    s.text = t;
    p.snippets.push_back(s);
  }
  return p;
}

// The conversation used by the golden pipeline tests.
inline DialogueHistory travel_history() {
  return DialogueHistory::from_texts({"你好，我想去北京旅游", "好呀，北京有很多好玩的地方", "故宫什么时候开门？"});
}

inline const char* kTravelQuery = "故宫 开放时间";
inline const char* kTravelSnippet = "故宫开放时间为每天八点半至五点";
inline const char* kTravelKnowledgeReply = "故宫每天八点半开门，记得提前预约哦";
inline const char* kTravelPlainReply = "故宫一般早上开门";

inline std::shared_ptr<CorpusSearch> travel_search(MockLatency latency = {}) {
  std::vector<KnowledgeSnippet> docs;
  for (const char* text : {"长城位于北京北部", kTravelSnippet, "颐和园是皇家园林", "故宫门票需要实名预约"}) {
    KnowledgeSnippet s;
    s.text = text;
    docs.push_back(std::move(s));
  }
  return std::make_shared<CorpusSearch>(std::move(docs), std::move(latency));
}

/// Scripted replies for every prompt the travel conversation can produce.
/// `need` is the pre-classifier verdict text.
inline std::shared_ptr<ScriptedGenerator> travel_generator(const std::string& need = "0.3", MockLatency latency = {}) {
  auto g = std::make_shared<ScriptedGenerator>(std::nullopt, std::move(latency));
  const auto h = travel_history();
  KnowledgePool pool;
  KnowledgeSnippet s;
  s.text = kTravelSnippet;
  pool.snippets.push_back(s);
  g->add(build_query_prompt(h).rendered, {kTravelQuery, std::nullopt, std::nullopt});
  g->add(build_knowledge_prompt(pool, h).rendered, {kTravelKnowledgeReply, std::vector<double>{0.92}, std::nullopt});
  g->add(build_response_prompt(h).rendered, {kTravelPlainReply, std::nullopt, std::nullopt});
  g->add(build_need_knowledge_prompt(h).rendered, {need, std::vector<double>{}, std::nullopt});
  return g;
}

/// Sleeps per prompt kind, then delegates. Lets one generator show different
/// latencies for query generation and response generation.
class StageDelayGenerator final : public TextGenerator {
 public:
  StageDelayGenerator(std::shared_ptr<TextGenerator> inner, std::shared_ptr<Clock> clock,
                      std::chrono::milliseconds query, std::chrono::milliseconds response,
                      std::chrono::milliseconds need = std::chrono::milliseconds(0))
      : inner_(std::move(inner)), clock_(std::move(clock)), query_(query), response_(response), need_(need) {}

  GenerationResult generate(const GenerationRequest& request) override {
    switch (classify_prompt(request.prompt).value_or(PromptKind::Response)) {
      case PromptKind::Query: clock_->sleep_for(query_); break;
      case PromptKind::NeedKnowledge: clock_->sleep_for(need_); break;
      default: clock_->sleep_for(response_); break;
    }
    return inner_->generate(request);
  }

 private:
  std::shared_ptr<TextGenerator> inner_;
  std::shared_ptr<Clock> clock_;
  std::chrono::milliseconds query_, response_, need_;
};

// ---------------------------------------------------------------------------
// Arena helpers

inline std::vector<BotDescriptor> bots(std::initializer_list<const char*> ids) {
  std::vector<BotDescriptor> out;
  for (const char* id : ids) {
    BotDescriptor b;
    b.bot_id = id;
    out.push_back(b);
  }
  return out;
}

inline std::vector<BotDescriptor> numbered_bots(std::size_t n) {
  std::vector<BotDescriptor> out;
  for (std::size_t i = 1; i <= n; ++i) {
    BotDescriptor b;
    b.bot_id = "bot-" + std::to_string(i);
    out.push_back(b);
  }
  return out;
}

inline TurnTranscript canned(const DialogueHistory& history, std::string text) {
  TurnTranscript t;
  t.history_in = history;
  t.mode = PipelineMode::NoKnowledge;
  t.response = Utterance::system(std::move(text));
  return t;
}

// Reply text never contains the bot id, so payload scans stay meaningful.
inline std::string reply_for(const std::string& bot_id, const DialogueHistory& history) {
  return "回复" + std::to_string(fnv1a64(bot_id) % 1000003) + "-" + std::to_string(history.size());
}

inline BotRunner distinct_runner() {
  return [](const BotDescriptor& bot, const DialogueHistory& h) { return canned(h, reply_for(bot.bot_id, h)); };
}

/// Records every (bot, input history) pair the arena hands out.
struct RecordingRunner {
  std::mutex mu;
  std::vector<std::pair<std::string, DialogueHistory>> calls;

  BotRunner runner() {
    return [this](const BotDescriptor& bot, const DialogueHistory& h) {
      {
        std::lock_guard lock(mu);
        calls.emplace_back(bot.bot_id, h);
      }
      return canned(h, reply_for(bot.bot_id, h));
    };
  }
};

inline std::size_t slot_of(const ArenaTurn& turn, const std::string& bot_id) {
  for (std::size_t slot = 0; slot < turn.candidates.size(); ++slot)
    if (turn.candidate_at_slot(slot).bot_id == bot_id) return slot;
  throw std::runtime_error("bot " + bot_id + " has no candidate");
}

/// Sends a message and selects `bot_id` for it.
inline void play_turn(ArenaSession& s, const std::string& bot_id, const BotRunner& runner,
                      const std::string& text = "你好") {
  const auto& turn = s.submit_user_message(text, runner);
  s.select_response(turn.turn_index, slot_of(turn, bot_id));
}

// ---------------------------------------------------------------------------
// Service helpers

inline OpeningPool shipped_openings() { return OpeningPool::load((data_dir() / "openings.jsonl").string()); }

/// Deterministic wall clock: each call advances by one millisecond.
inline std::function<std::int64_t()> ticking_ms(std::int64_t start = 1700000000000) {
  auto t = std::make_shared<std::atomic<std::int64_t>>(start);
  return [t] { return t->fetch_add(1); };
}

inline ServiceOptions service_options(std::uint64_t seed = 42, std::string admin = "sekret") {
  ServiceOptions o;
  o.seed = seed;
  o.admin_token = std::move(admin);
  o.now_ms = ticking_ms();
  return o;
}

/// Six bots with ids that never occur in reply texts.
inline std::vector<BotDescriptor> arena_bots(std::size_t n = 6) {
  std::vector<BotDescriptor> out;
  for (std::size_t i = 0; i < n; ++i) {
    BotDescriptor b;
    b.bot_id = "contestant-" + std::string(1, static_cast<char>('p' + i)) + "x" + std::to_string(i * 7 + 3);
    out.push_back(b);
  }
  return out;
}

}  // namespace fixtures
