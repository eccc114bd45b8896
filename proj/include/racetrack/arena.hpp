#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "racetrack/core.hpp"
#include "racetrack/pipeline.hpp"

namespace racetrack {

/// A session counts toward rankings only with more than five selected turns.
inline constexpr std::size_t kMinValidTurns = 6;
inline constexpr std::size_t kDefaultArenaBots = 6;

/// An anonymous contestant. bot_id never leaves the server while a session
/// is open.
struct BotDescriptor {
  std::string bot_id;
  PipelineMode mode = PipelineMode::Full;
  std::string generator;  // backend binding names, resolved by the caller
  std::string search;

  bool operator==(const BotDescriptor&) const = default;
};

struct Candidate {
  std::string bot_id;
  std::string text;
  std::vector<StageTiming> timings;

  bool operator==(const Candidate&) const = default;
};

struct FailedBot {
  std::string bot_id;
  std::string reason;

  bool operator==(const FailedBot&) const = default;
};

/// "A", "B", ..., "Z", "AA", ...
std::string slot_label(std::size_t slot);
std::optional<std::size_t> parse_slot_label(std::string_view label);

struct ArenaTurn {
  std::size_t turn_index = 0;  // 1-based
  Utterance user_message = Utterance::user("?");
  std::vector<Candidate> candidates;
  std::vector<FailedBot> failed_bots;
  /// permutation[candidate index] = display slot.
  std::vector<std::size_t> permutation;
  std::uint64_t shuffle_seed = 0;
  std::optional<std::string> selected_bot;
  std::optional<std::size_t> selected_slot;

  /// display slot -> candidate index (inverse of permutation).
  std::vector<std::size_t> display_order() const;
  const Candidate& candidate_at_slot(std::size_t slot) const;
  bool operator==(const ArenaTurn&) const = default;
};

/// Deterministic Fisher-Yates permutation of n items from a 64-bit seed.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

enum class SessionState { Open, Closed };
std::string_view session_state_name(SessionState s);

struct SessionVerdict {
  bool valid = false;
  std::size_t completed_turns = 0;
};

/// Produces one bot's reply to the unified history. Throwing excludes the bot
/// from the turn.
using BotRunner = std::function<TurnTranscript(const BotDescriptor&, const DialogueHistory&)>;

class ArenaSession {
 public:
  /// TooFewBots unless at least two bots with distinct ids are given.
  static ArenaSession create(std::string session_id, std::vector<BotDescriptor> bots,
                             std::uint64_t seed, std::int64_t opened_at_ms = 0,
                             std::string annotator_id = {});

  // Each operation is split into a const "prepare/check" step that validates
  // and computes, and a mutating "apply" step. The service persists the
  // prepared result between the two; replay only uses the apply steps.

  /// Runs every bot concurrently on the unified history plus `text` and
  /// shuffles the surviving candidates. Does not modify the session.
  ArenaTurn prepare_turn(std::string_view text, const BotRunner& runner) const;
  void apply_turn(ArenaTurn turn);
  const ArenaTurn& submit_user_message(std::string_view text, const BotRunner& runner);

  /// Bot behind `slot` of `turn_index`. InvalidSlot / AlreadySelected /
  /// SessionClosed / NotFound as appropriate.
  std::string check_selection(std::size_t turn_index, std::size_t slot) const;
  void apply_selection(std::size_t turn_index, std::size_t slot);
  void select_response(std::size_t turn_index, std::size_t slot);

  SessionVerdict check_close() const;
  SessionVerdict apply_close(std::int64_t closed_at_ms = 0);
  SessionVerdict close_session(std::int64_t closed_at_ms = 0);

  /// Selected turns and the >5 rule; meaningful at any time.
  SessionVerdict verdict() const;
  bool has_pending_turn() const;
  /// Seed for the shuffle of the turn with this index.
  std::uint64_t turn_seed(std::size_t turn_index) const;

  const std::string& id() const noexcept { return id_; }
  const std::vector<BotDescriptor>& bots() const noexcept { return bots_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const DialogueHistory& unified_history() const noexcept { return history_; }
  const std::vector<ArenaTurn>& turns() const noexcept { return turns_; }
  SessionState state() const noexcept { return state_; }
  std::int64_t opened_at_ms() const noexcept { return opened_at_ms_; }
  std::optional<std::int64_t> closed_at_ms() const noexcept { return closed_at_ms_; }
  const std::string& annotator_id() const noexcept { return annotator_id_; }

  /// What an annotator may see: slots and texts, never bot ids.
  nlohmann::json client_view() const;

  bool operator==(const ArenaSession&) const = default;

 private:
  ArenaSession() = default;
  const ArenaTurn& turn_at(std::size_t turn_index) const;
  void require_open() const;

  std::string id_;
  std::vector<BotDescriptor> bots_;
  std::uint64_t seed_ = 0;
  DialogueHistory history_;
  std::vector<ArenaTurn> turns_;
  SessionState state_ = SessionState::Open;
  std::int64_t opened_at_ms_ = 0;
  std::optional<std::int64_t> closed_at_ms_;
  std::string annotator_id_;
};

/// Client payload for a freshly offered turn: {turn_index, candidates:[{slot, text}]}.
nlohmann::json client_turn_payload(const ArenaTurn& turn);

struct RankingEntry {
  std::string bot_id;
  std::size_t selections = 0;
  std::size_t valid_sessions = 0;

  bool operator==(const RankingEntry&) const = default;
};

class ArenaStore {
 public:
  ArenaSession& add(ArenaSession session);
  ArenaSession& get(const std::string& session_id);
  const ArenaSession& get(const std::string& session_id) const;
  bool contains(const std::string& session_id) const;
  std::size_t size() const noexcept { return sessions_.size(); }
  const std::map<std::string, ArenaSession>& sessions() const noexcept { return sessions_; }

  bool operator==(const ArenaStore&) const = default;

 private:
  std::map<std::string, ArenaSession> sessions_;
};

/// Selection counts over valid closed sessions, most selected first, ties by
/// bot_id.
std::vector<RankingEntry> ranking(const ArenaStore& store);

enum class OpeningCategory { Chitchat, Knowledge };

struct Opening {
  std::string id;
  std::string text;
  OpeningCategory category = OpeningCategory::Chitchat;
  QuestionType question_type = QuestionType::None;
};

struct OpeningPool {
  std::vector<Opening> entries;

  /// JSON Lines with id, text, category and question_type per record.
  static OpeningPool load(const std::string& path);
  static OpeningPool parse(std::istream& in);
};

/// Uniform draw. EmptyPool when the pool has no entries.
const Opening& topic_tip(const OpeningPool& pool, std::mt19937_64& rng);

}  // namespace racetrack
