#include "racetrack/arena.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <set>

namespace racetrack {

using nlohmann::json;

std::string slot_label(std::size_t slot) {
  std::string label;
  std::size_t n = slot + 1;
  while (n > 0) {
    --n;
    label.insert(label.begin(), static_cast<char>('A' + n % 26));
    n /= 26;
  }
  return label;
}

std::optional<std::size_t> parse_slot_label(std::string_view label) {
  if (label.empty() || label.size() > 4) return std::nullopt;
  std::size_t n = 0;
  for (char c : label) {
    if (c < 'A' || c > 'Z') return std::nullopt;
    n = n * 26 + static_cast<std::size_t>(c - 'A' + 1);
  }
  return n - 1;
}

std::vector<std::size_t> ArenaTurn::display_order() const {
  std::vector<std::size_t> order(permutation.size());
  for (std::size_t c = 0; c < permutation.size(); ++c) order[permutation[c]] = c;
  return order;
}

const Candidate& ArenaTurn::candidate_at_slot(std::size_t slot) const {
  if (slot >= candidates.size())
    throw Error(ErrorCode::InvalidSlot, "turn " + std::to_string(turn_index) + " has no slot " +
                                            slot_label(slot));
  return candidates[display_order()[slot]];
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

std::string_view session_state_name(SessionState s) {
  return s == SessionState::Open ? "open" : "closed";
}

// ---------------------------------------------------------------------------

ArenaSession ArenaSession::create(std::string session_id, std::vector<BotDescriptor> bots,
                                  std::uint64_t seed, std::int64_t opened_at_ms,
                                  std::string annotator_id) {
  if (bots.size() < 2)
    throw Error(ErrorCode::TooFewBots, "an arena session needs at least two bots");
  std::set<std::string> ids;
  for (const auto& b : bots) {
    if (b.bot_id.empty()) throw Error(ErrorCode::InvalidArgument, "bot id is empty");
    if (!ids.insert(b.bot_id).second)
      throw Error(ErrorCode::InvalidArgument, "duplicate bot id " + b.bot_id);
  }
  ArenaSession s;
  s.id_ = std::move(session_id);
  s.bots_ = std::move(bots);
  s.seed_ = seed;
  s.opened_at_ms_ = opened_at_ms;
  s.annotator_id_ = std::move(annotator_id);
  return s;
}

std::uint64_t ArenaSession::turn_seed(std::size_t turn_index) const {
  return splitmix64(seed_ ^ splitmix64(turn_index));
}

bool ArenaSession::has_pending_turn() const {
  return !turns_.empty() && !turns_.back().selected_bot;
}

void ArenaSession::require_open() const {
  if (state_ != SessionState::Open) throw Error(ErrorCode::SessionClosed, "session " + id_ + " is closed");
}

ArenaTurn ArenaSession::prepare_turn(std::string_view text, const BotRunner& runner) const {
  require_open();
  if (has_pending_turn())
    throw Error(ErrorCode::TurnPending,
                "turn " + std::to_string(turns_.back().turn_index) + " still awaits a selection");

  ArenaTurn turn;
  turn.turn_index = turns_.size() + 1;
  turn.user_message = Utterance::user(std::string(text));
  DialogueHistory input = history_;
  input.append(turn.user_message);

  // Every bot sees the same history object.
  std::vector<std::future<TurnTranscript>> pending;
  pending.reserve(bots_.size());
  for (const auto& bot : bots_)
    pending.push_back(std::async(std::launch::async, [&runner, &bot, &input] { return runner(bot, input); }));

  for (std::size_t i = 0; i < bots_.size(); ++i) {
    try {
      auto transcript = pending[i].get();
      if (!transcript.response) throw Error(ErrorCode::MalformedResponse, "transcript has no response");
      turn.candidates.push_back({bots_[i].bot_id, transcript.response->text(), transcript.timings});
    } catch (const std::exception& e) {
      turn.failed_bots.push_back({bots_[i].bot_id, e.what()});
    }
  }
  if (turn.candidates.empty())
    throw Error(ErrorCode::AllBotsFailed, "no bot produced a response for turn " +
                                              std::to_string(turn.turn_index));

  turn.shuffle_seed = turn_seed(turn.turn_index);
  turn.permutation = seeded_permutation(turn.candidates.size(), turn.shuffle_seed);
  return turn;
}

void ArenaSession::apply_turn(ArenaTurn turn) {
  require_open();
  if (has_pending_turn()) throw Error(ErrorCode::TurnPending, "previous turn awaits a selection");
  if (turn.turn_index != turns_.size() + 1)
    throw Error(ErrorCode::InvalidArgument, "turn index " + std::to_string(turn.turn_index) +
                                                " out of sequence");
  if (turn.candidates.empty()) throw Error(ErrorCode::AllBotsFailed, "turn has no candidates");
  std::vector<bool> seen(turn.candidates.size(), false);
  if (turn.permutation.size() != turn.candidates.size())
    throw Error(ErrorCode::InvalidArgument, "permutation size differs from candidate count");
  for (auto slot : turn.permutation) {
    if (slot >= seen.size() || seen[slot])
      throw Error(ErrorCode::InvalidArgument, "permutation is not a bijection");
    seen[slot] = true;
  }
  if (turn.selected_bot || turn.selected_slot)
    throw Error(ErrorCode::InvalidArgument, "a new turn cannot carry a selection");
  turns_.push_back(std::move(turn));
}

const ArenaTurn& ArenaSession::submit_user_message(std::string_view text, const BotRunner& runner) {
  apply_turn(prepare_turn(text, runner));
  return turns_.back();
}

const ArenaTurn& ArenaSession::turn_at(std::size_t turn_index) const {
  if (turn_index < 1 || turn_index > turns_.size())
    throw Error(ErrorCode::NotFound, "session " + id_ + " has no turn " + std::to_string(turn_index));
  return turns_[turn_index - 1];
}

std::string ArenaSession::check_selection(std::size_t turn_index, std::size_t slot) const {
  require_open();
  const auto& turn = turn_at(turn_index);
  if (turn.selected_bot)
    throw Error(ErrorCode::AlreadySelected, "turn " + std::to_string(turn_index) + " already has a selection");
  return turn.candidate_at_slot(slot).bot_id;
}

void ArenaSession::apply_selection(std::size_t turn_index, std::size_t slot) {
  const auto bot = check_selection(turn_index, slot);
  auto& turn = turns_[turn_index - 1];
  const auto& chosen = turn.candidate_at_slot(slot);
  history_.append(turn.user_message);
  history_.append(Utterance::system(chosen.text));
  turn.selected_bot = bot;
  turn.selected_slot = slot;
}

void ArenaSession::select_response(std::size_t turn_index, std::size_t slot) {
  apply_selection(turn_index, slot);
}

SessionVerdict ArenaSession::verdict() const {
  SessionVerdict v;
  v.completed_turns = static_cast<std::size_t>(
      std::count_if(turns_.begin(), turns_.end(), [](const ArenaTurn& t) { return t.selected_bot.has_value(); }));
  v.valid = v.completed_turns >= kMinValidTurns;
  return v;
}

SessionVerdict ArenaSession::check_close() const {
  require_open();
  return verdict();
}

SessionVerdict ArenaSession::apply_close(std::int64_t closed_at_ms) {
  const auto v = check_close();
  state_ = SessionState::Closed;
  closed_at_ms_ = closed_at_ms;
  return v;
}

SessionVerdict ArenaSession::close_session(std::int64_t closed_at_ms) { return apply_close(closed_at_ms); }

json client_turn_payload(const ArenaTurn& turn) {
  json candidates = json::array();
  const auto order = turn.display_order();
  for (std::size_t slot = 0; slot < order.size(); ++slot)
    candidates.push_back({{"slot", slot_label(slot)}, {"text", turn.candidates[order[slot]].text}});
  return json{{"turn_index", turn.turn_index}, {"candidates", std::move(candidates)}};
}

json ArenaSession::client_view() const {
  json history = json::array();
  for (const auto& u : history_.utterances())
    history.push_back({{"speaker", speaker_name(u.speaker())}, {"text", u.text()}});
  json turns = json::array();
  for (const auto& t : turns_) {
    json item = client_turn_payload(t);
    item["user_message"] = t.user_message.text();
    item["selected_slot"] = t.selected_slot ? json(slot_label(*t.selected_slot)) : json(nullptr);
    turns.push_back(std::move(item));
  }
  const auto v = verdict();
  json view{{"session_id", id_},
            {"state", session_state_name(state_)},
            {"bot_count", bots_.size()},
            {"history", std::move(history)},
            {"turns", std::move(turns)},
            {"completed_turns", v.completed_turns},
            {"pending", has_pending_turn()}};
  if (state_ == SessionState::Closed) view["valid"] = v.valid;
  return view;
}

// ---------------------------------------------------------------------------

ArenaSession& ArenaStore::add(ArenaSession session) {
  const auto id = session.id();
  auto [it, inserted] = sessions_.emplace(id, std::move(session));
  if (!inserted) throw Error(ErrorCode::InvalidArgument, "session " + id + " already exists");
  return it->second;
}

ArenaSession& ArenaStore::get(const std::string& session_id) {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(ErrorCode::NotFound, "no session " + session_id);
  return it->second;
}

const ArenaSession& ArenaStore::get(const std::string& session_id) const {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(ErrorCode::NotFound, "no session " + session_id);
  return it->second;
}

bool ArenaStore::contains(const std::string& session_id) const {
  return sessions_.count(session_id) > 0;
}

std::vector<RankingEntry> ranking(const ArenaStore& store) {
  std::map<std::string, RankingEntry> by_bot;
  for (const auto& [id, session] : store.sessions()) {
    if (session.state() != SessionState::Closed || !session.verdict().valid) continue;
    for (const auto& bot : session.bots()) {
      auto& e = by_bot[bot.bot_id];
      e.bot_id = bot.bot_id;
      ++e.valid_sessions;
    }
    for (const auto& turn : session.turns())
      if (turn.selected_bot) ++by_bot[*turn.selected_bot].selections;
  }
  std::vector<RankingEntry> out;
  out.reserve(by_bot.size());
  for (auto& [id, e] : by_bot) out.push_back(std::move(e));
  std::stable_sort(out.begin(), out.end(), [](const RankingEntry& a, const RankingEntry& b) {
    if (a.selections != b.selections) return a.selections > b.selections;
    return a.bot_id < b.bot_id;
  });
  return out;
}

// ---------------------------------------------------------------------------

OpeningPool OpeningPool::parse(std::istream& in) {
  OpeningPool pool;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      Opening o;
      o.id = j.at("id").get<std::string>();
      o.text = j.at("text").get<std::string>();
      const auto category = j.at("category").get<std::string>();
      if (category == "chitchat") o.category = OpeningCategory::Chitchat;
      else if (category == "knowledge") o.category = OpeningCategory::Knowledge;
      else throw Error(ErrorCode::ParseError, "unknown category '" + category + "'");
      o.question_type = parse_question_type(j.value("question_type", "none"));
      if (trim(o.text).empty()) throw Error(ErrorCode::ParseError, "opening text is blank");
      pool.entries.push_back(std::move(o));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::ParseError, "opening pool line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return pool;
}

OpeningPool OpeningPool::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open opening pool " + path);
  return parse(in);
}

const Opening& topic_tip(const OpeningPool& pool, std::mt19937_64& rng) {
  if (pool.entries.empty()) throw Error(ErrorCode::EmptyPool, "opening pool is empty");
  std::uniform_int_distribution<std::size_t> pick(0, pool.entries.size() - 1);
  return pool.entries[pick(rng)];
}

}  // namespace racetrack
