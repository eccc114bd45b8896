#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "racetrack/error.hpp"

namespace racetrack {

enum class Speaker { User, System };

std::string_view speaker_name(Speaker s);
Speaker parse_speaker(std::string_view name);

/// An ordered token list. Metric code consumes these rather than raw text so
/// the tokenization scheme stays an explicit choice of the caller.
struct TokenSequence {
  std::vector<std::string> tokens;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
  bool operator==(const TokenSequence&) const = default;
};

enum class TokenScheme {
  // CJK codepoints become single-character tokens; everything else is
  // split at whitespace.
  CharCJKWordLatin,
  Whitespace,
};

TokenSequence tokenize(std::string_view text,
                       TokenScheme scheme = TokenScheme::CharCJKWordLatin);

/// Invalid bytes decode to one codepoint each (their Latin-1 value).
std::vector<char32_t> decode_utf8(std::string_view text);
std::string encode_utf8(char32_t cp);
bool is_cjk(char32_t cp);

class Utterance {
 public:
  /// Throws InvalidArgument when the text is blank.
  Utterance(Speaker speaker, std::string text);

  static Utterance user(std::string text) { return {Speaker::User, std::move(text)}; }
  static Utterance system(std::string text) { return {Speaker::System, std::move(text)}; }

  Speaker speaker() const noexcept { return speaker_; }
  const std::string& text() const noexcept { return text_; }

  bool operator==(const Utterance&) const = default;

 private:
  Speaker speaker_;
  std::string text_;
};

/// Alternating user/system utterances, starting with the user.
class DialogueHistory {
 public:
  DialogueHistory() = default;
  /// Throws InvalidHistory if speakers do not alternate starting with User.
  explicit DialogueHistory(std::vector<Utterance> utterances);

  /// Assigns User, System, User, ... to the given texts in order.
  static DialogueHistory from_texts(const std::vector<std::string>& texts);

  /// Throws InvalidHistory if the utterance would break alternation.
  void append(Utterance u);

  /// D_t = D_{t-1} + {R_{t-1}, U_t}.
  DialogueHistory extended(Utterance response, Utterance next_user) const;

  /// History without its first `count` utterances. `count` must be even so
  /// the result still starts with a User utterance.
  DialogueHistory without_oldest(std::size_t count) const;

  std::span<const Utterance> utterances() const noexcept { return utterances_; }
  std::vector<std::string> texts() const;
  std::size_t size() const noexcept { return utterances_.size(); }
  bool empty() const noexcept { return utterances_.empty(); }
  bool ends_with_user() const noexcept;
  const Utterance& back() const { return utterances_.back(); }

  bool operator==(const DialogueHistory&) const = default;

 private:
  std::vector<Utterance> utterances_;
};

enum class KnowledgeSource { Benchmark, QADocument, EntityDescription, WebSearch };

std::string_view knowledge_source_name(KnowledgeSource s);
KnowledgeSource parse_knowledge_source(std::string_view name);

struct KnowledgeSnippet {
  std::string text;
  KnowledgeSource source = KnowledgeSource::WebSearch;
  std::optional<int> label;
  std::optional<double> classifier_score;
  std::optional<std::string> provenance;

  /// Throws InvalidArgument on a label outside {0,1} or a score outside [0,1].
  void validate() const;
  bool operator==(const KnowledgeSnippet&) const = default;
};

struct KnowledgePool {
  std::vector<KnowledgeSnippet> snippets;

  std::size_t size() const noexcept { return snippets.size(); }
  bool empty() const noexcept { return snippets.empty(); }
  std::vector<std::string> texts() const;
  bool operator==(const KnowledgePool&) const = default;
};

class WebQuery {
 public:
  /// Throws InvalidArgument when blank.
  explicit WebQuery(std::string text);
  const std::string& text() const noexcept { return text_; }
  bool operator==(const WebQuery&) const = default;

 private:
  std::string text_;
};

/// Question categories used by benchmark examples and opening utterances.
enum class QuestionType {
  What, Who, Where, When, Count, Comparison, SelectAmong, Verify, How, Why, None,
};

std::string_view question_type_name(QuestionType t);
/// Throws ParseError for names outside the fixed set.
QuestionType parse_question_type(std::string_view name);

std::string_view trim(std::string_view s);

}  // namespace racetrack
