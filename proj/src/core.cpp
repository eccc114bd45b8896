#include "racetrack/core.hpp"

#include <algorithm>
#include <utility>

namespace racetrack {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyHistory: return "EmptyHistory";
    case ErrorCode::InvalidHistory: return "InvalidHistory";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::EmptyResult: return "EmptyResult";
    case ErrorCode::GenerationFailed: return "GenerationFailed";
    case ErrorCode::ReferenceTooShort: return "ReferenceTooShort";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooFewBots: return "TooFewBots";
    case ErrorCode::SessionClosed: return "SessionClosed";
    case ErrorCode::TurnPending: return "TurnPending";
    case ErrorCode::AllBotsFailed: return "AllBotsFailed";
    case ErrorCode::AlreadySelected: return "AlreadySelected";
    case ErrorCode::InvalidSlot: return "InvalidSlot";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::PositiveLogProb: return "PositiveLogProb";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateScore: return "DegenerateScore";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::StorageFailure: return "StorageFailure";
    case ErrorCode::CorruptLog: return "CorruptLog";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n\v\f";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return s.substr(first, last - first + 1);
}

std::string_view speaker_name(Speaker s) {
  return s == Speaker::User ? "user" : "system";
}

Speaker parse_speaker(std::string_view name) {
  if (name == "user") return Speaker::User;
  if (name == "system") return Speaker::System;
  throw Error(ErrorCode::InvalidArgument, "unknown speaker '" + std::string(name) + "'");
}

std::string_view knowledge_source_name(KnowledgeSource s) {
  switch (s) {
    case KnowledgeSource::Benchmark: return "benchmark";
    case KnowledgeSource::QADocument: return "qa_document";
    case KnowledgeSource::EntityDescription: return "entity_description";
    case KnowledgeSource::WebSearch: return "web_search";
  }
  return "web_search";
}

KnowledgeSource parse_knowledge_source(std::string_view name) {
  if (name == "benchmark") return KnowledgeSource::Benchmark;
  if (name == "qa_document") return KnowledgeSource::QADocument;
  if (name == "entity_description") return KnowledgeSource::EntityDescription;
  if (name == "web_search") return KnowledgeSource::WebSearch;
  throw Error(ErrorCode::InvalidArgument, "unknown knowledge source '" + std::string(name) + "'");
}

namespace {

constexpr std::pair<QuestionType, std::string_view> kQuestionTypeNames[] = {
    {QuestionType::What, "what"},
    {QuestionType::Who, "who"},
    {QuestionType::Where, "where"},
    {QuestionType::When, "when"},
    {QuestionType::Count, "count"},
    {QuestionType::Comparison, "comparison"},
    {QuestionType::SelectAmong, "select_among"},
    {QuestionType::Verify, "verify"},
    {QuestionType::How, "how"},
    {QuestionType::Why, "why"},
    {QuestionType::None, "none"},
};

}  // namespace

std::string_view question_type_name(QuestionType t) {
  for (const auto& [type, name] : kQuestionTypeNames)
    if (type == t) return name;
  return "none";
}

QuestionType parse_question_type(std::string_view name) {
  for (const auto& [type, n] : kQuestionTypeNames)
    if (n == name) return type;
  throw Error(ErrorCode::ParseError, "unknown question_type '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// UTF-8 and tokenization

std::vector<char32_t> decode_utf8(std::string_view text) {
  std::vector<char32_t> out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    int len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool ok = len > 0 && i + len <= text.size();
    for (int k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) ok = false;
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      // Malformed byte: keep it as a Latin-1 codepoint so nothing is lost.
      out.push_back(b0);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

std::string encode_utf8(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return out;
}

bool is_cjk(char32_t cp) {
  return (cp >= 0x2E80 && cp <= 0x2FDF)      // radicals
         || (cp >= 0x3000 && cp <= 0x303F)   // CJK symbols and punctuation
         || (cp >= 0x3040 && cp <= 0x30FF)   // kana
         || (cp >= 0x3400 && cp <= 0x4DBF)   // extension A
         || (cp >= 0x4E00 && cp <= 0x9FFF)   // unified ideographs
         || (cp >= 0xAC00 && cp <= 0xD7AF)   // hangul syllables
         || (cp >= 0xF900 && cp <= 0xFAFF)   // compatibility ideographs
         || (cp >= 0xFF00 && cp <= 0xFFEF)   // full-width forms
         || (cp >= 0x20000 && cp <= 0x2FA1F);
}

namespace {

bool is_space(char32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\v' || cp == '\f' ||
         cp == 0x00A0 || cp == 0x3000;
}

}  // namespace

TokenSequence tokenize(std::string_view text, TokenScheme scheme) {
  TokenSequence seq;
  std::string run;
  auto flush = [&] {
    if (!run.empty()) {
      seq.tokens.push_back(std::move(run));
      run.clear();
    }
  };
  for (char32_t cp : decode_utf8(text)) {
    if (is_space(cp)) {
      flush();
    } else if (scheme == TokenScheme::CharCJKWordLatin && is_cjk(cp)) {
      flush();
      seq.tokens.push_back(encode_utf8(cp));
    } else {
      run += encode_utf8(cp);
    }
  }
  flush();
  return seq;
}

// ---------------------------------------------------------------------------
// Dialogue types

Utterance::Utterance(Speaker speaker, std::string text)
    : speaker_(speaker), text_(std::move(text)) {
  if (trim(text_).empty()) throw Error(ErrorCode::InvalidArgument, "utterance text is blank");
}

DialogueHistory::DialogueHistory(std::vector<Utterance> utterances) {
  utterances_.reserve(utterances.size());
  for (auto& u : utterances) append(std::move(u));
}

DialogueHistory DialogueHistory::from_texts(const std::vector<std::string>& texts) {
  DialogueHistory h;
  for (std::size_t i = 0; i < texts.size(); ++i)
    h.append(Utterance(i % 2 == 0 ? Speaker::User : Speaker::System, texts[i]));
  return h;
}

void DialogueHistory::append(Utterance u) {
  const Speaker expected = utterances_.size() % 2 == 0 ? Speaker::User : Speaker::System;
  if (u.speaker() != expected) {
    throw Error(ErrorCode::InvalidHistory,
                "utterance " + std::to_string(utterances_.size() + 1) + " must be spoken by " +
                    std::string(speaker_name(expected)));
  }
  utterances_.push_back(std::move(u));
}

DialogueHistory DialogueHistory::extended(Utterance response, Utterance next_user) const {
  DialogueHistory h = *this;
  h.append(std::move(response));
  h.append(std::move(next_user));
  return h;
}

DialogueHistory DialogueHistory::without_oldest(std::size_t count) const {
  if (count % 2 != 0) throw Error(ErrorCode::InvalidArgument, "can only drop complete pairs");
  DialogueHistory h;
  count = std::min(count, utterances_.size());
  h.utterances_.assign(utterances_.begin() + static_cast<std::ptrdiff_t>(count), utterances_.end());
  return h;
}

std::vector<std::string> DialogueHistory::texts() const {
  std::vector<std::string> out;
  out.reserve(utterances_.size());
  for (const auto& u : utterances_) out.push_back(u.text());
  return out;
}

bool DialogueHistory::ends_with_user() const noexcept {
  return !utterances_.empty() && utterances_.back().speaker() == Speaker::User;
}

void KnowledgeSnippet::validate() const {
  if (label && *label != 0 && *label != 1)
    throw Error(ErrorCode::InvalidArgument, "knowledge label must be 0 or 1");
  if (classifier_score && !(*classifier_score >= 0.0 && *classifier_score <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "classifier score must lie in [0,1]");
}

std::vector<std::string> KnowledgePool::texts() const {
  std::vector<std::string> out;
  out.reserve(snippets.size());
  for (const auto& s : snippets) out.push_back(s.text);
  return out;
}

WebQuery::WebQuery(std::string text) : text_(std::move(text)) {
  if (trim(text_).empty()) throw Error(ErrorCode::InvalidArgument, "web query is blank");
}

}  // namespace racetrack
