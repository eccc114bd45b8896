#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "racetrack/core.hpp"

namespace racetrack {

// Fixed template pieces. Utterances and snippets are joined with ", " and a
// segment ends with ". ".
inline constexpr std::string_view kDialogueLabel = "对话：";
inline constexpr std::string_view kBackgroundLabel = "背景：";
inline constexpr std::string_view kSearchCue = "此时应该去检索";
inline constexpr std::string_view kNeedKnowledgeCue = "此时是否需要检索";
inline constexpr std::string_view kMaskToken = "[sMask]";
inline constexpr std::string_view kItemSeparator = ", ";
inline constexpr std::string_view kSegmentTerminator = ". ";

inline constexpr std::size_t kDefaultTokenBudget = 512;

enum class PromptKind {
  Query,              // P_q
  Response,           // P_r
  KnowledgeResponse,  // P_kr
  NeedKnowledge,      // pre-classifier verdict prompt
};

std::string_view prompt_kind_name(PromptKind kind);

struct PromptTemplate {
  PromptKind kind;
  std::string rendered;
};

/// Token count used for budget checks (CharCJKWordLatin tokens).
std::size_t prompt_token_count(std::string_view rendered);

// All builders require a non-empty history ending with a User utterance
// (EmptyHistory / InvalidHistory otherwise). When the rendered prompt exceeds
// `token_budget`, the oldest user/system pairs are dropped until it fits or
// only the final user utterance remains. A budget of 0 disables the check.

/// "对话：U1, S1, ..., Ut. 此时应该去检索 [sMask]"
PromptTemplate build_query_prompt(const DialogueHistory& history,
                                  std::size_t token_budget = kDefaultTokenBudget);

/// "对话：U1, S1, ..., Ut, [sMask]"
PromptTemplate build_response_prompt(const DialogueHistory& history,
                                     std::size_t token_budget = kDefaultTokenBudget);

/// "背景：k1, ..., km. 对话：U1, S1, ..., Ut, [sMask]"
PromptTemplate build_knowledge_prompt(const KnowledgePool& pool, const DialogueHistory& history,
                                      std::size_t token_budget = kDefaultTokenBudget);

/// "对话：U1, S1, ..., Ut. 此时是否需要检索 [sMask]"
PromptTemplate build_need_knowledge_prompt(const DialogueHistory& history,
                                           std::size_t token_budget = kDefaultTokenBudget);

/// The history a builder would actually render under `token_budget`.
DialogueHistory fit_history_to_budget(const DialogueHistory& history, std::size_t token_budget,
                                      const std::vector<std::string>& background = {});

struct ParsedKnowledgePrompt {
  std::vector<std::string> snippets;
  std::vector<std::string> utterances;
};

/// Splits a rendered knowledge prompt back into snippet and utterance texts.
/// Returns nullopt if `rendered` is not a knowledge prompt. Exact only for
/// texts that do not contain the separators themselves.
std::optional<ParsedKnowledgePrompt> parse_knowledge_prompt(std::string_view rendered);

/// Which template produced `rendered`, judged from its fixed pieces.
std::optional<PromptKind> classify_prompt(std::string_view rendered);

}  // namespace racetrack
